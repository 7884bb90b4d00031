#pragma once

#include <cstdint>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "recourse/embedded_datasets.hpp"
#include "recourse/errors.hpp"
#include "recourse/predictors.hpp"
#include "recourse/random.hpp"
#include "recourse/recourse_search.hpp"
#include "recourse/scm.hpp"
#include "recourse/scm_io.hpp"

namespace recourse {

class unknown_dataset_error : public recourse_error {
public:
    using recourse_error::recourse_error;
};

struct deployed_predictor_spec {
    predictor_kind kind = predictor_kind::scm_oracle;
    double l2_penalty = 1.0;
    std::size_t train_size = 2000;
};

struct dataset_spec {
    std::string name;
    std::string description;
    std::shared_ptr<const scm> model;
    double threshold = 0.5;
    deployed_predictor_spec predictor;
    /// Population and generations used for the published experiments.
    optimizer_config paper_optimizer;
    nlohmann::json document;
};

inline dataset_spec dataset_from_json(const nlohmann::json& doc) {
    dataset_spec d;
    d.name = doc.value("name", std::string{});
    d.description = doc.value("description", std::string{});
    d.model = std::make_shared<const scm>(scm_from_json(doc));
    d.threshold = doc.value("threshold", 0.5);
    if (doc.contains("predictor")) {
        const auto& p = doc.at("predictor");
        const std::string kind = p.value("kind", std::string("scm_oracle"));
        if (kind == "logistic") {
            d.predictor.kind = predictor_kind::logistic_regression;
        } else if (kind != "scm_oracle") {
            throw invalid_model_error("dataset '" + d.name + "': unknown predictor kind '" + kind + "'");
        }
        d.predictor.l2_penalty = p.value("l2_penalty", 1.0);
        d.predictor.train_size = p.value("train_size", std::size_t{2000});
    }
    if (doc.contains("paper_optimizer")) {
        d.paper_optimizer.population = doc.at("paper_optimizer").value("population", d.paper_optimizer.population);
        d.paper_optimizer.generations = doc.at("paper_optimizer").value("generations", d.paper_optimizer.generations);
    }
    for (const auto& s : d.model->specs()) {
        if (!(s.cost_weight > 0.0)) {
            throw invalid_model_error("dataset '" + d.name + "': cost weight of '" + s.id + "' must be positive");
        }
    }
    d.document = doc;
    return d;
}

/// Names of the bundled datasets, in listing order.
inline std::vector<std::string> dataset_names() {
    std::vector<std::string> out;
    for (const auto& [name, text] : embedded::datasets) {
        out.emplace_back(name);
    }
    return out;
}

inline dataset_spec load_dataset(std::string_view name) {
    for (const auto& [n, text] : embedded::datasets) {
        if (n == name) {
            return dataset_from_json(nlohmann::json::parse(text));
        }
    }
    std::string known;
    for (const auto& n : dataset_names()) {
        known += (known.empty() ? "" : ", ") + n;
    }
    throw unknown_dataset_error("unknown dataset '" + std::string(name) + "' (known: " + known + ")");
}

inline dataset_spec load_dataset_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw config_error("cannot read dataset file '" + path + "'");
    }
    return dataset_from_json(nlohmann::json::parse(in));
}

/// The predictor a dataset deploys: the exact observational predictor, or
/// a logistic model fit on a fresh observational sample.
inline std::shared_ptr<const predictor> make_deployed_predictor(const dataset_spec& d, std::uint64_t seed) {
    if (d.predictor.kind == predictor_kind::scm_oracle) {
        return std::make_shared<scm_oracle_predictor>(d.model, d.threshold);
    }
    const auto train = sample_observational(*d.model, d.predictor.train_size, seed);
    logistic_options opts;
    opts.l2_penalty = d.predictor.l2_penalty;
    return std::make_shared<logistic_predictor>(fit_logistic(*d.model, train, opts), d.threshold);
}

/// Human-readable table of the structural equations of a dataset.
inline std::string equation_audit(const dataset_spec& d) {
    std::ostringstream out;
    const scm& m = *d.model;
    out << d.name << " (target " << m.target_id() << ")\n";
    for (std::size_t j : m.topological_order()) {
        const node_spec& s = m.spec(j);
        out << "  " << s.id << " := ";
        std::ostringstream link;
        link << s.link.intercept;
        for (const auto& t : s.link.terms) {
            link << (t.coefficient < 0 ? " - " : " + ") << std::abs(t.coefficient);
            for (const auto& f : t.factors) {
                link << "*" << f;
            }
        }
        const std::string l = s.link.transform == link_transform::sigmoid ? "sigmoid(" + link.str() + ")" : link.str();
        switch (s.kind) {
        case equation_kind::exogenous: out << "U"; break;
        case equation_kind::additive: out << l << " + U" << (s.decimals >= 0 ? " (rounded)" : ""); break;
        case equation_kind::sigmoid_bernoulli: out << "[U <= sigmoid(" << l << ")]"; break;
        case equation_kind::xor_additive: out << "(" << l << " + U) mod 2"; break;
        }
        out << ";  U ~ " << detail::noise_to_json(s.noise).dump();
        if (j != m.target()) {
            out << ";  cost " << s.cost_weight << (s.actionable ? "" : " (not actionable)");
        }
        out << "\n";
    }
    return out.str();
}

} // namespace recourse

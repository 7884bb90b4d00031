#pragma once

#include <cstdlib>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "recourse/errors.hpp"
#include "recourse/scm.hpp"

namespace recourse {

namespace detail {

/// Numbers may be written as JSON numbers or as "a/b" fractions.
inline double read_number(const nlohmann::json& j, const std::string& what) {
    if (j.is_number()) {
        return j.get<double>();
    }
    if (j.is_string()) {
        const std::string s = j.get<std::string>();
        const auto slash = s.find('/');
        try {
            if (slash == std::string::npos) {
                return std::stod(s);
            }
            const double num = std::stod(s.substr(0, slash));
            const double den = std::stod(s.substr(slash + 1));
            if (den == 0.0) {
                throw invalid_model_error(what + ": division by zero");
            }
            return num / den;
        } catch (const std::logic_error&) {
            throw invalid_model_error(what + ": not a number: '" + s + "'");
        }
    }
    throw invalid_model_error(what + ": expected a number");
}

inline double number_or(const nlohmann::json& j, const char* key, double fallback, const std::string& what) {
    return j.contains(key) ? read_number(j.at(key), what + "." + key) : fallback;
}

inline const nlohmann::json& required(const nlohmann::json& j, const char* key, const std::string& what) {
    if (!j.is_object() || !j.contains(key)) {
        throw invalid_model_error(what + ": missing '" + key + "'");
    }
    return j.at(key);
}

inline noise_distribution noise_from_json(const nlohmann::json& j, const std::string& what) {
    const std::string family = required(j, "family", what).get<std::string>();
    if (family == "normal") {
        return noise_distribution::normal(number_or(j, "mean", 0.0, what), number_or(j, "sd", 1.0, what));
    }
    if (family == "uniform") {
        return noise_distribution::uniform();
    }
    if (family == "bernoulli") {
        return noise_distribution::bernoulli(read_number(required(j, "p", what), what + ".p"));
    }
    if (family == "categorical") {
        std::vector<double> probs;
        for (const auto& p : required(j, "probs", what)) {
            probs.push_back(read_number(p, what + ".probs"));
        }
        return noise_distribution::categorical(std::move(probs));
    }
    if (family == "gamma" || family == "gamma_poisson") {
        const double shape = read_number(required(j, "shape", what), what + ".shape");
        const double rate = read_number(required(j, "rate", what), what + ".rate");
        return family == "gamma" ? noise_distribution::gamma(shape, rate)
                                 : noise_distribution::gamma_poisson(shape, rate);
    }
    throw invalid_model_error(what + ": unknown noise family '" + family + "'");
}

inline nlohmann::json noise_to_json(const noise_distribution& n) {
    switch (n.family) {
    case noise_family::normal: return {{"family", "normal"}, {"mean", n.first}, {"sd", n.second}};
    case noise_family::uniform01: return {{"family", "uniform"}};
    case noise_family::bernoulli: return {{"family", "bernoulli"}, {"p", n.first}};
    case noise_family::categorical: return {{"family", "categorical"}, {"probs", n.probs}};
    case noise_family::gamma: return {{"family", "gamma"}, {"shape", n.first}, {"rate", n.second}};
    case noise_family::gamma_poisson: return {{"family", "gamma_poisson"}, {"shape", n.first}, {"rate", n.second}};
    }
    return {};
}

inline equation_kind kind_from_string(const std::string& s, const std::string& what) {
    if (s == "exogenous") return equation_kind::exogenous;
    if (s == "additive") return equation_kind::additive;
    if (s == "sigmoid_bernoulli") return equation_kind::sigmoid_bernoulli;
    if (s == "xor_additive") return equation_kind::xor_additive;
    throw invalid_model_error(what + ": unknown equation kind '" + s + "'");
}

inline const char* to_string(equation_kind k) {
    switch (k) {
    case equation_kind::exogenous: return "exogenous";
    case equation_kind::additive: return "additive";
    case equation_kind::sigmoid_bernoulli: return "sigmoid_bernoulli";
    case equation_kind::xor_additive: return "xor_additive";
    }
    return "";
}

inline value_domain domain_from_string(const std::string& s, const std::string& what) {
    if (s == "continuous") return value_domain::continuous;
    if (s == "integer") return value_domain::integer;
    if (s == "binary") return value_domain::binary;
    if (s == "categorical") return value_domain::categorical;
    throw invalid_model_error(what + ": unknown value domain '" + s + "'");
}

inline const char* to_string(value_domain d) {
    switch (d) {
    case value_domain::continuous: return "continuous";
    case value_domain::integer: return "integer";
    case value_domain::binary: return "binary";
    case value_domain::categorical: return "categorical";
    }
    return "";
}

} // namespace detail

/// Reads the model part of a dataset document: {"target": id, "nodes": [...]}.
inline scm scm_from_json(const nlohmann::json& doc) {
    const std::string target = detail::required(doc, "target", "model").get<std::string>();
    std::vector<node_spec> nodes;
    for (const auto& jn : detail::required(doc, "nodes", "model")) {
        node_spec s;
        s.id = detail::required(jn, "id", "node").get<std::string>();
        const std::string what = "node '" + s.id + "'";
        if (jn.contains("parents")) {
            s.parents = jn.at("parents").get<std::vector<std::string>>();
        }
        s.kind = detail::kind_from_string(jn.value("kind", std::string("exogenous")), what);
        if (jn.contains("link")) {
            const auto& jl = jn.at("link");
            s.link.intercept = detail::number_or(jl, "intercept", 0.0, what + ".link");
            if (jl.value("transform", std::string("identity")) == "sigmoid") {
                s.link.transform = link_transform::sigmoid;
            }
            for (const auto& jt : jl.value("terms", nlohmann::json::array())) {
                link_term t;
                t.coefficient = detail::read_number(detail::required(jt, "coef", what + ".link"), what + ".coef");
                t.factors = detail::required(jt, "factors", what + ".link").get<std::vector<std::string>>();
                s.link.terms.push_back(std::move(t));
            }
        }
        s.noise = detail::noise_from_json(detail::required(jn, "noise", what), what + ".noise");
        s.domain = detail::domain_from_string(jn.value("domain", std::string("continuous")), what);
        s.categories = jn.value("categories", std::size_t{0});
        s.decimals = jn.value("decimals", -1);
        s.cost_weight = detail::number_or(jn, "cost", 1.0, what);
        s.actionable = jn.value("actionable", false);
        nodes.push_back(std::move(s));
    }
    return scm(std::move(nodes), target);
}

inline nlohmann::json scm_to_json(const scm& model) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& s : model.specs()) {
        nlohmann::json jn;
        jn["id"] = s.id;
        if (!s.parents.empty()) {
            jn["parents"] = s.parents;
        }
        jn["kind"] = detail::to_string(s.kind);
        if (s.kind != equation_kind::exogenous) {
            nlohmann::json terms = nlohmann::json::array();
            for (const auto& t : s.link.terms) {
                terms.push_back({{"coef", t.coefficient}, {"factors", t.factors}});
            }
            jn["link"] = {{"intercept", s.link.intercept},
                          {"terms", terms},
                          {"transform", s.link.transform == link_transform::sigmoid ? "sigmoid" : "identity"}};
        }
        jn["noise"] = detail::noise_to_json(s.noise);
        jn["domain"] = detail::to_string(s.domain);
        if (s.domain == value_domain::categorical) {
            jn["categories"] = s.categories;
        }
        if (s.decimals >= 0) {
            jn["decimals"] = s.decimals;
        }
        jn["cost"] = s.cost_weight;
        jn["actionable"] = s.actionable;
        nodes.push_back(std::move(jn));
    }
    return {{"target", model.target_id()}, {"nodes", nodes}};
}

/// Parent-to-child pairs in declaration order of the children.
inline std::vector<std::pair<std::string, std::string>> edges(const scm& model) {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& s : model.specs()) {
        for (const auto& p : s.parents) {
            out.emplace_back(p, s.id);
        }
    }
    return out;
}

} // namespace recourse

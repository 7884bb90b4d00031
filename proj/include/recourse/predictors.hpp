#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "recourse/abduction.hpp"
#include "recourse/predictor.hpp"
#include "recourse/random.hpp"
#include "recourse/scm.hpp"

namespace recourse {

/// Exact observational predictor h*(x) = P(Y = 1 | x) derived from the model.
class scm_oracle_predictor final : public predictor {
public:
    explicit scm_oracle_predictor(std::shared_ptr<const scm> model, double threshold = 0.5)
        : predictor(threshold), model_(std::move(model)) {}

    [[nodiscard]] double score(std::span<const double> x) const override { return scm_oracle_score(*model_, x); }
    [[nodiscard]] std::optional<double> try_score(std::span<const double> x) const override {
        return try_scm_oracle_score(*model_, x);
    }
    [[nodiscard]] predictor_kind kind() const noexcept override { return predictor_kind::scm_oracle; }
    [[nodiscard]] const scm& model() const noexcept { return *model_; }

private:
    std::shared_ptr<const scm> model_;
};

struct logistic_model {
    std::vector<std::string> features;
    std::vector<std::size_t> feature_nodes;
    std::vector<double> coefficients;
    double intercept = 0.0;
    double l2_penalty = 0.0;
    double training_loss = 0.0;
    double gradient_norm = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
    std::vector<double> loss_history;

    [[nodiscard]] double linear(std::span<const double> x) const {
        double z = intercept;
        for (std::size_t k = 0; k < coefficients.size(); ++k) {
            z += coefficients[k] * x[feature_nodes[k]];
        }
        return z;
    }
};

struct logistic_options {
    double l2_penalty = 0.0; // on the summed log-loss; the intercept is not penalized
    std::size_t max_iterations = 100;
    double tolerance = 1e-6; // Euclidean norm of the gradient
};

namespace detail {

inline double log1p_exp(double z) noexcept { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

} // namespace detail

/// Penalized maximum likelihood by damped Newton iterations. Data that are
/// separable (or single-class) never converge; the fit stops at the
/// iteration cap with `converged == false`.
inline logistic_model fit_logistic(const scm& model, std::span<const row> rows, const logistic_options& opts = {}) {
    if (rows.empty()) {
        throw std::invalid_argument("cannot fit a logistic model without data");
    }
    logistic_model out;
    out.l2_penalty = opts.l2_penalty;
    out.feature_nodes.assign(model.covariates().begin(), model.covariates().end());
    for (std::size_t j : out.feature_nodes) {
        out.features.push_back(model.id(j));
    }
    const std::size_t d = out.feature_nodes.size();
    const std::size_t n = rows.size();
    const std::size_t y = model.target();

    Eigen::MatrixXd X(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d + 1));
    Eigen::VectorXd labels(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        for (std::size_t k = 0; k < d; ++k) {
            X(ii, static_cast<Eigen::Index>(k)) = rows[i][out.feature_nodes[k]];
        }
        X(ii, static_cast<Eigen::Index>(d)) = 1.0;
        labels(ii) = rows[i][y];
    }
    // One class only: the unpenalized optimum sits at infinity, however small the gradient gets.
    const bool single_class = opts.l2_penalty == 0.0 && labels.minCoeff() == labels.maxCoeff();
    Eigen::VectorXd penalty = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(d + 1), opts.l2_penalty);
    penalty(static_cast<Eigen::Index>(d)) = 0.0;

    auto loss_at = [&](const Eigen::VectorXd& beta) {
        const Eigen::VectorXd z = X * beta;
        double loss = 0.0;
        for (Eigen::Index i = 0; i < z.size(); ++i) {
            loss += detail::log1p_exp(z(i)) - labels(i) * z(i);
        }
        return loss + 0.5 * (penalty.array() * beta.array().square()).sum();
    };

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d + 1));
    double loss = loss_at(beta);
    out.loss_history.push_back(loss);
    for (out.iterations = 0; out.iterations < opts.max_iterations; ++out.iterations) {
        const Eigen::VectorXd z = X * beta;
        Eigen::VectorXd p(z.size());
        Eigen::VectorXd w(z.size());
        for (Eigen::Index i = 0; i < z.size(); ++i) {
            p(i) = sigmoid(z(i));
            w(i) = p(i) * (1.0 - p(i));
        }
        const Eigen::VectorXd grad = X.transpose() * (p - labels) + penalty.cwiseProduct(beta);
        out.gradient_norm = grad.norm();
        if (out.gradient_norm <= opts.tolerance && !single_class) {
            out.converged = true;
            break;
        }
        Eigen::MatrixXd hessian = X.transpose() * w.asDiagonal() * X;
        hessian.diagonal() += penalty;
        hessian.diagonal().array() += 1e-10;
        Eigen::VectorXd step = hessian.ldlt().solve(grad);
        if (!step.allFinite()) {
            step = grad;
        }
        double scale = 1.0;
        Eigen::VectorXd candidate = beta - step;
        double candidate_loss = loss_at(candidate);
        while (!(candidate_loss <= loss) && scale > 1e-10) {
            scale *= 0.5;
            candidate = beta - scale * step;
            candidate_loss = loss_at(candidate);
        }
        if (!(candidate_loss <= loss)) {
            break; // no descent direction left at floating-point resolution
        }
        beta = candidate;
        loss = candidate_loss;
        out.loss_history.push_back(loss);
    }
    out.coefficients.assign(beta.data(), beta.data() + d);
    out.intercept = beta(static_cast<Eigen::Index>(d));
    out.training_loss = loss;
    return out;
}

class logistic_predictor final : public predictor {
public:
    explicit logistic_predictor(logistic_model m, double threshold = 0.5) : predictor(threshold), model_(std::move(m)) {}

    [[nodiscard]] double score(std::span<const double> x) const override { return sigmoid(model_.linear(x)); }
    [[nodiscard]] predictor_kind kind() const noexcept override { return predictor_kind::logistic_regression; }
    [[nodiscard]] const logistic_model& model() const noexcept { return model_; }

private:
    logistic_model model_;
};

inline double accuracy(const predictor& h, const scm& model, std::span<const row> rows) {
    if (rows.empty()) {
        return 0.0;
    }
    std::size_t correct = 0;
    for (const row& r : rows) {
        const bool yhat = accepted(h, r, h.threshold());
        if (yhat == (r[model.target()] == 1.0)) {
            ++correct;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(rows.size());
}

struct refit_family_result {
    std::vector<std::shared_ptr<const logistic_predictor>> models;
    std::vector<double> test_accuracy;
};

/// k logistic fits, each on its own fresh observational sample; accuracies
/// on one shared held-out sample.
inline refit_family_result refit_family(const scm& model, std::size_t k, std::size_t n_per_fit, std::uint64_t seed,
                                        const logistic_options& opts = {}, double threshold = 0.5,
                                        std::size_t test_size = 5000) {
    if (k == 0) {
        throw std::invalid_argument("refit family needs at least one model");
    }
    refit_family_result out;
    const auto test = sample_observational(model, test_size, derive_seed(seed, 0xACCU));
    for (std::size_t i = 0; i < k; ++i) {
        const auto train = sample_observational(model, n_per_fit, derive_seed(seed, i + 1));
        auto h = std::make_shared<const logistic_predictor>(fit_logistic(model, train, opts), threshold);
        out.test_accuracy.push_back(accuracy(*h, model, test));
        out.models.push_back(std::move(h));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Model dump/load

inline nlohmann::json predictor_to_json(const predictor& h, const std::string& dataset = {}) {
    nlohmann::json j;
    j["kind"] = std::string(to_string(h.kind()));
    j["threshold"] = h.threshold();
    if (const auto* lr = dynamic_cast<const logistic_predictor*>(&h)) {
        j["features"] = lr->model().features;
        j["coefficients"] = lr->model().coefficients;
        j["intercept"] = lr->model().intercept;
        j["l2_penalty"] = lr->model().l2_penalty;
    } else if (h.kind() == predictor_kind::scm_oracle) {
        j["dataset"] = dataset;
    } else {
        throw std::invalid_argument("only logistic and scm-oracle predictors can be saved");
    }
    return j;
}

/// Restores a predictor saved by `predictor_to_json`; an scm-oracle entry is
/// bound to `model`.
inline std::shared_ptr<const predictor> predictor_from_json(const nlohmann::json& j, std::shared_ptr<const scm> model) {
    const std::string kind = j.at("kind").get<std::string>();
    const double threshold = j.value("threshold", 0.5);
    if (kind == "scm_oracle") {
        return std::make_shared<scm_oracle_predictor>(std::move(model), threshold);
    }
    if (kind != "logistic") {
        throw std::invalid_argument("unknown predictor kind '" + kind + "'");
    }
    logistic_model m;
    m.features = j.at("features").get<std::vector<std::string>>();
    m.coefficients = j.at("coefficients").get<std::vector<double>>();
    m.intercept = j.at("intercept").get<double>();
    m.l2_penalty = j.value("l2_penalty", 0.0);
    if (m.features.size() != m.coefficients.size()) {
        throw std::invalid_argument("logistic model has mismatched features and coefficients");
    }
    for (const auto& f : m.features) {
        m.feature_nodes.push_back(model->index_of(f));
    }
    m.converged = true;
    return std::make_shared<logistic_predictor>(std::move(m), threshold);
}

} // namespace recourse

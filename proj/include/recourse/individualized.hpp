#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "recourse/abduction.hpp"
#include "recourse/predictor.hpp"
#include "recourse/random.hpp"
#include "recourse/scm.hpp"

namespace recourse {

/// Draws from a post-recourse distribution, with the action and pre-recourse
/// state that produced them.
struct posterior_sample_set {
    std::vector<row> rows;
    action act;
    row x_pre;
};

inline double bernoulli_standard_error(double p, std::size_t n) {
    return n == 0 ? 0.0 : std::sqrt(std::max(0.0, p * (1.0 - p)) / static_cast<double>(n));
}

namespace detail {

inline void require_covariates(const scm& model, std::span<const double> x) {
    if (x.size() != model.size()) {
        throw std::invalid_argument("observation must have one slot per node");
    }
    for (std::size_t j : model.covariates()) {
        if (std::isnan(x[j])) {
            throw std::invalid_argument("covariate '" + model.id(j) + "' is missing");
        }
    }
}

inline void require_probability(double p, const char* what) {
    if (!(p >= 0.0 && p <= 1.0)) {
        throw std::invalid_argument(std::string(what) + " must lie in [0, 1]");
    }
}

inline void require_threshold(double t) {
    if (!(t >= 0.0 && t < 1.0)) {
        throw std::invalid_argument("decision threshold must lie in [0, 1)");
    }
}

} // namespace detail

/// Mixture abduction p(u | x^pre) = sum over y' of P(y' | x^pre) p(u | x^pre, y').
/// `weight` is P(Y = 1 | x^pre). Branches with zero weight are skipped.
class mixture_posterior {
public:
    mixture_posterior(const scm& model, std::span<const double> x_pre, double weight) : weight_(weight) {
        detail::require_covariates(model, x_pre);
        detail::require_probability(weight, "mixture weight");
        row values(x_pre.begin(), x_pre.end());
        for (int y = 0; y < 2; ++y) {
            const double w = y == 1 ? weight : 1.0 - weight;
            if (!(w > 0.0)) {
                continue;
            }
            values[model.target()] = y;
            auto& branch = branches_[static_cast<std::size_t>(y)];
            branch.reserve(model.size());
            for (std::size_t j = 0; j < model.size(); ++j) {
                branch.push_back(abduct_node(model, j, values));
            }
        }
    }

    [[nodiscard]] double weight() const noexcept { return weight_; }
    [[nodiscard]] double branch_weight(int y) const noexcept { return y == 1 ? weight_ : 1.0 - weight_; }
    [[nodiscard]] bool has_branch(int y) const noexcept { return !branches_[static_cast<std::size_t>(y)].empty(); }
    [[nodiscard]] const std::vector<abducted_noise>& branch(int y) const { return branches_.at(static_cast<std::size_t>(y)); }

    /// One joint noise draw: y' from the weights, then every u_j from its
    /// branch posterior. The drawn y' is stored in `branch_out` when given.
    noise_vector sample(rng_engine& rng, int* branch_out = nullptr) const {
        const int y = uniform01(rng) < weight_ ? 1 : 0;
        if (branch_out != nullptr) {
            *branch_out = y;
        }
        const auto& b = branch(y);
        noise_vector u(b.size());
        for (std::size_t j = 0; j < b.size(); ++j) {
            u[j] = b[j].sample(rng);
        }
        return u;
    }

private:
    double weight_;
    std::array<std::vector<abducted_noise>, 2> branches_;
};

/// Sampler for the individualized post-recourse distribution of one
/// individual. The M abducted noise vectors are drawn once, so every action
/// is evaluated against the same draws.
class individualized_sampler {
public:
    individualized_sampler(const scm& model, std::span<const double> x_pre, double weight, std::size_t samples,
                           std::uint64_t seed)
        : model_(&model), x_pre_(x_pre.begin(), x_pre.end()) {
        if (samples == 0) {
            throw std::invalid_argument("sample size must be at least 1");
        }
        const mixture_posterior posterior(model, x_pre, weight);
        rng_engine rng(seed);
        noise_.reserve(samples);
        branches_.reserve(samples);
        for (std::size_t m = 0; m < samples; ++m) {
            int y = 0;
            noise_.push_back(posterior.sample(rng, &y));
            branches_.push_back(static_cast<double>(y));
        }
    }

    [[nodiscard]] std::size_t samples() const noexcept { return noise_.size(); }
    [[nodiscard]] const row& x_pre() const noexcept { return x_pre_; }
    [[nodiscard]] const scm& model() const noexcept { return *model_; }

    /// Visits each post-recourse draw. Abducted noise reproduces x^pre, so
    /// only the intervened nodes and their descendants are recomputed.
    template <class F>
    void for_each(const action& a, F&& f) const {
        model_->validate(a);
        const node_set intervened = a.targets();
        const node_set moved = model_->descendants(intervened) - intervened;
        std::vector<std::size_t> order;
        for (std::size_t j : model_->topological_order()) {
            if (moved.contains(j)) {
                order.push_back(j);
            }
        }
        const std::size_t y = model_->target();
        const bool target_moves = moved.contains(y);
        row r = x_pre_;
        for (const auto& it : a.items()) {
            r[it.node] = it.value;
        }
        for (std::size_t m = 0; m < noise_.size(); ++m) {
            if (!target_moves) {
                r[y] = branches_[m];
            }
            for (std::size_t j : order) {
                r[j] = model_->evaluate(j, r, noise_[m][j]);
            }
            f(std::as_const(r));
        }
    }

    [[nodiscard]] posterior_sample_set sample(const action& a) const {
        posterior_sample_set out{{}, a, x_pre_};
        out.rows.reserve(noise_.size());
        for_each(a, [&](const row& r) { out.rows.push_back(r); });
        return out;
    }

    /// Individualized improvement confidence: mean of y^post.
    [[nodiscard]] double gamma(const action& a) const {
        compensated_sum s;
        const std::size_t y = model_->target();
        for_each(a, [&](const row& r) { s.add(r[y]); });
        return s.value() / static_cast<double>(noise_.size());
    }

    /// Share of post-recourse draws accepted by h at threshold t.
    [[nodiscard]] double eta(const action& a, const predictor& h, double t) const {
        detail::require_threshold(t);
        acceptance_counter hits(h, t, model_->target());
        for_each(a, [&](const row& r) { hits.add(r); });
        return static_cast<double>(hits.hits()) / static_cast<double>(noise_.size());
    }

private:
    const scm* model_;
    row x_pre_;
    std::vector<noise_vector> noise_;
    std::vector<double> branches_;
};

inline double mixture_weight(const predictor& h, std::span<const double> x_pre) {
    const double w = h.score(x_pre);
    detail::require_probability(w, "predictor score");
    return w;
}

/// Alg. 1 draws with mixture weights h(x^pre).
inline posterior_sample_set sample_individualized_posterior(const scm& model, const predictor& h,
                                                            std::span<const double> x_pre, const action& a,
                                                            std::size_t samples, std::uint64_t seed) {
    detail::require_covariates(model, x_pre);
    return individualized_sampler(model, x_pre, mixture_weight(h, x_pre), samples, seed).sample(a);
}

inline double gamma_ind(const scm& model, const predictor& h, std::span<const double> x_pre, const action& a,
                        std::size_t samples, std::uint64_t seed) {
    detail::require_covariates(model, x_pre);
    return individualized_sampler(model, x_pre, mixture_weight(h, x_pre), samples, seed).gamma(a);
}

/// Acceptance of h at threshold t over Alg. 1 draws; mixture weights come
/// from the model's exact observational predictor.
inline double eta_ind(const scm& model, const predictor& h, double t, std::span<const double> x_pre, const action& a,
                      std::size_t samples, std::uint64_t seed) {
    detail::require_covariates(model, x_pre);
    detail::require_threshold(t);
    return individualized_sampler(model, x_pre, scm_oracle_score(model, x_pre), samples, seed).eta(a, h, t);
}

} // namespace recourse

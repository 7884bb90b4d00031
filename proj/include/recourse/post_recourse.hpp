#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <utility>

#include "recourse/abduction.hpp"
#include "recourse/errors.hpp"
#include "recourse/individualized.hpp"
#include "recourse/predictor.hpp"
#include "recourse/random.hpp"
#include "recourse/scm.hpp"

namespace recourse {

/// Lower bound on acceptance implied by improvement confidence gamma at
/// decision threshold t.
inline double acceptance_lower_bound(double gamma, double t) {
    if (!(t >= 0.0 && t < 1.0)) {
        throw std::invalid_argument("acceptance bound needs 0 <= t < 1");
    }
    detail::require_probability(gamma, "gamma");
    return std::max(0.0, (gamma - t) / (1.0 - t));
}

enum class individualized_mode { closed_form, rejection_sampling };

struct rejection_options {
    std::size_t accepted_samples = 1024;
    std::size_t proposal_budget = 1'000'000;
    double min_acceptance_rate = 1e-4;
    std::uint64_t seed = 0;
};

/// h^{*,ind}(x^post) = P(Y^post = 1 | x^post, x^pre, do(a)) for one
/// individual and action. The mixture weight defaults to h*(x^pre).
class individualized_predictor final : public predictor {
public:
    individualized_predictor(std::shared_ptr<const scm> model, row x_pre, action a, double threshold = 0.5,
                             individualized_mode mode = individualized_mode::closed_form, rejection_options rejection = {})
        : individualized_predictor(model, x_pre, std::move(a), scm_oracle_score(*model, x_pre),
                                   threshold, mode, rejection) {}

    individualized_predictor(std::shared_ptr<const scm> model, row x_pre, action a, double weight, double threshold,
                             individualized_mode mode = individualized_mode::closed_form, rejection_options rejection = {})
        : predictor(threshold),
          model_(std::move(model)),
          x_pre_(std::move(x_pre)),
          action_(std::move(a)),
          posterior_(*model_, x_pre_, weight),
          mode_(mode),
          rejection_(rejection) {
        model_->validate(action_);
        if (mode_ == individualized_mode::rejection_sampling && rejection_.accepted_samples == 0) {
            throw std::invalid_argument("rejection sampling needs at least one accepted sample");
        }
    }

    [[nodiscard]] predictor_kind kind() const noexcept override { return predictor_kind::individualized; }
    [[nodiscard]] individualized_mode mode() const noexcept { return mode_; }
    [[nodiscard]] const action& act() const noexcept { return action_; }
    [[nodiscard]] const row& x_pre() const noexcept { return x_pre_; }

    [[nodiscard]] double score(std::span<const double> x_post) const override {
        detail::require_covariates(*model_, x_post);
        for (const auto& it : action_.items()) {
            if (!values_match(x_post[it.node], it.value)) {
                throw std::invalid_argument("x_post contradicts the intervened value of '" + model_->id(it.node) + "'");
            }
        }
        return mode_ == individualized_mode::closed_form ? closed_form(x_post) : rejection(x_post);
    }

private:
    /// Ratio of posterior masses of noise values that reproduce x^post with
    /// y^post = 1 versus either outcome.
    [[nodiscard]] double closed_form(std::span<const double> x_post) const {
        const node_set intervened = action_.targets();
        const std::size_t y = model_->target();
        row values(x_post.begin(), x_post.end());
        double mass[2] = {0.0, 0.0};
        for (int branch = 0; branch < 2; ++branch) {
            if (!posterior_.has_branch(branch)) {
                continue;
            }
            const auto& noise = posterior_.branch(branch);
            for (int outcome = 0; outcome < 2; ++outcome) {
                values[y] = outcome;
                double l = posterior_.branch_weight(branch);
                for (std::size_t j : model_->topological_order()) {
                    if (intervened.contains(j)) {
                        continue;
                    }
                    l *= abducted_likelihood(*model_, j, values, noise[j]);
                    if (l == 0.0) {
                        break;
                    }
                }
                mass[outcome] += l;
            }
        }
        const double total = mass[0] + mass[1];
        if (!(total > 0.0)) {
            throw infeasible_observation_error("x_post cannot follow from x_pre under this action");
        }
        return mass[1] / total;
    }

    /// Exact-match rejection over Alg. 1 draws.
    [[nodiscard]] double rejection(std::span<const double> x_post) const {
        rng_engine rng(rejection_.seed);
        const std::size_t y = model_->target();
        const auto covariates = model_->covariates();
        row scratch(model_->size());
        std::size_t proposals = 0;
        std::size_t kept = 0;
        std::size_t favorable = 0;
        while (kept < rejection_.accepted_samples && proposals < rejection_.proposal_budget) {
            ++proposals;
            model_->forward(posterior_.sample(rng), scratch, &action_);
            const bool match = std::all_of(covariates.begin(), covariates.end(),
                                           [&](std::size_t j) { return values_match(scratch[j], x_post[j]); });
            if (match) {
                ++kept;
                favorable += scratch[y] == 1.0 ? 1 : 0;
            }
        }
        const double rate = static_cast<double>(kept) / static_cast<double>(proposals);
        if (kept == 0 || (kept < rejection_.accepted_samples && rate < rejection_.min_acceptance_rate)) {
            throw intractable_rejection_error("rejection sampling accepted too few proposals for x_post");
        }
        return static_cast<double>(favorable) / static_cast<double>(kept);
    }

    std::shared_ptr<const scm> model_;
    row x_pre_;
    action action_;
    mixture_posterior posterior_;
    individualized_mode mode_;
    rejection_options rejection_;
};

} // namespace recourse

#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "recourse/abduction.hpp"
#include "recourse/errors.hpp"
#include "recourse/individualized.hpp"
#include "recourse/predictor.hpp"
#include "recourse/random.hpp"
#include "recourse/scm.hpp"

namespace recourse {

/// Partition of the nodes induced by an action: intervened set, the
/// clamped subgroup characteristics nd(I), and the resampled descendants.
struct subpopulation_partition {
    node_set intervened;
    node_set clamped;
    node_set resampled;
};

inline subpopulation_partition partition_for(const scm& model, const action& a) {
    const node_set intervened = a.targets();
    const node_set clamped = nondescendants(model, intervened);
    node_set resampled = model.descendants(intervened) - intervened;
    return {intervened, clamped, resampled};
}

inline bool acts_on_cause(const scm& model, const action& a) {
    return !(a.targets() & model.causes_of_target()).empty();
}

/// Sampler for the subpopulation-based post-recourse distribution: the
/// subgroup nd(I) keeps its pre-recourse values, everything downstream of
/// the action is redrawn from its structural equation. Fresh noise is drawn
/// once per sampler and reused across actions.
class subpopulation_sampler {
public:
    subpopulation_sampler(const scm& model, std::span<const double> x_pre, std::size_t samples, std::uint64_t seed)
        : model_(&model), x_pre_(x_pre.begin(), x_pre.end()) {
        detail::require_covariates(model, x_pre);
        observational_ = scm_oracle_score(model, x_pre);
        if (samples == 0) {
            throw std::invalid_argument("sample size must be at least 1");
        }
        rng_engine rng(seed);
        noise_.reserve(samples);
        target_draws_.reserve(samples);
        for (std::size_t m = 0; m < samples; ++m) {
            noise_.push_back(model.sample_noise(rng));
            target_draws_.push_back(uniform01(rng));
        }
    }

    [[nodiscard]] std::size_t samples() const noexcept { return noise_.size(); }
    [[nodiscard]] const row& x_pre() const noexcept { return x_pre_; }

    /// Observational confidence h*(x^pre), the answer for actions that do not
    /// touch a cause of Y.
    [[nodiscard]] double observational_confidence() const noexcept { return observational_; }

    /// Visits each draw. When the action reaches no cause of Y, Y keeps its
    /// observational law P(Y | x^pre) and only Y's downstream is redrawn.
    template <class F>
    void for_each(const action& a, F&& f) const {
        model_->validate(a);
        const subpopulation_partition part = partition_for(*model_, a);
        const std::size_t y = model_->target();
        const bool causal = acts_on_cause(*model_, a);
        const double p_obs = causal ? 0.0 : observational_confidence();
        row r(model_->size());
        for (std::size_t m = 0; m < noise_.size(); ++m) {
            for (std::size_t j : model_->topological_order()) {
                if (part.intervened.contains(j)) {
                    r[j] = *a.value_of(j);
                } else if (part.clamped.contains(j)) {
                    r[j] = x_pre_[j];
                } else if (j == y && !causal) {
                    r[j] = target_draws_[m] < p_obs ? 1.0 : 0.0;
                } else {
                    r[j] = model_->evaluate(j, r, noise_[m][j]);
                }
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

    /// Subpopulation improvement confidence. Throws not_a_cause_error (carrying
    /// h*(x^pre)) for actions on non-causes only.
    [[nodiscard]] double gamma(const action& a) const {
        model_->validate(a);
        if (!acts_on_cause(*model_, a)) {
            throw not_a_cause_error("action does not intervene on a cause of '" + model_->target_id() + "'",
                                    observational_confidence());
        }
        compensated_sum s;
        const std::size_t y = model_->target();
        for_each(a, [&](const row& r) { s.add(r[y]); });
        return s.value() / static_cast<double>(noise_.size());
    }

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
    std::vector<double> target_draws_;
    double observational_ = 0.0;
};

inline posterior_sample_set sample_subpopulation_posterior(const scm& model, std::span<const double> x_pre,
                                                           const action& a, std::size_t samples, std::uint64_t seed) {
    model.validate(a);
    if (!acts_on_cause(model, a)) {
        throw not_a_cause_error("action does not intervene on a cause of '" + model.target_id() + "'",
                                scm_oracle_score(model, x_pre));
    }
    return subpopulation_sampler(model, x_pre, samples, seed).sample(a);
}

inline double gamma_sub(const scm& model, std::span<const double> x_pre, const action& a, std::size_t samples,
                        std::uint64_t seed) {
    return subpopulation_sampler(model, x_pre, samples, seed).gamma(a);
}

inline double eta_sub(const scm& model, const predictor& h, double t, std::span<const double> x_pre, const action& a,
                      std::size_t samples, std::uint64_t seed) {
    detail::require_threshold(t);
    return subpopulation_sampler(model, x_pre, samples, seed).eta(a, h, t);
}

} // namespace recourse

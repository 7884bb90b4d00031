#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>

#include "recourse/errors.hpp"
#include "recourse/random.hpp"
#include "recourse/scm.hpp"

namespace recourse {

/// Posterior of one exogenous variable given its node and parents:
/// a point mass for invertible equations, Uniform(lo, hi) for
/// sigmoid-bernoulli nodes.
class abducted_noise {
public:
    static abducted_noise point_mass(double u) { return abducted_noise(u, u, true); }
    static abducted_noise truncated_uniform(double lo, double hi) {
        if (!(lo >= 0.0 && lo < hi && hi <= 1.0)) {
            throw std::invalid_argument("truncated uniform needs 0 <= lo < hi <= 1");
        }
        return abducted_noise(lo, hi, false);
    }

    [[nodiscard]] bool is_point_mass() const noexcept { return point_; }
    [[nodiscard]] double lo() const noexcept { return lo_; }
    [[nodiscard]] double hi() const noexcept { return hi_; }
    [[nodiscard]] double value() const noexcept { return lo_; }

    double sample(rng_engine& rng) const {
        if (point_) {
            return lo_;
        }
        return lo_ + (hi_ - lo_) * uniform01(rng);
    }

    friend bool operator==(const abducted_noise&, const abducted_noise&) = default;

private:
    abducted_noise(double lo, double hi, bool point) : lo_(lo), hi_(hi), point_(point) {}
    double lo_;
    double hi_;
    bool point_;
};

inline bool values_match(double a, double b) noexcept {
    return std::abs(a - b) <= 1e-9 * std::max({1.0, std::abs(a), std::abs(b)});
}

namespace detail {

inline void require_observed(const scm& model, std::size_t j, std::span<const double> values) {
    if (std::isnan(values[j])) {
        throw std::invalid_argument("node '" + model.id(j) + "' is not observed");
    }
    for (std::size_t p : model.parents(j)) {
        if (std::isnan(values[p])) {
            throw std::invalid_argument("parent '" + model.id(p) + "' of '" + model.id(j) + "' is not observed");
        }
    }
}

/// Integer exogenous value consistent with x = round(g + u), or NaN.
inline double integer_residual(const scm& model, std::size_t j, double g, double x) {
    const node_spec& s = model.spec(j);
    const double r = x - g;
    const double k = std::round(r);
    const double tol = s.decimals >= 0 ? 0.5 * std::pow(10.0, -s.decimals) + 1e-9 : 1e-7 * std::max(1.0, std::abs(x));
    if (std::abs(r - k) > tol) {
        return missing_value;
    }
    if (!values_match(scm::round_to(g + k, s.decimals), x)) {
        return missing_value;
    }
    return k;
}

} // namespace detail

/// Standard abduction of u_j from an observed node and its observed parents
/// (the target included when it is a parent).
inline abducted_noise abduct_node(const scm& model, std::size_t j, std::span<const double> values) {
    detail::require_observed(model, j, values);
    const node_spec& s = model.spec(j);
    const double x = values[j];
    auto infeasible = [&]() {
        return infeasible_observation_error("observed value of '" + s.id + "' has probability zero given its parents");
    };
    switch (s.kind) {
    case equation_kind::exogenous:
        if (!(model.noise_density(j, x) > 0.0)) throw infeasible();
        return abducted_noise::point_mass(x);
    case equation_kind::additive: {
        const double g = model.link_value(j, values);
        if (s.noise.integer_valued()) {
            const double k = detail::integer_residual(model, j, g, x);
            if (std::isnan(k) || !(model.noise_density(j, k) > 0.0)) throw infeasible();
            return abducted_noise::point_mass(k);
        }
        const double u = x - g;
        if (!(model.noise_density(j, u) > 0.0)) throw infeasible();
        return abducted_noise::point_mass(u);
    }
    case equation_kind::sigmoid_bernoulli: {
        const double p = sigmoid(model.link_value(j, values));
        if (x == 1.0 && p > 0.0) return abducted_noise::truncated_uniform(0.0, p);
        if (x == 0.0 && p < 1.0) return abducted_noise::truncated_uniform(p, 1.0);
        throw infeasible();
    }
    case equation_kind::xor_additive: {
        const double r = scm::mod2(x - model.link_value(j, values));
        const double k = std::round(r);
        if (std::abs(r - k) > 1e-9 || !(model.noise_density(j, k) > 0.0)) throw infeasible();
        return abducted_noise::point_mass(k);
    }
    }
    throw infeasible();
}

namespace detail {

/// node_likelihood without the observed-value checks.
inline double node_likelihood_unchecked(const scm& model, std::size_t j, std::span<const double> values) {
    const node_spec& s = model.spec(j);
    const double x = values[j];
    switch (s.kind) {
    case equation_kind::exogenous:
        return model.noise_density(j, x);
    case equation_kind::additive: {
        const double g = model.link_value(j, values);
        if (s.noise.integer_valued()) {
            const double k = integer_residual(model, j, g, x);
            return std::isnan(k) ? 0.0 : model.noise_density(j, k);
        }
        return model.noise_density(j, x - g);
    }
    case equation_kind::sigmoid_bernoulli: {
        const double p = sigmoid(model.link_value(j, values));
        if (x == 1.0) return p;
        if (x == 0.0) return 1.0 - p;
        return 0.0;
    }
    case equation_kind::xor_additive: {
        const double r = scm::mod2(x - model.link_value(j, values));
        const double k = std::round(r);
        return std::abs(r - k) > 1e-9 ? 0.0 : model.noise_density(j, k);
    }
    }
    return 0.0;
}

} // namespace detail

/// p(x_j | x_pa(j)) from the structural equation: a density for
/// continuous noise, a probability otherwise. Zero off support.
inline double node_likelihood(const scm& model, std::size_t j, std::span<const double> values) {
    detail::require_observed(model, j, values);
    return detail::node_likelihood_unchecked(model, j, values);
}

/// Probability that node j reproduces values[j], given its parents in
/// `values` and the abducted posterior of its noise.
inline double abducted_likelihood(const scm& model, std::size_t j, std::span<const double> values,
                                  const abducted_noise& posterior) {
    const double x = values[j];
    if (posterior.is_point_mass()) {
        return values_match(model.evaluate(j, values, posterior.value()), x) ? 1.0 : 0.0;
    }
    // Only sigmoid-bernoulli nodes carry interval posteriors.
    const double p = sigmoid(model.link_value(j, values));
    const double p_one = std::clamp((p - posterior.lo()) / (posterior.hi() - posterior.lo()), 0.0, 1.0);
    if (x == 1.0) return p_one;
    if (x == 0.0) return 1.0 - p_one;
    return 0.0;
}

/// P(Y = 1 | x) by Markov factorization over the target's own equation and
/// the equations of its children.
/// h*(x), or nullopt when x has probability zero under the model.
inline std::optional<double> try_scm_oracle_score(const scm& model, std::span<const double> x) {
    const std::size_t y = model.target();
    for (std::size_t j : model.covariates()) {
        if (std::isnan(x[j])) {
            throw std::invalid_argument("covariate '" + model.id(j) + "' is missing");
        }
    }
    std::array<double, max_nodes> buffer;
    const std::span<double> values(buffer.data(), model.size());
    std::copy_n(x.begin(), model.size(), values.begin());
    double mass[2] = {0.0, 0.0};
    for (int branch = 0; branch < 2; ++branch) {
        values[y] = branch;
        // Covariates were checked above and the target is set per branch.
        double p = detail::node_likelihood_unchecked(model, y, values);
        for (std::size_t c : model.children(y)) {
            if (p == 0.0) {
                break;
            }
            p *= detail::node_likelihood_unchecked(model, c, values);
        }
        mass[branch] = p;
    }
    const double total = mass[0] + mass[1];
    if (!(total > 0.0) || !std::isfinite(total)) {
        return std::nullopt;
    }
    return mass[1] / total;
}

inline double scm_oracle_score(const scm& model, std::span<const double> x) {
    const std::optional<double> s = try_scm_oracle_score(model, x);
    if (!s) {
        throw infeasible_observation_error("observation has probability zero under the model");
    }
    return *s;
}

} // namespace recourse

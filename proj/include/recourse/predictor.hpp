#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "recourse/errors.hpp"

namespace recourse {

enum class predictor_kind { scm_oracle, logistic_regression, individualized };

inline std::string_view to_string(predictor_kind k) {
    switch (k) {
    case predictor_kind::scm_oracle: return "scm_oracle";
    case predictor_kind::logistic_regression: return "logistic";
    case predictor_kind::individualized: return "individualized";
    }
    return "unknown";
}

/// Score function h: covariates -> [0, 1] with decision f = [h >= t].
/// Inputs are full node rows; the target slot is ignored.
class predictor {
public:
    explicit predictor(double threshold = 0.5) : threshold_(threshold) {}
    virtual ~predictor() = default;

    [[nodiscard]] virtual double score(std::span<const double> x) const = 0;
    /// score(x), or nullopt where x has probability zero under the scoring model.
    [[nodiscard]] virtual std::optional<double> try_score(std::span<const double> x) const {
        try {
            return score(x);
        } catch (const infeasible_observation_error&) {
            return std::nullopt;
        }
    }
    [[nodiscard]] virtual predictor_kind kind() const noexcept = 0;

    [[nodiscard]] double threshold() const noexcept { return threshold_; }
    [[nodiscard]] bool decide(std::span<const double> x) const { return score(x) >= threshold_; }

protected:
    predictor(const predictor&) = default;
    predictor& operator=(const predictor&) = default;

private:
    double threshold_;
};

/// [h(x) >= t], where inputs that have probability zero under the scoring
/// model count as rejected.
inline bool accepted(const predictor& h, std::span<const double> x, double t) {
    const std::optional<double> s = h.try_score(x);
    return s && *s >= t;
}

/// Counts rows accepted by h at threshold t. Consecutive rows with equal
/// covariates reuse the previous decision, which skips most scoring when an
/// action leaves everything upstream of the predictor's inputs fixed.
class acceptance_counter {
public:
    acceptance_counter(const predictor& h, double t, std::size_t target) : h_(&h), t_(t), target_(target) {}

    void add(std::span<const double> x) {
        if (!repeats(x)) {
            last_.assign(x.begin(), x.end());
            decision_ = accepted(*h_, x, t_);
        }
        hits_ += decision_ ? 1 : 0;
    }

    [[nodiscard]] std::size_t hits() const noexcept { return hits_; }

private:
    [[nodiscard]] bool repeats(std::span<const double> x) const {
        if (last_.size() != x.size()) return false;
        for (std::size_t j = 0; j < x.size(); ++j) {
            if (j != target_ && last_[j] != x[j]) return false;
        }
        return true;
    }

    const predictor* h_;
    double t_;
    std::size_t target_;
    std::vector<double> last_;
    bool decision_ = false;
    std::size_t hits_ = 0;
};

} // namespace recourse

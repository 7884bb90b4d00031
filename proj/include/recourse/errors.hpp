#pragma once

#include <stdexcept>
#include <string>

namespace recourse {

class recourse_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The model description itself is inconsistent (cycle, bad parameters, unknown node).
class invalid_model_error : public recourse_error {
public:
    using recourse_error::recourse_error;
};

/// An observation has probability zero under the model, so abduction or
/// Bayes normalization is undefined.
class infeasible_observation_error : public recourse_error {
public:
    using recourse_error::recourse_error;
};

class invalid_action_error : public recourse_error {
public:
    using recourse_error::recourse_error;
};

/// The action intervenes on no ancestor of the target. The improvement
/// probability is then the observational score of the factual, which is
/// carried along so callers can report it.
class not_a_cause_error : public recourse_error {
public:
    not_a_cause_error(const std::string& what, double observational_confidence)
        : recourse_error(what), confidence_(observational_confidence) {}

    [[nodiscard]] double observational_confidence() const noexcept { return confidence_; }

private:
    double confidence_;
};

class intractable_rejection_error : public recourse_error {
public:
    using recourse_error::recourse_error;
};

class config_error : public recourse_error {
public:
    using recourse_error::recourse_error;
};

} // namespace recourse

#pragma once

#include <cmath>
#include <memory>
#include <string>

#include "recourse/datasets.hpp"
#include "recourse/random.hpp"
#include "recourse/scm.hpp"

namespace support {

inline std::shared_ptr<const recourse::scm> model(const std::string& name) {
    return recourse::load_dataset(name).model;
}

inline recourse::row covariates_of(const recourse::scm& m, recourse::row r) {
    r[m.target()] = recourse::missing_value;
    return r;
}

/// Standard error of a difference of two independent Monte Carlo means.
inline double se_diff(double p, std::size_t n1, double q, std::size_t n2) {
    return std::sqrt(p * (1 - p) / static_cast<double>(n1) + q * (1 - q) / static_cast<double>(n2));
}

inline const char* all_datasets[] = {"3var-causal", "3var-noncausal", "5var-skill", "7var-covid",
                                     "covid-admission-e1"};

} // namespace support

#include <gtest/gtest.h>

#include <numbers>
#include <random>
#include <set>

#include "e1_oracle.hpp"
#include "recourse/predictors.hpp"
#include "recourse/subpopulation.hpp"
#include "support.hpp"

using namespace recourse;

namespace {

std::set<std::string> ids(const scm& m, const node_set& s) {
    std::set<std::string> out;
    for (std::size_t j : s.members()) out.insert(m.id(j));
    return out;
}

// E[sigma(a + U)] for U ~ N(0, 1), by the trapezoid rule on [-10, 10].
double logistic_normal_mean(double a) {
    const int n = 20'000;
    const double lo = -10.0, hi = 10.0, h = (hi - lo) / n;
    double s = 0.0;
    for (int k = 0; k <= n; ++k) {
        const double u = lo + k * h;
        const double w = (k == 0 || k == n) ? 0.5 : 1.0;
        s += w * sigmoid(a + u) * std::exp(-0.5 * u * u);
    }
    return s * h / std::sqrt(2.0 * std::numbers::pi);
}

// A random action on a non-empty subset of the causes of Y, with values near x.
action random_cause_action(const scm& m, const row& x, std::mt19937_64& rng) {
    const auto causes = m.causes_of_target().members();
    std::vector<intervention> items;
    std::bernoulli_distribution pick(0.5);
    std::normal_distribution<double> shift(0.0, 1.0);
    std::uniform_int_distribution<int> step(-1, 2);
    for (std::size_t j : causes) {
        if (!pick(rng) && !(items.empty() && j == causes.back())) continue;
        double v = x[j];
        switch (m.spec(j).domain) {
        case value_domain::continuous: v = std::round(10.0 * (x[j] + shift(rng))) / 10.0; break;
        case value_domain::binary: v = 1.0 - x[j]; break;
        default: v = x[j] + step(rng); break;
        }
        if (!m.value_allowed(j, v)) v = x[j];
        items.push_back({j, v});
    }
    return action(std::move(items));
}

} // namespace

TEST(Partition, SevenVarVaccinationShots) {
    const auto m = support::model("7var-covid");
    const auto p = partition_for(*m, action({{m->index_of("V_C"), 3.0}}));
    EXPECT_EQ(ids(*m, p.intervened), (std::set<std::string>{"V_C"}));
    EXPECT_EQ(ids(*m, p.clamped), (std::set<std::string>{"D", "V_I", "B"}));
    EXPECT_EQ(ids(*m, p.resampled), (std::set<std::string>{"C", "S_A", "S_Fe", "S_Fa"}));
}

// The target is resampled when the action reaches it and otherwise left to
// the observational predictor, so it is never clamped.
TEST(Partition, CoversEveryNodeExactlyOnce) {
    for (const char* name : support::all_datasets) {
        const auto m = support::model(name);
        const auto covs = m->covariates();
        for (std::uint64_t mask = 1; mask < (std::uint64_t{1} << covs.size()); ++mask) {
            std::vector<intervention> items;
            for (std::size_t k = 0; k < covs.size(); ++k) {
                if (mask >> k & 1) items.push_back({covs[k], 0.0});
            }
            const auto p = partition_for(*m, action(items));
            EXPECT_TRUE((p.intervened & p.clamped).empty());
            EXPECT_TRUE((p.intervened & p.resampled).empty());
            EXPECT_TRUE((p.clamped & p.resampled).empty());
            EXPECT_FALSE(p.clamped.contains(m->target()));
            node_set all = p.intervened | p.clamped | p.resampled;
            all.insert(m->target());
            EXPECT_EQ(all.size(), m->size()) << name;
        }
    }
}

TEST(Subpopulation, E1VaccinationGivesPointNineOne) {
    const auto m = support::model("covid-admission-e1");
    const e1::layout L(*m);
    const std::size_t M = 8192;
    const double g = gamma_sub(*m, L.covariates(0, 0), L.to_action({1, std::nullopt}), M, 3);
    EXPECT_NEAR(g, 0.91, 3 * bernoulli_standard_error(0.91, M));
}

TEST(Subpopulation, E1EnumerationForAllFactualsAndCauseActions) {
    const auto m = support::model("covid-admission-e1");
    const e1::layout L(*m);
    const std::size_t M = 4096;
    for (int v = 0; v < 2; ++v)
        for (int s = 0; s < 2; ++s)
            for (int theta = 0; theta < 2; ++theta) {
                const e1::act a{theta, std::nullopt};
                const double exact = e1::gamma_sub(v, s, a);
                const double est = gamma_sub(*m, L.covariates(v, s), L.to_action(a), M, 19);
                EXPECT_LE(std::abs(est - exact), 3 * bernoulli_standard_error(exact, M) + 1e-12);
            }
}

TEST(Subpopulation, NonCauseActionCarriesTheObservationalScore) {
    const auto m = support::model("covid-admission-e1");
    const e1::layout L(*m);
    const row x = L.covariates(1, 0);
    try {
        (void)gamma_sub(*m, x, L.to_action({std::nullopt, 1}), 64, 1);
        FAIL() << "expected not_a_cause_error";
    } catch (const not_a_cause_error& e) {
        EXPECT_NEAR(e.observational_confidence(), e1::h_star(1, 0), 1e-12);
    }
    EXPECT_THROW(sample_subpopulation_posterior(*m, x, L.to_action({std::nullopt, 0}), 8, 1), not_a_cause_error);
}

TEST(Subpopulation, ThreeVarCausalMatchesNumericIntegration) {
    const auto m = support::model("3var-causal");
    const std::size_t x1 = m->index_of("X1"), x2 = m->index_of("X2");
    const std::size_t M = 8192;
    const auto rows = sample_observational(*m, 10, 4);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const row x = support::covariates_of(*m, rows[i]);
        const double a = -1.5 + 0.3 * static_cast<double>(i);
        const double b = 0.5 - 0.2 * static_cast<double>(i);
        // do(X1=a, X2=b): X3 = a + b + U3 and Y ~ sigma(2(a + b) + U3).
        const double exact = logistic_normal_mean(2.0 * (a + b));
        const double est = gamma_sub(*m, x, action({{x1, a}, {x2, b}}), M, i);
        EXPECT_LE(std::abs(est - exact), 3.5 * bernoulli_standard_error(exact, M)) << i;
        // do(X2=b) keeps X1: Y ~ sigma(2 x1 + 2b + U3).
        const double exact2 = logistic_normal_mean(2.0 * (x[x1] + b));
        const double est2 = gamma_sub(*m, x, action({{x2, b}}), M, i + 100);
        EXPECT_LE(std::abs(est2 - exact2), 3.5 * bernoulli_standard_error(exact2, M)) << i;
    }
}

TEST(Subpopulation, SaturatesUnderExtremeInterventions) {
    const auto m = support::model("3var-causal");
    const row x = support::covariates_of(*m, sample_observational(*m, 1, 2)[0]);
    const action a({{m->index_of("X1"), 8.0}, {m->index_of("X2"), 8.0}, {m->index_of("X3"), 8.0}});
    EXPECT_GE(gamma_sub(*m, x, a, 2048, 1), 0.999);
}

TEST(Subpopulation, ClampedNodesKeepTheirValuesOnEveryDraw) {
    for (const char* name : support::all_datasets) {
        const auto m = support::model(name);
        const auto rows = sample_observational(*m, 20, 31);
        std::mt19937_64 rng(8);
        for (const row& r : rows) {
            const row x = support::covariates_of(*m, r);
            const action a = random_cause_action(*m, x, rng);
            const auto part = partition_for(*m, a);
            const subpopulation_sampler s(*m, x, 64, 2);
            s.for_each(a, [&](const row& post) {
                for (std::size_t j : part.clamped.members()) {
                    if (j != m->target()) {
                        ASSERT_EQ(post[j], x[j]) << name << " " << m->id(j);
                    }
                }
                for (const auto& it : a.items()) ASSERT_EQ(post[it.node], it.value);
            });
        }
    }
}

// The subgroup-wide mean of h*(x^post) equals the subgroup improvement probability.
TEST(SubpopulationProperty, ExpectedOracleScoreEqualsGammaSub) {
    const std::size_t M = 2048;
    for (const char* name : support::all_datasets) {
        const auto m = support::model(name);
        const auto rows = sample_observational(*m, 50, 41);
        std::mt19937_64 rng(77);
        int failures = 0;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const row x = support::covariates_of(*m, rows[i]);
            const action a = random_cause_action(*m, x, rng);
            const subpopulation_sampler s(*m, x, M, derive_seed(6, i));
            const double g = s.gamma(a);
            compensated_sum h;
            s.for_each(a, [&](const row& post) { h.add(scm_oracle_score(*m, post)); });
            const double mean_h = h.value() / static_cast<double>(M);
            const double se = std::max(bernoulli_standard_error(g, M), 1.0 / static_cast<double>(M));
            failures += std::abs(mean_h - g) > 3 * se ? 1 : 0;
        }
        EXPECT_LE(failures, 2) << name;
    }
}

TEST(Subpopulation, EtaMatchesEnumerationOnE1) {
    const auto m = support::model("covid-admission-e1");
    const e1::layout L(*m);
    const scm_oracle_predictor h(m);
    const e1::scorer exact_h = [](int v, int s) { return e1::h_star(v, s); };
    const std::size_t M = 4096;
    for (int v = 0; v < 2; ++v)
        for (int s = 0; s < 2; ++s)
            for (const auto& a : e1::all_actions()) {
                if (!a.v && !a.s) continue;
                const double exact = e1::eta_sub(v, s, a, exact_h, 0.5);
                const double est = eta_sub(*m, h, 0.5, L.covariates(v, s), L.to_action(a), M, 13);
                EXPECT_LE(std::abs(est - exact), 3 * bernoulli_standard_error(exact, M) + 1e-12)
                    << "V=" << v << " S=" << s;
            }
    // do(V=1) under h*: accepted iff S^post = 1.
    const double p_s1 = 0.91 * 0.95 + 0.09 * 0.05;
    EXPECT_NEAR(eta_sub(*m, h, 0.5, L.covariates(0, 0), L.to_action({1, std::nullopt}), M, 5), p_s1,
                3 * bernoulli_standard_error(p_s1, M));
}

TEST(Subpopulation, EtaEdgeCasesAndDeterminism) {
    const auto m = support::model("7var-covid");
    const row x = support::covariates_of(*m, sample_observational(*m, 1, 9)[0]);
    const scm_oracle_predictor h(m);
    const action a({{m->index_of("V_C"), 3.0}});
    EXPECT_DOUBLE_EQ(eta_sub(*m, h, 0.0, x, a, 128, 1), 1.0);
    EXPECT_EQ(sample_subpopulation_posterior(*m, x, a, 64, 3).rows, sample_subpopulation_posterior(*m, x, a, 64, 3).rows);
}

// Acceptance run: one PASS/FAIL line per headline criterion. Exits non-zero
// when any criterion fails.

#include <chrono>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "e1_oracle.hpp"
#include "recourse/abduction.hpp"
#include "recourse/experiment.hpp"
#include "recourse/individualized.hpp"
#include "recourse/post_recourse.hpp"
#include "recourse/predictors.hpp"
#include "recourse/recourse_search.hpp"
#include "recourse/subpopulation.hpp"

using namespace recourse;

namespace {

int failures = 0;

void verdict(bool ok, const std::string& name, const std::string& detail) {
    std::printf("%s  %s: %s\n", ok ? "PASS" : "FAIL", name.c_str(), detail.c_str());
    std::fflush(stdout);
    failures += ok ? 0 : 1;
}

std::string fmt(const char* f, double a) {
    char buf[128];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

const report_row* find_row(const experiment_report& rep, method m, double conf) {
    for (const auto& r : rep.rows) {
        if (r.m == m && (m == method::ce || std::abs(r.confidence - conf) < 1e-9)) return &r;
    }
    return nullptr;
}

struct desk_run {
    experiment_report report;
    double seconds = 0.0;
};

desk_run run_desk(const std::string& dataset) {
    const run_config cfg = load_run_config(std::string(RECOURSE_SOURCE_DIR "/configs/desk-") + dataset + ".cfg");
    const auto start = std::chrono::steady_clock::now();
    desk_run out{run_experiment(cfg), 0.0};
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("      %s desk run: %.0f s\n", dataset.c_str(), out.seconds);
    // Keep the reports next to the configs so results/ reflects the last acceptance run.
    const std::string stem = std::string(RECOURSE_SOURCE_DIR "/results/desk-") + dataset;
    export_report(out.report, report_format::csv, stem + ".csv");
    export_report(out.report, report_format::table_text, stem + ".txt");
    export_report(out.report, report_format::plot_data, stem + ".dat");
    std::fflush(stdout);
    return out;
}

bool is_cr(method m) { return m == method::cr_ind || m == method::cr_sub; }

// ---------------------------------------------------------------------------

void check_q1(const std::map<std::string, desk_run>& runs) {
    double seconds = 0.0;
    bool ok = true;
    std::string detail;
    for (const char* d : {"3var-noncausal", "5var-skill", "7var-covid"}) {
        const auto& rep = runs.at(d).report;
        seconds += runs.at(d).seconds;
        double worst_gaming = 0.0;
        for (const auto& r : rep.rows) {
            if (r.m == method::ce || is_cr(r.m)) {
                if (!r.gamma_obs.present() || r.gamma_obs.mean > 0.3) ok = false;
                if (r.gamma_obs.present()) worst_gaming = std::max(worst_gaming, r.gamma_obs.mean);
            }
        }
        detail += std::string(d) + " CE/CR max gamma_obs " + fmt("%.2f", worst_gaming) + ", ICR-ind";
        for (double g : {0.85, 0.9, 0.95}) {
            const report_row* r = find_row(rep, method::icr_ind, g);
            const bool row_ok = r && r->gamma_obs.present() && r->gamma_obs.mean >= g - 0.05;
            ok = ok && row_ok;
            detail += " " + (r ? fmt("%.2f", r->gamma_obs.mean) : std::string("missing"));
        }
        detail += "; ";
    }
    const bool in_budget = seconds <= 30 * 60;
    detail += "runtime " + fmt("%.0f s", seconds) + " (budget 1800 s)";
    verdict(ok && in_budget, "Q1 gaming gap", detail);
}

// Gaming 5var-skill under the exact oracle needs several effects changed
// together, which the desk budget often misses. Not a verdict: shows how the
// same CR rows behave at population 500 / 1000 generations on a subsample.
void note_5var_search_budget() {
    run_config cfg = load_run_config(RECOURSE_SOURCE_DIR "/configs/desk-5var-skill.cfg");
    cfg.methods = {method::cr_ind, method::cr_sub};
    cfg.confidences = {0.95};
    cfg.individuals = 20;
    cfg.runs = 1;
    std::string detail;
    for (auto [population, generations] : {std::pair{100, 200}, std::pair{500, 1000}}) {
        cfg.optimizer.population = population;
        cfg.optimizer.generations = generations;
        const experiment_report rep = run_experiment(cfg);
        if (!detail.empty()) detail += "; ";
        detail += fmt("%.0f", population) + "/" + fmt("%.0f", generations) + ":";
        for (const auto& r : rep.rows) {
            detail += std::string(" ") + std::string(to_string(r.m)) + " gamma_obs " + fmt("%.2f", r.gamma_obs.mean) +
                      " cost " + fmt("%.2f", r.mean_cost.mean);
        }
    }
    std::printf("      5var-skill CR 0.95, 20 individuals, by search budget: %s\n", detail.c_str());
    std::fflush(stdout);
}

void check_q2(const desk_run& run) {
    const report_row* r = find_row(run.report, method::icr_ind, 0.95);
    const bool ok = r && r->eta_obs.mean >= 0.95 - 0.05 && r->eta_ind_obs.mean >= 0.95 - 0.05;
    verdict(ok, "Q2 acceptance on 3var-causal",
            r ? "ICR-ind 0.95: eta_obs " + fmt("%.3f", r->eta_obs.mean) + ", eta under h*ind " +
                    fmt("%.3f", r->eta_ind_obs.mean) + " (need >= 0.90)"
              : "row missing");
}

void check_q3(const desk_run& run) {
    const report_row* icr = find_row(run.report, method::icr_ind, 0.9);
    const report_row* ce = find_row(run.report, method::ce, 1.0);
    const bool ok = icr && ce && icr->eta_refit_obs.mean >= 0.95 && ce->eta_refit_obs.mean <= 0.85;
    verdict(ok, "Q3 refit robustness on 3var-noncausal",
            "ICR-ind 0.90 eta_refit " + fmt("%.3f", icr ? icr->eta_refit_obs.mean : NAN) + " (need >= 0.95); CE eta_refit " +
                fmt("%.3f", ce ? ce->eta_refit_obs.mean : NAN) + " (need <= 0.85)");
}

void check_q4(const std::map<std::string, desk_run>& runs) {
    bool ok = true;
    std::string detail;
    for (const auto& [name, run] : runs) {
        std::vector<double> icr, cr;
        for (const auto& r : run.report.rows) {
            if (!r.mean_cost.present()) continue;
            if (is_improvement_method(r.m)) icr.push_back(r.mean_cost.mean);
            if (is_cr(r.m)) cr.push_back(r.mean_cost.mean);
        }
        if (icr.empty() || cr.empty()) {
            if (!detail.empty()) detail += "; ";
            detail += name + " skipped (no feasible rows)";
            continue;
        }
        const double a = summarize(icr).mean, b = summarize(cr).mean;
        ok = ok && a > b;
        if (!detail.empty()) detail += "; ";
        detail += name + " ICR " + fmt("%.3f", a) + " vs CR " + fmt("%.3f", b);
    }
    verdict(ok, "Q4 cost ordering", detail);
}

// CE has no confidence target, so only rows with one carry a bound.
void check_prop3(const std::map<std::string, desk_run>& runs) {
    bool ok = true;
    std::size_t rows = 0;
    double worst = std::numeric_limits<double>::infinity();
    std::string where;
    for (const auto& [name, run] : runs) {
        for (const auto& r : run.report.rows) {
            if (r.m == method::ce || !r.eta_matching.present()) continue;
            ++rows;
            const double slack = r.eta_matching.mean - (acceptance_lower_bound(r.confidence, run.report.threshold) - 0.05);
            if (slack < worst) {
                worst = slack;
                where = name + " " + std::string(to_string(r.m)) + " " + fmt("%.2f", r.confidence);
            }
            ok = ok && slack >= 0.0;
        }
    }
    verdict(ok, "Prop-3 acceptance bound",
            std::to_string(rows) + " rows; smallest margin " + fmt("%.3f", worst) + " at " + where);
}

// ---------------------------------------------------------------------------

void check_prop1() {
    const std::size_t M = 2048;
    std::size_t cases = 0, passed = 0;
    for (const char* name : {"covid-admission-e1", "3var-causal"}) {
        const auto m = load_dataset(name).model;
        const auto rows = sample_observational(*m, 50, 2024);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const row x = covariates_only(*m, rows[i]);
            const auto causes = m->causes_of_target().members();
            const std::size_t node = causes[i % causes.size()];
            const double theta = m->spec(node).domain == value_domain::binary ? 1.0 - x[node] : x[node] + 0.5;
            const action a({{node, theta}});
            const individualized_sampler s(*m, x, scm_oracle_score(*m, x), M, derive_seed(31, i));
            const individualized_predictor h(m, x, a);
            compensated_sum acc;
            compensated_sum spread;
            s.for_each(a, [&](const row& post) {
                const double p = h.score(post);
                acc.add(p);
                spread.add(p * (1.0 - p));
            });
            const double g = s.gamma(a);
            // Y given x^post is Bernoulli(h^{*,ind}(x^post)), so the paired difference has variance E[h(1 - h)] / M.
            const double se = std::max(std::sqrt(spread.value()) / static_cast<double>(M), 1.0 / static_cast<double>(M));
            ++cases;
            passed += std::abs(acc.value() / static_cast<double>(M) - g) <= 3 * se ? 1 : 0;
        }
    }
    verdict(passed == cases, "Prop-1 expected h*ind equals gamma_ind",
            std::to_string(passed) + "/" + std::to_string(cases) + " cases within 3 standard errors");
}

void check_e1_oracles() {
    const auto d = load_dataset("covid-admission-e1");
    const auto m = d.model;
    const e1::layout L(*m);
    const std::size_t M = 4096;
    std::size_t checks = 0, bad = 0;
    auto expect = [&](bool ok) {
        ++checks;
        bad += ok ? 0 : 1;
    };
    for (int v = 0; v < 2; ++v)
        for (int s = 0; s < 2; ++s) {
            const row x = L.covariates(v, s);
            expect(std::abs(scm_oracle_score(*m, x) - e1::h_star(v, s)) <= 1e-12);
            for (int theta = 0; theta < 2; ++theta) {
                const e1::act a{theta, std::nullopt};
                const double gi = e1::gamma_ind(v, s, a), gs = e1::gamma_sub(v, s, a);
                expect(std::abs(gamma_ind(*m, scm_oracle_predictor(m), x, L.to_action(a), M, 7) - gi) <=
                       3 * bernoulli_standard_error(gi, M) + 1e-12);
                expect(std::abs(gamma_sub(*m, x, L.to_action(a), M, 8) - gs) <= 3 * bernoulli_standard_error(gs, M) + 1e-12);
            }
            for (const auto& a : e1::all_actions()) {
                const individualized_predictor h(m, x, L.to_action(a));
                for (int vp = 0; vp < 2; ++vp)
                    for (int sp = 0; sp < 2; ++sp) {
                        if ((a.v && *a.v != vp) || (a.s && *a.s != sp)) continue;
                        const double exact = e1::h_ind(v, s, a, vp, sp);
                        try {
                            const double score = h.score(L.covariates(vp, sp));
                            expect(!std::isnan(exact) && std::abs(score - exact) <= 1e-12);
                        } catch (const infeasible_observation_error&) {
                            expect(std::isnan(exact));
                        }
                    }
            }
        }

    // Optimizer outputs against the enumerated optimum, on the rejected factuals.
    optimizer_config opt;
    opt.samples = M;
    opt.population = 40;
    opt.generations = 40;
    const environment env = dataset_environment(d, opt, 6);
    const double t = env.threshold;
    const e1::scorer deployed = [&](int v, int s) { return env.deployed->score(L.covariates(v, s)); };
    std::size_t searches = 0, matched = 0;
    for (int v = 0; v < 2; ++v)
        for (int s = 0; s < 2; ++s) {
            if (accepted(*env.deployed, L.covariates(v, s), t)) continue;
            const confidence_evaluator eval(env, L.covariates(v, s), 0, 9);
            for (method meth : all_methods) {
                auto exact = [&](const e1::act& a) -> std::optional<double> {
                    switch (meth) {
                    case method::ce: return deployed(a.v.value_or(v), a.s.value_or(s)) >= t ? 1.0 : 0.0;
                    case method::cr_ind: return e1::eta_ind(v, s, a, deployed, t);
                    case method::cr_sub: return e1::eta_sub(v, s, a, deployed, t);
                    case method::icr_ind: return a.s ? std::nullopt : std::optional(e1::gamma_ind(v, s, a));
                    case method::icr_sub: return a.s ? std::nullopt : std::optional(e1::gamma_sub(v, s, a));
                    }
                    return std::nullopt;
                };
                for (double target : {0.75, 0.8, 0.95}) {
                    const double goal = meth == method::ce ? 1.0 : target;
                    double best = std::numeric_limits<double>::infinity();
                    std::vector<e1::act> optima;
                    for (const auto& a : e1::all_actions()) {
                        const auto value = exact(a);
                        if (!value || *value < goal) continue;
                        const double c = 0.5 * (a.v ? std::abs(*a.v - v) : 0) + 0.1 * (a.s ? std::abs(*a.s - s) : 0);
                        if (c < best - 1e-12) {
                            best = c;
                            optima.clear();
                        }
                        if (std::abs(c - best) <= 1e-12) optima.push_back(a);
                    }
                    const recommendation rec = optimize(eval, {meth, target}, 11);
                    ++searches;
                    bool ok = rec.feasible == !optima.empty();
                    if (ok && !optima.empty()) {
                        ok = std::any_of(optima.begin(), optima.end(),
                                         [&](const e1::act& a) { return L.to_action(a) == rec.act; });
                    }
                    matched += ok ? 1 : 0;
                }
            }
        }
    verdict(bad == 0 && matched == searches, "Exact-oracle suite on E.1",
            std::to_string(checks - bad) + "/" + std::to_string(checks) + " confidence and score checks, " +
                std::to_string(matched) + "/" + std::to_string(searches) + " optimizer actions equal the enumerated optimum");
}

void check_e1_narrative() {
    const auto d = load_dataset("covid-admission-e1");
    const e1::layout L(*d.model);
    optimizer_config opt;
    opt.population = 40;
    opt.generations = 40;
    const environment env = dataset_environment(d, opt, 1);
    const auto lm = std::dynamic_pointer_cast<const logistic_predictor>(env.deployed)->model();
    const bool coef_ok = std::abs(lm.coefficients[0] - 3.7) <= 0.8 && std::abs(lm.coefficients[1] - 5.1) <= 0.8 &&
                         std::abs(lm.intercept + 4.3) <= 0.8;
    // The vaccinated can keep V=1 at no cost, which changes the CR-sub
    // subgroup to everyone vaccinated; at 0.75 that free action already
    // reaches P(S=1 | V=1) = 0.87 and is reported, not counted.
    bool s_ok = true;
    std::string exceptions;
    for (int v = 0; v < 2; ++v) {
        if (accepted(*env.deployed, L.covariates(v, 0), env.threshold)) continue;
        const confidence_evaluator eval(env, L.covariates(v, 0), 0, 2);
        for (method meth : {method::ce, method::cr_ind, method::cr_sub}) {
            for (double target : {0.75, 0.85, 0.9, 0.95}) {
                const recommendation rec = optimize(eval, {meth, target}, 3);
                const bool is_s = rec.feasible && rec.act == L.to_action({std::nullopt, 1});
                const bool free_keep = v == 1 && meth == method::cr_sub && rec.cost == 0.0 &&
                                       rec.act == L.to_action({1, std::nullopt});
                if (!is_s && free_keep) {
                    exceptions += "V=1 CR-sub " + fmt("%.2f", target) + " keeps V=1 at cost 0; ";
                    continue;
                }
                s_ok = s_ok && is_s;
            }
        }
    }
    bool refit_ok = true;
    std::string refit_detail;
    for (method meth : {method::ce, method::cr_ind}) {
        const auto res = mixed_refit_study(d, meth, 0.9, 2000, 2000, opt, 5);
        std::size_t vaccinated = 0;
        for (const row& x : res.implementers_pre) vaccinated += x[L.v] == 1.0 ? 1 : 0;
        const double p_v = static_cast<double>(vaccinated) / static_cast<double>(res.implementers_pre.size());
        refit_ok = refit_ok && std::abs(res.refit_acceptance - p_v) <= 0.1;
        if (!refit_detail.empty()) refit_detail += "; ";
        refit_detail += std::string(to_string(meth)) + " refit acceptance " + fmt("%.3f", res.refit_acceptance) +
                        " vs P(V=1 | rejected) " + fmt("%.3f", p_v);
    }
    char coef[160];
    std::snprintf(coef, sizeof coef, "coefficients (%.2f, %.2f, %.2f); ", lm.coefficients[0], lm.coefficients[1],
                  lm.intercept);
    verdict(coef_ok && s_ok && refit_ok, "E.1 narrative",
            std::string(coef) + (s_ok ? "CE/CR recommend do(S=1); " : "CE/CR do not all recommend do(S=1); ") +
                exceptions + refit_detail);
}

void check_abduction_and_clamps() {
    std::size_t cases = 0, bad = 0;
    for (const auto& name : dataset_names()) {
        const auto m = load_dataset(name).model;
        const auto rows = sample_observational(*m, 1000, 4242);
        rng_engine rng(3);
        std::mt19937_64 pick(5);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            ++cases;
            bool ok = true;
            const row& r = rows[i];
            for (std::size_t j = 0; j < m->size(); ++j) {
                const abducted_noise post = abduct_node(*m, j, r);
                ok = ok && values_match(m->evaluate(j, r, post.sample(rng)), r[j]);
            }
            const row x = covariates_only(*m, r);
            const auto covs = m->covariates();
            std::vector<intervention> items;
            for (std::size_t j : covs) {
                if (pick() % 3 != 0) continue;
                const double shift = m->spec(j).domain == value_domain::continuous ? 0.5 : 0.0;
                double theta = m->spec(j).domain == value_domain::binary ? 1.0 - x[j] : x[j] + shift;
                if (!m->value_allowed(j, theta)) theta = x[j];
                items.push_back({j, theta});
            }
            if (items.empty()) items.push_back({covs[i % covs.size()], x[covs[i % covs.size()]]});
            const action a(items);
            const node_set fixed = m->nondescendants(a.targets());
            const individualized_sampler ind(*m, x, scm_oracle_score(*m, x), 8, i);
            ind.for_each(a, [&](const row& post) {
                for (const auto& it : a.items()) ok = ok && post[it.node] == it.value;
                for (std::size_t j : fixed.members()) ok = ok && (j == m->target() || post[j] == x[j]);
            });
            if (acts_on_cause(*m, a)) {
                const auto part = partition_for(*m, a);
                const subpopulation_sampler sub(*m, x, 8, i);
                sub.for_each(a, [&](const row& post) {
                    for (const auto& it : a.items()) ok = ok && post[it.node] == it.value;
                    for (std::size_t j : part.clamped.members()) ok = ok && post[j] == x[j];
                });
            }
            bad += ok ? 0 : 1;
        }
    }
    verdict(bad == 0, "Abduction round-trip and clamp invariants",
            std::to_string(cases - bad) + "/" + std::to_string(cases) + " cases over " +
                std::to_string(dataset_names().size()) + " models");
}

} // namespace

int main(int argc, char** argv) {
    // --quick skips the desk-scale experiments behind Q1 to Q4 and Prop-3.
    const bool quick = argc > 1 && std::string(argv[1]) == "--quick";
    check_prop1();
    check_e1_oracles();
    check_e1_narrative();
    check_abduction_and_clamps();
    if (quick) {
        std::printf("%d criteria failed (experiments skipped)\n", failures);
        return failures == 0 ? 0 : 1;
    }
    std::map<std::string, desk_run> runs;
    for (const auto& name : dataset_names()) runs.emplace(name, run_desk(name));
    check_q1(runs);
    note_5var_search_budget();
    check_q2(runs.at("3var-causal"));
    check_q3(runs.at("3var-noncausal"));
    check_q4(runs);
    check_prop3(runs);
    std::printf("%d criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}

#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "recourse/datasets.hpp"
#include "recourse/errors.hpp"
#include "recourse/post_recourse.hpp"
#include "recourse/predictors.hpp"
#include "recourse/random.hpp"
#include "recourse/recourse_search.hpp"
#include "recourse/scm.hpp"

namespace recourse {

// ---------------------------------------------------------------------------
// Run configuration

struct output_paths {
    std::string csv;
    std::string table;
    std::string plot;
};

struct run_config {
    std::string dataset = "3var-causal";
    std::vector<method> methods{all_methods, all_methods + 5};
    std::vector<double> confidences{0.75, 0.85, 0.9, 0.95};
    std::size_t individuals = 100;
    std::size_t runs = 3;
    std::size_t refits = 5;
    /// Training size of the deployed model and of each refit; 0 keeps the dataset default.
    std::size_t train_size = 0;
    std::uint64_t seed = 0;
    std::size_t threads = 1;
    optimizer_config optimizer;
    output_paths output;

    void validate() const {
        if (individuals == 0) throw config_error("individuals must be at least 1");
        if (runs == 0) throw config_error("runs must be at least 1");
        if (methods.empty()) throw config_error("at least one method is required");
        for (double c : confidences) {
            if (!(c > 0.5 && c <= 1.0)) throw config_error("confidence levels must lie in (0.5, 1]");
        }
        if (confidences.empty()) throw config_error("at least one confidence level is required");
        if (optimizer.population < 2) throw config_error("optimizer population must be at least 2");
        if (optimizer.samples == 0) throw config_error("optimizer samples must be at least 1");
        if (!(optimizer.crossover_probability >= 0.0 && optimizer.crossover_probability <= 1.0) ||
            !(optimizer.mutation_probability >= 0.0 && optimizer.mutation_probability <= 1.0)) {
            throw config_error("optimizer probabilities must lie in [0, 1]");
        }
    }
};

namespace detail {

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s + ",") {
        if (c == ',' || c == ' ' || c == '\t') {
            if (!cur.empty()) {
                out.push_back(cur);
                cur.clear();
            }
        } else {
            cur.push_back(c);
        }
    }
    return out;
}

template <class T>
T parse_scalar(const std::string& key, const std::string& text) {
    std::istringstream in(text);
    T v{};
    in >> v;
    if (in.fail() || !(in >> std::ws).eof()) {
        throw config_error("invalid value '" + text + "' for '" + key + "'");
    }
    return v;
}

} // namespace detail

/// INI run configuration: top-level keys, plus [optimizer] and [output]
/// sections. Unknown keys are rejected.
inline run_config parse_run_config(std::istream& in) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw config_error(std::string("malformed run config: ") + e.what());
    }
    run_config cfg;
    for (const auto& [key, node] : tree) {
        const std::string value = node.data();
        if (key == "optimizer") {
            for (const auto& [k, v] : node) {
                const std::string full = "optimizer." + k;
                if (k == "population") cfg.optimizer.population = detail::parse_scalar<std::size_t>(full, v.data());
                else if (k == "generations") cfg.optimizer.generations = detail::parse_scalar<std::size_t>(full, v.data());
                else if (k == "crossover") cfg.optimizer.crossover_probability = detail::parse_scalar<double>(full, v.data());
                else if (k == "mutation") cfg.optimizer.mutation_probability = detail::parse_scalar<double>(full, v.data());
                else if (k == "decimals") cfg.optimizer.decimals = detail::parse_scalar<int>(full, v.data());
                else if (k == "samples") cfg.optimizer.samples = detail::parse_scalar<std::size_t>(full, v.data());
                else throw config_error("unknown key '" + full + "'");
            }
        } else if (key == "output") {
            for (const auto& [k, v] : node) {
                if (k == "csv") cfg.output.csv = v.data();
                else if (k == "table") cfg.output.table = v.data();
                else if (k == "plot") cfg.output.plot = v.data();
                else throw config_error("unknown key 'output." + k + "'");
            }
        } else if (!node.empty()) {
            throw config_error("unknown section '" + key + "'");
        } else if (key == "dataset") {
            cfg.dataset = value;
        } else if (key == "methods") {
            cfg.methods.clear();
            for (const auto& m : detail::split_list(value)) cfg.methods.push_back(parse_method(m));
        } else if (key == "confidences") {
            cfg.confidences.clear();
            for (const auto& c : detail::split_list(value)) cfg.confidences.push_back(detail::parse_scalar<double>(key, c));
        } else if (key == "individuals") {
            cfg.individuals = detail::parse_scalar<std::size_t>(key, value);
        } else if (key == "runs") {
            cfg.runs = detail::parse_scalar<std::size_t>(key, value);
        } else if (key == "refits") {
            cfg.refits = detail::parse_scalar<std::size_t>(key, value);
        } else if (key == "train_size") {
            cfg.train_size = detail::parse_scalar<std::size_t>(key, value);
        } else if (key == "seed") {
            cfg.seed = detail::parse_scalar<std::uint64_t>(key, value);
        } else if (key == "threads") {
            cfg.threads = detail::parse_scalar<std::size_t>(key, value);
        } else {
            throw config_error("unknown key '" + key + "'");
        }
    }
    cfg.validate();
    return cfg;
}

inline run_config load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw config_error("cannot read run config '" + path + "'");
    }
    return parse_run_config(in);
}

// ---------------------------------------------------------------------------
// Report

struct statistic {
    double mean = std::numeric_limits<double>::quiet_NaN();
    double sd = std::numeric_limits<double>::quiet_NaN();
    [[nodiscard]] bool present() const noexcept { return !std::isnan(mean); }
};

/// Mean and sample standard deviation; NaN entries are skipped.
inline statistic summarize(const std::vector<double>& xs) {
    std::vector<double> v;
    for (double x : xs) {
        if (!std::isnan(x)) v.push_back(x);
    }
    statistic s;
    if (v.empty()) return s;
    s.mean = compensated_mean(v);
    if (v.size() == 1) {
        s.sd = 0.0;
        return s;
    }
    compensated_sum sq;
    for (double x : v) sq.add((x - s.mean) * (x - s.mean));
    s.sd = std::sqrt(sq.value() / static_cast<double>(v.size() - 1));
    return s;
}

struct report_row {
    method m = method::ce;
    double confidence = 1.0;
    statistic gamma_obs;
    statistic eta_obs;
    statistic eta_ind_obs;
    statistic eta_refit_obs;
    statistic mean_cost;
    /// Acceptance under the predictor matching the method's confidence:
    /// h^{*,ind} for ICR-ind, h* for ICR-sub, the deployed model otherwise.
    statistic eta_matching;
    std::size_t infeasible = 0;
    std::size_t recommendations = 0;
};

struct experiment_report {
    std::string dataset;
    double threshold = 0.5;
    std::vector<report_row> rows;
    double seconds = 0.0;
    std::size_t cache_hits = 0;
    std::size_t cache_misses = 0;
};

// ---------------------------------------------------------------------------
// Simulation

/// Rejected individuals of one run, with the exogenous values behind them.
struct cohort {
    std::vector<row> rows;
    std::vector<noise_vector> noise;
};

inline cohort sample_rejected(const scm& model, const predictor& h, double t, std::size_t n, std::uint64_t seed,
                              std::size_t max_draws = 10'000'000) {
    cohort c;
    rng_engine rng(seed);
    for (std::size_t draws = 0; c.rows.size() < n; ++draws) {
        if (draws == max_draws) {
            throw config_error("could not find enough individuals rejected by the deployed predictor");
        }
        noise_vector u = model.sample_noise(rng);
        row r = model.forward(u);
        if (!accepted(h, r, t)) {
            c.rows.push_back(std::move(r));
            c.noise.push_back(std::move(u));
        }
    }
    return c;
}

inline row covariates_only(const scm& model, row r) {
    r[model.target()] = missing_value;
    return r;
}

/// Result of one recommendation applied in simulation.
struct outcome {
    bool feasible = false;
    double improved = 0.0;
    double accepted = 0.0;
    double accepted_individualized = std::numeric_limits<double>::quiet_NaN();
    double accepted_refit = std::numeric_limits<double>::quiet_NaN();
    double accepted_matching = 0.0;
    double cost = 0.0;
    action act;
};

struct simulation_context {
    const environment* env = nullptr;
    std::vector<std::shared_ptr<const logistic_predictor>> refits;
};

inline outcome simulate(const simulation_context& ctx, const recommendation& rec, const row& x_pre,
                        const noise_vector& noise) {
    const environment& env = *ctx.env;
    outcome o;
    o.feasible = rec.feasible;
    o.act = rec.act;
    o.cost = rec.cost;
    if (!rec.feasible) {
        return o;
    }
    // CE edits are carried out as interventions in the simulated world.
    const row post = ground_truth_counterfactual(*env.model, noise, rec.act);
    const row post_x = covariates_only(*env.model, post);
    const double t = env.threshold;
    o.improved = post[env.model->target()] == 1.0 ? 1.0 : 0.0;
    o.accepted = accepted(*env.deployed, post_x, t) ? 1.0 : 0.0;
    const individualized_predictor h_ind(env.model, x_pre, rec.act, t);
    const double ind = accepted(h_ind, post_x, t) ? 1.0 : 0.0;
    if (rec.m == method::icr_ind) {
        o.accepted_individualized = ind;
    }
    switch (rec.m) {
    case method::icr_ind: o.accepted_matching = ind; break;
    case method::icr_sub: o.accepted_matching = accepted(*env.oracle, post_x, t) ? 1.0 : 0.0; break;
    default: o.accepted_matching = o.accepted; break;
    }
    if (!ctx.refits.empty()) {
        std::size_t hits = 0;
        for (const auto& r : ctx.refits) {
            hits += accepted(*r, post_x, t) ? 1 : 0;
        }
        o.accepted_refit = static_cast<double>(hits) / static_cast<double>(ctx.refits.size());
    }
    return o;
}

/// Everything recorded for one run, per (method, confidence) and individual.
struct run_record {
    std::vector<row> factuals;
    std::vector<noise_vector> noise;
    /// keyed by report-row index; one outcome per individual
    std::vector<std::vector<outcome>> outcomes;
};

namespace detail {

/// (method, confidence) rows in report order; CE appears once with confidence 1.
inline std::vector<std::pair<method, double>> report_layout(const run_config& cfg) {
    std::vector<std::pair<method, double>> rows;
    for (method m : all_methods) {
        if (std::find(cfg.methods.begin(), cfg.methods.end(), m) == cfg.methods.end()) continue;
        if (m == method::ce) {
            rows.emplace_back(m, 1.0);
            continue;
        }
        for (double c : cfg.confidences) rows.emplace_back(m, c);
    }
    return rows;
}

template <class F>
void parallel_for(std::size_t n, std::size_t threads, F&& f) {
    threads = std::max<std::size_t>(1, std::min(threads, n));
    if (threads == 1) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (std::size_t k = 0; k < threads; ++k) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    f(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

} // namespace detail

struct experiment_setup {
    dataset_spec dataset;
    environment env;
    simulation_context sim;
};

/// Deployed predictor and search environment derived from one seed.
inline environment dataset_environment(const dataset_spec& d, const optimizer_config& optimizer, std::uint64_t seed) {
    auto deployed = make_deployed_predictor(d, derive_seed(seed, 0x7A));
    return make_environment(d.model, std::move(deployed), d.threshold, optimizer, seed, d.name);
}

/// Deployed predictor, search environment and refits for run `r`.
inline experiment_setup prepare_run(const run_config& cfg, const dataset_spec& d, std::size_t r) {
    const std::uint64_t seed = derive_seed(cfg.seed, r);
    dataset_spec ds = d;
    if (cfg.train_size > 0) {
        ds.predictor.train_size = cfg.train_size;
    }
    experiment_setup s{ds, dataset_environment(ds, cfg.optimizer, seed), {}};
    if (ds.predictor.kind == predictor_kind::logistic_regression && cfg.refits > 0) {
        logistic_options unpenalized;
        s.sim.refits = refit_family(*ds.model, cfg.refits, ds.predictor.train_size, derive_seed(seed, 0x7B), unpenalized,
                                    ds.threshold)
                           .models;
    }
    return s;
}

inline run_record run_once(const run_config& cfg, const experiment_setup& setup, std::size_t r,
                           confidence_cache& cache) {
    const std::uint64_t seed = derive_seed(cfg.seed, r);
    const environment& env = setup.env;
    simulation_context sim = setup.sim;
    sim.env = &env;
    const auto layout = detail::report_layout(cfg);
    const cohort c = sample_rejected(*env.model, *env.deployed, env.threshold, cfg.individuals, derive_seed(seed, 0xC0));
    run_record rec;
    rec.factuals = c.rows;
    rec.noise = c.noise;
    rec.outcomes.assign(layout.size(), std::vector<outcome>(cfg.individuals));
    detail::parallel_for(cfg.individuals, cfg.threads, [&](std::size_t i) {
        const row x_pre = covariates_only(*env.model, c.rows[i]);
        const confidence_evaluator eval(env, x_pre, i, seed, &cache);
        for (std::size_t k = 0; k < layout.size(); ++k) {
            const auto [m, conf] = layout[k];
            const std::uint64_t search_seed =
                derive_seed(seed, i, static_cast<std::uint64_t>(m) * 1000 + static_cast<std::uint64_t>(std::llround(conf * 100)));
            const recommendation best = optimize(eval, {m, conf}, search_seed);
            rec.outcomes[k][i] = simulate(sim, best, x_pre, c.noise[i]);
        }
    });
    return rec;
}

/// Per-run rates over feasible recommendations, then mean and sd over runs.
inline experiment_report aggregate(const run_config& cfg, const dataset_spec& d, const std::vector<run_record>& runs) {
    experiment_report rep;
    rep.dataset = d.name;
    rep.threshold = d.threshold;
    const auto layout = detail::report_layout(cfg);
    for (std::size_t k = 0; k < layout.size(); ++k) {
        report_row row;
        row.m = layout[k].first;
        row.confidence = layout[k].second;
        std::vector<double> g, e, ei, er, cost, em;
        for (const auto& run : runs) {
            std::vector<double> rg, re, rei, rer, rc, rem;
            for (const auto& o : run.outcomes[k]) {
                ++row.recommendations;
                if (!o.feasible) {
                    ++row.infeasible;
                    continue;
                }
                rg.push_back(o.improved);
                re.push_back(o.accepted);
                rei.push_back(o.accepted_individualized);
                rer.push_back(o.accepted_refit);
                rc.push_back(o.cost);
                rem.push_back(o.accepted_matching);
            }
            g.push_back(summarize(rg).mean);
            e.push_back(summarize(re).mean);
            ei.push_back(summarize(rei).mean);
            er.push_back(summarize(rer).mean);
            cost.push_back(summarize(rc).mean);
            em.push_back(summarize(rem).mean);
        }
        row.gamma_obs = summarize(g);
        row.eta_obs = summarize(e);
        row.eta_ind_obs = summarize(ei);
        row.eta_refit_obs = summarize(er);
        row.mean_cost = summarize(cost);
        row.eta_matching = summarize(em);
        rep.rows.push_back(row);
    }
    return rep;
}

struct experiment_result {
    experiment_report report;
    std::vector<run_record> runs;
};

inline experiment_result run_experiment_detailed(const run_config& cfg) {
    cfg.validate();
    const auto start = std::chrono::steady_clock::now();
    const dataset_spec d = load_dataset(cfg.dataset);
    experiment_result out;
    std::size_t hits = 0;
    std::size_t misses = 0;
    for (std::size_t r = 0; r < cfg.runs; ++r) {
        confidence_cache cache;
        const experiment_setup setup = prepare_run(cfg, d, r);
        out.runs.push_back(run_once(cfg, setup, r, cache));
        hits += cache.hits();
        misses += cache.misses();
    }
    out.report = aggregate(cfg, d, out.runs);
    out.report.cache_hits = hits;
    out.report.cache_misses = misses;
    out.report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

inline experiment_report run_experiment(const run_config& cfg) { return run_experiment_detailed(cfg).report; }

// ---------------------------------------------------------------------------
// Export

namespace detail {

inline std::string fixed6(double x) {
    if (std::isnan(x)) return "nan";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", x);
    return buf;
}

inline std::string fixed2(double x) {
    if (std::isnan(x)) return "-";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f", x);
    return buf;
}

} // namespace detail

inline constexpr const char* csv_header =
    "method,confidence,gamma_obs,gamma_sd,eta_obs,eta_sd,eta_ind_obs,eta_ind_sd,eta_refit_obs,eta_refit_sd,mean_cost,cost_sd";

inline std::string report_csv(const experiment_report& rep) {
    std::string out = std::string(csv_header) + "\n";
    for (const auto& r : rep.rows) {
        const statistic* cols[] = {&r.gamma_obs, &r.eta_obs, &r.eta_ind_obs, &r.eta_refit_obs, &r.mean_cost};
        out += std::string(to_string(r.m)) + "," + detail::fixed6(r.confidence);
        for (const statistic* s : cols) {
            out += "," + detail::fixed6(s->mean) + "," + detail::fixed6(s->sd);
        }
        out += "\n";
    }
    return out;
}

/// Parses a report written by `report_csv`; counts and timing are not part of the file.
inline experiment_report parse_report_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != csv_header) {
        throw config_error("not a recourse report csv");
    }
    auto num = [](const std::string& s) {
        return s == "nan" ? std::numeric_limits<double>::quiet_NaN() : std::stod(s);
    };
    experiment_report rep;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ls(line);
        for (std::string cell; std::getline(ls, cell, ',');) f.push_back(cell);
        if (f.size() != 12) throw config_error("malformed report line: " + line);
        report_row r;
        r.m = parse_method(f[0]);
        r.confidence = num(f[1]);
        statistic* cols[] = {&r.gamma_obs, &r.eta_obs, &r.eta_ind_obs, &r.eta_refit_obs, &r.mean_cost};
        for (std::size_t k = 0; k < 5; ++k) {
            cols[k]->mean = num(f[2 + 2 * k]);
            cols[k]->sd = num(f[3 + 2 * k]);
        }
        rep.rows.push_back(r);
    }
    return rep;
}

inline std::string report_table(const experiment_report& rep) {
    std::ostringstream out;
    auto cell = [](const statistic& s) {
        std::string v = detail::fixed2(s.mean) + " +- " + detail::fixed2(s.sd);
        return std::string(v.size() < 14 ? 14 - v.size() : 0, ' ') + v;
    };
    char head[256];
    std::snprintf(head, sizeof head, "%-8s %6s %14s %14s %14s %14s %14s %10s\n", "method", "conf", "gamma_obs", "eta_obs",
                  "eta_ind_obs", "eta_refit_obs", "mean_cost", "infeasible");
    out << rep.dataset << "\n" << head;
    for (const auto& r : rep.rows) {
        char lead[64];
        std::snprintf(lead, sizeof lead, "%-8s %6s", std::string(to_string(r.m)).c_str(),
                      r.m == method::ce ? "-" : detail::fixed2(r.confidence).c_str());
        out << lead << " " << cell(r.gamma_obs) << " " << cell(r.eta_obs) << " " << cell(r.eta_ind_obs) << " "
            << cell(r.eta_refit_obs) << " " << cell(r.mean_cost) << " ";
        char tail[32];
        std::snprintf(tail, sizeof tail, "%10zu\n", r.infeasible);
        out << tail;
    }
    return out.str();
}

/// Whitespace-separated blocks, one per method, separated by blank lines.
/// The *_sq columns hold squared rates for quadratic-scale axes.
inline std::string report_plot_data(const experiment_report& rep) {
    std::ostringstream out;
    out << "# method confidence gamma_obs gamma_obs_sq gamma_sd eta_obs eta_obs_sq eta_sd mean_cost cost_sd\n";
    bool first = true;
    for (method m : all_methods) {
        bool any = false;
        for (const auto& r : rep.rows) {
            if (r.m != m) continue;
            if (!any && !first) out << "\n\n";
            any = true;
            first = false;
            out << to_string(m) << " " << detail::fixed6(r.confidence) << " " << detail::fixed6(r.gamma_obs.mean) << " "
                << detail::fixed6(r.gamma_obs.mean * r.gamma_obs.mean) << " " << detail::fixed6(r.gamma_obs.sd) << " "
                << detail::fixed6(r.eta_obs.mean) << " " << detail::fixed6(r.eta_obs.mean * r.eta_obs.mean) << " "
                << detail::fixed6(r.eta_obs.sd) << " " << detail::fixed6(r.mean_cost.mean) << " "
                << detail::fixed6(r.mean_cost.sd) << "\n";
        }
    }
    return out.str();
}

enum class report_format { table_text, csv, plot_data };

inline void export_report(const experiment_report& rep, report_format format, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw config_error("cannot write '" + path + "'");
    }
    switch (format) {
    case report_format::table_text: out << report_table(rep); break;
    case report_format::csv: out << report_csv(rep); break;
    case report_format::plot_data: out << report_plot_data(rep); break;
    }
    if (!out) {
        throw config_error("failed writing '" + path + "'");
    }
}

// ---------------------------------------------------------------------------
// Refit on mixed pre- and post-recourse data

struct mixed_refit_result {
    logistic_model refit;
    /// covariates of the recourse implementers before acting
    std::vector<row> implementers_pre;
    /// their ground-truth post-recourse rows
    std::vector<row> implementers_post;
    double refit_acceptance = 0.0;
    double deployed_acceptance = 0.0;
    double improvement = 0.0;
};

/// n_pre observational rows are mixed with n_post post-recourse rows of
/// rejected individuals who implemented the method's recommendation; a fresh
/// unpenalized model is fit on the mix and scored on the implementers.
inline mixed_refit_result mixed_refit_study(const dataset_spec& d, method m, double target, std::size_t n_pre,
                                            std::size_t n_post, const optimizer_config& optimizer, std::uint64_t seed) {
    const environment env = dataset_environment(d, optimizer, seed);
    const auto& deployed = env.deployed;
    const scm& model = *d.model;
    std::vector<row> mix = sample_observational(model, n_pre, derive_seed(seed, 2));
    const cohort c = sample_rejected(model, *deployed, d.threshold, n_post, derive_seed(seed, 3));
    confidence_cache cache;
    // Recommendations depend only on the covariates, so identical factuals share one search.
    std::map<row, std::pair<recommendation, std::uint64_t>> memo;
    mixed_refit_result out;
    std::size_t improved = 0;
    for (std::size_t i = 0; i < c.rows.size(); ++i) {
        const row x_pre = covariates_only(model, c.rows[i]);
        row key = x_pre;
        key[model.target()] = 0.0;
        auto it = memo.find(key);
        if (it == memo.end()) {
            const std::uint64_t id = memo.size();
            const confidence_evaluator eval(env, x_pre, id, seed, &cache);
            it = memo.emplace(key, std::make_pair(optimize(eval, {m, target}, derive_seed(seed, 4, id)), id)).first;
        }
        const recommendation& rec = it->second.first;
        const row post = rec.feasible ? ground_truth_counterfactual(model, c.noise[i], rec.act) : c.rows[i];
        improved += post[model.target()] == 1.0 ? 1 : 0;
        out.implementers_pre.push_back(x_pre);
        out.implementers_post.push_back(post);
        mix.push_back(post);
    }
    out.refit = fit_logistic(model, mix, logistic_options{});
    const logistic_predictor refit(out.refit, d.threshold);
    std::size_t refit_hits = 0;
    std::size_t deployed_hits = 0;
    for (const row& post : out.implementers_post) {
        const row x = covariates_only(model, post);
        refit_hits += accepted(refit, x, d.threshold) ? 1 : 0;
        deployed_hits += accepted(*deployed, x, d.threshold) ? 1 : 0;
    }
    const auto n = static_cast<double>(out.implementers_post.size());
    out.refit_acceptance = static_cast<double>(refit_hits) / n;
    out.deployed_acceptance = static_cast<double>(deployed_hits) / n;
    out.improvement = static_cast<double>(improved) / n;
    return out;
}

} // namespace recourse

#pragma once

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "recourse/errors.hpp"
#include "recourse/individualized.hpp"
#include "recourse/nsga2.hpp"
#include "recourse/post_recourse.hpp"
#include "recourse/predictor.hpp"
#include "recourse/predictors.hpp"
#include "recourse/random.hpp"
#include "recourse/scm.hpp"
#include "recourse/subpopulation.hpp"

namespace recourse {

enum class method { ce, cr_ind, cr_sub, icr_ind, icr_sub };

inline constexpr method all_methods[] = {method::ce, method::cr_ind, method::cr_sub, method::icr_ind, method::icr_sub};

inline std::string_view to_string(method m) {
    switch (m) {
    case method::ce: return "CE";
    case method::cr_ind: return "CR-ind";
    case method::cr_sub: return "CR-sub";
    case method::icr_ind: return "ICR-ind";
    case method::icr_sub: return "ICR-sub";
    }
    return "unknown";
}

inline method parse_method(std::string_view s) {
    auto lower = [](std::string_view v) {
        std::string out(v);
        std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
        return out;
    };
    const std::string key = lower(s);
    for (method m : all_methods) {
        if (lower(to_string(m)) == key) {
            return m;
        }
    }
    throw config_error("unknown method '" + std::string(s) + "' (expected CE, CR-ind, CR-sub, ICR-ind or ICR-sub)");
}

inline bool is_improvement_method(method m) noexcept { return m == method::icr_ind || m == method::icr_sub; }

struct optimizer_config {
    std::size_t population = 100;
    std::size_t generations = 200;
    double crossover_probability = 0.3;
    double mutation_probability = 0.05;
    int decimals = 1;
    std::size_t samples = 1024;
};

/// cost(a, x^pre) = sum over intervened i of w_i |theta_i - x^pre_i|
class cost_model {
public:
    cost_model() = default;
    explicit cost_model(std::vector<double> weights) : weights_(std::move(weights)) {}

    static cost_model from(const scm& model) {
        std::vector<double> w;
        for (const auto& s : model.specs()) {
            w.push_back(s.cost_weight);
        }
        return cost_model(std::move(w));
    }

    [[nodiscard]] double weight(std::size_t i) const { return weights_.at(i); }

    [[nodiscard]] double operator()(const action& a, std::span<const double> x_pre) const {
        compensated_sum s;
        for (const auto& it : a.items()) {
            s.add(weights_.at(it.node) * std::abs(it.value - x_pre[it.node]));
        }
        return s.value();
    }

private:
    std::vector<double> weights_;
};

/// Search range and mutation scale of one actionable covariate.
struct gene_domain {
    std::size_t node = 0;
    value_domain domain = value_domain::continuous;
    double lo = 0.0;
    double hi = 0.0;
    double sd = 1.0;
};

/// Everything shared by all individuals of one run: the model, the
/// deployed predictor and the search space.
struct environment {
    std::string dataset;
    std::shared_ptr<const scm> model;
    std::shared_ptr<const predictor> deployed;
    std::shared_ptr<const predictor> oracle;
    double threshold = 0.5;
    cost_model costs;
    std::vector<gene_domain> genes;
    optimizer_config optimizer;
};

inline std::size_t bounds_sample_size = 10'000;

/// Gene ranges are the empirical [min, max] of observational draws.
inline environment make_environment(std::shared_ptr<const scm> model, std::shared_ptr<const predictor> deployed,
                                    double threshold, optimizer_config optimizer, std::uint64_t seed,
                                    std::string dataset = {}) {
    detail::require_threshold(threshold);
    environment env;
    env.dataset = std::move(dataset);
    env.model = model;
    env.deployed = std::move(deployed);
    env.oracle = std::make_shared<scm_oracle_predictor>(model, threshold);
    env.threshold = threshold;
    env.costs = cost_model::from(*model);
    env.optimizer = optimizer;
    const auto rows = sample_observational(*model, bounds_sample_size, derive_seed(seed, 0xB0));
    for (std::size_t j : model->covariates()) {
        const node_spec& s = model->spec(j);
        if (!s.actionable) {
            continue;
        }
        gene_domain g{j, s.domain, std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(), 0.0};
        compensated_sum sum;
        for (const row& r : rows) {
            g.lo = std::min(g.lo, r[j]);
            g.hi = std::max(g.hi, r[j]);
            sum.add(r[j]);
        }
        const double mean = sum.value() / static_cast<double>(rows.size());
        compensated_sum sq;
        for (const row& r : rows) {
            sq.add((r[j] - mean) * (r[j] - mean));
        }
        g.sd = std::sqrt(sq.value() / static_cast<double>(rows.size() - 1));
        if (s.domain == value_domain::binary) {
            g.lo = 0.0;
            g.hi = 1.0;
        } else if (s.domain == value_domain::categorical) {
            g.lo = 0.0;
            g.hi = static_cast<double>(s.categories - 1);
        }
        if (!(g.sd > 0.0)) {
            g.sd = 1.0;
        }
        env.genes.push_back(g);
    }
    return env;
}

/// Genes the search may intervene on: all actionable covariates, or only the
/// causes of Y for improvement-focused methods.
inline std::vector<gene_domain> candidate_genes(const environment& env, method m) {
    std::vector<gene_domain> out;
    const node_set causes = env.model->causes_of_target();
    for (const auto& g : env.genes) {
        if (!is_improvement_method(m) || causes.contains(g.node)) {
            out.push_back(g);
        }
    }
    return out;
}

/// Rounds continuous values to `decimals`, integer-valued ones to integers.
inline double snap_value(const scm& model, std::size_t node, double v, int decimals) {
    switch (model.spec(node).domain) {
    case value_domain::continuous: return scm::round_to(v, decimals);
    default: return std::round(v);
    }
}

inline action snap_action(const scm& model, const action& a, int decimals) {
    std::vector<intervention> items;
    for (const auto& it : a.items()) {
        items.push_back({it.node, snap_value(model, it.node, it.value, decimals)});
    }
    return action(std::move(items));
}

// ---------------------------------------------------------------------------
// Confidence cache

struct cache_key {
    method m = method::ce;
    std::uint64_t individual = 0;
    std::vector<intervention> items;
    friend bool operator==(const cache_key&, const cache_key&) = default;
};

struct cache_key_hash {
    std::size_t operator()(const cache_key& k) const noexcept {
        std::uint64_t h = splitmix64(static_cast<std::uint64_t>(k.m) ^ (k.individual << 8U));
        for (const auto& it : k.items) {
            h = splitmix64(h ^ it.node);
            h = splitmix64(h ^ std::hash<double>{}(it.value));
        }
        return static_cast<std::size_t>(h);
    }
};

/// Thread-safe memo of confidence values keyed by (method, rounded action,
/// individual id). Concurrent inserts of one key carry identical values.
class confidence_cache {
public:
    std::optional<double> find(const cache_key& k) const {
        std::lock_guard lock(mutex_);
        auto it = map_.find(k);
        if (it == map_.end()) {
            misses_.fetch_add(1, std::memory_order_relaxed);
            return std::nullopt;
        }
        hits_.fetch_add(1, std::memory_order_relaxed);
        return it->second;
    }

    void insert(const cache_key& k, double v) {
        std::lock_guard lock(mutex_);
        map_.insert_or_assign(k, v);
    }

    template <class F>
    double get_or_compute(const cache_key& k, F&& compute) {
        if (auto v = find(k)) {
            return *v;
        }
        const double v = compute();
        insert(k, v);
        return v;
    }

    [[nodiscard]] std::size_t hits() const noexcept { return hits_.load(); }
    [[nodiscard]] std::size_t misses() const noexcept { return misses_.load(); }
    [[nodiscard]] std::size_t size() const {
        std::lock_guard lock(mutex_);
        return map_.size();
    }
    void clear() {
        std::lock_guard lock(mutex_);
        map_.clear();
        hits_ = 0;
        misses_ = 0;
    }

private:
    mutable std::mutex mutex_;
    std::unordered_map<cache_key, double, cache_key_hash> map_;
    mutable std::atomic<std::size_t> hits_{0};
    mutable std::atomic<std::size_t> misses_{0};
};

// ---------------------------------------------------------------------------
// Confidence evaluation

/// Confidence of actions for one individual under each method. Samplers are
/// seeded from (seed, individual) only, so values do not depend on which
/// method or confidence level asked first.
class confidence_evaluator {
public:
    confidence_evaluator(const environment& env, row x_pre, std::uint64_t individual, std::uint64_t seed,
                         confidence_cache* cache = nullptr)
        : env_(&env),
          x_pre_(std::move(x_pre)),
          individual_(individual),
          cache_(cache),
          observational_(scm_oracle_score(*env.model, x_pre_)),
          ind_(*env.model, x_pre_, observational_, env.optimizer.samples, derive_seed(seed, individual, 1)),
          sub_(*env.model, x_pre_, env.optimizer.samples, derive_seed(seed, individual, 2)) {}

    [[nodiscard]] const row& x_pre() const noexcept { return x_pre_; }
    [[nodiscard]] std::uint64_t individual() const noexcept { return individual_; }
    [[nodiscard]] double observational_confidence() const noexcept { return observational_; }
    [[nodiscard]] const individualized_sampler& individualized() const noexcept { return ind_; }
    [[nodiscard]] const subpopulation_sampler& subpopulation() const noexcept { return sub_; }
    [[nodiscard]] const environment& env() const noexcept { return *env_; }

    /// gamma (ICR) or eta (CR) of the action; 0/1 acceptance of the edited
    /// point for CE. Continuous values are rounded to the configured decimals
    /// first.
    [[nodiscard]] double evaluate(method m, const action& a) const {
        const action snapped = snap_action(*env_->model, a, env_->optimizer.decimals);
        if (is_improvement_method(m)) {
            const node_set outside = snapped.targets() - env_->model->causes_of_target();
            if (!outside.empty()) {
                throw invalid_action_error("improvement-focused recourse only intervenes on causes of '" +
                                           env_->model->target_id() + "'; '" +
                                           env_->model->id(outside.members().front()) + "' is not one");
            }
        }
        if (cache_ == nullptr) {
            return compute(m, snapped);
        }
        cache_key key{m, individual_, {snapped.items().begin(), snapped.items().end()}};
        return cache_->get_or_compute(key, [&] { return compute(m, snapped); });
    }

    [[nodiscard]] double gamma_ind(const action& a) const { return ind_.gamma(a); }

    /// gamma^sub, or nullopt for actions that touch no cause of Y.
    [[nodiscard]] std::optional<double> gamma_sub(const action& a) const {
        if (!acts_on_cause(*env_->model, a)) {
            env_->model->validate(a);
            return std::nullopt;
        }
        return sub_.gamma(a);
    }

    /// Feature edits without downstream propagation.
    [[nodiscard]] row edited_point(const action& a) const {
        env_->model->validate(a);
        row x = x_pre_;
        for (const auto& it : a.items()) {
            x[it.node] = it.value;
        }
        return x;
    }

private:
    [[nodiscard]] double compute(method m, const action& a) const {
        switch (m) {
        case method::ce:
            return accepted(*env_->deployed, edited_point(a), env_->threshold) ? 1.0 : 0.0;
        case method::cr_ind:
            return ind_.eta(a, *env_->deployed, env_->threshold);
        case method::cr_sub:
            return sub_.eta(a, *env_->deployed, env_->threshold);
        case method::icr_ind:
            return ind_.gamma(a);
        case method::icr_sub:
            return gamma_sub(a).value_or(observational_);
        }
        return 0.0;
    }

    const environment* env_;
    row x_pre_;
    std::uint64_t individual_;
    confidence_cache* cache_;
    double observational_;
    individualized_sampler ind_;
    subpopulation_sampler sub_;
};

// ---------------------------------------------------------------------------
// Search

struct recourse_problem {
    method m = method::icr_ind;
    /// gamma-bar for ICR, eta-bar for CR; CE always demands acceptance.
    double target = 0.9;
};

struct recommendation {
    method m = method::icr_ind;
    double target = 0.0;
    action act;
    double cost = 0.0;
    /// Value of the method's own objective (gamma, eta, or CE's 0/1 acceptance).
    double confidence = 0.0;
    bool feasible = false;
    std::size_t evaluations = 0;
};

/// Mask bits plus one value per candidate gene.
struct genome {
    std::vector<char> mask;
    std::vector<double> values;
    friend bool operator==(const genome&, const genome&) = default;
};

/// NSGA-II problem for one individual and method.
class recourse_ga {
public:
    using genome_type = genome;

    recourse_ga(const confidence_evaluator& eval, recourse_problem problem)
        : eval_(&eval), problem_(problem), genes_(candidate_genes(eval.env(), problem.m)) {
        if (problem_.m == method::ce) {
            problem_.target = 1.0;
        }
    }

    [[nodiscard]] const std::vector<gene_domain>& genes() const noexcept { return genes_; }
    [[nodiscard]] double target() const noexcept { return problem_.target; }

    [[nodiscard]] genome initial(rng_engine& rng, std::size_t index) const {
        genome g;
        for (const auto& gd : genes_) {
            const double current = snap(gd, eval_->x_pre()[gd.node]);
            if (index == 0) {
                g.mask.push_back(0);
                g.values.push_back(current);
                continue;
            }
            g.mask.push_back(uniform01(rng) < 0.5 ? 1 : 0);
            g.values.push_back(uniform01(rng) < 0.5 ? current : random_value(gd, rng));
        }
        return g;
    }

    void crossover(genome& a, genome& b, rng_engine& rng) const {
        for (std::size_t k = 0; k < genes_.size(); ++k) {
            if (uniform01(rng) < 0.5) {
                std::swap(a.mask[k], b.mask[k]);
                std::swap(a.values[k], b.values[k]);
            }
        }
    }

    void mutate(genome& g, rng_engine& rng) const {
        const double p = eval_->env().optimizer.mutation_probability;
        for (std::size_t k = 0; k < genes_.size(); ++k) {
            if (uniform01(rng) < p) {
                g.mask[k] = g.mask[k] != 0 ? 0 : 1;
            }
            if (uniform01(rng) < p) {
                const gene_domain& gd = genes_[k];
                if (gd.domain == value_domain::binary || gd.domain == value_domain::categorical) {
                    g.values[k] = random_value(gd, rng);
                } else {
                    g.values[k] = snap(gd, g.values[k] + std::normal_distribution<double>(0.0, gd.sd)(rng));
                }
            }
        }
    }

    [[nodiscard]] action to_action(const genome& g) const {
        std::vector<intervention> items;
        for (std::size_t k = 0; k < genes_.size(); ++k) {
            if (g.mask[k] != 0) {
                items.push_back({genes_[k].node, g.values[k]});
            }
        }
        return action(std::move(items));
    }

    [[nodiscard]] nsga2::fitness evaluate(const genome& g) const {
        const action a = to_action(g);
        const double confidence = eval_->evaluate(problem_.m, a);
        return {eval_->env().costs(a, eval_->x_pre()), std::max(0.0, problem_.target - confidence)};
    }

    /// Tie-break: lexicographically smaller mask, then smaller intervened values.
    [[nodiscard]] bool before(const genome& a, const genome& b) const {
        if (a.mask != b.mask) {
            return a.mask < b.mask;
        }
        for (std::size_t k = 0; k < genes_.size(); ++k) {
            if (a.mask[k] != 0 && a.values[k] != b.values[k]) {
                return a.values[k] < b.values[k];
            }
        }
        return false;
    }

private:
    [[nodiscard]] double snap(const gene_domain& gd, double v) const {
        const double s = snap_value(*eval_->env().model, gd.node, v, eval_->env().optimizer.decimals);
        const double lo = snap_value(*eval_->env().model, gd.node, gd.lo, eval_->env().optimizer.decimals);
        const double hi = snap_value(*eval_->env().model, gd.node, gd.hi, eval_->env().optimizer.decimals);
        return std::clamp(s, std::min(lo, hi), std::max(lo, hi));
    }

    [[nodiscard]] double random_value(const gene_domain& gd, rng_engine& rng) const {
        if (gd.domain == value_domain::binary || gd.domain == value_domain::categorical) {
            const auto levels = static_cast<long long>(std::llround(gd.hi - gd.lo)) + 1;
            return gd.lo + static_cast<double>(std::uniform_int_distribution<long long>(0, levels - 1)(rng));
        }
        return snap(gd, gd.lo + (gd.hi - gd.lo) * uniform01(rng));
    }

    const confidence_evaluator* eval_;
    recourse_problem problem_;
    std::vector<gene_domain> genes_;
};

inline void validate_problem(const confidence_evaluator& eval, const recourse_problem& problem) {
    if (problem.m != method::ce && !(problem.target > 0.5 && problem.target <= 1.0)) {
        throw std::invalid_argument("confidence target must lie in (0.5, 1]");
    }
    const environment& env = eval.env();
    if (accepted(*env.deployed, eval.x_pre(), env.threshold)) {
        throw std::invalid_argument("individual is already accepted; recourse needs a rejected factual");
    }
}

/// Cheapest action meeting the confidence target, found by NSGA-II.
/// Deterministic per seed.
inline recommendation optimize(const confidence_evaluator& eval, const recourse_problem& problem, std::uint64_t seed) {
    validate_problem(eval, problem);
    const recourse_ga ga(eval, problem);
    const optimizer_config& cfg = eval.env().optimizer;
    const auto res = nsga2::run(ga, {cfg.population, cfg.generations, cfg.crossover_probability}, seed);
    const auto& best = res.population[res.best];
    recommendation out;
    out.m = problem.m;
    out.target = ga.target();
    out.act = ga.to_action(best.genome);
    out.cost = best.fit.cost;
    out.confidence = eval.evaluate(problem.m, out.act);
    out.feasible = best.fit.feasible();
    out.evaluations = res.evaluations;
    return out;
}

// ---------------------------------------------------------------------------
// Complementary estimates

/// Estimates reported alongside a recommendation or an evaluated action.
struct action_assessment {
    double cost = 0.0;
    double gamma_ind = 0.0;
    std::optional<double> gamma_sub; // empty: the action touches no cause of Y
    double observational_confidence = 0.0;
    double eta_ind = 0.0;            // deployed predictor, individualized draws
    double eta_sub = 0.0;            // deployed predictor, subpopulation draws
    double eta_h_ind = 0.0;          // h^{*,ind}, individualized draws
};

inline double eta_under_individualized(const confidence_evaluator& eval, const action& a) {
    const environment& env = eval.env();
    const individualized_predictor h(env.model, eval.x_pre(), a, eval.observational_confidence(), env.threshold);
    acceptance_counter hits(h, env.threshold, env.model->target());
    eval.individualized().for_each(a, [&](const row& r) { hits.add(r); });
    return static_cast<double>(hits.hits()) / static_cast<double>(eval.individualized().samples());
}

inline action_assessment assess(const confidence_evaluator& eval, const action& a) {
    const environment& env = eval.env();
    action_assessment out;
    out.cost = env.costs(a, eval.x_pre());
    out.observational_confidence = eval.observational_confidence();
    out.gamma_ind = eval.gamma_ind(a);
    out.gamma_sub = eval.gamma_sub(a);
    out.eta_ind = eval.individualized().eta(a, *env.deployed, env.threshold);
    out.eta_sub = eval.subpopulation().eta(a, *env.deployed, env.threshold);
    out.eta_h_ind = eta_under_individualized(eval, a);
    return out;
}

} // namespace recourse

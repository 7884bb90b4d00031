#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <queue>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "recourse/errors.hpp"
#include "recourse/random.hpp"

namespace recourse {

/// Values of all nodes of a model, indexed by node. The target slot holds NaN
/// when only covariates are known.
using row = std::vector<double>;
/// One exogenous value per node, indexed like `row`.
using noise_vector = std::vector<double>;

inline constexpr double missing_value = std::numeric_limits<double>::quiet_NaN();

inline constexpr std::size_t max_nodes = 64;

/// Fixed-capacity node set; models are limited to `max_nodes` nodes.
class node_set {
public:
    constexpr node_set() = default;
    constexpr explicit node_set(std::uint64_t bits) : bits_(bits) {}

    [[nodiscard]] constexpr bool contains(std::size_t i) const noexcept { return ((bits_ >> i) & 1U) != 0; }
    constexpr void insert(std::size_t i) noexcept { bits_ |= (std::uint64_t{1} << i); }
    constexpr void erase(std::size_t i) noexcept { bits_ &= ~(std::uint64_t{1} << i); }
    [[nodiscard]] constexpr bool empty() const noexcept { return bits_ == 0; }
    [[nodiscard]] constexpr std::size_t size() const noexcept { return static_cast<std::size_t>(std::popcount(bits_)); }
    [[nodiscard]] constexpr std::uint64_t bits() const noexcept { return bits_; }

    constexpr node_set& operator|=(node_set o) noexcept { bits_ |= o.bits_; return *this; }
    constexpr node_set& operator&=(node_set o) noexcept { bits_ &= o.bits_; return *this; }
    friend constexpr node_set operator|(node_set a, node_set b) noexcept { return node_set(a.bits_ | b.bits_); }
    friend constexpr node_set operator&(node_set a, node_set b) noexcept { return node_set(a.bits_ & b.bits_); }
    friend constexpr node_set operator-(node_set a, node_set b) noexcept { return node_set(a.bits_ & ~b.bits_); }
    friend constexpr bool operator==(node_set, node_set) = default;

    [[nodiscard]] std::vector<std::size_t> members() const {
        std::vector<std::size_t> out;
        for (std::uint64_t b = bits_; b != 0; b &= b - 1) {
            out.push_back(static_cast<std::size_t>(std::countr_zero(b)));
        }
        return out;
    }

private:
    std::uint64_t bits_ = 0;
};

// ---------------------------------------------------------------------------
// Noise distributions

enum class noise_family { normal, uniform01, bernoulli, categorical, gamma, gamma_poisson };

struct noise_distribution {
    noise_family family = noise_family::normal;
    /// normal: mean; bernoulli: p; gamma and gamma_poisson: shape
    double first = 0.0;
    /// normal: standard deviation; gamma and gamma_poisson: rate
    double second = 1.0;
    std::vector<double> probs; // categorical only

    static noise_distribution normal(double mean, double sd) { return {noise_family::normal, mean, sd, {}}; }
    static noise_distribution uniform() { return {noise_family::uniform01, 0.0, 1.0, {}}; }
    static noise_distribution bernoulli(double p) { return {noise_family::bernoulli, p, 0.0, {}}; }
    static noise_distribution categorical(std::vector<double> p) { return {noise_family::categorical, 0.0, 0.0, std::move(p)}; }
    static noise_distribution gamma(double shape, double rate) { return {noise_family::gamma, shape, rate, {}}; }
    /// lambda ~ Gamma(shape, rate), x ~ Poisson(lambda): negative binomial with mean shape / rate.
    static noise_distribution gamma_poisson(double shape, double rate) { return {noise_family::gamma_poisson, shape, rate, {}}; }

    friend bool operator==(const noise_distribution&, const noise_distribution&) = default;

    void validate() const {
        auto fail = [](const char* what) { throw invalid_model_error(what); };
        switch (family) {
        case noise_family::normal:
            if (!(second > 0.0) || !std::isfinite(first)) fail("normal noise needs finite mean and sd > 0");
            break;
        case noise_family::uniform01:
            break;
        case noise_family::bernoulli:
            if (!(first >= 0.0 && first <= 1.0)) fail("bernoulli noise needs p in [0, 1]");
            break;
        case noise_family::categorical: {
            if (probs.empty()) fail("categorical noise needs probabilities");
            double total = 0.0;
            for (double p : probs) {
                if (!(p >= 0.0)) fail("categorical probabilities must be nonnegative");
                total += p;
            }
            if (std::abs(total - 1.0) > 1e-9) fail("categorical probabilities must sum to 1");
            break;
        }
        case noise_family::gamma:
        case noise_family::gamma_poisson:
            if (!(first > 0.0) || !(second > 0.0)) fail("gamma noise needs shape > 0 and rate > 0");
            break;
        }
    }

    /// True when draws are integers (then `density` is a pmf).
    [[nodiscard]] bool integer_valued() const noexcept {
        return family == noise_family::bernoulli || family == noise_family::categorical ||
               family == noise_family::gamma_poisson;
    }

    double sample(rng_engine& rng) const {
        switch (family) {
        case noise_family::normal:
            return std::normal_distribution<double>(first, second)(rng);
        case noise_family::uniform01:
            return uniform01(rng);
        case noise_family::bernoulli:
            return uniform01(rng) < first ? 1.0 : 0.0;
        case noise_family::categorical: {
            const double u = uniform01(rng);
            double acc = 0.0;
            for (std::size_t k = 0; k < probs.size(); ++k) {
                acc += probs[k];
                if (u < acc) {
                    return static_cast<double>(k);
                }
            }
            return static_cast<double>(probs.size() - 1);
        }
        case noise_family::gamma:
            return std::gamma_distribution<double>(first, 1.0 / second)(rng);
        case noise_family::gamma_poisson: {
            const double lambda = std::gamma_distribution<double>(first, 1.0 / second)(rng);
            if (!(lambda > 0.0)) {
                return 0.0;
            }
            return static_cast<double>(std::poisson_distribution<long long>(lambda)(rng));
        }
        }
        return missing_value;
    }

    /// pdf for continuous families, pmf for integer-valued ones; zero off support.
    [[nodiscard]] double density(double u) const {
        if (!std::isfinite(u)) {
            return 0.0;
        }
        switch (family) {
        case noise_family::normal: {
            const double z = (u - first) / second;
            return std::exp(-0.5 * z * z) / (second * std::sqrt(2.0 * std::numbers::pi));
        }
        case noise_family::uniform01:
            return (u >= 0.0 && u <= 1.0) ? 1.0 : 0.0;
        case noise_family::bernoulli:
            if (u == 1.0) return first;
            if (u == 0.0) return 1.0 - first;
            return 0.0;
        case noise_family::categorical: {
            if (u < 0.0 || u != std::floor(u) || u >= static_cast<double>(probs.size())) return 0.0;
            return probs[static_cast<std::size_t>(u)];
        }
        case noise_family::gamma:
            if (u <= 0.0) return 0.0;
            return std::exp(first * std::log(second) - std::lgamma(first) + (first - 1.0) * std::log(u) - second * u);
        case noise_family::gamma_poisson: {
            if (u < 0.0 || u != std::floor(u)) return 0.0;
            // negative binomial with r = shape, p = rate / (1 + rate)
            const double r = first;
            const double p = second / (1.0 + second);
            return std::exp(std::lgamma(u + r) - std::lgamma(u + 1.0) - std::lgamma(r) + r * std::log(p) +
                            u * std::log1p(-p));
        }
        }
        return 0.0;
    }
};

// ---------------------------------------------------------------------------
// Structural equations

enum class link_transform { identity, sigmoid };

/// One product term of a link: coefficient * prod(values[factor]). Repeated
/// factors encode powers.
struct link_term {
    double coefficient = 0.0;
    std::vector<std::string> factors;
    friend bool operator==(const link_term&, const link_term&) = default;
};

/// transform(intercept + sum of terms)
struct link_spec {
    double intercept = 0.0;
    std::vector<link_term> terms;
    link_transform transform = link_transform::identity;
    friend bool operator==(const link_spec&, const link_spec&) = default;
};

enum class equation_kind {
    exogenous,         // x = u
    additive,          // x = round(g(pa) + u)
    sigmoid_bernoulli, // x = [u <= sigmoid(l(pa))], u ~ Uniform(0, 1)
    xor_additive,      // x = (g(pa) + u) mod 2, u ~ Bernoulli
};

enum class value_domain { continuous, integer, binary, categorical };

struct node_spec {
    std::string id;
    std::vector<std::string> parents;
    equation_kind kind = equation_kind::exogenous;
    link_spec link;
    noise_distribution noise = noise_distribution::normal(0.0, 1.0);
    value_domain domain = value_domain::continuous;
    std::size_t categories = 0; // categorical only
    int decimals = -1;          // additive nodes with integer noise may round their value
    double cost_weight = 1.0;
    bool actionable = false;
    friend bool operator==(const node_spec&, const node_spec&) = default;
};

// ---------------------------------------------------------------------------
// Actions

struct intervention {
    std::size_t node = 0;
    double value = 0.0;
    friend auto operator<=>(const intervention&, const intervention&) = default;
};

/// do(X_I := theta); interventions kept sorted by node with unique nodes.
class action {
public:
    action() = default;
    explicit action(std::vector<intervention> items) : items_(std::move(items)) {
        std::sort(items_.begin(), items_.end(), [](const auto& a, const auto& b) { return a.node < b.node; });
        for (std::size_t i = 1; i < items_.size(); ++i) {
            if (items_[i].node == items_[i - 1].node) {
                throw invalid_action_error("action intervenes twice on the same node");
            }
        }
    }

    [[nodiscard]] std::span<const intervention> items() const noexcept { return items_; }
    [[nodiscard]] bool empty() const noexcept { return items_.empty(); }
    [[nodiscard]] std::size_t size() const noexcept { return items_.size(); }

    [[nodiscard]] node_set targets() const noexcept {
        node_set s;
        for (const auto& it : items_) {
            s.insert(it.node);
        }
        return s;
    }

    [[nodiscard]] std::optional<double> value_of(std::size_t node) const noexcept {
        for (const auto& it : items_) {
            if (it.node == node) {
                return it.value;
            }
        }
        return std::nullopt;
    }

    friend bool operator==(const action&, const action&) = default;

private:
    std::vector<intervention> items_;
};

// ---------------------------------------------------------------------------
// Structural causal model

class scm {
public:
    scm(std::vector<node_spec> nodes, std::string target_id) : specs_(std::move(nodes)), target_id_(std::move(target_id)) {
        compile();
    }

    [[nodiscard]] std::size_t size() const noexcept { return specs_.size(); }
    [[nodiscard]] std::size_t target() const noexcept { return target_; }
    [[nodiscard]] const std::string& target_id() const noexcept { return target_id_; }
    [[nodiscard]] const node_spec& spec(std::size_t i) const { return specs_.at(i); }
    [[nodiscard]] const std::vector<node_spec>& specs() const noexcept { return specs_; }
    [[nodiscard]] const std::string& id(std::size_t i) const { return specs_.at(i).id; }

    [[nodiscard]] std::optional<std::size_t> find(std::string_view id) const {
        for (std::size_t i = 0; i < specs_.size(); ++i) {
            if (specs_[i].id == id) {
                return i;
            }
        }
        return std::nullopt;
    }

    [[nodiscard]] std::size_t index_of(std::string_view id) const {
        if (auto i = find(id)) {
            return *i;
        }
        throw invalid_model_error("unknown node '" + std::string(id) + "'");
    }

    [[nodiscard]] std::span<const std::size_t> parents(std::size_t i) const { return nodes_.at(i).parents; }
    [[nodiscard]] std::span<const std::size_t> children(std::size_t i) const { return nodes_.at(i).children; }
    [[nodiscard]] std::span<const std::size_t> topological_order() const noexcept { return topo_; }

    /// Density of node i's noise at u, tabulated for gamma-Poisson noise.
    [[nodiscard]] double noise_density(std::size_t i, double u) const {
        const std::vector<double>& pmf = nodes_[i].pmf;
        if (u >= 0.0 && u < static_cast<double>(pmf.size()) && u == std::floor(u)) {
            return pmf[static_cast<std::size_t>(u)];
        }
        return specs_[i].noise.density(u);
    }

    /// All nodes except the target, in declaration order.
    [[nodiscard]] std::span<const std::size_t> covariates() const noexcept { return covariates_; }

    [[nodiscard]] node_set covariate_set() const noexcept {
        node_set all(size() == 64 ? ~std::uint64_t{0} : ((std::uint64_t{1} << size()) - 1));
        all.erase(target_);
        return all;
    }

    /// Nodes reachable from some member of `from` over at least one edge.
    [[nodiscard]] node_set descendants(node_set from) const noexcept {
        node_set out;
        for (std::size_t i : from.members()) {
            out |= nodes_[i].descendants;
        }
        return out;
    }

    /// Strict ancestors of node i.
    [[nodiscard]] node_set ancestors(std::size_t i) const {
        node_set out;
        for (std::size_t j = 0; j < size(); ++j) {
            if (nodes_[j].descendants.contains(i)) {
                out.insert(j);
            }
        }
        return out;
    }

    [[nodiscard]] node_set causes_of_target() const noexcept { return causes_; }

    /// Covariates neither in `intervened` nor reachable from it.
    [[nodiscard]] node_set nondescendants(node_set intervened) const {
        return covariate_set() - intervened - descendants(intervened);
    }

    [[nodiscard]] std::optional<double> fixed_value(std::size_t i) const { return nodes_.at(i).fixed; }

    [[nodiscard]] double link_value(std::size_t j, std::span<const double> values) const {
        const compiled_node& n = nodes_[j];
        double acc = n.intercept;
        for (const auto& term : n.terms) {
            double prod = term.coefficient;
            for (std::size_t f : term.factors) {
                prod *= values[f];
            }
            acc += prod;
        }
        return n.transform == link_transform::sigmoid ? sigmoid(acc) : acc;
    }

    /// Structural equation of node j, given the values of its parents in `values`.
    [[nodiscard]] double evaluate(std::size_t j, std::span<const double> values, double u) const {
        const compiled_node& n = nodes_[j];
        if (n.fixed) {
            return *n.fixed;
        }
        switch (specs_[j].kind) {
        case equation_kind::exogenous:
            return u;
        case equation_kind::additive:
            return round_to(link_value(j, values) + u, specs_[j].decimals);
        case equation_kind::sigmoid_bernoulli:
            return u <= sigmoid(link_value(j, values)) ? 1.0 : 0.0;
        case equation_kind::xor_additive:
            return mod2(link_value(j, values) + u);
        }
        return missing_value;
    }

    /// Evaluates every node in topological order; nodes in `a` take their
    /// intervened value.
    void forward(std::span<const double> noise, std::span<double> out, const action* a = nullptr) const {
        for (std::size_t j : topo_) {
            if (a != nullptr) {
                if (auto v = a->value_of(j)) {
                    out[j] = *v;
                    continue;
                }
            }
            out[j] = evaluate(j, out, noise[j]);
        }
    }

    [[nodiscard]] row forward(std::span<const double> noise, const action* a = nullptr) const {
        row out(size(), missing_value);
        forward(noise, out, a);
        return out;
    }

    [[nodiscard]] noise_vector sample_noise(rng_engine& rng) const {
        noise_vector u(size());
        for (std::size_t j = 0; j < size(); ++j) {
            u[j] = specs_[j].noise.sample(rng);
        }
        return u;
    }

    /// Checks that `v` is a legal value for node i (binary 0/1, categorical index, integer).
    [[nodiscard]] bool value_allowed(std::size_t i, double v) const {
        if (!std::isfinite(v)) {
            return false;
        }
        switch (specs_[i].domain) {
        case value_domain::continuous:
            return true;
        case value_domain::integer:
            return v == std::floor(v);
        case value_domain::binary:
            return v == 0.0 || v == 1.0;
        case value_domain::categorical:
            return v == std::floor(v) && v >= 0.0 && v < static_cast<double>(specs_[i].categories);
        }
        return false;
    }

    /// Interventions must target existing covariates with type-valid values.
    void validate(const action& a) const {
        for (const auto& it : a.items()) {
            if (it.node >= size()) {
                throw invalid_action_error("action targets an unknown node");
            }
            if (it.node == target_) {
                throw invalid_action_error("recourse actions cannot intervene on the target '" + target_id_ + "'");
            }
            if (!value_allowed(it.node, it.value)) {
                throw invalid_action_error("value not allowed for node '" + specs_[it.node].id + "'");
            }
        }
    }

    friend bool operator==(const scm& a, const scm& b) {
        if (a.specs_ != b.specs_ || a.target_id_ != b.target_id_) {
            return false;
        }
        for (std::size_t i = 0; i < a.size(); ++i) {
            if (a.nodes_[i].fixed != b.nodes_[i].fixed) {
                return false;
            }
        }
        return true;
    }

    static double round_to(double x, int decimals) {
        if (decimals < 0) {
            return x;
        }
        const double scale = std::pow(10.0, decimals);
        return std::round(x * scale) / scale;
    }

    static double mod2(double x) {
        double r = std::fmod(x, 2.0);
        if (r < 0.0) {
            r += 2.0;
        }
        return r;
    }

private:
    friend scm intervene(const scm&, const action&);

    struct compiled_term {
        double coefficient;
        std::vector<std::size_t> factors;
    };

    struct compiled_node {
        std::vector<std::size_t> parents;
        std::vector<std::size_t> children;
        double intercept = 0.0;
        std::vector<compiled_term> terms;
        link_transform transform = link_transform::identity;
        node_set descendants;
        std::optional<double> fixed;
        /// Gamma-Poisson noise pmf at 0, 1, 2, ...; longer values fall back to density().
        std::vector<double> pmf;
    };

    void compile() {
        if (specs_.empty()) {
            throw invalid_model_error("model has no nodes");
        }
        if (specs_.size() > max_nodes) {
            throw invalid_model_error("models are limited to 64 nodes");
        }
        std::unordered_map<std::string, std::size_t> index;
        for (std::size_t i = 0; i < specs_.size(); ++i) {
            if (!index.emplace(specs_[i].id, i).second) {
                throw invalid_model_error("duplicate node id '" + specs_[i].id + "'");
            }
        }
        auto resolve = [&](const std::string& id, const std::string& where) {
            auto it = index.find(id);
            if (it == index.end()) {
                throw invalid_model_error("unknown node '" + id + "' referenced by '" + where + "'");
            }
            return it->second;
        };
        auto t = index.find(target_id_);
        if (t == index.end()) {
            throw invalid_model_error("target '" + target_id_ + "' is not a node");
        }
        target_ = t->second;
        covariates_.clear();
        for (std::size_t i = 0; i < specs_.size(); ++i) {
            if (i != target_) {
                covariates_.push_back(i);
            }
        }

        nodes_.assign(specs_.size(), {});
        for (std::size_t i = 0; i < specs_.size(); ++i) {
            const node_spec& s = specs_[i];
            compiled_node& n = nodes_[i];
            s.noise.validate();
            for (const auto& p : s.parents) {
                const std::size_t pi = resolve(p, s.id);
                if (pi == i) {
                    throw invalid_model_error("node '" + s.id + "' is its own parent");
                }
                n.parents.push_back(pi);
                nodes_[pi].children.push_back(i);
            }
            n.intercept = s.link.intercept;
            n.transform = s.link.transform;
            for (const auto& term : s.link.terms) {
                compiled_term ct{term.coefficient, {}};
                for (const auto& f : term.factors) {
                    const std::size_t fi = resolve(f, s.id);
                    if (std::find(n.parents.begin(), n.parents.end(), fi) == n.parents.end()) {
                        throw invalid_model_error("link of '" + s.id + "' uses non-parent '" + f + "'");
                    }
                    ct.factors.push_back(fi);
                }
                n.terms.push_back(std::move(ct));
            }
            validate_equation(s);
            if (s.noise.family == noise_family::gamma_poisson) {
                const double mean = s.noise.first / s.noise.second;
                for (double u = 0.0; u < 4096.0; u += 1.0) {
                    const double p = s.noise.density(u);
                    if (u > mean && p < 1e-16) break;
                    n.pmf.push_back(p);
                }
            }
        }
        for (auto& n : nodes_) {
            std::sort(n.children.begin(), n.children.end());
        }
        sort_topologically();
        for (auto it = topo_.rbegin(); it != topo_.rend(); ++it) {
            compiled_node& n = nodes_[*it];
            for (std::size_t c : n.children) {
                n.descendants.insert(c);
                n.descendants |= nodes_[c].descendants;
            }
        }
        causes_ = ancestors(target_);
        const node_spec& y = specs_[target_];
        const bool binary_target = y.kind == equation_kind::sigmoid_bernoulli || y.kind == equation_kind::xor_additive ||
                                   (y.kind == equation_kind::exogenous && y.noise.family == noise_family::bernoulli);
        if (!binary_target || y.domain != value_domain::binary) {
            throw invalid_model_error("target must be binary-valued");
        }
    }

    void validate_equation(const node_spec& s) const {
        auto fail = [&](const std::string& what) { throw invalid_model_error("node '" + s.id + "': " + what); };
        switch (s.kind) {
        case equation_kind::exogenous:
            if (!s.parents.empty()) fail("exogenous nodes have no parents");
            break;
        case equation_kind::additive:
            if (s.decimals >= 0 && !s.noise.integer_valued()) fail("rounding needs integer-valued noise to stay invertible");
            break;
        case equation_kind::sigmoid_bernoulli:
            if (s.noise.family != noise_family::uniform01) fail("sigmoid-bernoulli noise must be Uniform(0,1)");
            if (s.domain != value_domain::binary) fail("sigmoid-bernoulli nodes are binary");
            break;
        case equation_kind::xor_additive:
            if (s.noise.family != noise_family::bernoulli) fail("xor-additive noise must be Bernoulli");
            if (s.domain != value_domain::binary) fail("xor-additive nodes are binary");
            break;
        }
        if (s.domain == value_domain::categorical && s.categories == 0) fail("categorical domain needs a category count");
        if (s.actionable && !(s.cost_weight > 0.0)) fail("actionable nodes need a strictly positive cost weight");
    }

    void sort_topologically() {
        std::vector<std::size_t> indegree(specs_.size(), 0);
        for (std::size_t i = 0; i < specs_.size(); ++i) {
            indegree[i] = nodes_[i].parents.size();
        }
        std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
        for (std::size_t i = 0; i < specs_.size(); ++i) {
            if (indegree[i] == 0) {
                ready.push(i);
            }
        }
        topo_.clear();
        while (!ready.empty()) {
            const std::size_t i = ready.top();
            ready.pop();
            topo_.push_back(i);
            for (std::size_t c : nodes_[i].children) {
                if (--indegree[c] == 0) {
                    ready.push(c);
                }
            }
        }
        if (topo_.size() != specs_.size()) {
            throw invalid_model_error("causal graph has a cycle");
        }
    }

    std::vector<node_spec> specs_;
    std::string target_id_;
    std::size_t target_ = 0;
    std::vector<std::size_t> covariates_;
    std::vector<compiled_node> nodes_;
    std::vector<std::size_t> topo_;
    node_set causes_;
};

// ---------------------------------------------------------------------------
// Free operations

/// Returns a model whose intervened equations are the constants of `a`.
inline scm intervene(const scm& model, const action& a) {
    model.validate(a);
    scm out = model;
    for (const auto& it : a.items()) {
        out.nodes_[it.node].fixed = it.value;
    }
    return out;
}

inline std::vector<std::size_t> topological_order(const scm& model) {
    auto order = model.topological_order();
    return {order.begin(), order.end()};
}

inline node_set nondescendants(const scm& model, node_set intervened) {
    if (intervened.contains(model.target())) {
        throw invalid_action_error("intervention set may not contain the target");
    }
    return model.nondescendants(intervened);
}

/// Rows together with the exogenous values that produced them.
struct population {
    std::vector<row> rows;
    std::vector<noise_vector> noise;
};

inline population sample_population(const scm& model, std::size_t n, std::uint64_t seed) {
    population pop;
    pop.rows.reserve(n);
    pop.noise.reserve(n);
    rng_engine rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
        noise_vector u = model.sample_noise(rng);
        pop.rows.push_back(model.forward(u));
        pop.noise.push_back(std::move(u));
    }
    return pop;
}

inline std::vector<row> sample_observational(const scm& model, std::size_t n, std::uint64_t seed) {
    if (n == 0) {
        throw std::invalid_argument("sample size must be at least 1");
    }
    return sample_population(model, n, seed).rows;
}

/// Deterministic post-action state of an individual whose exogenous values are known.
inline row ground_truth_counterfactual(const scm& model, std::span<const double> noise, const action& a) {
    if (noise.size() != model.size()) {
        throw std::invalid_argument("noise must cover every node");
    }
    for (std::size_t j = 0; j < noise.size(); ++j) {
        if (std::isnan(noise[j]) && !a.value_of(j)) {
            throw std::invalid_argument("missing noise entry for node '" + model.id(j) + "'");
        }
    }
    model.validate(a);
    return model.forward(noise, &a);
}

} // namespace recourse

#pragma once

#include <algorithm>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "recourse/random.hpp"

namespace recourse::nsga2 {

/// Two objectives: cost, and constraint violation (zero when feasible).
struct fitness {
    double cost = 0.0;
    double violation = 0.0;

    [[nodiscard]] bool feasible() const noexcept { return violation <= 0.0; }
    friend bool operator==(const fitness&, const fitness&) = default;
};

/// Deb's constrained domination: feasible beats infeasible, smaller violation
/// wins between infeasible points, Pareto domination between feasible ones.
inline bool constrained_dominates(const fitness& a, const fitness& b) noexcept {
    if (a.feasible() != b.feasible()) {
        return a.feasible();
    }
    if (!a.feasible()) {
        return a.violation < b.violation;
    }
    return (a.cost <= b.cost && a.violation <= b.violation) && (a.cost < b.cost || a.violation < b.violation);
}

/// Fronts of indices; front 0 is non-dominated. Under constrained
/// domination with these two objectives, feasible points only compete on
/// cost and infeasible ones only on violation, so fronts are the groups of
/// equal cost (feasible, ascending) followed by the groups of equal
/// violation (infeasible, ascending). Members of a front keep index order.
inline std::vector<std::vector<std::size_t>> fast_nondominated_sort(const std::vector<fitness>& f) {
    std::vector<std::size_t> order(f.size());
    std::iota(order.begin(), order.end(), 0);
    auto key = [&](std::size_t i) { return f[i].feasible() ? f[i].cost : f[i].violation; };
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (f[a].feasible() != f[b].feasible()) {
            return f[a].feasible();
        }
        return key(a) < key(b);
    });
    std::vector<std::vector<std::size_t>> fronts;
    for (std::size_t k = 0; k < order.size(); ++k) {
        const std::size_t i = order[k];
        const bool same = k > 0 && f[order[k - 1]].feasible() == f[i].feasible() && key(order[k - 1]) == key(i);
        if (!same) {
            fronts.emplace_back();
        }
        fronts.back().push_back(i);
    }
    return fronts;
}

/// Crowding distance of each member of one front, in the order given.
inline std::vector<double> crowding_distance(const std::vector<fitness>& f, const std::vector<std::size_t>& front) {
    const std::size_t n = front.size();
    std::vector<double> dist(n, 0.0);
    if (n <= 2) {
        std::fill(dist.begin(), dist.end(), std::numeric_limits<double>::infinity());
        return dist;
    }
    std::vector<std::size_t> order(n);
    for (int objective = 0; objective < 2; ++objective) {
        auto value = [&](std::size_t k) { return objective == 0 ? f[front[k]].cost : f[front[k]].violation; };
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return value(a) < value(b); });
        const double span = value(order.back()) - value(order.front());
        dist[order.front()] = std::numeric_limits<double>::infinity();
        dist[order.back()] = std::numeric_limits<double>::infinity();
        if (!(span > 0.0)) {
            continue;
        }
        for (std::size_t k = 1; k + 1 < n; ++k) {
            dist[order[k]] += (value(order[k + 1]) - value(order[k - 1])) / span;
        }
    }
    return dist;
}

template <class P>
concept problem = requires(const P& p, typename P::genome_type& g, const typename P::genome_type& cg, rng_engine& rng,
                           std::size_t i) {
    { p.initial(rng, i) } -> std::same_as<typename P::genome_type>;
    { p.crossover(g, g, rng) };
    { p.mutate(g, rng) };
    { p.evaluate(cg) } -> std::same_as<fitness>;
    { p.before(cg, cg) } -> std::convertible_to<bool>;
} && std::equality_comparable<typename P::genome_type>;

struct options {
    std::size_t population = 100;
    std::size_t generations = 200;
    double crossover_probability = 0.3;
};

template <class Genome>
struct individual {
    Genome genome;
    fitness fit;
    std::size_t rank = 0;
    double crowding = 0.0;
};

template <class Genome>
struct result {
    std::vector<individual<Genome>> population;
    std::size_t evaluations = 0;
    /// Min-cost feasible member, or min-violation member if none is feasible.
    std::size_t best = 0;
};

namespace detail {

template <class Genome>
void assign_rank_and_crowding(std::vector<individual<Genome>>& pop) {
    std::vector<fitness> f;
    f.reserve(pop.size());
    for (const auto& ind : pop) {
        f.push_back(ind.fit);
    }
    const auto fronts = fast_nondominated_sort(f);
    for (std::size_t r = 0; r < fronts.size(); ++r) {
        const auto dist = crowding_distance(f, fronts[r]);
        for (std::size_t k = 0; k < fronts[r].size(); ++k) {
            pop[fronts[r][k]].rank = r;
            pop[fronts[r][k]].crowding = dist[k];
        }
    }
}

template <class Genome>
bool crowded_less(const individual<Genome>& a, const individual<Genome>& b) {
    return a.rank < b.rank || (a.rank == b.rank && a.crowding > b.crowding);
}

} // namespace detail

/// Elitist (mu + lambda) NSGA-II with binary crowded tournaments.
template <problem P>
result<typename P::genome_type> run(const P& prob, const options& opts, std::uint64_t seed) {
    using genome = typename P::genome_type;
    const std::size_t n = std::max<std::size_t>(opts.population, 2);
    rng_engine rng(seed);
    result<genome> out;

    auto evaluated = [&](genome g) {
        individual<genome> ind{std::move(g), {}, 0, 0.0};
        ind.fit = prob.evaluate(ind.genome);
        ++out.evaluations;
        return ind;
    };

    std::vector<individual<genome>> pop;
    pop.reserve(2 * n);
    for (std::size_t i = 0; i < n; ++i) {
        pop.push_back(evaluated(prob.initial(rng, i)));
    }
    detail::assign_rank_and_crowding(pop);

    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    auto tournament = [&]() -> const individual<genome>& {
        const auto& a = pop[pick(rng)];
        const auto& b = pop[pick(rng)];
        return detail::crowded_less(b, a) ? b : a;
    };

    for (std::size_t gen = 0; gen < opts.generations; ++gen) {
        std::vector<genome> children;
        children.reserve(n + 1);
        while (children.size() < n) {
            genome a = tournament().genome;
            genome b = tournament().genome;
            if (uniform01(rng) < opts.crossover_probability) {
                prob.crossover(a, b, rng);
            }
            prob.mutate(a, rng);
            prob.mutate(b, rng);
            children.push_back(std::move(a));
            children.push_back(std::move(b));
        }
        children.resize(n);
        for (auto& c : children) {
            pop.push_back(evaluated(std::move(c)));
        }
        detail::assign_rank_and_crowding(pop);
        std::vector<std::size_t> order(pop.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t x, std::size_t y) { return detail::crowded_less(pop[x], pop[y]); });
        // Survivors in crowded order, with exact duplicates deferred so the
        // population does not collapse onto copies of the incumbent.
        std::vector<std::size_t> chosen;
        std::vector<std::size_t> duplicates;
        for (std::size_t k : order) {
            const bool seen = std::any_of(chosen.begin(), chosen.end(),
                                          [&](std::size_t c) { return pop[c].genome == pop[k].genome; });
            (seen ? duplicates : chosen).push_back(k);
            if (chosen.size() == n) {
                break;
            }
        }
        for (std::size_t k = 0; chosen.size() < n; ++k) {
            chosen.push_back(duplicates[k]);
        }
        std::vector<individual<genome>> next;
        next.reserve(2 * n);
        for (std::size_t k : chosen) {
            next.push_back(std::move(pop[k]));
        }
        pop = std::move(next);
        // Crowding must reflect the surviving population for the next tournaments.
        detail::assign_rank_and_crowding(pop);
    }

    std::size_t best = 0;
    for (std::size_t i = 1; i < pop.size(); ++i) {
        const fitness& c = pop[i].fit;
        const fitness& b = pop[best].fit;
        bool better = false;
        if (c.feasible() != b.feasible()) {
            better = c.feasible();
        } else if (c.feasible()) {
            better = c.cost < b.cost || (c.cost == b.cost && prob.before(pop[i].genome, pop[best].genome));
        } else {
            better = c.violation < b.violation ||
                     (c.violation == b.violation &&
                      (c.cost < b.cost || (c.cost == b.cost && prob.before(pop[i].genome, pop[best].genome))));
        }
        if (better) {
            best = i;
        }
    }
    out.population = std::move(pop);
    out.best = best;
    return out;
}

} // namespace recourse::nsga2

#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "symdef/errors.hpp"
#include "symdef/expr.hpp"
#include "symdef/metadata.hpp"
#include "symdef/parallel.hpp"
#include "symdef/rng.hpp"
#include "symdef/space.hpp"
#include "symdef/surrogate.hpp"

namespace symdef {

// ---------------------------------------------------------------------------
// Objectives and fitness
//
// Minimization on both axes: loss objective = 1 - mean normalized score
// across the training surrogates, depth objective = max component depth.

struct Objectives {
    double loss = 0;
    double depth = 0;
};

struct Individual {
    SymbolicConfiguration config;
    Objectives objectives;
    std::size_t node_count = 0;
};

struct EvolutionParams {
    std::size_t mu = 20;
    std::size_t lambda = 100;
    std::size_t generations = 1000;
    int init_max_depth = 3;
    double crossover_prob = 0.5;
    std::size_t patience = 100;  // generations without best-loss improvement; 0 disables
    bool constant_only = false;
    std::uint64_t seed = 0;
};

using SurrogatePtrs = std::vector<const SurrogateModel*>;

// Scores one configuration on one dataset: realize, clamp into the observed
// ranges, query the surrogate. Any NaN component makes the dataset score 0.
inline double score_configuration(const SymbolicConfiguration& config, const MetaFeatures& mf,
                                  const SurrogateModel& model) {
    RealizedConfiguration realized =
        realize_configuration(config, mf, std::span<const HyperparameterDef>(model.hyperparameters()));
    if (realized.any_invalid()) return 0.0;
    return predict(model, clamp_to_observed(std::move(realized), model));
}

inline Objectives fitness(const SymbolicConfiguration& config, const SurrogatePtrs& surrogates,
                          const MetaFeatureTable& mf_table) {
    if (surrogates.empty()) throw ValidationError("fitness: no surrogates");
    double total = 0;
    for (const SurrogateModel* model : surrogates) {
        const auto it = mf_table.find(model->dataset_id());
        if (it == mf_table.end())
            throw ValidationError("no meta-features for dataset '" + model->dataset_id() + "'");
        total += score_configuration(config, it->second, *model);
    }
    Objectives objectives;
    objectives.loss = 1.0 - total / static_cast<double>(surrogates.size());
    objectives.depth = static_cast<double>(max_component_depth(config));
    return objectives;
}

inline Individual make_individual(SymbolicConfiguration config, const SurrogatePtrs& surrogates,
                                  const MetaFeatureTable& mf_table) {
    Individual ind;
    ind.objectives = fitness(config, surrogates, mf_table);
    ind.node_count = total_node_count(config);
    ind.config = std::move(config);
    return ind;
}

// ---------------------------------------------------------------------------
// NSGA-II machinery

inline bool dominates(const Objectives& a, const Objectives& b) {
    if (a.loss > b.loss || a.depth > b.depth) return false;
    return a.loss < b.loss || a.depth < b.depth;
}

inline std::vector<std::vector<std::size_t>> nondominated_sort(std::span<const Objectives> points) {
    const std::size_t n = points.size();
    std::vector<std::vector<std::size_t>> dominated(n);
    std::vector<std::size_t> domination_count(n, 0);
    std::vector<std::vector<std::size_t>> fronts;
    std::vector<std::size_t> current;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            if (dominates(points[i], points[j])) {
                dominated[i].push_back(j);
            } else if (dominates(points[j], points[i])) {
                ++domination_count[i];
            }
        }
        if (domination_count[i] == 0) current.push_back(i);
    }
    while (!current.empty()) {
        fronts.push_back(current);
        std::vector<std::size_t> next;
        for (std::size_t i : fronts.back()) {
            for (std::size_t j : dominated[i]) {
                if (--domination_count[j] == 0) next.push_back(j);
            }
        }
        std::sort(next.begin(), next.end());
        current = std::move(next);
    }
    return fronts;
}

// Boundary points get infinite distance; interior points accumulate
// normalized objective gaps. Returned in the front's order.
inline std::vector<double> crowding_distance(std::span<const Objectives> points,
                                             const std::vector<std::size_t>& front) {
    const std::size_t n = front.size();
    std::vector<double> distance(n, 0.0);
    if (n == 0) return distance;
    if (n <= 2) {
        std::fill(distance.begin(), distance.end(), std::numeric_limits<double>::infinity());
        return distance;
    }
    for (int objective = 0; objective < 2; ++objective) {
        auto value = [&](std::size_t front_pos) {
            const Objectives& o = points[front[front_pos]];
            return objective == 0 ? o.loss : o.depth;
        };
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            if (value(a) != value(b)) return value(a) < value(b);
            return front[a] < front[b];
        });
        distance[order.front()] = std::numeric_limits<double>::infinity();
        distance[order.back()] = std::numeric_limits<double>::infinity();
        const double span = value(order.back()) - value(order.front());
        if (span <= 0) continue;
        for (std::size_t k = 1; k + 1 < n; ++k) {
            distance[order[k]] += (value(order[k + 1]) - value(order[k - 1])) / span;
        }
    }
    return distance;
}

// Binary tournament: lower front wins, then larger crowding distance, then a
// fair coin.
inline std::size_t tournament_winner(std::size_t i, std::size_t j,
                                     std::span<const std::size_t> ranks,
                                     std::span<const double> crowding, Rng& rng) {
    if (ranks[i] != ranks[j]) return ranks[i] < ranks[j] ? i : j;
    if (crowding[i] != crowding[j]) return crowding[i] > crowding[j] ? i : j;
    return rng.coin() ? i : j;
}

// The two entrants are drawn independently and may coincide.
inline std::size_t tournament_pick(std::span<const std::size_t> ranks,
                                   std::span<const double> crowding, Rng& rng) {
    const std::size_t n = ranks.size();
    const std::size_t i = static_cast<std::size_t>(rng.uniform_index(n));
    const std::size_t j = static_cast<std::size_t>(rng.uniform_index(n));
    return tournament_winner(i, j, ranks, crowding, rng);
}

// ---------------------------------------------------------------------------
// Variation operators

// Uniform crossover on components; at least one component must come from each
// parent, so all-from-a / all-from-b masks are redrawn.
inline SymbolicConfiguration crossover(const SymbolicConfiguration& a,
                                       const SymbolicConfiguration& b, Rng& rng) {
    if (a.algorithm != b.algorithm || a.components.size() != b.components.size())
        throw ValidationError("crossover: mismatched configurations");
    const std::size_t m = a.components.size();
    if (m < 2) throw ValidationError("crossover requires at least two components");
    std::vector<bool> from_a(m);
    for (;;) {
        bool all_a = true, all_b = true;
        for (std::size_t i = 0; i < m; ++i) {
            from_a[i] = rng.coin();
            (from_a[i] ? all_b : all_a) = false;
        }
        if (!all_a && !all_b) break;
    }
    SymbolicConfiguration child;
    child.algorithm = a.algorithm;
    child.components.reserve(m);
    for (std::size_t i = 0; i < m; ++i) {
        child.components.push_back(from_a[i] ? a.components[i] : b.components[i]);
    }
    return child;
}

enum class MutationKind {
    NodeInsertion,
    ShrinkNode,
    NodeReplacement,
    TerminalReplacement,
    MutateEphemeral
};

namespace detail {

using NodePath = std::vector<std::size_t>;

template <typename Pred>
inline void collect_paths(const Expr& e, const Pred& pred, NodePath& current,
                          std::vector<NodePath>& out) {
    if (pred(e)) out.push_back(current);
    for (std::size_t i = 0; i < e.children().size(); ++i) {
        current.push_back(i);
        collect_paths(e.children()[i], pred, current, out);
        current.pop_back();
    }
}

template <typename Pred>
inline std::vector<NodePath> collect_paths(const Expr& e, const Pred& pred) {
    std::vector<NodePath> out;
    NodePath current;
    collect_paths(e, pred, current, out);
    return out;
}

inline const Expr& subtree_at(const Expr& root, std::span<const std::size_t> path) {
    const Expr* node = &root;
    for (std::size_t step : path) node = &node->children()[step];
    return *node;
}

inline Expr replace_at(const Expr& root, std::span<const std::size_t> path, Expr replacement) {
    if (path.empty()) return replacement;
    std::vector<Expr> children = root.children();
    children[path.front()] = replace_at(children[path.front()], path.subspan(1), std::move(replacement));
    return Expr::operation(root.op(), std::move(children));
}

// Gaussian noise proportional to the value. Float results must land in
// (0, 1], integer deltas are rounded, forced nonzero, and the result clamped
// to [1, 1024]; both must actually change the value. Bounded retries with a
// fresh-sample fallback keep this total for hand-built out-of-range values.
inline double mutate_ephemeral_value(Kind kind, double value, Rng& rng) {
    constexpr int kMaxTries = 64;
    if (kind == Kind::Float) {
        for (int attempt = 0; attempt < kMaxTries; ++attempt) {
            const double candidate = value + rng.normal() * 0.2 * std::abs(value);
            if (candidate > 0.0 && candidate <= 1.0 && candidate != value) return candidate;
        }
        double fresh;
        do {
            fresh = sample_ephemeral(Kind::Float, rng);
        } while (fresh == value);
        return fresh;
    }
    for (int attempt = 0; attempt < kMaxTries; ++attempt) {
        const double noise = rng.normal() * 0.2 * std::abs(value);
        double delta = round_half_away(noise);
        if (delta == 0.0) delta = noise >= 0.0 ? 1.0 : -1.0;
        const double candidate = std::clamp(value + delta, 1.0, 1024.0);
        if (candidate != value) return candidate;
    }
    double fresh;
    do {
        fresh = sample_ephemeral(Kind::Integer, rng);
    } while (fresh == value);
    return fresh;
}

inline Expr apply_node_insertion(const Expr& component, Rng& rng, bool constant_only) {
    const std::vector<NodePath> targets = collect_paths(component, [](const Expr&) { return true; });
    const NodePath& path = targets[static_cast<std::size_t>(rng.uniform_index(targets.size()))];
    const Op op = kAllOps[static_cast<std::size_t>(rng.uniform_index(kAllOps.size()))];
    const std::size_t k = static_cast<std::size_t>(arity(op));
    const std::size_t keep = static_cast<std::size_t>(rng.uniform_index(k));
    std::vector<Expr> children;
    children.reserve(k);
    for (std::size_t i = 0; i < k; ++i) {
        if (i == keep) {
            children.push_back(subtree_at(component, path));
        } else {
            children.push_back(random_any_terminal(rng, constant_only));
        }
    }
    return replace_at(component, path, Expr::operation(op, std::move(children)));
}

struct ShrinkTarget {
    NodePath path;
    std::size_t child;
};

inline std::vector<ShrinkTarget> shrink_targets(const Expr& component, Kind slot) {
    std::vector<ShrinkTarget> out;
    const std::vector<NodePath> operators =
        collect_paths(component, [](const Expr& e) { return !e.is_terminal(); });
    for (const NodePath& path : operators) {
        const Expr& node = subtree_at(component, path);
        for (std::size_t c = 0; c < node.children().size(); ++c) {
            if (path.empty() && !node.children()[c].fits_slot(slot)) continue;
            out.push_back({path, c});
        }
    }
    return out;
}

inline Expr apply_shrink(const Expr& component, Kind slot, Rng& rng) {
    const std::vector<ShrinkTarget> targets = shrink_targets(component, slot);
    const ShrinkTarget& target = targets[static_cast<std::size_t>(rng.uniform_index(targets.size()))];
    Expr promoted = subtree_at(component, target.path).children()[target.child];
    return replace_at(component, target.path, std::move(promoted));
}

inline std::vector<NodePath> replacement_targets(const Expr& component) {
    // quaternary has no same-arity alternative
    return collect_paths(component,
                         [](const Expr& e) { return !e.is_terminal() && arity(e.op()) <= 2; });
}

inline Expr apply_node_replacement(const Expr& component, Rng& rng) {
    const std::vector<NodePath> targets = replacement_targets(component);
    const NodePath& path = targets[static_cast<std::size_t>(rng.uniform_index(targets.size()))];
    const Expr& node = subtree_at(component, path);
    std::vector<Op> alternatives;
    for (Op op : kAllOps) {
        if (op != node.op() && arity(op) == arity(node.op())) alternatives.push_back(op);
    }
    const Op replacement =
        alternatives[static_cast<std::size_t>(rng.uniform_index(alternatives.size()))];
    return replace_at(component, path, Expr::operation(replacement, node.children()));
}

inline Expr apply_terminal_replacement(const Expr& component, Rng& rng, bool constant_only) {
    const std::vector<NodePath> targets =
        collect_paths(component, [](const Expr& e) { return e.is_terminal(); });
    const NodePath& path = targets[static_cast<std::size_t>(rng.uniform_index(targets.size()))];
    const Expr& terminal = subtree_at(component, path);
    const Kind cls = terminal.term_class();

    std::vector<Expr> options;
    if (!constant_only) {
        const auto& pool = cls == Kind::Integer ? kIntegerMetaFeatures : kFloatMetaFeatures;
        for (MetaFeatureId id : pool) {
            if (terminal.node() == Expr::NodeKind::MetaFeature && terminal.meta_id() == id) continue;
            options.push_back(Expr::meta(id));
        }
    }
    // the last option is always a fresh ephemeral of the same class
    const std::size_t choice = static_cast<std::size_t>(rng.uniform_index(options.size() + 1));
    if (choice < options.size()) return replace_at(component, path, std::move(options[choice]));
    double fresh;
    do {
        fresh = sample_ephemeral(cls, rng);
    } while (terminal.node() == Expr::NodeKind::Ephemeral && fresh == terminal.ephemeral_value());
    return replace_at(component, path, Expr::ephemeral(cls, fresh));
}

inline Expr apply_mutate_ephemeral(const Expr& component, Rng& rng) {
    const std::vector<NodePath> targets = collect_paths(
        component, [](const Expr& e) { return e.node() == Expr::NodeKind::Ephemeral; });
    const NodePath& path = targets[static_cast<std::size_t>(rng.uniform_index(targets.size()))];
    const Expr& terminal = subtree_at(component, path);
    const double mutated =
        mutate_ephemeral_value(terminal.ephemeral_kind(), terminal.ephemeral_value(), rng);
    return replace_at(component, path, Expr::ephemeral(terminal.ephemeral_kind(), mutated));
}

inline bool has_node(const Expr& e, const auto& pred) {
    if (pred(e)) return true;
    return std::any_of(e.children().begin(), e.children().end(),
                       [&](const Expr& c) { return has_node(c, pred); });
}

}  // namespace detail

// The mutations that lead to valid offspring for this component. Insertion
// and terminal replacement are always available.
inline std::vector<MutationKind> applicable_mutations(const Expr& component, Kind slot,
                                                      bool /*constant_only*/) {
    std::vector<MutationKind> kinds = {MutationKind::NodeInsertion};
    if (!detail::shrink_targets(component, slot).empty()) kinds.push_back(MutationKind::ShrinkNode);
    if (!detail::replacement_targets(component).empty())
        kinds.push_back(MutationKind::NodeReplacement);
    kinds.push_back(MutationKind::TerminalReplacement);
    if (detail::has_node(component,
                         [](const Expr& e) { return e.node() == Expr::NodeKind::Ephemeral; })) {
        kinds.push_back(MutationKind::MutateEphemeral);
    }
    return kinds;
}

// Applies exactly one mutation operator to exactly one component. The
// component is drawn uniformly, then one operator uniformly among those
// applicable to it. The configuration root itself is never a target.
inline SymbolicConfiguration mutate(const SymbolicConfiguration& config, const SearchSpace& space,
                                    Rng& rng, bool constant_only = false) {
    if (config.components.empty()) throw ValidationError("mutate: empty configuration");
    const std::size_t ci = static_cast<std::size_t>(rng.uniform_index(config.components.size()));
    const Kind slot = space.tunable[ci].kind;
    const Expr& component = config.components[ci];
    const std::vector<MutationKind> kinds = applicable_mutations(component, slot, constant_only);
    const MutationKind kind = kinds[static_cast<std::size_t>(rng.uniform_index(kinds.size()))];

    Expr mutated = [&] {
        switch (kind) {
            case MutationKind::NodeInsertion:
                return detail::apply_node_insertion(component, rng, constant_only);
            case MutationKind::ShrinkNode: return detail::apply_shrink(component, slot, rng);
            case MutationKind::NodeReplacement: return detail::apply_node_replacement(component, rng);
            case MutationKind::TerminalReplacement:
                return detail::apply_terminal_replacement(component, rng, constant_only);
            case MutationKind::MutateEphemeral: return detail::apply_mutate_ephemeral(component, rng);
        }
        return component;
    }();
    assert(well_typed(mutated, slot));

    SymbolicConfiguration out = config;
    out.components[ci] = std::move(mutated);
    return out;
}

// ---------------------------------------------------------------------------
// Evolution loop: mu+lambda with NSGA-II survival. Offspring come from either
// crossover or mutation, never both. Offspring RNG streams derive from
// (seed, generation, index), so fitness evaluation can run on any number of
// threads without changing the outcome.

struct TraceRow {
    std::size_t generation = 0;
    double best_loss = 0;
    std::size_t front1_size = 0;
};

struct EvolveResult {
    std::vector<Individual> population;
    std::vector<Individual> archive;  // final nondominated set
    std::vector<TraceRow> trace;
    std::size_t generations_run = 0;
};

namespace detail {

inline constexpr std::uint64_t kStreamInit = 201;
inline constexpr std::uint64_t kStreamOffspring = 202;

struct RankedPopulation {
    std::vector<std::size_t> ranks;
    std::vector<double> crowding;
    std::size_t front1_size = 0;
};

inline RankedPopulation rank_population(std::span<const Objectives> points) {
    RankedPopulation ranked;
    ranked.ranks.assign(points.size(), 0);
    ranked.crowding.assign(points.size(), 0.0);
    const auto fronts = nondominated_sort(points);
    for (std::size_t f = 0; f < fronts.size(); ++f) {
        const std::vector<double> dist = crowding_distance(points, fronts[f]);
        for (std::size_t k = 0; k < fronts[f].size(); ++k) {
            ranked.ranks[fronts[f][k]] = f;
            ranked.crowding[fronts[f][k]] = dist[k];
        }
    }
    ranked.front1_size = fronts.empty() ? 0 : fronts.front().size();
    return ranked;
}

inline std::vector<Objectives> objectives_of(std::span<const Individual> pop) {
    std::vector<Objectives> points;
    points.reserve(pop.size());
    for (const Individual& ind : pop) points.push_back(ind.objectives);
    return points;
}

inline std::vector<Individual> nsga2_survivors(std::vector<Individual> pool, std::size_t mu) {
    const std::vector<Objectives> points = objectives_of(pool);
    const auto fronts = nondominated_sort(points);
    std::vector<Individual> survivors;
    survivors.reserve(mu);
    for (const std::vector<std::size_t>& front : fronts) {
        if (survivors.size() + front.size() <= mu) {
            for (std::size_t idx : front) survivors.push_back(std::move(pool[idx]));
            if (survivors.size() == mu) break;
            continue;
        }
        const std::vector<double> dist = crowding_distance(points, front);
        std::vector<std::size_t> order(front.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            if (dist[a] != dist[b]) return dist[a] > dist[b];
            return front[a] < front[b];
        });
        for (std::size_t k : order) {
            if (survivors.size() == mu) break;
            survivors.push_back(std::move(pool[front[k]]));
        }
        break;
    }
    return survivors;
}

}  // namespace detail

inline EvolveResult evolve(const EvolutionParams& params, const SearchSpace& space,
                           const SurrogatePtrs& surrogates, const MetaFeatureTable& mf_table,
                           unsigned threads = 1) {
    if (params.mu < 2) throw ValidationError("evolve: mu must be at least 2");
    if (params.lambda < 1) throw ValidationError("evolve: lambda must be at least 1");
    if (params.init_max_depth < 0) throw ValidationError("evolve: init_max_depth must be >= 0");
    if (surrogates.empty()) throw ValidationError("evolve: no training surrogates");
    const std::size_t m = space.dimension();

    std::vector<SymbolicConfiguration> init_configs(params.mu);
    for (std::size_t i = 0; i < params.mu; ++i) {
        Rng rng = Rng::derive(params.seed, {detail::kStreamInit, i});
        SymbolicConfiguration config;
        config.algorithm = space.algorithm;
        config.components.reserve(m);
        for (std::size_t j = 0; j < m; ++j) {
            config.components.push_back(
                random_expr(space.tunable[j].kind, params.init_max_depth, rng, params.constant_only));
        }
        init_configs[i] = std::move(config);
    }

    std::vector<Individual> population(params.mu);
    parallel_for(params.mu, threads, [&](std::size_t i) {
        population[i] = make_individual(std::move(init_configs[i]), surrogates, mf_table);
    });

    EvolveResult result;
    auto best_loss_of = [](std::span<const Individual> pop) {
        double best = std::numeric_limits<double>::infinity();
        for (const Individual& ind : pop) best = std::min(best, ind.objectives.loss);
        return best;
    };

    detail::RankedPopulation ranked = detail::rank_population(detail::objectives_of(population));
    double best_so_far = best_loss_of(population);
    result.trace.push_back({0, best_so_far, ranked.front1_size});

    std::size_t stall = 0;
    for (std::size_t gen = 1; gen <= params.generations; ++gen) {
        std::vector<SymbolicConfiguration> offspring_configs(params.lambda);
        for (std::size_t k = 0; k < params.lambda; ++k) {
            Rng rng = Rng::derive(params.seed, {detail::kStreamOffspring, gen, k});
            const bool use_crossover = m >= 2 && rng.coin(params.crossover_prob);
            if (use_crossover) {
                const std::size_t p1 = tournament_pick(ranked.ranks, ranked.crowding, rng);
                const std::size_t p2 = tournament_pick(ranked.ranks, ranked.crowding, rng);
                offspring_configs[k] =
                    crossover(population[p1].config, population[p2].config, rng);
            } else {
                const std::size_t p = tournament_pick(ranked.ranks, ranked.crowding, rng);
                offspring_configs[k] = mutate(population[p].config, space, rng, params.constant_only);
            }
        }

        std::vector<Individual> offspring(params.lambda);
        parallel_for(params.lambda, threads, [&](std::size_t k) {
            offspring[k] = make_individual(std::move(offspring_configs[k]), surrogates, mf_table);
        });

        std::vector<Individual> pool = std::move(population);
        pool.insert(pool.end(), std::make_move_iterator(offspring.begin()),
                    std::make_move_iterator(offspring.end()));
        population = detail::nsga2_survivors(std::move(pool), params.mu);
        ranked = detail::rank_population(detail::objectives_of(population));

        const double best = best_loss_of(population);
        result.trace.push_back({gen, best, ranked.front1_size});
        result.generations_run = gen;
        if (best < best_so_far) {
            best_so_far = best;
            stall = 0;
        } else {
            ++stall;
        }
        if (params.patience > 0 && stall >= params.patience) break;
    }

    for (std::size_t i = 0; i < population.size(); ++i) {
        if (ranked.ranks[i] == 0) result.archive.push_back(population[i]);
    }
    result.population = std::move(population);
    return result;
}

// Deterministic pick from the archive: lowest loss, then smallest depth, then
// fewest nodes, then lexicographically smallest printed form.
inline const Individual& select_default(std::span<const Individual> archive) {
    if (archive.empty()) throw ValidationError("select_default: empty archive");
    const Individual* best = &archive.front();
    for (const Individual& candidate : archive.subspan(1)) {
        bool better = false;
        if (candidate.objectives.loss != best->objectives.loss) {
            better = candidate.objectives.loss < best->objectives.loss;
        } else if (candidate.objectives.depth != best->objectives.depth) {
            better = candidate.objectives.depth < best->objectives.depth;
        } else if (candidate.node_count != best->node_count) {
            better = candidate.node_count < best->node_count;
        } else {
            better = printed(candidate.config) < printed(best->config);
        }
        if (better) best = &candidate;
    }
    return *best;
}

// ---------------------------------------------------------------------------
// Run artifacts

inline nlohmann::json evolution_params_to_json(const EvolutionParams& params) {
    return {{"mu", params.mu},
            {"lambda", params.lambda},
            {"generations", params.generations},
            {"init_max_depth", params.init_max_depth},
            {"crossover_prob", params.crossover_prob},
            {"patience", params.patience},
            {"constant_only", params.constant_only},
            {"seed", params.seed}};
}

inline nlohmann::json individual_to_json(const Individual& ind) {
    nlohmann::json formulas = nlohmann::json::array();
    for (const Expr& e : ind.config.components) formulas.push_back(print_formula(e));
    return {{"formulas", std::move(formulas)},
            {"loss", ind.objectives.loss},
            {"depth", ind.objectives.depth},
            {"node_count", ind.node_count}};
}

inline nlohmann::json run_manifest(const EvolutionParams& params, const SearchSpace& space,
                                   const std::vector<std::string>& dataset_ids,
                                   const EvolveResult& result) {
    nlohmann::json archive = nlohmann::json::array();
    for (const Individual& ind : result.archive) archive.push_back(individual_to_json(ind));
    nlohmann::json trace = nlohmann::json::array();
    for (const TraceRow& row : result.trace) {
        trace.push_back({{"generation", row.generation},
                         {"best_loss", row.best_loss},
                         {"front1_size", row.front1_size}});
    }
    return {{"algorithm", space.algorithm},
            {"params", evolution_params_to_json(params)},
            {"training_datasets", dataset_ids},
            {"selected", individual_to_json(select_default(result.archive))},
            {"archive", std::move(archive)},
            {"trace", std::move(trace)},
            {"generations_run", result.generations_run}};
}

inline void write_trace_csv(const std::filesystem::path& path, std::span<const TraceRow> trace) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write trace file: " + path.string());
    out << "generation,best_loss,front1_size\n";
    for (const TraceRow& row : trace) {
        out << row.generation << ',' << format_double(row.best_loss) << ',' << row.front1_size
            << '\n';
    }
}

}  // namespace symdef

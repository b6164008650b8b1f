#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "symdef/errors.hpp"
#include "symdef/evolve.hpp"
#include "symdef/expr.hpp"
#include "symdef/metadata.hpp"
#include "symdef/rng.hpp"
#include "symdef/space.hpp"
#include "symdef/stats.hpp"
#include "symdef/surrogate.hpp"

namespace symdef {

// ---------------------------------------------------------------------------
// Optimistic random search: draw `budget` distinct metadata rows, keep the
// best normalized score. Assumes perfect generalization, hence "optimistic".

inline std::vector<double> optimistic_random_search(const EvaluationTable& table,
                                                    const std::string& dataset_id,
                                                    std::size_t budget, std::size_t reps, Rng& rng) {
    const DatasetGroup& group = table.group(dataset_id);
    const std::size_t n = group.records.size();
    if (budget < 1) throw ValidationError("random search: budget must be at least 1");
    if (budget > n)
        throw ValidationError("random search: budget " + std::to_string(budget) + " exceeds " +
                              std::to_string(n) + " rows of dataset '" + dataset_id + "'");
    std::vector<double> results;
    results.reserve(reps);
    std::vector<std::size_t> indices(n);
    for (std::size_t rep = 0; rep < reps; ++rep) {
        std::iota(indices.begin(), indices.end(), std::size_t{0});
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < budget; ++i) {
            const std::size_t j = i + static_cast<std::size_t>(rng.uniform_index(n - i));
            std::swap(indices[i], indices[j]);
            best = std::max(best, group.scores[indices[i]]);
        }
        results.push_back(best);
    }
    return results;
}

// ---------------------------------------------------------------------------
// 1-NN meta-model: min-max scale the meta-features over train + heldout,
// find the nearest training dataset under L1, return its best known
// configuration. Constant meta-feature columns contribute zero distance.

struct Knn1Result {
    std::string neighbor;
    std::vector<double> values;  // space order
};

inline Knn1Result knn1_default(const MetaFeatureTable& mf_table, const std::string& heldout,
                               const EvaluationTable& table) {
    const auto heldout_mf = mf_table.find(heldout);
    if (heldout_mf == mf_table.end())
        throw ValidationError("no meta-features for heldout dataset '" + heldout + "'");
    std::vector<std::string> train_ids;
    for (const DatasetGroup& g : table.groups()) {
        if (g.id == heldout) continue;
        if (!mf_table.count(g.id))
            throw ValidationError("no meta-features for dataset '" + g.id + "'");
        train_ids.push_back(g.id);
    }
    if (train_ids.empty()) throw ValidationError("knn1: empty training set");

    std::array<double, 8> lo{};
    std::array<double, 8> hi{};
    lo.fill(std::numeric_limits<double>::infinity());
    hi.fill(-std::numeric_limits<double>::infinity());
    auto absorb = [&](const MetaFeatures& mf) {
        for (std::size_t f = 0; f < kAllMetaFeatures.size(); ++f) {
            const double v = value_of(mf, kAllMetaFeatures[f]);
            lo[f] = std::min(lo[f], v);
            hi[f] = std::max(hi[f], v);
        }
    };
    absorb(heldout_mf->second);
    for (const std::string& id : train_ids) absorb(mf_table.at(id));

    auto scaled = [&](const MetaFeatures& mf, std::size_t f) {
        if (hi[f] == lo[f]) return 0.0;
        return (value_of(mf, kAllMetaFeatures[f]) - lo[f]) / (hi[f] - lo[f]);
    };

    std::string nearest;
    double nearest_distance = std::numeric_limits<double>::infinity();
    for (const std::string& id : train_ids) {  // sorted ids: ties go to the lowest
        const MetaFeatures& mf = mf_table.at(id);
        double distance = 0;
        for (std::size_t f = 0; f < kAllMetaFeatures.size(); ++f) {
            distance += std::abs(scaled(mf, f) - scaled(heldout_mf->second, f));
        }
        if (distance < nearest_distance) {
            nearest_distance = distance;
            nearest = id;
        }
    }

    const DatasetGroup& group = table.group(nearest);
    std::size_t best_row = 0;
    for (std::size_t r = 1; r < group.records.size(); ++r) {
        if (group.scores[r] > group.scores[best_row]) best_row = r;  // ties: lowest row index
    }
    return {nearest, group.records[best_row].values};
}

// ---------------------------------------------------------------------------
// Rank statistics

struct FriedmanResult {
    double chi_square = 0;
    std::vector<double> mean_ranks;
};

// scores[method][dataset]; rank 1 = best (highest) score per dataset,
// average ranks on ties.
inline FriedmanResult friedman_test(const std::vector<std::vector<double>>& scores) {
    const std::size_t k = scores.size();
    if (k < 2) throw ValidationError("friedman: need at least 2 methods");
    const std::size_t n = scores.front().size();
    if (n < 2) throw ValidationError("friedman: need at least 2 datasets");
    for (const auto& row : scores) {
        if (row.size() != n) throw ValidationError("friedman: ragged score matrix");
    }
    FriedmanResult result;
    result.mean_ranks.assign(k, 0.0);
    std::vector<double> column(k);
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t i = 0; i < k; ++i) column[i] = scores[i][j];
        const std::vector<double> ranks = average_ranks(column, /*descending=*/true);
        for (std::size_t i = 0; i < k; ++i) result.mean_ranks[i] += ranks[i];
    }
    for (double& r : result.mean_ranks) r /= static_cast<double>(n);
    double sum_sq = 0;
    for (double r : result.mean_ranks) sum_sq += r * r;
    const double kd = static_cast<double>(k);
    const double nd = static_cast<double>(n);
    result.chi_square =
        12.0 * nd / (kd * (kd + 1.0)) * (sum_sq - kd * (kd + 1.0) * (kd + 1.0) / 4.0);
    return result;
}

// Critical difference of the Nemenyi post-hoc test. The q constants are the
// studentized range quantiles divided by sqrt(2), as published for k <= 10.
inline double nemenyi_cd(std::size_t k, std::size_t n, double alpha = 0.05) {
    static constexpr std::array<double, 9> q05 = {1.960, 2.343, 2.569, 2.728, 2.850,
                                                  2.949, 3.031, 3.102, 3.164};
    static constexpr std::array<double, 9> q10 = {1.645, 2.052, 2.291, 2.459, 2.589,
                                                  2.693, 2.780, 2.855, 2.920};
    if (k < 2 || k > 10)
        throw ValidationError("nemenyi: k must be in [2, 10], got " + std::to_string(k));
    if (n < 1) throw ValidationError("nemenyi: need at least one dataset");
    const std::array<double, 9>* q = nullptr;
    if (alpha == 0.05) {
        q = &q05;
    } else if (alpha == 0.10) {
        q = &q10;
    } else {
        throw ValidationError("nemenyi: alpha must be 0.05 or 0.10");
    }
    const double kd = static_cast<double>(k);
    return (*q)[k - 2] * std::sqrt(kd * (kd + 1.0) / (6.0 * static_cast<double>(n)));
}

// ---------------------------------------------------------------------------
// External evaluator hook: a user-supplied executable receives a JSON
// configuration file path as its argument and prints a loss to stdout. This
// is how real cross-validation experiments plug in; no trainer is bundled.

inline double run_external_evaluator(const std::string& command, const nlohmann::json& payload) {
    namespace fs = std::filesystem;
    const fs::path tmp =
        fs::temp_directory_path() /
        ("symdef_eval_" + std::to_string(mix64(fnv1a64(payload.dump()))) + ".json");
    {
        std::ofstream out(tmp);
        if (!out) throw IoError("cannot write evaluator payload: " + tmp.string());
        out << payload.dump() << '\n';
    }
    const std::string full = command + " \"" + tmp.string() + "\"";
    FILE* pipe = popen(full.c_str(), "r");
    if (!pipe) {
        fs::remove(tmp);
        throw IoError("cannot launch external evaluator: " + command);
    }
    std::string output;
    char buffer[256];
    while (fgets(buffer, sizeof(buffer), pipe)) output += buffer;
    const int status = pclose(pipe);
    fs::remove(tmp);
    if (status != 0) throw IoError("external evaluator failed with status " + std::to_string(status));
    std::istringstream stream(output);
    double loss = 0;
    if (!(stream >> loss)) throw IoError("external evaluator printed no numeric loss: " + output);
    return loss;
}

// ---------------------------------------------------------------------------
// LODO benchmark

struct LodoParams {
    EvolutionParams evolution;
    std::uint64_t seed = 0;
    std::size_t replications = 10;  // stochastic search methods
    std::vector<std::size_t> rs_budgets = {1, 2, 4, 8, 16, 32};
    std::size_t rs_reps = 30;
    bool include_symbolic = true;
    bool include_constant = true;
    bool include_implementation_defaults = true;
    bool include_knn = true;
    double alpha = 0.05;
    unsigned threads = 1;
    std::string external_command;  // optional user-supplied evaluator
};

struct ScoreRow {
    std::string method;
    std::string dataset_id;
    std::size_t rep = 0;
    double score = 0;
};

struct ConfigurationRow {
    std::string method;
    std::string dataset_id;
    std::size_t rep = 0;
    std::vector<std::string> formulas;
};

struct ExternalRow {
    std::string method;
    std::string dataset_id;
    std::size_t rep = 0;
    double loss = 0;
};

struct MethodAggregate {
    std::string method;
    double mean = 0;
    double sd = 0;
    double mean_rank = 0;
    bool not_significantly_worse = false;  // vs the best mean rank, by Nemenyi CD
};

struct BenchmarkResult {
    std::string algorithm;
    std::vector<std::string> methods;  // canonical order
    std::vector<std::string> dataset_ids;
    std::vector<ScoreRow> scores;
    std::vector<ConfigurationRow> configurations;
    std::vector<ExternalRow> external;
    std::vector<MethodAggregate> aggregates;
    double friedman_chi_square = 0;
    double critical_difference = std::numeric_limits<double>::quiet_NaN();
    double alpha = 0.05;

    nlohmann::json to_json() const {
        nlohmann::json score_rows = nlohmann::json::array();
        for (const ScoreRow& row : scores) {
            score_rows.push_back({{"method", row.method},
                                  {"dataset_id", row.dataset_id},
                                  {"rep", row.rep},
                                  {"score", row.score}});
        }
        nlohmann::json config_rows = nlohmann::json::array();
        for (const ConfigurationRow& row : configurations) {
            config_rows.push_back({{"method", row.method},
                                   {"dataset_id", row.dataset_id},
                                   {"rep", row.rep},
                                   {"formulas", row.formulas}});
        }
        nlohmann::json external_rows = nlohmann::json::array();
        for (const ExternalRow& row : external) {
            external_rows.push_back({{"method", row.method},
                                     {"dataset_id", row.dataset_id},
                                     {"rep", row.rep},
                                     {"loss", row.loss}});
        }
        nlohmann::json aggregate_rows = nlohmann::json::array();
        for (const MethodAggregate& a : aggregates) {
            aggregate_rows.push_back({{"method", a.method},
                                      {"mean", a.mean},
                                      {"sd", a.sd},
                                      {"mean_rank", a.mean_rank},
                                      {"not_significantly_worse", a.not_significantly_worse}});
        }
        nlohmann::json j = {{"algorithm", algorithm},
                            {"methods", methods},
                            {"dataset_ids", dataset_ids},
                            {"scores", std::move(score_rows)},
                            {"configurations", std::move(config_rows)},
                            {"external", std::move(external_rows)},
                            {"aggregates", std::move(aggregate_rows)},
                            {"friedman_chi_square", friedman_chi_square},
                            {"alpha", alpha}};
        if (std::isnan(critical_difference)) {
            j["critical_difference"] = nullptr;
        } else {
            j["critical_difference"] = critical_difference;
        }
        return j;
    }

    static BenchmarkResult from_json(const nlohmann::json& j) {
        BenchmarkResult result;
        try {
            result.algorithm = j.at("algorithm").get<std::string>();
            result.methods = j.at("methods").get<std::vector<std::string>>();
            result.dataset_ids = j.at("dataset_ids").get<std::vector<std::string>>();
            for (const auto& row : j.at("scores")) {
                result.scores.push_back({row.at("method").get<std::string>(),
                                         row.at("dataset_id").get<std::string>(),
                                         row.at("rep").get<std::size_t>(),
                                         row.at("score").get<double>()});
            }
            for (const auto& row : j.at("configurations")) {
                result.configurations.push_back({row.at("method").get<std::string>(),
                                                 row.at("dataset_id").get<std::string>(),
                                                 row.at("rep").get<std::size_t>(),
                                                 row.at("formulas").get<std::vector<std::string>>()});
            }
            for (const auto& row : j.at("external")) {
                result.external.push_back({row.at("method").get<std::string>(),
                                           row.at("dataset_id").get<std::string>(),
                                           row.at("rep").get<std::size_t>(),
                                           row.at("loss").get<double>()});
            }
            for (const auto& row : j.at("aggregates")) {
                result.aggregates.push_back({row.at("method").get<std::string>(),
                                             row.at("mean").get<double>(),
                                             row.at("sd").get<double>(),
                                             row.at("mean_rank").get<double>(),
                                             row.at("not_significantly_worse").get<bool>()});
            }
            result.friedman_chi_square = j.at("friedman_chi_square").get<double>();
            result.alpha = j.at("alpha").get<double>();
            const auto& cd = j.at("critical_difference");
            result.critical_difference =
                cd.is_null() ? std::numeric_limits<double>::quiet_NaN() : cd.get<double>();
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError(std::string("malformed benchmark-result JSON: ") + e.what());
        }
        return result;
    }
};

namespace detail {

inline constexpr std::uint64_t kStreamLodoFold = 301;
inline constexpr std::uint64_t kStreamSymbolic = 302;
inline constexpr std::uint64_t kStreamConstant = 303;
inline constexpr std::uint64_t kStreamRandomSearch = 304;

// Per-dataset mean over reps, for ranks and the pairwise report.
inline std::map<std::string, std::map<std::string, double>> per_dataset_means(
    const BenchmarkResult& result) {
    std::map<std::string, std::map<std::string, std::pair<double, std::size_t>>> acc;
    for (const ScoreRow& row : result.scores) {
        auto& cell = acc[row.method][row.dataset_id];
        cell.first += row.score;
        ++cell.second;
    }
    std::map<std::string, std::map<std::string, double>> means;
    for (const auto& [method, per_dataset] : acc) {
        for (const auto& [dataset, cell] : per_dataset) {
            means[method][dataset] = cell.first / static_cast<double>(cell.second);
        }
    }
    return means;
}

}  // namespace detail

inline void finalize_benchmark(BenchmarkResult& result, double alpha) {
    const auto means = detail::per_dataset_means(result);
    const std::size_t k = result.methods.size();
    const std::size_t n = result.dataset_ids.size();

    std::vector<std::vector<double>> matrix(k, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < k; ++i) {
        const auto& per_dataset = means.at(result.methods[i]);
        for (std::size_t j = 0; j < n; ++j) matrix[i][j] = per_dataset.at(result.dataset_ids[j]);
    }
    const FriedmanResult friedman = friedman_test(matrix);
    result.friedman_chi_square = friedman.chi_square;
    result.alpha = alpha;
    result.critical_difference = std::numeric_limits<double>::quiet_NaN();
    if (k <= 10) result.critical_difference = nemenyi_cd(k, n, alpha);

    const double best_rank = *std::min_element(friedman.mean_ranks.begin(), friedman.mean_ranks.end());
    result.aggregates.clear();
    for (std::size_t i = 0; i < k; ++i) {
        MethodAggregate aggregate;
        aggregate.method = result.methods[i];
        double mean = 0;
        for (double v : matrix[i]) mean += v;
        mean /= static_cast<double>(n);
        double ss = 0;
        for (double v : matrix[i]) ss += (v - mean) * (v - mean);
        aggregate.mean = mean;
        aggregate.sd = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
        aggregate.mean_rank = friedman.mean_ranks[i];
        if (std::isnan(result.critical_difference)) {
            aggregate.not_significantly_worse = friedman.mean_ranks[i] == best_rank;
        } else {
            aggregate.not_significantly_worse =
                friedman.mean_ranks[i] - best_rank < result.critical_difference;
        }
        result.aggregates.push_back(std::move(aggregate));
    }
}

// Full leave-one-dataset-out benchmark. Symbolic and constant-only searches
// train on the other K-1 surrogates; implementation defaults and knn1 need no
// training; optimistic random search reads the heldout metadata directly.
// Every trained/looked-up configuration is scored on the heldout surrogate.
inline BenchmarkResult run_lodo(const LodoParams& params, const SearchSpace& space,
                                const EvaluationTable& table, const MetaFeatureTable& mf_table,
                                const std::vector<SurrogateModel>& store) {
    std::map<std::string, const SurrogateModel*> by_id;
    for (const SurrogateModel& model : store) by_id[model.dataset_id()] = &model;

    std::vector<std::string> ids;
    for (const DatasetGroup& g : table.groups()) {
        if (by_id.count(g.id) && mf_table.count(g.id)) ids.push_back(g.id);
    }
    if (ids.size() < 2) throw ValidationError("lodo: need at least 2 datasets with surrogates");
    if ((params.include_symbolic || params.include_constant) && params.replications < 1)
        throw ValidationError("lodo: replications must be at least 1");
    if (!params.rs_budgets.empty() && params.rs_reps < 1)
        throw ValidationError("lodo: rs_reps must be at least 1");

    BenchmarkResult result;
    result.algorithm = space.algorithm;
    result.dataset_ids = ids;

    std::vector<std::string> impl_sources;
    if (params.include_implementation_defaults)
        impl_sources = implementation_default_sources(space.algorithm);

    if (params.include_symbolic) result.methods.push_back("symbolic");
    if (params.include_constant) result.methods.push_back("constant");
    for (const std::string& source : impl_sources) result.methods.push_back("default:" + source);
    if (params.include_knn) result.methods.push_back("knn1");
    for (std::size_t budget : params.rs_budgets)
        result.methods.push_back("rs" + std::to_string(budget));
    if (result.methods.empty()) throw ValidationError("lodo: no methods selected");

    for (const std::string& heldout : ids) {
        const SurrogateModel& heldout_model = *by_id.at(heldout);
        const MetaFeatures& heldout_mf = mf_table.at(heldout);
        const std::uint64_t fold_seed =
            Rng::derive_seed(params.seed, {detail::kStreamLodoFold, fnv1a64(heldout)});

        SurrogatePtrs training;
        for (const std::string& id : ids) {
            if (id != heldout) training.push_back(by_id.at(id));
        }

        auto record = [&](const std::string& method, std::size_t rep,
                          const SymbolicConfiguration& config) {
            const double score = score_configuration(config, heldout_mf, heldout_model);
            result.scores.push_back({method, heldout, rep, score});
            ConfigurationRow row;
            row.method = method;
            row.dataset_id = heldout;
            row.rep = rep;
            for (const Expr& e : config.components) row.formulas.push_back(print_formula(e));
            result.configurations.push_back(std::move(row));
            if (!params.external_command.empty()) {
                const RealizedConfiguration realized =
                    realize_configuration(config, heldout_mf, space);
                nlohmann::json values = nlohmann::json::object();
                for (std::size_t i = 0; i < space.tunable.size(); ++i) {
                    if (realized.values[i].validity == SlotValidity::Invalid) {
                        values[space.tunable[i].name] = nullptr;
                    } else {
                        values[space.tunable[i].name] = realized.values[i].value;
                    }
                }
                nlohmann::json fixed = nlohmann::json::object();
                for (const FixedSetting& f : space.fixed) fixed[f.name] = f.value;
                const nlohmann::json payload = {{"algorithm", space.algorithm},
                                                {"dataset_id", heldout},
                                                {"method", method},
                                                {"rep", rep},
                                                {"hyperparameters", values},
                                                {"fixed", fixed}};
                result.external.push_back(
                    {method, heldout, rep, run_external_evaluator(params.external_command, payload)});
            }
        };

        auto run_search = [&](const std::string& method, bool constant_only,
                              std::uint64_t stream_tag) {
            for (std::size_t rep = 0; rep < params.replications; ++rep) {
                EvolutionParams evo = params.evolution;
                evo.constant_only = constant_only;
                evo.seed = Rng::derive_seed(fold_seed, {stream_tag, rep});
                const EvolveResult run = evolve(evo, space, training, mf_table, params.threads);
                record(method, rep, select_default(run.archive).config);
            }
        };

        if (params.include_symbolic) run_search("symbolic", false, detail::kStreamSymbolic);
        if (params.include_constant) run_search("constant", true, detail::kStreamConstant);

        for (const std::string& source : impl_sources) {
            record("default:" + source, 0, implementation_default(space.algorithm, source));
        }

        if (params.include_knn) {
            const Knn1Result knn = knn1_default(mf_table, heldout, table);
            RealizedConfiguration realized;
            for (double v : knn.values) realized.values.push_back({v, SlotValidity::Valid});
            const double score =
                predict(heldout_model, clamp_to_observed(std::move(realized), heldout_model));
            result.scores.push_back({"knn1", heldout, 0, score});
            ConfigurationRow row;
            row.method = "knn1";
            row.dataset_id = heldout;
            for (double v : knn.values) row.formulas.push_back(format_double(v));
            result.configurations.push_back(std::move(row));
        }

        for (std::size_t budget : params.rs_budgets) {
            Rng rng = Rng::derive(fold_seed, {detail::kStreamRandomSearch, budget});
            const std::vector<double> draws =
                optimistic_random_search(table, heldout, budget, params.rs_reps, rng);
            for (std::size_t rep = 0; rep < draws.size(); ++rep) {
                result.scores.push_back({"rs" + std::to_string(budget), heldout, rep, draws[rep]});
            }
        }
    }

    finalize_benchmark(result, params.alpha);
    return result;
}

// ---------------------------------------------------------------------------
// Report rendering: summary.csv (Table-4 shape), pairwise.csv (scatter data),
// cd.json (ranks + critical difference), summary.md, result.json.

inline void write_report(const BenchmarkResult& result, const std::filesystem::path& out_dir) {
    if (result.methods.empty()) throw ValidationError("report: no methods in result");
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create output directory: " + out_dir.string());

    auto open = [&](const char* name) {
        std::ofstream out(out_dir / name);
        if (!out) throw IoError("cannot write " + (out_dir / name).string());
        return out;
    };

    {
        std::ofstream out = open("summary.csv");
        out << "method,mean,sd,mean_rank,not_significantly_worse\n";
        for (const MethodAggregate& a : result.aggregates) {
            out << a.method << ',' << format_double(a.mean) << ',' << format_double(a.sd) << ','
                << format_double(a.mean_rank) << ',' << (a.not_significantly_worse ? "true" : "false")
                << '\n';
        }
    }
    {
        const auto means = detail::per_dataset_means(result);
        std::ofstream out = open("pairwise.csv");
        out << "dataset_id,method,score\n";
        for (const std::string& dataset : result.dataset_ids) {
            for (const std::string& method : result.methods) {
                out << dataset << ',' << method << ','
                    << format_double(means.at(method).at(dataset)) << '\n';
            }
        }
    }
    {
        nlohmann::json ranks = nlohmann::json::object();
        for (const MethodAggregate& a : result.aggregates) ranks[a.method] = a.mean_rank;
        nlohmann::json cd = {{"alpha", result.alpha},
                             {"k", result.methods.size()},
                             {"N", result.dataset_ids.size()},
                             {"friedman_chi_square", result.friedman_chi_square},
                             {"mean_ranks", std::move(ranks)}};
        if (std::isnan(result.critical_difference)) {
            cd["critical_difference"] = nullptr;
        } else {
            cd["critical_difference"] = result.critical_difference;
        }
        std::ofstream out = open("cd.json");
        out << cd.dump(2) << '\n';
    }
    {
        std::ofstream out = open("summary.md");
        out << "# Benchmark summary: " << result.algorithm << "\n\n";
        out << "Datasets: " << result.dataset_ids.size() << ". Friedman chi-square: "
            << format_double(result.friedman_chi_square) << ". Critical difference (alpha="
            << format_double(result.alpha) << "): ";
        if (std::isnan(result.critical_difference)) {
            out << "n/a (more than 10 methods)";
        } else {
            out << format_double(result.critical_difference);
        }
        out << ".\n\n";
        out << "| method | mean | sd | mean rank | not significantly worse |\n";
        out << "|---|---|---|---|---|\n";
        for (const MethodAggregate& a : result.aggregates) {
            out << "| " << a.method << " | " << format_double(a.mean) << " | "
                << format_double(a.sd) << " | " << format_double(a.mean_rank) << " | "
                << (a.not_significantly_worse ? "yes" : "no") << " |\n";
        }
    }
    {
        std::ofstream out = open("result.json");
        out << result.to_json().dump(2) << '\n';
    }
    if (!result.external.empty()) {
        std::ofstream out = open("external.csv");
        out << "method,dataset_id,rep,loss\n";
        for (const ExternalRow& row : result.external) {
            out << row.method << ',' << row.dataset_id << ',' << row.rep << ','
                << format_double(row.loss) << '\n';
        }
    }
}

}  // namespace symdef

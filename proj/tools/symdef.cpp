// symdef: learn symbolic hyperparameter defaults from evaluation metadata and
// benchmark them against constant defaults, package defaults, optimistic
// random search and a 1-NN meta-model.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "symdef/bench.hpp"
#include "symdef/errors.hpp"
#include "symdef/evolve.hpp"
#include "symdef/expr.hpp"
#include "symdef/metadata.hpp"
#include "symdef/space.hpp"
#include "symdef/surrogate.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json load_config_json(int argc, char** argv) {
    std::string path;
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--config" && i + 1 < argc) {
            path = argv[i + 1];
        } else if (arg.rfind("--config=", 0) == 0) {
            path = arg.substr(9);
        }
    }
    if (path.empty()) return json::object();
    std::ifstream in(path);
    if (!in) throw symdef::ValidationError("cannot open config file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw symdef::ValidationError("malformed JSON in " + path + ": " + e.what());
    }
    if (!j.is_object()) throw symdef::ValidationError("config file must hold a JSON object");
    return j;
}

template <typename T>
T cfg_or(const json& config, const char* key, T fallback) {
    if (!config.contains(key)) return fallback;
    try {
        return config.at(key).get<T>();
    } catch (const json::exception&) {
        throw symdef::ValidationError(std::string("config field '") + key + "' has the wrong type");
    }
}

unsigned default_threads(const json& config) {
    if (config.contains("threads")) return config.at("threads").get<unsigned>();
    if (const char* env = std::getenv("SYMDEF_THREADS")) {
        const long parsed = std::strtol(env, nullptr, 10);
        if (parsed > 0) return static_cast<unsigned>(parsed);
    }
    return 1;
}

symdef::SearchSpace resolve_space(const std::string& algorithm, const std::string& space_file) {
    if (!space_file.empty()) return symdef::load_space(space_file);
    return symdef::builtin_space(algorithm);
}

symdef::EvaluationTable resolve_table(const std::string& table_file, const std::string& records_file,
                                      const symdef::SearchSpace& space, std::size_t min_unique) {
    if (!table_file.empty()) return symdef::EvaluationTable::load(table_file);
    if (!records_file.empty())
        return symdef::EvaluationTable::load_csv(records_file, space, min_unique);
    throw symdef::ValidationError("either --table or --records is required");
}

// Meta-features argument: a file holding either one meta-features object or a
// {dataset_id: meta-features} map (then --dataset selects the entry).
symdef::MetaFeatures resolve_single_metafeatures(const std::string& path,
                                                 const std::string& dataset) {
    std::ifstream in(path);
    if (!in) throw symdef::ValidationError("cannot open meta-features file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw symdef::ValidationError("malformed JSON in " + path + ": " + e.what());
    }
    if (j.contains("n") && j.at("n").is_number()) return symdef::metafeatures_from_json(j);
    const symdef::MetaFeatureTable table = symdef::metafeature_table_from_json(j);
    if (!dataset.empty()) {
        const auto it = table.find(dataset);
        if (it == table.end())
            throw symdef::ValidationError("no meta-features for dataset '" + dataset + "'");
        return it->second;
    }
    if (table.size() == 1) return table.begin()->second;
    throw symdef::ValidationError("meta-features file holds several datasets; pass --dataset");
}

struct EvolutionFlags {
    std::size_t mu, lambda, generations, patience;
    int init_max_depth;
    double crossover_prob;

    symdef::EvolutionParams to_params(std::uint64_t seed, bool constant_only) const {
        symdef::EvolutionParams params;
        params.mu = mu;
        params.lambda = lambda;
        params.generations = generations;
        params.patience = patience;
        params.init_max_depth = init_max_depth;
        params.crossover_prob = crossover_prob;
        params.seed = seed;
        params.constant_only = constant_only;
        return params;
    }
};

void add_evolution_flags(CLI::App* cmd, EvolutionFlags& flags, const json& config) {
    flags.mu = cfg_or<std::size_t>(config, "mu", 20);
    flags.lambda = cfg_or<std::size_t>(config, "lambda", 100);
    flags.generations = cfg_or<std::size_t>(config, "generations", 1000);
    flags.patience = cfg_or<std::size_t>(config, "patience", 100);
    flags.init_max_depth = cfg_or<int>(config, "init_max_depth", 3);
    flags.crossover_prob = cfg_or<double>(config, "crossover_prob", 0.5);
    cmd->add_option("--mu", flags.mu, "Population size");
    cmd->add_option("--lambda", flags.lambda, "Offspring per generation");
    cmd->add_option("--generations", flags.generations, "Generation budget");
    cmd->add_option("--patience", flags.patience, "Early-stop patience in generations (0 disables)");
    cmd->add_option("--init-depth", flags.init_max_depth, "Maximum depth of initial expressions");
    cmd->add_option("--crossover-prob", flags.crossover_prob, "Probability of crossover offspring");
}

int run(int argc, char** argv) {
    const json config = load_config_json(argc, argv);

    CLI::App app{"symbolic hyperparameter defaults: search, surrogates, benchmarks"};
    app.require_subcommand(1);
    app.fallthrough();  // --seed/--threads/--config may follow the subcommand
    std::string config_path;
    app.add_option("--config", config_path, "JSON run-configuration file; flags override it");

    std::uint64_t seed = cfg_or<std::uint64_t>(config, "seed", 0);
    unsigned threads = default_threads(config);
    app.add_option("--seed", seed, "Base random seed")->configurable(false);
    app.add_option("--threads", threads, "Worker threads (env SYMDEF_THREADS as fallback)");

    std::string algorithm = cfg_or<std::string>(config, "algorithm", "");
    std::string space_file = cfg_or<std::string>(config, "space", "");
    std::string records_file = cfg_or<std::string>(config, "records", "");
    std::string table_file = cfg_or<std::string>(config, "table", "");
    std::string metafeatures_file = cfg_or<std::string>(config, "metafeatures", "");
    std::string store_dir = cfg_or<std::string>(config, "store", "");
    std::string out_dir = cfg_or<std::string>(config, "out", "");
    std::size_t min_unique = cfg_or<std::size_t>(config, "min_unique", 100);
    std::size_t trees = cfg_or<std::size_t>(config, "trees", 100);
    std::size_t folds = cfg_or<std::size_t>(config, "folds", 10);
    double threshold = cfg_or<double>(config, "quality_threshold", 0.8);

    // metafeatures -------------------------------------------------------
    std::string data_csv;
    CLI::App* cmd_metafeatures =
        app.add_subcommand("metafeatures", "Compute meta-features of a raw dataset CSV");
    cmd_metafeatures->add_option("data", data_csv, "Dataset CSV; last column is the target")
        ->required();

    // ingest --------------------------------------------------------------
    CLI::App* cmd_ingest = app.add_subcommand("ingest", "Validate and cache an evaluation table");
    cmd_ingest->add_option("--records", records_file, "Records CSV (dataset_id,<hps...>,logloss)");
    cmd_ingest->add_option("--algorithm", algorithm, "Algorithm name");
    cmd_ingest->add_option("--space", space_file, "Search-space JSON (overrides the builtin)");
    cmd_ingest->add_option("--min-unique", min_unique, "Unique-configuration coverage threshold");
    cmd_ingest->add_option("--out", out_dir, "Output table JSON path");

    // surrogate-train ------------------------------------------------------
    CLI::App* cmd_train = app.add_subcommand("surrogate-train", "Train and audit per-dataset surrogates");
    cmd_train->add_option("--records", records_file, "Records CSV");
    cmd_train->add_option("--table", table_file, "Cached table JSON");
    cmd_train->add_option("--algorithm", algorithm, "Algorithm name");
    cmd_train->add_option("--space", space_file, "Search-space JSON");
    cmd_train->add_option("--store", store_dir, "Surrogate store directory")->required();
    cmd_train->add_option("--trees", trees, "Trees per forest");
    cmd_train->add_option("--folds", folds, "Quality CV folds");
    cmd_train->add_option("--threshold", threshold, "Spearman quality gate");
    cmd_train->add_option("--min-unique", min_unique, "Unique-configuration coverage threshold");

    // surrogate-quality ----------------------------------------------------
    CLI::App* cmd_quality = app.add_subcommand("surrogate-quality", "Audit surrogate quality via CV");
    cmd_quality->add_option("--records", records_file, "Records CSV");
    cmd_quality->add_option("--table", table_file, "Cached table JSON");
    cmd_quality->add_option("--algorithm", algorithm, "Algorithm name");
    cmd_quality->add_option("--space", space_file, "Search-space JSON");
    cmd_quality->add_option("--store", store_dir, "Store directory whose manifest to update");
    cmd_quality->add_option("--trees", trees, "Trees per forest");
    cmd_quality->add_option("--folds", folds, "Quality CV folds");
    cmd_quality->add_option("--threshold", threshold, "Spearman quality gate");
    cmd_quality->add_option("--min-unique", min_unique, "Unique-configuration coverage threshold");
    std::string pairs_dir = cfg_or<std::string>(config, "pairs_out", "");
    cmd_quality->add_option("--pairs-out", pairs_dir,
                            "Directory for per-dataset predicted/true CSV pairs");

    // search ----------------------------------------------------------------
    bool constant_only = cfg_or<bool>(config, "constant_only", false);
    std::string heldout = cfg_or<std::string>(config, "heldout", "");
    EvolutionFlags search_flags{};
    CLI::App* cmd_search = app.add_subcommand("search", "Evolve a symbolic default on surrogates");
    cmd_search->add_option("--store", store_dir, "Surrogate store directory");
    cmd_search->add_option("--metafeatures", metafeatures_file, "Meta-features JSON");
    cmd_search->add_option("--algorithm", algorithm, "Algorithm name");
    cmd_search->add_option("--space", space_file, "Search-space JSON");
    cmd_search->add_option("--heldout", heldout, "Exclude one dataset from training");
    cmd_search->add_flag("--constant-only", constant_only, "Disallow meta-feature terminals");
    cmd_search->add_option("--out", out_dir, "Directory for run manifest and trace");
    add_evolution_flags(cmd_search, search_flags, config);

    // lodo ---------------------------------------------------------------
    EvolutionFlags lodo_flags{};
    std::vector<std::size_t> budgets = cfg_or<std::vector<std::size_t>>(
        config, "rs_budgets", std::vector<std::size_t>{1, 2, 4, 8, 16, 32});
    std::size_t rs_reps = cfg_or<std::size_t>(config, "rs_reps", 30);
    std::size_t replications = cfg_or<std::size_t>(config, "replications", 10);
    bool no_knn = !cfg_or<bool>(config, "knn", true);
    bool no_defaults = !cfg_or<bool>(config, "implementation_defaults", true);
    bool no_symbolic = !cfg_or<bool>(config, "symbolic", true);
    bool no_constant = !cfg_or<bool>(config, "constant", true);
    double alpha = cfg_or<double>(config, "alpha", 0.05);
    std::string external_eval = cfg_or<std::string>(config, "external_eval", "");
    CLI::App* cmd_lodo = app.add_subcommand("lodo", "Run the leave-one-dataset-out benchmark");
    cmd_lodo->add_option("--records", records_file, "Records CSV");
    cmd_lodo->add_option("--table", table_file, "Cached table JSON");
    cmd_lodo->add_option("--metafeatures", metafeatures_file, "Meta-features JSON");
    cmd_lodo->add_option("--store", store_dir, "Surrogate store directory")->required();
    cmd_lodo->add_option("--algorithm", algorithm, "Algorithm name");
    cmd_lodo->add_option("--space", space_file, "Search-space JSON");
    cmd_lodo->add_option("--budget", budgets, "Optimistic random-search budgets")->delimiter(',');
    cmd_lodo->add_option("--rs-reps", rs_reps, "Random-search repetitions");
    cmd_lodo->add_option("--replications", replications, "Replications of stochastic searches");
    cmd_lodo->add_flag("--no-knn", no_knn, "Skip the 1-NN baseline");
    cmd_lodo->add_flag("--no-defaults", no_defaults, "Skip implementation defaults");
    cmd_lodo->add_flag("--no-symbolic", no_symbolic, "Skip the symbolic search");
    cmd_lodo->add_flag("--no-constant", no_constant, "Skip the constant-only search");
    cmd_lodo->add_option("--alpha", alpha, "Significance level for the Nemenyi test");
    cmd_lodo->add_option("--external-eval", external_eval,
                         "Command evaluating a JSON configuration file and printing a loss");
    cmd_lodo->add_option("--out", out_dir, "Report output directory")->required();
    cmd_lodo->add_option("--min-unique", min_unique, "Unique-configuration coverage threshold");
    add_evolution_flags(cmd_lodo, lodo_flags, config);

    // report ----------------------------------------------------------------
    std::string result_file = cfg_or<std::string>(config, "result", "");
    CLI::App* cmd_report = app.add_subcommand("report", "Re-render report files from result.json");
    cmd_report->add_option("--result", result_file, "Benchmark result JSON")->required();
    cmd_report->add_option("--out", out_dir, "Report output directory")->required();

    // eval-formula --------------------------------------------------------
    std::string formula_text;
    std::string dataset_id = cfg_or<std::string>(config, "dataset", "");
    std::string slot_name = cfg_or<std::string>(config, "slot", "float");
    CLI::App* cmd_eval = app.add_subcommand("eval-formula", "Evaluate a formula on meta-features");
    cmd_eval->add_option("formula", formula_text, "Formula in prefix notation")->required();
    cmd_eval->add_option("--metafeatures", metafeatures_file, "Meta-features JSON")->required();
    cmd_eval->add_option("--dataset", dataset_id, "Dataset id when the file holds a map");
    cmd_eval->add_option("--slot", slot_name, "Root slot: float or integer");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    if (cmd_metafeatures->parsed()) {
        const symdef::RawDataset data = symdef::load_raw_csv(data_csv);
        const symdef::MetaFeatures mf = symdef::compute_metafeatures(data);
        std::cout << symdef::metafeatures_to_json(mf).dump(2) << '\n';
        return 0;
    }

    if (cmd_ingest->parsed()) {
        if (algorithm.empty() && space_file.empty())
            throw symdef::ValidationError("--algorithm or --space is required");
        const symdef::SearchSpace space = resolve_space(algorithm, space_file);
        if (records_file.empty()) throw symdef::ValidationError("--records is required");
        const symdef::EvaluationTable table =
            symdef::EvaluationTable::load_csv(records_file, space, min_unique);
        std::size_t flagged = 0;
        for (const symdef::DatasetGroup& g : table.groups()) {
            if (g.low_coverage || g.degenerate) ++flagged;
        }
        std::cout << "datasets: " << table.groups().size() << ", flagged: " << flagged << '\n';
        for (const symdef::DatasetGroup& g : table.groups()) {
            std::cout << "  " << g.id << ": " << g.records.size() << " records, "
                      << g.unique_configurations << " unique"
                      << (g.degenerate ? ", degenerate" : "")
                      << (g.low_coverage ? ", low coverage" : "") << '\n';
        }
        if (!out_dir.empty()) {
            table.save(out_dir);
            std::cout << "table written to " << out_dir << '\n';
        }
        return 0;
    }

    if (cmd_train->parsed() || cmd_quality->parsed()) {
        if (algorithm.empty() && space_file.empty())
            throw symdef::ValidationError("--algorithm or --space is required");
        if (threshold <= 0.0 || threshold > 1.0)
            throw symdef::ValidationError("--threshold must be in (0, 1]");
        const symdef::SearchSpace space = resolve_space(algorithm, space_file);
        const symdef::EvaluationTable table =
            resolve_table(table_file, records_file, space, min_unique);
        symdef::ForestConfig forest;
        forest.trees = trees;
        forest.seed = seed;
        forest.threads = threads;

        symdef::StoreManifest manifest;
        manifest.algorithm = space.algorithm;
        manifest.quality_threshold = threshold;
        for (const symdef::DatasetGroup& g : table.groups()) {
            const symdef::QualityReport report =
                symdef::surrogate_quality(table, g.id, space, forest, folds, threshold);
            manifest.entries.push_back(report);
            std::cout << g.id << ": spearman=" << symdef::format_double(report.spearman)
                      << " kendall=" << symdef::format_double(report.kendall)
                      << (report.pass ? " pass" : " FAIL") << '\n';
            if (cmd_quality->parsed() && !pairs_dir.empty()) {
                std::error_code ec;
                fs::create_directories(pairs_dir, ec);
                if (ec) throw symdef::IoError("cannot create pairs directory: " + pairs_dir);
                symdef::write_quality_pairs_csv(report,
                                                fs::path(pairs_dir) / (g.id + "_pairs.csv"));
            }
            if (cmd_train->parsed()) {
                const symdef::SurrogateModel model =
                    symdef::train_surrogate(table, g.id, space, forest);
                const fs::path dir = symdef::surrogate_dir(store_dir, space.algorithm);
                std::error_code ec;
                fs::create_directories(dir, ec);
                if (ec) throw symdef::IoError("cannot create store directory: " + dir.string());
                symdef::save_surrogate(model,
                                       symdef::surrogate_path(store_dir, space.algorithm, g.id));
            }
        }
        if (cmd_train->parsed() || !store_dir.empty()) {
            symdef::save_manifest(manifest, store_dir);
            std::cout << "manifest written under " << store_dir << '\n';
        }
        return 0;
    }

    if (cmd_search->parsed()) {
        if (algorithm.empty() && space_file.empty())
            throw symdef::ValidationError("--algorithm or --space is required");
        if (store_dir.empty()) throw symdef::ValidationError("--store is required");
        if (metafeatures_file.empty()) throw symdef::ValidationError("--metafeatures is required");
        const symdef::SearchSpace space = resolve_space(algorithm, space_file);
        std::vector<symdef::SurrogateModel> models =
            symdef::load_store(store_dir, space.algorithm, /*only_passing=*/true);
        const symdef::MetaFeatureTable mf_table =
            symdef::load_metafeature_table(metafeatures_file);

        symdef::SurrogatePtrs training;
        std::vector<std::string> training_ids;
        for (const symdef::SurrogateModel& model : models) {
            if (!heldout.empty() && model.dataset_id() == heldout) continue;
            if (!mf_table.count(model.dataset_id()))
                throw symdef::ValidationError("no meta-features for dataset '" +
                                              model.dataset_id() + "'");
            training.push_back(&model);
            training_ids.push_back(model.dataset_id());
        }
        if (training.empty()) throw symdef::ValidationError("no passing surrogates to train on");

        const symdef::EvolutionParams params = search_flags.to_params(seed, constant_only);
        const symdef::EvolveResult result =
            symdef::evolve(params, space, training, mf_table, threads);
        const symdef::Individual& selected = symdef::select_default(result.archive);

        std::cout << "selected default (loss=" << symdef::format_double(selected.objectives.loss)
                  << ", depth=" << selected.objectives.depth << "):\n";
        for (std::size_t i = 0; i < space.tunable.size(); ++i) {
            std::cout << "  " << space.tunable[i].name << " = "
                      << symdef::print_formula(selected.config.components[i]) << '\n';
        }
        std::cout << "realized per training dataset:\n";
        for (const std::string& id : training_ids) {
            const symdef::RealizedConfiguration realized =
                symdef::realize_configuration(selected.config, mf_table.at(id), space);
            std::cout << "  " << id << ':';
            for (std::size_t i = 0; i < space.tunable.size(); ++i) {
                std::cout << ' ' << space.tunable[i].name << '=';
                if (realized.values[i].validity == symdef::SlotValidity::Invalid) {
                    std::cout << "invalid";
                } else {
                    std::cout << symdef::format_double(realized.values[i].value);
                }
            }
            std::cout << '\n';
        }

        if (!out_dir.empty()) {
            std::error_code ec;
            fs::create_directories(out_dir, ec);
            if (ec) throw symdef::IoError("cannot create output directory: " + out_dir);
            const json manifest = symdef::run_manifest(params, space, training_ids, result);
            std::ofstream out(fs::path(out_dir) / "run.json");
            if (!out) throw symdef::IoError("cannot write run manifest in " + out_dir);
            out << manifest.dump(2) << '\n';
            symdef::write_trace_csv(fs::path(out_dir) / "trace.csv", result.trace);
        }
        return 0;
    }

    if (cmd_lodo->parsed()) {
        if (algorithm.empty() && space_file.empty())
            throw symdef::ValidationError("--algorithm or --space is required");
        if (metafeatures_file.empty()) throw symdef::ValidationError("--metafeatures is required");
        const symdef::SearchSpace space = resolve_space(algorithm, space_file);
        const symdef::EvaluationTable table =
            resolve_table(table_file, records_file, space, min_unique);
        const symdef::MetaFeatureTable mf_table =
            symdef::load_metafeature_table(metafeatures_file);
        const std::vector<symdef::SurrogateModel> models =
            symdef::load_store(store_dir, space.algorithm, /*only_passing=*/true);

        symdef::LodoParams params;
        params.evolution = lodo_flags.to_params(seed, false);
        params.seed = seed;
        params.replications = replications;
        params.rs_budgets = budgets;
        params.rs_reps = rs_reps;
        params.include_symbolic = !no_symbolic;
        params.include_constant = !no_constant;
        params.include_implementation_defaults = !no_defaults;
        params.include_knn = !no_knn;
        params.alpha = alpha;
        params.threads = threads;
        params.external_command = external_eval;

        const symdef::BenchmarkResult result =
            symdef::run_lodo(params, space, table, mf_table, models);
        symdef::write_report(result, out_dir);
        std::cout << "report written to " << out_dir << '\n';
        for (const symdef::MethodAggregate& a : result.aggregates) {
            std::cout << "  " << a.method << ": mean=" << symdef::format_double(a.mean)
                      << " sd=" << symdef::format_double(a.sd)
                      << " rank=" << symdef::format_double(a.mean_rank) << '\n';
        }
        return 0;
    }

    if (cmd_report->parsed()) {
        std::ifstream in(result_file);
        if (!in) throw symdef::ValidationError("cannot open result file: " + result_file);
        json j;
        try {
            in >> j;
        } catch (const json::exception& e) {
            throw symdef::ValidationError("malformed JSON in " + result_file + ": " + e.what());
        }
        symdef::write_report(symdef::BenchmarkResult::from_json(j), out_dir);
        std::cout << "report written to " << out_dir << '\n';
        return 0;
    }

    if (cmd_eval->parsed()) {
        symdef::Kind slot;
        if (slot_name == "float") {
            slot = symdef::Kind::Float;
        } else if (slot_name == "integer") {
            slot = symdef::Kind::Integer;
        } else {
            throw symdef::ValidationError("--slot must be 'float' or 'integer'");
        }
        const symdef::MetaFeatures mf = resolve_single_metafeatures(metafeatures_file, dataset_id);
        const symdef::Expr expr = symdef::parse_formula(formula_text, slot);
        double value = symdef::eval_expr(expr, mf);
        if (slot == symdef::Kind::Integer && std::isfinite(value))
            value = symdef::round_half_away(value);
        std::cout << symdef::format_double(value) << '\n';
        return 0;
    }

    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const symdef::ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const symdef::IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return 2;
    }
}

#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "symdef/errors.hpp"
#include "symdef/metadata.hpp"
#include "symdef/parallel.hpp"
#include "symdef/rng.hpp"
#include "symdef/space.hpp"
#include "symdef/stats.hpp"

namespace symdef {

// ---------------------------------------------------------------------------
// Regression forest
//
// CART regression trees with variance-reduction splits, grown to min-leaf
// size, on bootstrap samples, inspecting random feature subsets of size
// ceil(d/3) per split. If the sampled subset admits no valid split the search
// keeps drawing features, so distinct inputs are always separable.

struct ForestConfig {
    std::size_t trees = 100;
    std::size_t min_leaf = 1;
    std::size_t mtry = 0;  // 0 = ceil(d/3)
    bool bootstrap = true;
    std::uint64_t seed = 0;
    unsigned threads = 1;
};

namespace detail {

inline constexpr std::uint64_t kStreamTree = 101;
inline constexpr std::uint64_t kStreamQualityShuffle = 102;
inline constexpr std::uint64_t kStreamQualityFold = 103;

struct TreeNode {
    std::int32_t feature = -1;  // -1 marks a leaf
    double threshold = 0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    double value = 0;
};

struct RegressionTree {
    std::vector<TreeNode> nodes;

    double predict(std::span<const double> x) const {
        std::int32_t i = 0;
        while (nodes[static_cast<std::size_t>(i)].feature >= 0) {
            const TreeNode& node = nodes[static_cast<std::size_t>(i)];
            i = x[static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left : node.right;
        }
        return nodes[static_cast<std::size_t>(i)].value;
    }
};

// Row-major feature matrix.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> cells;

    double at(std::size_t r, std::size_t c) const { return cells[r * cols + c]; }
    std::span<const double> row(std::size_t r) const {
        return std::span<const double>(cells).subspan(r * cols, cols);
    }
};

class TreeBuilder {
  public:
    TreeBuilder(const Matrix& x, const std::vector<double>& y, std::size_t min_leaf,
                std::size_t mtry, Rng& rng, RegressionTree& tree)
        : x_(x), y_(y), min_leaf_(std::max<std::size_t>(min_leaf, 1)), mtry_(mtry), rng_(rng),
          tree_(tree) {}

    void build(std::vector<std::size_t> indices) { grow(std::move(indices)); }

  private:
    std::int32_t grow(std::vector<std::size_t> indices) {
        const std::size_t count = indices.size();
        double sum = 0;
        for (std::size_t idx : indices) sum += y_[idx];
        const double mean = sum / static_cast<double>(count);

        bool constant_target = true;
        for (std::size_t idx : indices) {
            if (y_[idx] != y_[indices.front()]) {
                constant_target = false;
                break;
            }
        }
        if (constant_target || count < 2 * min_leaf_) return make_leaf(mean);

        std::vector<std::size_t> features(x_.cols);
        std::iota(features.begin(), features.end(), std::size_t{0});
        rng_.shuffle(features);

        int best_feature = -1;
        double best_threshold = 0;
        double best_cost = std::numeric_limits<double>::infinity();
        std::size_t splittable_seen = 0;

        std::vector<std::pair<double, std::size_t>> sorted;
        sorted.reserve(count);
        for (std::size_t feature : features) {
            sorted.clear();
            for (std::size_t idx : indices) sorted.emplace_back(x_.at(idx, feature), idx);
            std::sort(sorted.begin(), sorted.end());
            if (sorted.front().first == sorted.back().first) continue;  // constant feature

            // prefix scan: cost(split after position k) = sse_left + sse_right
            double left_sum = 0, left_sq = 0;
            double total_sq = 0;
            for (std::size_t idx : indices) total_sq += y_[idx] * y_[idx];
            bool found = false;
            for (std::size_t k = 0; k + 1 < count; ++k) {
                const double yk = y_[sorted[k].second];
                left_sum += yk;
                left_sq += yk * yk;
                if (sorted[k].first == sorted[k + 1].first) continue;
                const std::size_t left_n = k + 1;
                const std::size_t right_n = count - left_n;
                if (left_n < min_leaf_ || right_n < min_leaf_) continue;
                const double right_sum = sum - left_sum;
                const double right_sq = total_sq - left_sq;
                const double cost = (left_sq - left_sum * left_sum / static_cast<double>(left_n)) +
                                    (right_sq - right_sum * right_sum / static_cast<double>(right_n));
                if (cost < best_cost) {
                    best_cost = cost;
                    best_feature = static_cast<int>(feature);
                    best_threshold = 0.5 * (sorted[k].first + sorted[k + 1].first);
                }
                found = true;
            }
            if (found) {
                ++splittable_seen;
                if (splittable_seen >= mtry_) break;
            }
        }
        if (best_feature < 0) return make_leaf(mean);

        std::vector<std::size_t> left, right;
        for (std::size_t idx : indices) {
            (x_.at(idx, static_cast<std::size_t>(best_feature)) <= best_threshold ? left : right)
                .push_back(idx);
        }
        indices.clear();
        indices.shrink_to_fit();

        const std::int32_t self = static_cast<std::int32_t>(tree_.nodes.size());
        tree_.nodes.push_back({best_feature, best_threshold, -1, -1, 0});
        const std::int32_t left_child = grow(std::move(left));
        const std::int32_t right_child = grow(std::move(right));
        tree_.nodes[static_cast<std::size_t>(self)].left = left_child;
        tree_.nodes[static_cast<std::size_t>(self)].right = right_child;
        return self;
    }

    std::int32_t make_leaf(double value) {
        const std::int32_t self = static_cast<std::int32_t>(tree_.nodes.size());
        TreeNode node;
        node.value = value;
        tree_.nodes.push_back(node);
        return self;
    }

    const Matrix& x_;
    const std::vector<double>& y_;
    std::size_t min_leaf_;
    std::size_t mtry_;
    Rng& rng_;
    RegressionTree& tree_;
};

inline std::vector<RegressionTree> train_forest(const Matrix& x, const std::vector<double>& y,
                                                const ForestConfig& config) {
    if (x.rows == 0 || x.rows != y.size()) throw ValidationError("forest: empty training data");
    const std::size_t mtry =
        config.mtry > 0 ? std::min(config.mtry, x.cols) : (x.cols + 2) / 3;
    std::vector<RegressionTree> trees(config.trees);
    parallel_for(config.trees, config.threads, [&](std::size_t t) {
        Rng rng = Rng::derive(config.seed, {kStreamTree, t});
        std::vector<std::size_t> indices(x.rows);
        if (config.bootstrap) {
            for (std::size_t i = 0; i < x.rows; ++i)
                indices[i] = static_cast<std::size_t>(rng.uniform_index(x.rows));
        } else {
            std::iota(indices.begin(), indices.end(), std::size_t{0});
        }
        TreeBuilder builder(x, y, config.min_leaf, mtry, rng, trees[t]);
        builder.build(std::move(indices));
    });
    return trees;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Surrogate models
//
// One random-forest regressor per dataset, mapping hyperparameter vectors to
// normalized score. Inputs are log-transformed where the hyperparameter's
// scale says so; query values are expected to be clamped into the observed
// ranges first, which realizes the out-of-range truncation behavior.

inline double transform_feature(double value, Scale scale) {
    if (scale != Scale::Log) return value;
    return std::log(std::max(value, std::numeric_limits<double>::min()));
}

class SurrogateModel {
  public:
    SurrogateModel() = default;

    const std::string& algorithm() const { return algorithm_; }
    const std::string& dataset_id() const { return dataset_id_; }
    const std::vector<HyperparameterDef>& hyperparameters() const { return hps_; }
    std::size_t tree_count() const { return trees_.size(); }

    std::pair<double, double> observed_range(std::size_t i) const { return observed_[i]; }
    std::pair<double, double> target_range() const { return target_range_; }

    // Mean of per-tree leaf means; never leaves the training-target range.
    double predict(std::span<const double> raw_values) const {
        if (raw_values.size() != hps_.size())
            throw ValidationError("predict: value count does not match hyperparameters");
        std::vector<double> x(raw_values.size());
        for (std::size_t i = 0; i < x.size(); ++i)
            x[i] = transform_feature(raw_values[i], hps_[i].scale);
        double sum = 0;
        for (const detail::RegressionTree& tree : trees_) sum += tree.predict(x);
        const double mean = sum / static_cast<double>(trees_.size());
        assert(mean >= target_range_.first - 1e-9 && mean <= target_range_.second + 1e-9);
        return mean;
    }

    nlohmann::json to_json() const {
        nlohmann::json hps = nlohmann::json::array();
        for (const HyperparameterDef& def : hps_) {
            hps.push_back({{"name", def.name},
                           {"kind", def.kind == Kind::Integer ? "integer" : "float"},
                           {"scale", def.scale == Scale::Log ? "log" : "linear"}});
        }
        nlohmann::json observed = nlohmann::json::array();
        for (const auto& [lo, hi] : observed_) observed.push_back({lo, hi});
        nlohmann::json trees = nlohmann::json::array();
        for (const detail::RegressionTree& tree : trees_) {
            nlohmann::json nodes = nlohmann::json::array();
            for (const detail::TreeNode& node : tree.nodes) {
                nodes.push_back({node.feature, node.threshold, node.left, node.right, node.value});
            }
            trees.push_back(std::move(nodes));
        }
        return {{"algorithm", algorithm_},
                {"dataset_id", dataset_id_},
                {"hyperparameters", std::move(hps)},
                {"observed_ranges", std::move(observed)},
                {"target_range", {target_range_.first, target_range_.second}},
                {"trees", std::move(trees)}};
    }

    static SurrogateModel from_json(const nlohmann::json& j) {
        SurrogateModel model;
        try {
            model.algorithm_ = j.at("algorithm").get<std::string>();
            model.dataset_id_ = j.at("dataset_id").get<std::string>();
            for (const auto& h : j.at("hyperparameters")) {
                HyperparameterDef def;
                def.name = h.at("name").get<std::string>();
                def.kind = h.at("kind").get<std::string>() == "integer" ? Kind::Integer : Kind::Float;
                def.scale = h.at("scale").get<std::string>() == "log" ? Scale::Log : Scale::Linear;
                model.hps_.push_back(std::move(def));
            }
            for (const auto& r : j.at("observed_ranges"))
                model.observed_.emplace_back(r.at(0).get<double>(), r.at(1).get<double>());
            model.target_range_ = {j.at("target_range").at(0).get<double>(),
                                   j.at("target_range").at(1).get<double>()};
            for (const auto& t : j.at("trees")) {
                detail::RegressionTree tree;
                for (const auto& nd : t) {
                    detail::TreeNode node;
                    node.feature = nd.at(0).get<std::int32_t>();
                    node.threshold = nd.at(1).get<double>();
                    node.left = nd.at(2).get<std::int32_t>();
                    node.right = nd.at(3).get<std::int32_t>();
                    node.value = nd.at(4).get<double>();
                    tree.nodes.push_back(node);
                }
                model.trees_.push_back(std::move(tree));
            }
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError(std::string("malformed surrogate JSON: ") + e.what());
        }
        if (model.trees_.empty() || model.hps_.empty())
            throw ValidationError("surrogate JSON has no trees or no hyperparameters");
        return model;
    }

  private:
    friend SurrogateModel train_surrogate(const EvaluationTable&, const std::string&,
                                          const SearchSpace&, const ForestConfig&);

    std::string algorithm_;
    std::string dataset_id_;
    std::vector<HyperparameterDef> hps_;
    std::vector<std::pair<double, double>> observed_;
    std::pair<double, double> target_range_ = {0, 1};
    std::vector<detail::RegressionTree> trees_;
};

inline SurrogateModel train_surrogate(const EvaluationTable& table, const std::string& dataset_id,
                                      const SearchSpace& space, const ForestConfig& config = {}) {
    const DatasetGroup& group = table.group(dataset_id);
    if (group.records.size() < 2)
        throw ValidationError("dataset '" + dataset_id + "' has fewer than 2 records");

    SurrogateModel model;
    model.algorithm_ = space.algorithm;
    model.dataset_id_ = dataset_id;
    model.hps_ = space.tunable;

    const std::size_t n = group.records.size();
    const std::size_t d = space.dimension();
    detail::Matrix x;
    x.rows = n;
    x.cols = d;
    x.cells.resize(n * d);
    model.observed_.assign(d, {std::numeric_limits<double>::infinity(),
                               -std::numeric_limits<double>::infinity()});
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < d; ++c) {
            const double raw = group.records[r].values[c];
            model.observed_[c].first = std::min(model.observed_[c].first, raw);
            model.observed_[c].second = std::max(model.observed_[c].second, raw);
            x.cells[r * d + c] = transform_feature(raw, space.tunable[c].scale);
        }
    }
    const auto [lo, hi] = std::minmax_element(group.scores.begin(), group.scores.end());
    model.target_range_ = {*lo, *hi};
    model.trees_ = detail::train_forest(x, group.scores, config);
    return model;
}

// Truncation to the observed hyperparameter ranges of the model's dataset.
// Finite and infinite components clamp to the range bounds; invalid (NaN)
// components stay flagged. Idempotent.
inline RealizedConfiguration clamp_to_observed(RealizedConfiguration v, const SurrogateModel& model) {
    if (v.values.size() != model.hyperparameters().size())
        throw ValidationError("clamp: value count does not match model");
    for (std::size_t i = 0; i < v.values.size(); ++i) {
        RealizedValue& rv = v.values[i];
        if (rv.validity == SlotValidity::Invalid) continue;
        const auto [lo, hi] = model.observed_range(i);
        rv.value = std::clamp(rv.value, lo, hi);
        rv.validity = SlotValidity::Valid;
    }
    return v;
}

inline double predict(const SurrogateModel& model, const RealizedConfiguration& v) {
    if (v.any_invalid())
        throw ValidationError("predict: configuration has invalid components");
    std::vector<double> raw;
    raw.reserve(v.values.size());
    for (const RealizedValue& rv : v.values) raw.push_back(rv.value);
    return model.predict(raw);
}

// ---------------------------------------------------------------------------
// Quality gate: 10-fold CV on the metadata, rank correlation between
// out-of-fold predictions and true scores. Pass requires Spearman's rho
// above the threshold.

struct QualityReport {
    std::string dataset_id;
    double spearman = 0;
    double kendall = 0;
    bool pass = false;
    std::vector<double> predictions;  // out-of-fold, aligned with the group's records
    std::vector<double> truths;
};

// Scatter-plot data: one `predicted,true` row per record.
inline void write_quality_pairs_csv(const QualityReport& report,
                                    const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write pairs file: " + path.string());
    out << "predicted,true\n";
    for (std::size_t i = 0; i < report.predictions.size(); ++i) {
        out << format_double(report.predictions[i]) << ',' << format_double(report.truths[i])
            << '\n';
    }
}

inline QualityReport surrogate_quality(const EvaluationTable& table, const std::string& dataset_id,
                                       const SearchSpace& space, const ForestConfig& config = {},
                                       std::size_t folds = 10, double threshold = 0.8) {
    const DatasetGroup& group = table.group(dataset_id);
    const std::size_t n = group.records.size();
    if (folds < 2) throw ValidationError("quality: need at least 2 folds");
    if (n < folds)
        throw ValidationError("dataset '" + dataset_id + "' has fewer records than folds");

    const std::size_t d = space.dimension();
    detail::Matrix x;
    x.rows = n;
    x.cols = d;
    x.cells.resize(n * d);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < d; ++c) {
            x.cells[r * d + c] = transform_feature(group.records[r].values[c], space.tunable[c].scale);
        }
    }

    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng shuffle_rng =
        Rng::derive(config.seed, {detail::kStreamQualityShuffle, fnv1a64(dataset_id)});
    shuffle_rng.shuffle(perm);

    std::vector<double> predictions(n, 0.0);
    std::size_t cursor = 0;
    for (std::size_t f = 0; f < folds; ++f) {
        const std::size_t fold_size = n / folds + (f < n % folds ? 1 : 0);
        const std::size_t begin = cursor;
        const std::size_t end = cursor + fold_size;
        cursor = end;

        std::vector<bool> in_test(n, false);
        for (std::size_t k = begin; k < end; ++k) in_test[perm[k]] = true;

        std::vector<std::size_t> train_rows;
        train_rows.reserve(n - fold_size);
        for (std::size_t r = 0; r < n; ++r) {
            if (!in_test[r]) train_rows.push_back(r);
        }

        detail::Matrix tx;
        tx.rows = train_rows.size();
        tx.cols = d;
        tx.cells.resize(tx.rows * d);
        std::vector<double> ty(tx.rows);
        for (std::size_t r = 0; r < train_rows.size(); ++r) {
            for (std::size_t c = 0; c < d; ++c) tx.cells[r * d + c] = x.at(train_rows[r], c);
            ty[r] = group.scores[train_rows[r]];
        }
        ForestConfig fold_config = config;
        fold_config.seed =
            Rng::derive_seed(config.seed, {detail::kStreamQualityFold, fnv1a64(dataset_id), f});
        const std::vector<detail::RegressionTree> trees = detail::train_forest(tx, ty, fold_config);
        for (std::size_t r = 0; r < n; ++r) {
            if (!in_test[r]) continue;
            double sum = 0;
            for (const detail::RegressionTree& tree : trees) sum += tree.predict(x.row(r));
            predictions[r] = sum / static_cast<double>(trees.size());
        }
    }

    QualityReport report;
    report.dataset_id = dataset_id;
    report.spearman = spearman_rho(predictions, group.scores);
    report.kendall = kendall_tau_b(predictions, group.scores);
    report.pass = report.spearman > threshold;
    report.predictions = std::move(predictions);
    report.truths = group.scores;
    return report;
}

// ---------------------------------------------------------------------------
// Surrogate store: one JSON file per (algorithm, dataset) plus a manifest
// listing quality metrics and pass flags.

struct StoreManifest {
    std::string algorithm;
    double quality_threshold = 0.8;
    std::vector<QualityReport> entries;

    nlohmann::json to_json() const {
        nlohmann::json entries_json = nlohmann::json::array();
        for (const QualityReport& e : entries) {
            entries_json.push_back({{"dataset_id", e.dataset_id},
                                    {"spearman", e.spearman},
                                    {"kendall", e.kendall},
                                    {"pass", e.pass}});
        }
        return {{"algorithm", algorithm},
                {"quality_threshold", quality_threshold},
                {"entries", std::move(entries_json)}};
    }

    static StoreManifest from_json(const nlohmann::json& j) {
        StoreManifest manifest;
        try {
            manifest.algorithm = j.at("algorithm").get<std::string>();
            manifest.quality_threshold = j.at("quality_threshold").get<double>();
            for (const auto& e : j.at("entries")) {
                QualityReport report;
                report.dataset_id = e.at("dataset_id").get<std::string>();
                report.spearman = e.at("spearman").get<double>();
                report.kendall = e.at("kendall").get<double>();
                report.pass = e.at("pass").get<bool>();
                manifest.entries.push_back(std::move(report));
            }
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError(std::string("malformed manifest JSON: ") + e.what());
        }
        return manifest;
    }
};

namespace detail {

inline void require_safe_id(const std::string& id) {
    if (id.empty()) throw ValidationError("dataset id must not be empty");
    for (char c : id) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                        c == '_' || c == '-' || c == '.';
        if (!ok)
            throw ValidationError("dataset id '" + id + "' contains characters unsafe for filenames");
    }
}

}  // namespace detail

inline std::filesystem::path surrogate_dir(const std::filesystem::path& store,
                                           const std::string& algorithm) {
    return store / algorithm;
}

inline std::filesystem::path surrogate_path(const std::filesystem::path& store,
                                            const std::string& algorithm, const std::string& id) {
    detail::require_safe_id(id);
    return surrogate_dir(store, algorithm) / (id + ".json");
}

inline void save_surrogate(const SurrogateModel& model, const std::filesystem::path& file) {
    std::ofstream out(file);
    if (!out) throw IoError("cannot write surrogate file: " + file.string());
    out << model.to_json().dump() << '\n';
}

inline SurrogateModel load_surrogate(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw ValidationError("cannot open surrogate file: " + file.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("malformed JSON in " + file.string() + ": " + e.what());
    }
    return SurrogateModel::from_json(j);
}

inline void save_manifest(const StoreManifest& manifest, const std::filesystem::path& store) {
    const std::filesystem::path dir = surrogate_dir(store, manifest.algorithm);
    std::filesystem::create_directories(dir);
    std::ofstream out(dir / "manifest.json");
    if (!out) throw IoError("cannot write manifest in " + dir.string());
    out << manifest.to_json().dump(2) << '\n';
}

inline StoreManifest load_manifest(const std::filesystem::path& store, const std::string& algorithm) {
    const std::filesystem::path file = surrogate_dir(store, algorithm) / "manifest.json";
    std::ifstream in(file);
    if (!in) throw ValidationError("cannot open manifest: " + file.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("malformed JSON in " + file.string() + ": " + e.what());
    }
    return StoreManifest::from_json(j);
}

// Loads the models listed in the manifest, sorted by dataset id. With
// only_passing, datasets failing the quality gate are skipped.
inline std::vector<SurrogateModel> load_store(const std::filesystem::path& store,
                                              const std::string& algorithm,
                                              bool only_passing = true) {
    const StoreManifest manifest = load_manifest(store, algorithm);
    std::vector<std::string> ids;
    for (const QualityReport& entry : manifest.entries) {
        if (!only_passing || entry.pass) ids.push_back(entry.dataset_id);
    }
    std::sort(ids.begin(), ids.end());
    std::vector<SurrogateModel> models;
    models.reserve(ids.size());
    for (const std::string& id : ids) {
        models.push_back(load_surrogate(surrogate_path(store, algorithm, id)));
    }
    return models;
}

}  // namespace symdef

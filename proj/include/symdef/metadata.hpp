#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "symdef/errors.hpp"
#include "symdef/expr.hpp"
#include "symdef/rng.hpp"
#include "symdef/space.hpp"

namespace symdef {

namespace detail {

inline std::string trim(std::string s) {
    const auto not_space = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    return s;
}

// Plain comma-split; the formats here never need quoting.
inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (;;) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string::npos) {
            fields.push_back(trim(line.substr(start)));
            break;
        }
        fields.push_back(trim(line.substr(start, comma - start)));
        start = comma + 1;
    }
    return fields;
}

inline double parse_double_cell(const std::string& cell, const std::string& context) {
    double value = 0;
    const char* begin = cell.data();
    const char* end = begin + cell.size();
    const auto res = std::from_chars(begin, end, value);
    if (res.ec != std::errc{} || res.ptr != end || cell.empty())
        throw ValidationError("non-numeric cell '" + cell + "' in " + context);
    return value;
}

inline double sample_variance(const std::vector<double>& xs) {
    const std::size_t n = xs.size();
    if (n < 2) return 0.0;
    double mean = 0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(n);
    double ss = 0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    return ss / static_cast<double>(n - 1);
}

inline double median_of_sorted(const std::vector<double>& sorted) {
    const std::size_t n = sorted.size();
    if (n == 0) return 0.0;
    if (n % 2 == 1) return sorted[n / 2];
    return 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Evaluation metadata
//
// Records are (dataset, hyperparameter vector, logloss) rows. Losses are
// rescaled per dataset to [0, 1] with 1 = best observed, 0 = worst, so that
// scores are commensurable across datasets.

struct EvaluationRecord {
    std::vector<double> values;  // ordered as the space's tunable list
    double loss = 0;
};

struct DatasetGroup {
    std::string id;
    std::vector<EvaluationRecord> records;  // load order preserved
    std::vector<double> scores;             // normalized, aligned with records
    double best_loss = 0;
    double worst_loss = 0;
    bool degenerate = false;      // all losses equal; scores forced to 1
    std::size_t unique_configurations = 0;
    bool low_coverage = false;    // fewer unique configurations than the threshold
};

class EvaluationTable {
  public:
    static EvaluationTable from_records(const SearchSpace& space,
                                        const std::vector<std::pair<std::string, EvaluationRecord>>& rows,
                                        std::size_t unique_threshold = 100) {
        EvaluationTable table;
        table.algorithm_ = space.algorithm;
        table.unique_threshold_ = unique_threshold;
        for (const HyperparameterDef& def : space.tunable) table.hp_names_.push_back(def.name);
        std::map<std::string, std::size_t> index;
        for (const auto& [id, record] : rows) {
            if (record.values.size() != space.dimension())
                throw ValidationError("record for dataset '" + id + "' has wrong arity");
            if (!std::isfinite(record.loss))
                throw ValidationError("record for dataset '" + id + "' has non-finite loss");
            auto [it, inserted] = index.emplace(id, table.groups_.size());
            if (inserted) {
                DatasetGroup group;
                group.id = id;
                table.groups_.push_back(std::move(group));
            }
            table.groups_[it->second].records.push_back(record);
        }
        if (table.groups_.empty()) throw ValidationError("no evaluation records");
        std::sort(table.groups_.begin(), table.groups_.end(),
                  [](const DatasetGroup& a, const DatasetGroup& b) { return a.id < b.id; });
        for (DatasetGroup& group : table.groups_) finalize_group(group, unique_threshold);
        return table;
    }

    // CSV with header `dataset_id,<hp names...>,logloss`. Hyperparameter
    // columns may appear in any order but must match the space exactly.
    static EvaluationTable load_csv(const std::filesystem::path& path, const SearchSpace& space,
                                    std::size_t unique_threshold = 100) {
        std::ifstream in(path);
        if (!in) throw ValidationError("cannot open records file: " + path.string());
        std::string line;
        if (!std::getline(in, line)) throw ValidationError("empty records file: " + path.string());
        const std::vector<std::string> header = detail::split_csv_line(line);
        if (header.size() < 3 || header.front() != "dataset_id" || header.back() != "logloss")
            throw ValidationError("records header must be dataset_id,<hyperparameters...>,logloss");
        std::vector<int> column_to_slot(header.size() - 2, -1);
        std::vector<bool> seen(space.dimension(), false);
        for (std::size_t c = 1; c + 1 < header.size(); ++c) {
            const int slot = space.index_of(header[c]);
            if (slot < 0)
                throw ValidationError("unknown hyperparameter column '" + header[c] + "'");
            if (seen[static_cast<std::size_t>(slot)])
                throw ValidationError("duplicate hyperparameter column '" + header[c] + "'");
            seen[static_cast<std::size_t>(slot)] = true;
            column_to_slot[c - 1] = slot;
        }
        for (std::size_t i = 0; i < space.dimension(); ++i) {
            if (!seen[i])
                throw ValidationError("missing hyperparameter column '" + space.tunable[i].name + "'");
        }
        std::vector<std::pair<std::string, EvaluationRecord>> rows;
        std::size_t line_no = 1;
        while (std::getline(in, line)) {
            ++line_no;
            if (detail::trim(line).empty()) continue;
            const std::vector<std::string> cells = detail::split_csv_line(line);
            if (cells.size() != header.size())
                throw ValidationError("line " + std::to_string(line_no) + ": expected " +
                                      std::to_string(header.size()) + " cells, got " +
                                      std::to_string(cells.size()));
            EvaluationRecord record;
            record.values.resize(space.dimension());
            const std::string context = path.filename().string() + ":" + std::to_string(line_no);
            for (std::size_t c = 1; c + 1 < cells.size(); ++c) {
                record.values[static_cast<std::size_t>(column_to_slot[c - 1])] =
                    detail::parse_double_cell(cells[c], context);
            }
            record.loss = detail::parse_double_cell(cells.back(), context);
            rows.emplace_back(cells.front(), std::move(record));
        }
        return from_records(space, rows, unique_threshold);
    }

    const std::string& algorithm() const { return algorithm_; }
    const std::vector<std::string>& hyperparameter_names() const { return hp_names_; }
    std::size_t unique_threshold() const { return unique_threshold_; }
    const std::vector<DatasetGroup>& groups() const { return groups_; }

    std::vector<std::string> dataset_ids() const {
        std::vector<std::string> ids;
        ids.reserve(groups_.size());
        for (const DatasetGroup& g : groups_) ids.push_back(g.id);
        return ids;
    }

    bool has(const std::string& id) const {
        return std::any_of(groups_.begin(), groups_.end(),
                           [&](const DatasetGroup& g) { return g.id == id; });
    }

    const DatasetGroup& group(const std::string& id) const {
        for (const DatasetGroup& g : groups_) {
            if (g.id == id) return g;
        }
        throw ValidationError("unknown dataset id '" + id + "'");
    }

    nlohmann::json to_json() const {
        nlohmann::json datasets = nlohmann::json::array();
        for (const DatasetGroup& g : groups_) {
            nlohmann::json records = nlohmann::json::array();
            for (std::size_t i = 0; i < g.records.size(); ++i) {
                records.push_back({{"values", g.records[i].values},
                                   {"loss", g.records[i].loss},
                                   {"score", g.scores[i]}});
            }
            datasets.push_back({{"id", g.id},
                                {"best_loss", g.best_loss},
                                {"worst_loss", g.worst_loss},
                                {"degenerate", g.degenerate},
                                {"unique_configurations", g.unique_configurations},
                                {"low_coverage", g.low_coverage},
                                {"records", std::move(records)}});
        }
        return {{"algorithm", algorithm_},
                {"hyperparameters", hp_names_},
                {"unique_threshold", unique_threshold_},
                {"datasets", std::move(datasets)}};
    }

    static EvaluationTable from_json(const nlohmann::json& j) {
        EvaluationTable table;
        try {
            table.algorithm_ = j.at("algorithm").get<std::string>();
            table.hp_names_ = j.at("hyperparameters").get<std::vector<std::string>>();
            table.unique_threshold_ = j.at("unique_threshold").get<std::size_t>();
            for (const auto& d : j.at("datasets")) {
                DatasetGroup g;
                g.id = d.at("id").get<std::string>();
                g.best_loss = d.at("best_loss").get<double>();
                g.worst_loss = d.at("worst_loss").get<double>();
                g.degenerate = d.at("degenerate").get<bool>();
                g.unique_configurations = d.at("unique_configurations").get<std::size_t>();
                g.low_coverage = d.at("low_coverage").get<bool>();
                for (const auto& r : d.at("records")) {
                    EvaluationRecord record;
                    record.values = r.at("values").get<std::vector<double>>();
                    record.loss = r.at("loss").get<double>();
                    g.records.push_back(std::move(record));
                    g.scores.push_back(r.at("score").get<double>());
                }
                table.groups_.push_back(std::move(g));
            }
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError(std::string("malformed evaluation-table JSON: ") + e.what());
        }
        return table;
    }

    void save(const std::filesystem::path& path) const {
        std::ofstream out(path);
        if (!out) throw IoError("cannot write table file: " + path.string());
        out << to_json().dump(2) << '\n';
    }

    static EvaluationTable load(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw ValidationError("cannot open table file: " + path.string());
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError("malformed JSON in " + path.string() + ": " + e.what());
        }
        return from_json(j);
    }

  private:
    static void finalize_group(DatasetGroup& group, std::size_t unique_threshold) {
        group.best_loss = std::numeric_limits<double>::infinity();
        group.worst_loss = -std::numeric_limits<double>::infinity();
        std::set<std::vector<double>> unique;
        for (const EvaluationRecord& r : group.records) {
            group.best_loss = std::min(group.best_loss, r.loss);
            group.worst_loss = std::max(group.worst_loss, r.loss);
            unique.insert(r.values);
        }
        group.unique_configurations = unique.size();
        group.low_coverage = group.unique_configurations < unique_threshold;
        group.degenerate = group.best_loss == group.worst_loss;
        group.scores.reserve(group.records.size());
        const double spread = group.worst_loss - group.best_loss;
        for (const EvaluationRecord& r : group.records) {
            group.scores.push_back(group.degenerate ? 1.0 : (group.worst_loss - r.loss) / spread);
        }
    }

    std::string algorithm_;
    std::vector<std::string> hp_names_;
    std::size_t unique_threshold_ = 100;
    std::vector<DatasetGroup> groups_;
};

// Leave-one-dataset-out split: every other dataset becomes training data.
inline std::pair<std::vector<std::string>, std::string> split_lodo(const EvaluationTable& table,
                                                                   const std::string& heldout) {
    if (!table.has(heldout)) throw ValidationError("unknown dataset id '" + heldout + "'");
    std::vector<std::string> train;
    for (const DatasetGroup& g : table.groups()) {
        if (g.id != heldout) train.push_back(g.id);
    }
    if (train.empty())
        throw ValidationError("cannot hold out '" + heldout + "': training set would be empty");
    return {std::move(train), heldout};
}

// ---------------------------------------------------------------------------
// Meta-feature tables

using MetaFeatureTable = std::map<std::string, MetaFeatures>;

inline nlohmann::json metafeatures_to_json(const MetaFeatures& mf) {
    return {{"n", mf.n},     {"po", mf.po},   {"p", mf.p},     {"m", mf.m},
            {"rc", mf.rc},   {"mcp", mf.mcp}, {"mkd", mf.mkd}, {"xvar", mf.xvar}};
}

inline MetaFeatures metafeatures_from_json(const nlohmann::json& j) {
    MetaFeatures mf;
    try {
        mf.n = j.at("n").get<double>();
        mf.po = j.at("po").get<double>();
        mf.p = j.at("p").get<double>();
        mf.m = j.at("m").get<double>();
        mf.rc = j.at("rc").get<double>();
        mf.mcp = j.at("mcp").get<double>();
        mf.mkd = j.at("mkd").get<double>();
        mf.xvar = j.at("xvar").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed meta-features JSON: ") + e.what());
    }
    validate(mf);
    return mf;
}

inline nlohmann::json metafeature_table_to_json(const MetaFeatureTable& table) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [id, mf] : table) j[id] = metafeatures_to_json(mf);
    return j;
}

inline MetaFeatureTable metafeature_table_from_json(const nlohmann::json& j) {
    MetaFeatureTable table;
    for (auto it = j.begin(); it != j.end(); ++it) {
        table.emplace(it.key(), metafeatures_from_json(it.value()));
    }
    return table;
}

inline MetaFeatureTable load_metafeature_table(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open meta-features file: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("malformed JSON in " + path.string() + ": " + e.what());
    }
    return metafeature_table_from_json(j);
}

inline void save_metafeature_table(const MetaFeatureTable& table, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write meta-features file: " + path.string());
    out << metafeature_table_to_json(table).dump(2) << '\n';
}

inline void require_coverage(const MetaFeatureTable& mf_table, const EvaluationTable& table) {
    for (const DatasetGroup& g : table.groups()) {
        if (!mf_table.count(g.id))
            throw ValidationError("no meta-features for dataset '" + g.id + "'");
    }
}

// ---------------------------------------------------------------------------
// Meta-feature computation
//
// Raw tabular data with per-column categorical markers and a target column.
// Pipeline: impute (numeric -> median, categorical -> mode), one-hot encode
// categoricals, standardize numeric columns; meta-features are read off the
// processed matrix. mkd uses pairwise squared Euclidean distances over a
// deterministic subsample of at most 1000 rows.

struct RawColumn {
    std::string name;
    bool categorical = false;
    std::vector<std::string> cells;  // raw text; empty/NA/? are missing
};

struct RawDataset {
    std::vector<RawColumn> features;
    std::vector<std::string> target;
};

inline constexpr std::uint64_t kMetaFeatureSubsampleSeed = 0x6d6b64u;  // fixed: results must not drift
inline constexpr std::size_t kMetaFeatureSubsampleLimit = 1000;

// CSV: last column is the target; a ":cat" suffix on a header cell marks the
// column categorical (the suffix is stripped from the stored name).
inline RawDataset load_raw_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open dataset file: " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw ValidationError("empty dataset file: " + path.string());
    const std::vector<std::string> header = detail::split_csv_line(line);
    if (header.size() < 2)
        throw ValidationError("dataset needs at least one feature column and a target column");
    RawDataset data;
    for (std::size_t c = 0; c + 1 < header.size(); ++c) {
        RawColumn col;
        col.name = header[c];
        constexpr std::string_view suffix = ":cat";
        if (col.name.size() > suffix.size() &&
            col.name.compare(col.name.size() - suffix.size(), suffix.size(), suffix) == 0) {
            col.categorical = true;
            col.name.resize(col.name.size() - suffix.size());
        }
        data.features.push_back(std::move(col));
    }
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        const std::vector<std::string> cells = detail::split_csv_line(line);
        if (cells.size() != header.size())
            throw ValidationError("line " + std::to_string(line_no) + ": expected " +
                                  std::to_string(header.size()) + " cells, got " +
                                  std::to_string(cells.size()));
        for (std::size_t c = 0; c + 1 < cells.size(); ++c) data.features[c].cells.push_back(cells[c]);
        data.target.push_back(cells.back());
    }
    return data;
}

namespace detail {

inline bool missing_cell(const std::string& cell) {
    return cell.empty() || cell == "NA" || cell == "na" || cell == "?";
}

}  // namespace detail

inline MetaFeatures compute_metafeatures(const RawDataset& data) {
    const std::size_t n = data.target.size();
    if (n < 2) throw ValidationError("dataset needs at least 2 rows");
    if (data.features.empty()) throw ValidationError("dataset needs at least 1 feature");
    for (const RawColumn& col : data.features) {
        if (col.cells.size() != n) throw ValidationError("ragged dataset columns");
    }

    // class distribution
    std::map<std::string, std::size_t> class_counts;
    for (const std::string& label : data.target) ++class_counts[label];
    if (class_counts.size() < 2) throw ValidationError("target has a single class");
    std::size_t majority = 0;
    for (const auto& [label, count] : class_counts) majority = std::max(majority, count);

    // processed matrix, column by column
    std::vector<std::vector<double>> processed;
    std::size_t categorical_columns = 0;
    for (const RawColumn& col : data.features) {
        if (col.categorical) {
            ++categorical_columns;
            std::map<std::string, std::size_t> level_counts;
            for (const std::string& cell : col.cells) {
                if (!detail::missing_cell(cell)) ++level_counts[cell];
            }
            if (level_counts.empty()) level_counts["<missing>"] = n;
            std::string mode = level_counts.begin()->first;
            for (const auto& [level, count] : level_counts) {
                if (count > level_counts[mode]) mode = level;
            }
            std::vector<std::string> imputed;
            imputed.reserve(n);
            for (const std::string& cell : col.cells)
                imputed.push_back(detail::missing_cell(cell) ? mode : cell);
            for (const auto& [level, count] : level_counts) {
                std::vector<double> onehot(n, 0.0);
                for (std::size_t r = 0; r < n; ++r) onehot[r] = imputed[r] == level ? 1.0 : 0.0;
                processed.push_back(std::move(onehot));
            }
        } else {
            std::vector<double> values(n, 0.0);
            std::vector<double> present;
            std::vector<bool> is_missing(n, false);
            for (std::size_t r = 0; r < n; ++r) {
                if (detail::missing_cell(col.cells[r])) {
                    is_missing[r] = true;
                } else {
                    values[r] = detail::parse_double_cell(col.cells[r], "column '" + col.name + "'");
                    present.push_back(values[r]);
                }
            }
            double median = 0.0;
            if (!present.empty()) {
                std::sort(present.begin(), present.end());
                median = detail::median_of_sorted(present);
            }
            for (std::size_t r = 0; r < n; ++r) {
                if (is_missing[r]) values[r] = median;
            }
            double mean = 0;
            for (double v : values) mean += v;
            mean /= static_cast<double>(n);
            const double var = detail::sample_variance(values);
            const double sd = var > 0 ? std::sqrt(var) : 1.0;
            for (double& v : values) v = (v - mean) / sd;
            processed.push_back(std::move(values));
        }
    }

    MetaFeatures mf;
    mf.n = static_cast<double>(n);
    mf.po = static_cast<double>(data.features.size());
    mf.p = static_cast<double>(processed.size());
    mf.m = static_cast<double>(class_counts.size());
    mf.rc = static_cast<double>(categorical_columns) / mf.po;
    mf.mcp = static_cast<double>(majority) / mf.n;

    double var_sum = 0;
    for (const auto& column : processed) var_sum += detail::sample_variance(column);
    mf.xvar = var_sum / static_cast<double>(processed.size());

    // inverse median pairwise squared distance over a seeded subsample
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(kMetaFeatureSubsampleSeed);
    rng.shuffle(order);
    const std::size_t k = std::min(n, kMetaFeatureSubsampleLimit);
    std::vector<double> distances;
    distances.reserve(k * (k - 1) / 2);
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = i + 1; j < k; ++j) {
            double d2 = 0;
            for (const auto& column : processed) {
                const double diff = column[order[i]] - column[order[j]];
                d2 += diff * diff;
            }
            distances.push_back(d2);
        }
    }
    std::sort(distances.begin(), distances.end());
    const double median_distance = detail::median_of_sorted(distances);
    mf.mkd = median_distance > 0 ? 1.0 / median_distance : 0.0;

    validate(mf);
    return mf;
}

}  // namespace symdef

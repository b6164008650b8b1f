#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "symdef/errors.hpp"
#include "symdef/expr.hpp"

namespace symdef {

// ---------------------------------------------------------------------------
// Search spaces

enum class Scale { Linear, Log };

struct HyperparameterDef {
    std::string name;
    Kind kind = Kind::Float;
    Scale scale = Scale::Linear;
};

struct FixedSetting {
    std::string name;
    nlohmann::json value;
};

struct SearchSpace {
    std::string algorithm;
    std::vector<HyperparameterDef> tunable;
    std::vector<FixedSetting> fixed;

    std::size_t dimension() const { return tunable.size(); }

    int index_of(std::string_view hp_name) const {
        for (std::size_t i = 0; i < tunable.size(); ++i) {
            if (tunable[i].name == hp_name) return static_cast<int>(i);
        }
        return -1;
    }
};

inline const std::vector<std::string>& builtin_algorithms() {
    static const std::vector<std::string> names = {"glmnet", "rpart", "ranger",
                                                   "svm",    "knn",   "xgboost"};
    return names;
}

// Tunable/fixed splits for the six supported algorithms. Hyperparameters that
// span orders of magnitude carry a log scale, which only affects the
// surrogate's feature transform.
inline SearchSpace builtin_space(std::string_view algorithm) {
    const Kind F = Kind::Float;
    const Kind I = Kind::Integer;
    const Scale lin = Scale::Linear;
    const Scale lg = Scale::Log;
    if (algorithm == "glmnet") {
        return {"glmnet", {{"alpha", F, lin}, {"lambda", F, lg}}, {}};
    }
    if (algorithm == "rpart") {
        return {"rpart",
                {{"cp", F, lg}, {"max.depth", I, lin}, {"minbucket", I, lin}, {"minsplit", I, lin}},
                {}};
    }
    if (algorithm == "ranger") {
        return {"ranger",
                {{"mtry", I, lin}, {"sample.fraction", F, lin}, {"min.node.size", I, lin}},
                {{"splitrule", "gini"}, {"num.trees", 500}, {"replace", true}}};
    }
    if (algorithm == "svm") {
        return {"svm", {{"C", F, lg}, {"gamma", F, lg}}, {{"kernel", "radial"}}};
    }
    if (algorithm == "knn") {
        return {"knn",
                {{"k", I, lin}, {"M", I, lin}, {"ef", I, lin}, {"efc", I, lin}},
                {{"distance", "l2"}}};
    }
    if (algorithm == "xgboost") {
        return {"xgboost",
                {{"eta", F, lg},
                 {"lambda", F, lg},
                 {"gamma", F, lg},
                 {"alpha", F, lg},
                 {"subsample", F, lin},
                 {"max_depth", I, lin},
                 {"min_child_weight", F, lin},
                 {"colsample_bytree", F, lin},
                 {"colsample_bylevel", F, lin}},
                {{"booster", "gbtree"}, {"nrounds", 500}}};
    }
    throw ValidationError("unknown algorithm: " + std::string(algorithm));
}

// ---------------------------------------------------------------------------
// Published implementation defaults, expressed in the grammar.

inline const std::vector<std::pair<std::string, std::string>>& implementation_default_catalog() {
    static const std::vector<std::pair<std::string, std::string>> catalog = {
        {"glmnet", "glmnet"}, {"rpart", "rpart"},     {"ranger", "ranger"}, {"svm", "e1071"},
        {"svm", "sklearn"},   {"knn", "mlr"},         {"xgboost", "xgboost"}};
    return catalog;
}

inline std::vector<std::string> implementation_default_sources(std::string_view algorithm) {
    std::vector<std::string> sources;
    for (const auto& [algo, source] : implementation_default_catalog()) {
        if (algo == algorithm) sources.push_back(source);
    }
    return sources;
}

inline SymbolicConfiguration implementation_default(std::string_view algorithm,
                                                    std::string_view source) {
    struct Entry {
        std::string_view algorithm;
        std::string_view source;
        std::vector<std::string_view> formulas;
    };
    static const std::vector<Entry> table = {
        {"glmnet", "glmnet", {"1", "0.01"}},
        {"rpart", "rpart", {"0.01", "30", "1", "20"}},
        {"ranger", "ranger", {"pow(po, 0.5)", "1", "1"}},
        {"svm", "e1071", {"1", "truediv(1, po)"}},
        {"svm", "sklearn", {"1", "truediv(1, mul(p, xvar))"}},
        {"knn", "mlr", {"10", "16", "10", "200"}},
        {"xgboost", "xgboost", {"0.1", "1", "0.0", "0.0", "1", "3", "1", "1", "1"}},
    };
    for (const Entry& entry : table) {
        if (entry.algorithm != algorithm || entry.source != source) continue;
        const SearchSpace space = builtin_space(algorithm);
        SymbolicConfiguration config;
        config.algorithm = std::string(algorithm);
        for (std::size_t i = 0; i < entry.formulas.size(); ++i) {
            config.components.push_back(parse_formula(entry.formulas[i], space.tunable[i].kind));
        }
        return config;
    }
    throw ValidationError("no implementation default for (" + std::string(algorithm) + ", " +
                          std::string(source) + ")");
}

// ---------------------------------------------------------------------------
// Configuration validation and realization

inline void validate_configuration(const SymbolicConfiguration& config, const SearchSpace& space) {
    if (config.algorithm != space.algorithm)
        throw ValidationError("configuration algorithm '" + config.algorithm +
                              "' does not match space '" + space.algorithm + "'");
    if (config.components.size() != space.dimension())
        throw ValidationError("configuration has " + std::to_string(config.components.size()) +
                              " components, space expects " + std::to_string(space.dimension()));
    for (std::size_t i = 0; i < config.components.size(); ++i) {
        if (!well_typed(config.components[i], space.tunable[i].kind))
            throw ValidationError("component '" + space.tunable[i].name + "' is not well-typed");
    }
}

enum class SlotValidity { Valid, OutOfRange, Invalid };

struct RealizedValue {
    double value = 0;
    SlotValidity validity = SlotValidity::Valid;
};

struct RealizedConfiguration {
    std::vector<RealizedValue> values;

    bool all_valid() const {
        return std::all_of(values.begin(), values.end(),
                           [](const RealizedValue& v) { return v.validity == SlotValidity::Valid; });
    }

    bool any_invalid() const {
        return std::any_of(values.begin(), values.end(), [](const RealizedValue& v) {
            return v.validity == SlotValidity::Invalid;
        });
    }
};

// Evaluates each component on the meta-features. Integer hyperparameters are
// rounded after evaluation. Finite values are valid, +-inf is valid but out
// of range (clamped later by the surrogate), NaN marks the slot invalid.
inline RealizedConfiguration realize_configuration(const SymbolicConfiguration& config,
                                                   const MetaFeatures& mf,
                                                   std::span<const HyperparameterDef> defs) {
    if (config.components.size() != defs.size())
        throw ValidationError("configuration/hyperparameter arity mismatch");
    RealizedConfiguration out;
    out.values.reserve(defs.size());
    for (std::size_t i = 0; i < defs.size(); ++i) {
        double v = eval_expr(config.components[i], mf);
        SlotValidity validity = SlotValidity::Valid;
        if (std::isnan(v)) {
            validity = SlotValidity::Invalid;
        } else if (std::isinf(v)) {
            validity = SlotValidity::OutOfRange;
        } else if (defs[i].kind == Kind::Integer) {
            v = round_half_away(v);
        }
        out.values.push_back({v, validity});
    }
    return out;
}

inline RealizedConfiguration realize_configuration(const SymbolicConfiguration& config,
                                                   const MetaFeatures& mf,
                                                   const SearchSpace& space) {
    return realize_configuration(config, mf, std::span<const HyperparameterDef>(space.tunable));
}

// ---------------------------------------------------------------------------
// JSON schema:
// { "algorithm", "tunable": [{"name","kind","scale"}], "fixed": [{"name","value"}] }

inline nlohmann::json space_to_json(const SearchSpace& space) {
    nlohmann::json tunable = nlohmann::json::array();
    for (const HyperparameterDef& def : space.tunable) {
        tunable.push_back({{"name", def.name},
                           {"kind", def.kind == Kind::Integer ? "integer" : "float"},
                           {"scale", def.scale == Scale::Log ? "log" : "linear"}});
    }
    nlohmann::json fixed = nlohmann::json::array();
    for (const FixedSetting& f : space.fixed) {
        fixed.push_back({{"name", f.name}, {"value", f.value}});
    }
    return {{"algorithm", space.algorithm}, {"tunable", tunable}, {"fixed", fixed}};
}

inline SearchSpace space_from_json(const nlohmann::json& j) {
    SearchSpace space;
    try {
        space.algorithm = j.at("algorithm").get<std::string>();
        for (const auto& t : j.at("tunable")) {
            HyperparameterDef def;
            def.name = t.at("name").get<std::string>();
            const std::string kind = t.at("kind").get<std::string>();
            if (kind == "integer") {
                def.kind = Kind::Integer;
            } else if (kind == "float") {
                def.kind = Kind::Float;
            } else {
                throw ValidationError("unknown hyperparameter kind '" + kind + "'");
            }
            const std::string scale = t.value("scale", "linear");
            if (scale == "log") {
                def.scale = Scale::Log;
            } else if (scale == "linear") {
                def.scale = Scale::Linear;
            } else {
                throw ValidationError("unknown scale '" + scale + "'");
            }
            space.tunable.push_back(std::move(def));
        }
        if (j.contains("fixed")) {
            for (const auto& f : j.at("fixed")) {
                space.fixed.push_back({f.at("name").get<std::string>(), f.at("value")});
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed search-space JSON: ") + e.what());
    }
    if (space.tunable.empty()) throw ValidationError("search space has no tunable hyperparameters");
    return space;
}

inline SearchSpace load_space(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open search-space file: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("malformed JSON in " + path.string() + ": " + e.what());
    }
    return space_from_json(j);
}

}  // namespace symdef

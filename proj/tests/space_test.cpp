#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "symdef/space.hpp"

using namespace symdef;

TEST_CASE("builtin spaces match the published tunable/fixed splits") {
    const SearchSpace glmnet = builtin_space("glmnet");
    CHECK(glmnet.dimension() == 2);
    CHECK(glmnet.tunable[0].name == "alpha");
    CHECK(glmnet.tunable[0].kind == Kind::Float);
    CHECK(glmnet.tunable[1].name == "lambda");

    const SearchSpace rpart = builtin_space("rpart");
    CHECK(rpart.dimension() == 4);
    CHECK(rpart.tunable[0].name == "cp");
    CHECK(rpart.tunable[0].kind == Kind::Float);
    CHECK(rpart.tunable[1].kind == Kind::Integer);
    CHECK(rpart.tunable[2].kind == Kind::Integer);
    CHECK(rpart.tunable[3].kind == Kind::Integer);

    const SearchSpace ranger = builtin_space("ranger");
    CHECK(ranger.dimension() == 3);
    CHECK(ranger.tunable[0].name == "mtry");
    CHECK(ranger.tunable[0].kind == Kind::Integer);
    CHECK(ranger.tunable[1].name == "sample.fraction");
    CHECK(ranger.tunable[1].kind == Kind::Float);
    bool saw_numtrees = false;
    for (const FixedSetting& f : ranger.fixed) {
        if (f.name == "num.trees") {
            saw_numtrees = true;
            CHECK(f.value.get<int>() == 500);
        }
    }
    CHECK(saw_numtrees);

    const SearchSpace svm = builtin_space("svm");
    CHECK(svm.dimension() == 2);
    CHECK(svm.tunable[0].name == "C");
    CHECK(svm.tunable[1].name == "gamma");
    REQUIRE(svm.fixed.size() == 1);
    CHECK(svm.fixed[0].name == "kernel");
    CHECK(svm.fixed[0].value.get<std::string>() == "radial");

    CHECK(builtin_space("knn").dimension() == 4);
    const SearchSpace xgboost = builtin_space("xgboost");
    CHECK(xgboost.dimension() == 9);
    int integer_count = 0;
    for (const HyperparameterDef& def : xgboost.tunable) {
        if (def.kind == Kind::Integer) ++integer_count;
    }
    CHECK(integer_count == 1);  // only max_depth

    CHECK_THROWS_AS(builtin_space("mystery"), ValidationError);
}

TEST_CASE("builtin_space is referentially constant") {
    const nlohmann::json a = space_to_json(builtin_space("xgboost"));
    const nlohmann::json b = space_to_json(builtin_space("xgboost"));
    CHECK(a.dump() == b.dump());
}

TEST_CASE("implementation defaults") {
    MetaFeatures mf;
    mf.n = 200;
    mf.po = 16;
    mf.p = 25;
    mf.m = 4;
    mf.rc = 0.25;
    mf.mcp = 0.4;
    mf.mkd = 0.02;
    mf.xvar = 0.8;

    SUBCASE("svm/sklearn gamma = 1 / (p * xvar)") {
        const SymbolicConfiguration config = implementation_default("svm", "sklearn");
        const RealizedConfiguration realized =
            realize_configuration(config, mf, builtin_space("svm"));
        CHECK(realized.values[0].value == 1.0);
        CHECK(realized.values[1].value == doctest::Approx(1.0 / (25.0 * 0.8)));
        CHECK(realized.all_valid());
    }
    SUBCASE("svm/e1071 gamma = 1 / po") {
        const SymbolicConfiguration config = implementation_default("svm", "e1071");
        const RealizedConfiguration realized =
            realize_configuration(config, mf, builtin_space("svm"));
        CHECK(realized.values[1].value == doctest::Approx(1.0 / 16.0));
    }
    SUBCASE("ranger mtry = round(sqrt(po))") {
        const SymbolicConfiguration config = implementation_default("ranger", "ranger");
        const RealizedConfiguration realized =
            realize_configuration(config, mf, builtin_space("ranger"));
        CHECK(realized.values[0].value == 4.0);  // sqrt(16)
        CHECK(realized.values[1].value == 1.0);
        CHECK(realized.values[2].value == 1.0);
    }
    SUBCASE("glmnet defaults") {
        const SymbolicConfiguration config = implementation_default("glmnet", "glmnet");
        const RealizedConfiguration realized =
            realize_configuration(config, mf, builtin_space("glmnet"));
        CHECK(realized.values[0].value == 1.0);
        CHECK(realized.values[1].value == 0.01);
    }
    SUBCASE("unknown pair") {
        CHECK_THROWS_AS(implementation_default("svm", "weka"), ValidationError);
    }
}

TEST_CASE("every implementation default realizes valid on positive meta-features") {
    Rng rng(5150);
    for (const auto& [algorithm, source] : implementation_default_catalog()) {
        const SearchSpace space = builtin_space(algorithm);
        const SymbolicConfiguration config = implementation_default(algorithm, source);
        validate_configuration(config, space);
        for (int i = 0; i < 200; ++i) {
            MetaFeatures mf;
            mf.n = 1 + rng.uniform_index(100000);
            mf.po = 1 + rng.uniform_index(5000);
            mf.p = 1 + rng.uniform_index(20000);
            mf.m = 2 + rng.uniform_index(50);
            mf.rc = rng.uniform01();
            mf.mcp = rng.uniform_real(1.0 / mf.m, 1.0);
            mf.mkd = rng.uniform_real(1e-6, 0.55);
            mf.xvar = rng.uniform_real(1e-6, 1.0);
            const RealizedConfiguration realized = realize_configuration(config, mf, space);
            CHECK(realized.all_valid());
        }
    }
}

TEST_CASE("realize_configuration rounding and validity flags") {
    const SearchSpace rpart = builtin_space("rpart");
    MetaFeatures mf;
    mf.mkd = 0.01;
    mf.xvar = 1.0;

    SymbolicConfiguration config;
    config.algorithm = "rpart";
    config.components.push_back(parse_formula("0.01", Kind::Float));
    config.components.push_back(parse_formula("3.5", Kind::Float));  // rounds to 4
    config.components.push_back(parse_formula("pow(neg(2), 0.5)", Kind::Integer));  // NaN
    config.components.push_back(parse_formula("truediv(1, sub(p, p))", Kind::Integer));  // +inf

    const RealizedConfiguration realized = realize_configuration(config, mf, rpart);
    CHECK(realized.values[0].validity == SlotValidity::Valid);
    CHECK(realized.values[1].value == 4.0);
    CHECK(realized.values[2].validity == SlotValidity::Invalid);
    CHECK(realized.values[3].validity == SlotValidity::OutOfRange);
    CHECK(realized.any_invalid());
    CHECK_FALSE(realized.all_valid());
}

TEST_CASE("search-space JSON round trip and file load") {
    const SearchSpace svm = builtin_space("svm");
    const SearchSpace back = space_from_json(space_to_json(svm));
    CHECK(back.algorithm == "svm");
    CHECK(back.dimension() == 2);
    CHECK(back.tunable[1].scale == Scale::Log);
    REQUIRE(back.fixed.size() == 1);

    const std::filesystem::path tmp =
        std::filesystem::temp_directory_path() / "symdef_space_test.json";
    {
        std::ofstream out(tmp);
        out << space_to_json(svm).dump(2);
    }
    const SearchSpace loaded = load_space(tmp);
    CHECK(space_to_json(loaded).dump() == space_to_json(svm).dump());
    std::filesystem::remove(tmp);

    CHECK_THROWS_AS(space_from_json(nlohmann::json{{"algorithm", "x"}}), ValidationError);
}

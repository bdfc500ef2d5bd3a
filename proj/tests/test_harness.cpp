#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "aealt/errors.hpp"
#include "aealt/harness.hpp"

using namespace aealt;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path temp_dir(const std::string& name) {
    fs::path p = fs::temp_directory_path() / ("aealt_test_harness_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

// A small synthetic classification grid that runs in well under a second.
json base_config_json() {
    return json::parse(R"({
      "schema": 1,
      "task": "classification",
      "base_seed": 42,
      "repetitions": 2,
      "data": {
        "synthetic": {"n": 80, "d": 6, "r": 2, "noise_sigma": 0.1,
                       "nonlinearity": "tanh", "predictive": [0, 1]}
      },
      "reducers": [
        {"kind": "pca", "latent_dim": 2},
        {"kind": "identity"}
      ],
      "learners": [
        {"kind": "logistic", "epochs": 200},
        {"kind": "mlp", "hidden": [8], "epochs": 30, "batch_size": 16}
      ],
      "split": {"train_fraction": 0.7}
    })");
}

harness::ExperimentConfig make_report_config(data::Task task) {
    harness::ExperimentConfig cfg;
    cfg.task = task;
    cfg.base_seed = 1;
    cfg.repetitions = 1;
    cfg.split.stratified = task != data::Task::Regression;
    return cfg;
}

harness::RunRecord make_record(const std::string& method,
                               const std::map<std::string, double>& values) {
    harness::RunRecord rec;
    rec.method = method;
    rec.repetition = 0;
    rec.seed = 1;
    rec.report.values = values;
    rec.report.n = 10;
    return rec;
}

harness::ExperimentResult make_result(
    const std::vector<std::pair<std::string, std::map<std::string, double>>>& rows) {
    harness::ExperimentResult res;
    for (const auto& [method, values] : rows) {
        res.methods.push_back(method);
        res.records.push_back(make_record(method, values));
        harness::AggregateRow agg;
        agg.method = method;
        agg.repetitions_used = 1;
        agg.means = values;
        res.aggregates.push_back(agg);
    }
    return res;
}

}  // namespace

TEST_CASE("experiment config parses the documented schema") {
    json j = base_config_json();
    j["split"]["resample"] = "seed_only";
    auto cfg = harness::parse_experiment_config(j);
    CHECK(cfg.task == data::Task::Classification);
    CHECK(cfg.base_seed == 42);
    CHECK(cfg.repetitions == 2);
    REQUIRE(cfg.reducers.size() == 2);
    CHECK(cfg.reducers[0].kind == factor::ReducerKind::Pca);
    CHECK(cfg.reducers[0].latent_dim == 2);
    CHECK(cfg.reducers[1].kind == factor::ReducerKind::Identity);
    REQUIRE(cfg.learners.size() == 2);
    CHECK(cfg.learners[0].kind == "logistic");
    CHECK(cfg.learners[0].logistic.epochs == 200);
    CHECK(cfg.learners[1].mlp.hidden == std::vector<std::size_t>{8});
    CHECK(cfg.split.resample == harness::ResampleMode::SeedOnly);
    CHECK(cfg.split.stratified);  // defaulted for classification
    REQUIRE(cfg.synthetic.has_value());
    CHECK(cfg.synthetic->seed == 42);  // defaults to base_seed
    CHECK(cfg.synthetic->predictive == std::vector<std::size_t>{0, 1});
}

TEST_CASE("config parse rejections") {
    SUBCASE("unknown top-level key") {
        json j = base_config_json();
        j["surprise"] = 1;
        CHECK_THROWS_AS(harness::parse_experiment_config(j), ConfigError);
    }
    SUBCASE("schema tag required and versioned") {
        json j = base_config_json();
        j.erase("schema");
        CHECK_THROWS_AS(harness::parse_experiment_config(j), ConfigError);
        j["schema"] = 2;
        CHECK_THROWS_AS(harness::parse_experiment_config(j), ConfigError);
        j["schema"] = "1";
        CHECK_THROWS_AS(harness::parse_experiment_config(j), ConfigError);
    }
    SUBCASE("base_seed required") {
        json j = base_config_json();
        j.erase("base_seed");
        CHECK_THROWS_AS(harness::parse_experiment_config(j), ConfigError);
    }
    SUBCASE("unknown keys in nested blocks") {
        json j = base_config_json();
        j["reducers"][0]["momentum"] = 0.9;
        CHECK_THROWS_AS(harness::parse_experiment_config(j), ConfigError);
        j = base_config_json();
        j["learners"][0]["l1"] = 0.1;  // l1 belongs to lasso, not logistic
        CHECK_THROWS_AS(harness::parse_experiment_config(j), ConfigError);
        j = base_config_json();
        j["data"]["synthetic"]["rows"] = 10;
        CHECK_THROWS_AS(harness::parse_experiment_config(j), ConfigError);
        j = base_config_json();
        j["split"]["shuffle"] = true;
        CHECK_THROWS_AS(harness::parse_experiment_config(j), ConfigError);
    }
    SUBCASE("learner task compatibility") {
        json j = base_config_json();
        j["learners"] = json::array({json{{"kind", "iforest"}}});
        CHECK_THROWS_AS(harness::parse_experiment_config(j), ConfigError);
        j["learners"] = json::array({json{{"kind", "lasso"}}});
        CHECK_THROWS_AS(harness::parse_experiment_config(j), ConfigError);
        j = base_config_json();
        j["task"] = "regression";
        j["split"]["stratified"] = false;
        j["learners"] = json::array({json{{"kind", "logistic"}}});
        CHECK_THROWS_AS(harness::parse_experiment_config(j), ConfigError);
    }
    SUBCASE("stratified regression is contradictory") {
        json j = base_config_json();
        j["task"] = "regression";
        j["learners"] = json::array({json{{"kind", "lasso"}}});
        j["split"]["stratified"] = true;
        CHECK_THROWS_AS(harness::parse_experiment_config(j), ConfigError);
        j["split"].erase("stratified");  // default flips to false: fine
        CHECK_NOTHROW(harness::parse_experiment_config(j));
    }
    SUBCASE("duplicate method names need overrides") {
        json j = base_config_json();
        j["reducers"] = json::array({json{{"kind", "pca"}, {"latent_dim", 2}},
                                     json{{"kind", "pca"}, {"latent_dim", 3}}});
        CHECK_THROWS_AS(harness::parse_experiment_config(j), ConfigError);
        j["reducers"][1]["name"] = "PCA-3";
        CHECK_NOTHROW(harness::parse_experiment_config(j));
    }
    SUBCASE("exactly one data source") {
        json j = base_config_json();
        j["data"]["embeddings"] = "emb.csv";
        j["data"]["labels"] = "labels.csv";
        CHECK_THROWS_AS(harness::parse_experiment_config(j), ConfigError);
        j["data"].erase("synthetic");
        j["data"].erase("labels");
        CHECK_THROWS_AS(harness::parse_experiment_config(j), ConfigError);  // missing labels
        j = base_config_json();
        j["data"].erase("synthetic");
        CHECK_THROWS_AS(harness::parse_experiment_config(j), ConfigError);  // no source at all
    }
    SUBCASE("texts need an endpoint") {
        json j = base_config_json();
        j["data"].erase("synthetic");
        j["data"]["texts"] = "texts.csv";
        j["data"]["labels"] = "labels.csv";
        CHECK_THROWS_AS(harness::parse_experiment_config(j), ConfigError);
    }
    SUBCASE("reducers need a latent dim") {
        json j = base_config_json();
        j["reducers"] = json::array({json{{"kind", "pca"}}});
        CHECK_THROWS_AS(harness::parse_experiment_config(j), ConfigError);
    }
    SUBCASE("resample mode is a closed enum") {
        json j = base_config_json();
        j["split"]["resample"] = "bootstrap";
        CHECK_THROWS_AS(harness::parse_experiment_config(j), ConfigError);
    }
}

TEST_CASE("method names combine display names, learner-major order") {
    harness::ReducerSpec aealt;
    aealt.kind = factor::ReducerKind::Aealt;
    harness::ReducerSpec identity;
    identity.kind = factor::ReducerKind::Identity;
    harness::LearnerSpec logistic;
    logistic.kind = "logistic";
    harness::LearnerSpec lasso;
    lasso.kind = "lasso";
    CHECK(harness::method_name(aealt, logistic, data::Task::Classification) ==
          "AEALT-Logistic");
    CHECK(harness::method_name(identity, lasso, data::Task::Regression) == "Vanilla-LASSO");
    identity.name = "Raw";
    logistic.name = "Probe";
    CHECK(harness::method_name(identity, logistic, data::Task::Classification) == "Raw-Probe");
}

TEST_CASE("run_experiment produces a deterministic ordered grid") {
    auto cfg = harness::parse_experiment_config(base_config_json());
    auto result = harness::run_experiment(cfg);

    REQUIRE(result.methods == std::vector<std::string>{"PCA-Logistic", "Vanilla-Logistic",
                                                       "PCA-MLP", "Vanilla-MLP"});
    REQUIRE(result.records.size() == 8);
    // (method, repetition) ordering
    for (std::size_t m = 0; m < 4; ++m)
        for (std::size_t r = 0; r < 2; ++r) {
            const auto& rec = result.records[m * 2 + r];
            CHECK(rec.method == result.methods[m]);
            CHECK(rec.repetition == r);
            CHECK(rec.seed == 42 + r);
            CHECK(!rec.failed);
            CHECK(rec.report.values.count("accuracy") == 1);
            CHECK(rec.report.values.count("macro_f1") == 1);
            CHECK(rec.report.n > 0);
            CHECK(rec.report.class_counts.size() == 2);
        }

    SUBCASE("aggregates are arithmetic means of the non-failed records") {
        REQUIRE(result.aggregates.size() == 4);
        for (std::size_t m = 0; m < 4; ++m) {
            const auto& agg = result.aggregates[m];
            CHECK(agg.method == result.methods[m]);
            CHECK(agg.repetitions_used == 2);
            for (const auto& [key, mean] : agg.means) {
                const double a = result.records[m * 2].report.values.at(key);
                const double b = result.records[m * 2 + 1].report.values.at(key);
                CHECK(mean == doctest::Approx((a + b) / 2.0).epsilon(1e-12));
            }
        }
    }
    SUBCASE("repeated runs serialize byte-identically") {
        auto again = harness::run_experiment(cfg);
        CHECK(harness::records_json(cfg, again).dump(2) ==
              harness::records_json(cfg, result).dump(2));
    }
    SUBCASE("thread count does not change the records") {
        auto threaded_cfg = cfg;
        threaded_cfg.threads = 3;
        auto threaded = harness::run_experiment(threaded_cfg);
        CHECK(harness::records_json(cfg, threaded).dump(2) ==
              harness::records_json(cfg, result).dump(2));
    }
    SUBCASE("a single repetition reproduces its slice of the full run") {
        auto one = harness::run_experiment(cfg, 1);
        REQUIRE(one.records.size() == 4);
        for (std::size_t m = 0; m < 4; ++m) {
            const auto& full_rec = result.records[m * 2 + 1];
            const auto& one_rec = one.records[m];
            CHECK(one_rec.method == full_rec.method);
            CHECK(one_rec.repetition == 1);
            CHECK(one_rec.seed == full_rec.seed);
            CHECK(one_rec.report.values == full_rec.report.values);
            CHECK(one_rec.report.class_counts == full_rec.report.class_counts);
        }
        CHECK_THROWS_AS(harness::run_experiment(cfg, 7), ConfigError);
    }
    SUBCASE("records round-trip through parse_records") {
        json j = harness::records_json(cfg, result);
        auto [cfg2, result2] = harness::parse_records(j);
        CHECK(harness::records_json(cfg2, result2).dump(2) == j.dump(2));
    }
}

TEST_CASE("seed_only resampling keeps the split fixed across repetitions") {
    json j = base_config_json();
    j["split"]["resample"] = "seed_only";
    j["learners"] = json::array({json{{"kind", "logistic"}, {"epochs", 100}}});
    j["reducers"] = json::array({json{{"kind", "pca"}, {"latent_dim", 2}}});
    auto cfg = harness::parse_experiment_config(j);
    auto result = harness::run_experiment(cfg);
    REQUIRE(result.records.size() == 2);
    // pca and logistic are seed-free, so identical splits mean identical cells
    CHECK(result.records[0].report.values == result.records[1].report.values);

    json j2 = base_config_json();
    // enough noise that metrics sit off 1.0 and actually depend on the split
    j2["data"]["synthetic"]["noise_sigma"] = 1.0;
    j2["learners"] = json::array({json{{"kind", "logistic"}, {"epochs", 100}}});
    j2["reducers"] = json::array({json{{"kind", "pca"}, {"latent_dim", 2}}});
    auto split_cfg = harness::parse_experiment_config(j2);
    auto resampled = harness::run_experiment(split_cfg);
    CHECK(resampled.records[0].report.values != resampled.records[1].report.values);
}

TEST_CASE("failures are recorded per cell and excluded from aggregates") {
    json j = json::parse(R"({
      "schema": 1,
      "task": "anomaly",
      "base_seed": 5,
      "repetitions": 1,
      "data": {
        "synthetic": {"n": 80, "d": 6, "r": 2, "noise_sigma": 0.1,
                       "predictive": [0], "anomaly_fraction": 0.1}
      },
      "reducers": [{"kind": "pca", "latent_dim": 2}],
      "learners": [
        {"kind": "logistic", "epochs": 50},
        {"kind": "iforest", "subsample": 1}
      ]
    })");
    auto cfg = harness::parse_experiment_config(j);
    auto result = harness::run_experiment(cfg);
    REQUIRE(result.records.size() == 2);
    CHECK(!result.records[0].failed);
    CHECK(result.records[0].report.values.count("threshold") == 1);
    CHECK(result.records[0].report.values.count("auroc") == 1);
    CHECK(result.records[1].failed);
    CHECK(result.records[1].error.find("subsample") != std::string::npos);
    CHECK(result.records[1].report.values.empty());

    CHECK(result.aggregates[0].repetitions_used == 1);
    CHECK(result.aggregates[1].repetitions_used == 0);
    CHECK(result.aggregates[1].means.empty());

    json out = harness::records_json(cfg, result);
    CHECK(out["records"][1]["failed"].get<bool>());
    CHECK(out["records"][1].contains("error"));
    CHECK(!out["records"][0].contains("error"));

    auto md = harness::render_markdown(cfg, result);
    CHECK(md.find("Failed runs:") != std::string::npos);
    CHECK(md.find("PCA-IForest repetition 0:") != std::string::npos);
}

TEST_CASE("reducer failure fails every learner cell with a prefix") {
    json j = base_config_json();
    j["reducers"] = json::array({json{{"kind", "aealt"}, {"latent_dim", 50}}});  // k > d
    auto cfg = harness::parse_experiment_config(j);
    auto result = harness::run_experiment(cfg);
    REQUIRE(result.records.size() == 4);
    for (const auto& rec : result.records) {
        CHECK(rec.failed);
        CHECK(rec.error.rfind("reducer: ", 0) == 0);
    }
    for (const auto& agg : result.aggregates) CHECK(agg.repetitions_used == 0);
}

TEST_CASE("markdown marks best and second best per column") {
    auto cfg = make_report_config(data::Task::Classification);
    SUBCASE("distinct best and runner-up") {
        auto res = make_result({{"A", {{"accuracy", 0.9}, {"macro_f1", 0.5}}},
                                {"B", {{"accuracy", 0.8}, {"macro_f1", 0.7}}},
                                {"C", {{"accuracy", 0.6}, {"macro_f1", 0.6}}}});
        auto md = harness::render_markdown(cfg, res);
        CHECK(md.find("| A | **0.9000** | 0.5000 |") != std::string::npos);
        CHECK(md.find("| B | _0.8000_ | **0.7000** |") != std::string::npos);
        CHECK(md.find("| C | 0.6000 | _0.6000_ |") != std::string::npos);
        CHECK(md.find("<!-- std convention: population; resample: split;") !=
              std::string::npos);
    }
    SUBCASE("a tied best bolds every winner and italicizes nothing") {
        auto res = make_result({{"A", {{"accuracy", 0.9}}},
                                {"B", {{"accuracy", 0.9}}},
                                {"C", {{"accuracy", 0.7}}}});
        auto md = harness::render_markdown(cfg, res);
        CHECK(md.find("| A | **0.9000** |") != std::string::npos);
        CHECK(md.find("| B | **0.9000** |") != std::string::npos);
        CHECK(md.find("| C | 0.7000 |") != std::string::npos);
        CHECK(md.find("_0.7000_") == std::string::npos);
    }
    SUBCASE("lower is better for regression error metrics") {
        auto reg = make_report_config(data::Task::Regression);
        auto res = make_result({{"A", {{"mae", 0.2}, {"r2_oos", 0.5}}},
                                {"B", {{"mae", 0.4}, {"r2_oos", 0.9}}}});
        auto md = harness::render_markdown(reg, res);
        CHECK(md.find("| A | **0.2000** | _0.5000_ |") != std::string::npos);
        CHECK(md.find("| B | _0.4000_ | **0.9000** |") != std::string::npos);
    }
    SUBCASE("threshold is reported but never ranked") {
        auto an = make_report_config(data::Task::Anomaly);
        auto res = make_result({{"A", {{"f1", 0.9}, {"threshold", 0.7}}},
                                {"B", {{"f1", 0.8}, {"threshold", 0.3}}}});
        auto md = harness::render_markdown(an, res);
        CHECK(md.find("**0.9000**") != std::string::npos);
        CHECK(md.find("| 0.7000 |") != std::string::npos);
        CHECK(md.find("**0.7000**") == std::string::npos);
        CHECK(md.find("_0.3000_") == std::string::npos);
    }
    SUBCASE("missing cells render as a dash") {
        auto res = make_result({{"A", {{"accuracy", 0.9}, {"f1", 0.5}}},
                                {"B", {{"accuracy", 0.8}}}});
        auto md = harness::render_markdown(cfg, res);
        CHECK(md.find("| B | _0.8000_ | — |") != std::string::npos);
    }
}

TEST_CASE("csv render carries full precision and mean rows") {
    auto cfg = make_report_config(data::Task::Classification);
    auto res = make_result({{"A", {{"accuracy", 1.0 / 3.0}}},
                            {"B", {{"accuracy", 0.5}}}});
    auto csv = harness::render_csv(cfg, res);
    CHECK(csv.rfind("# std convention: population;", 0) == 0);
    CHECK(csv.find("method,repetition,seed,failed,accuracy\n") != std::string::npos);
    CHECK(csv.find("A,0,1,false,0.33333333333333331\n") != std::string::npos);
    CHECK(csv.find("A,mean,,false,0.33333333333333331\n") != std::string::npos);
    CHECK(csv.find("B,0,1,false,0.5\n") != std::string::npos);
    CHECK(csv.find("B,mean,,false,0.5\n") != std::string::npos);
}

TEST_CASE("write_outputs produces the four artifacts atomically") {
    auto dir = temp_dir("outputs");
    json j = base_config_json();
    j["repetitions"] = 1;
    j["learners"] = json::array({json{{"kind", "logistic"}, {"epochs", 50}}});
    auto cfg = harness::parse_experiment_config(j);
    cfg.output_dir = dir.string();
    auto result = harness::run_experiment(cfg);
    harness::write_outputs(cfg, result);

    for (const char* name : {"records.json", "table.csv", "table.md", "timings.csv"}) {
        CHECK(fs::exists(dir / name));
        CHECK(!fs::exists(dir / (std::string(name) + ".tmp")));
    }
    std::ifstream in(dir / "records.json");
    json back = json::parse(in);
    CHECK(back["schema"] == 1);
    CHECK(back["std_convention"] == "population");
    CHECK(back.dump(2) + "\n" == [&] {
        std::ifstream raw(dir / "records.json", std::ios::binary);
        return std::string(std::istreambuf_iterator<char>(raw), {});
    }());
    // wall clock stays out of records.json, lives in timings.csv
    CHECK(back.dump().find("wall_ms") == std::string::npos);
    std::ifstream tin(dir / "timings.csv");
    std::string header;
    std::getline(tin, header);
    CHECK(header == "method,repetition,wall_ms");
    std::string line;
    std::size_t rows = 0;
    while (std::getline(tin, line))
        if (!line.empty()) ++rows;
    CHECK(rows == result.records.size());
}

TEST_CASE("texts csv reader handles rfc-4180 quoting") {
    auto dir = temp_dir("texts");
    const fs::path p = dir / "texts.csv";
    std::ofstream(p, std::ios::binary)
        << "id,text\n"
        << "a,plain\n"
        << "b,\"with, comma\"\n"
        << "c,\"line\nbreak\"\n"
        << "d,\"she said \"\"hi\"\"\"\n";
    auto [ids, texts] = harness::load_texts_csv(p.string());
    REQUIRE(ids.size() == 4);
    CHECK(ids == std::vector<std::string>{"a", "b", "c", "d"});
    CHECK(texts[0] == "plain");
    CHECK(texts[1] == "with, comma");
    CHECK(texts[2] == "line\nbreak");
    CHECK(texts[3] == "she said \"hi\"");

    std::ofstream(dir / "bad.csv", std::ios::binary) << "id,body\nx,y\n";
    CHECK_THROWS_AS(harness::load_texts_csv((dir / "bad.csv").string()), DataError);
    std::ofstream(dir / "ragged.csv", std::ios::binary) << "id,text\nx\n";
    CHECK_THROWS_AS(harness::load_texts_csv((dir / "ragged.csv").string()), DataError);
    std::ofstream(dir / "unterminated.csv", std::ios::binary) << "id,text\nx,\"oops\n";
    CHECK_THROWS_AS(harness::load_texts_csv((dir / "unterminated.csv").string()), DataError);
}

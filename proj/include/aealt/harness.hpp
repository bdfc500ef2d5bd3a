#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "aealt/dataset.hpp"
#include "aealt/downstream.hpp"
#include "aealt/embed_client.hpp"
#include "aealt/factor.hpp"
#include "aealt/metrics.hpp"

namespace aealt::harness {

// One reducer column of the experiment grid. Network hyperparameters apply
// to the autoencoder kinds only.
struct ReducerSpec {
    factor::ReducerKind kind = factor::ReducerKind::Aealt;
    std::size_t latent_dim = 0;  // ignored for identity (k = d)
    double lambda = 0.5;
    std::size_t epochs = 100;
    std::size_t batch_size = 64;
    double learning_rate = 1e-3;
    std::vector<std::size_t> hidden = {256};
    std::vector<std::size_t> predictor_hidden = {32};
    std::string name;  // display name; defaults to the paper's reducer name
};

struct LearnerSpec {
    std::string kind;  // logistic | mlp | lasso | iforest
    downstream::LogisticConfig logistic;
    downstream::MlpConfig mlp;
    downstream::LassoConfig lasso;
    downstream::IForestConfig iforest;
    std::string name;  // display name; defaults to the paper's learner name
};

enum class ResampleMode { Split, SeedOnly };

struct SplitOptions {
    double train_fraction = 0.7;
    bool stratified = true;  // default: true unless regression
    ResampleMode resample = ResampleMode::Split;
};

struct ExperimentConfig {
    data::Task task = data::Task::Classification;

    // Exactly one data source:
    std::string embeddings_path;
    std::string labels_path;
    data::FileFormat format = data::FileFormat::Csv;
    std::optional<data::SyntheticSpec> synthetic;
    std::string texts_path;  // csv id,text — embedded via `endpoint`
    std::optional<embed::EmbedEndpointConfig> endpoint;

    std::vector<ReducerSpec> reducers;
    std::vector<LearnerSpec> learners;
    std::size_t repetitions = 20;
    std::uint64_t base_seed = 0;
    SplitOptions split;
    std::string output_dir = "out";
    std::size_t threads = 1;
    bool save_models = false;

    void validate() const;
};

// Strict parser for the versioned JSON schema ("schema": 1); unknown keys
// are config errors.
ExperimentConfig parse_experiment_config(const nlohmann::json& j);
ExperimentConfig load_experiment_config(const std::string& path);

// Strict parse of an endpoint block (also usable as a standalone config file
// for the `embed` subcommand). Unknown keys are errors.
embed::EmbedEndpointConfig parse_endpoint_config(const nlohmann::json& j);

// Reads an RFC-4180 style csv with header `id,text` (quoted fields may
// contain commas, quotes, and newlines).
std::pair<std::vector<std::string>, std::vector<std::string>> load_texts_csv(
    const std::string& path);

struct RunRecord {
    std::string method;  // "(Reducer)-(Learner)"
    std::size_t repetition = 0;
    std::uint64_t seed = 0;  // repetition seed (base_seed + r)
    bool failed = false;
    std::string error;
    metrics::MetricReport report;
    std::vector<std::string> model_paths;
    double wall_ms = 0.0;  // excluded from records.json (see timings.csv)
};

struct AggregateRow {
    std::string method;
    std::size_t repetitions_used = 0;
    std::map<std::string, double> means;
};

struct ExperimentResult {
    std::vector<std::string> methods;  // display order
    std::vector<RunRecord> records;    // ordered by (method, repetition)
    std::vector<AggregateRow> aggregates;
};

// Loads (or generates) the dataset named by the config.
data::LabeledDataset load_experiment_data(const ExperimentConfig& config);

// Runs the full (repetition x reducer x learner) grid; `only_repetition`
// restricts to a single r (used to re-run one repetition bit-exactly).
ExperimentResult run_experiment(const ExperimentConfig& config,
                                std::optional<std::size_t> only_repetition = std::nullopt);

// Deterministic serializations. records_json never includes wall-clock.
nlohmann::json records_json(const ExperimentConfig& config, const ExperimentResult& result);
// Inverse of records_json (config carries only the report-relevant fields).
std::pair<ExperimentConfig, ExperimentResult> parse_records(const nlohmann::json& j);
std::string render_markdown(const ExperimentConfig& config, const ExperimentResult& result);
std::string render_csv(const ExperimentConfig& config, const ExperimentResult& result);

// Writes records.json, table.csv, table.md, timings.csv into output_dir.
void write_outputs(const ExperimentConfig& config, const ExperimentResult& result);

std::string method_name(const ReducerSpec& reducer, const LearnerSpec& learner,
                        data::Task task);

}  // namespace aealt::harness

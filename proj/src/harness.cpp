#include "aealt/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include "aealt/errors.hpp"
#include "aealt/model_io.hpp"
#include "aealt/rng.hpp"

namespace aealt::harness {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint64_t kSplitStream = 1;
constexpr std::uint64_t kReducerStream = 0x100;
constexpr std::uint64_t kLearnerStream = 0x1000;

void strict_keys(const json& j, const std::set<std::string>& allowed, const std::string& ctx) {
    if (!j.is_object()) throw ConfigError(ctx + ": expected a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (allowed.find(it.key()) == allowed.end())
            throw ConfigError(ctx + ": unknown key '" + it.key() + "'");
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    return j.at(key).get<T>();
}

std::string learner_display(const LearnerSpec& l) {
    if (!l.name.empty()) return l.name;
    if (l.kind == "logistic") return "Logistic";
    if (l.kind == "mlp") return "MLP";
    if (l.kind == "lasso") return "LASSO";
    if (l.kind == "iforest") return "IForest";
    return l.kind;
}

std::string reducer_display(const ReducerSpec& r) {
    return r.name.empty() ? factor::reducer_display_name(r.kind) : r.name;
}

bool learner_supports(const std::string& kind, data::Task task) {
    switch (task) {
        case data::Task::Classification: return kind == "logistic" || kind == "mlp";
        case data::Task::Anomaly:
            return kind == "logistic" || kind == "mlp" || kind == "iforest";
        case data::Task::Regression: return kind == "mlp" || kind == "lasso";
    }
    return false;
}

// Canonical metric column order per task; "threshold" is informational and
// never best-marked in reports.
std::vector<std::string> metric_order(data::Task task) {
    switch (task) {
        case data::Task::Classification:
            return {"accuracy", "macro_f1", "f1", "precision", "recall"};
        case data::Task::Anomaly:
            return {"f1",        "auroc",    "aucpr",    "precision",
                    "recall",    "accuracy", "macro_f1", "threshold"};
        case data::Task::Regression: return {"mae", "rmse", "r2_oos"};
    }
    return {};
}

bool lower_is_better(const std::string& metric) { return metric == "mae" || metric == "rmse"; }

std::string fmt_full(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string fmt_short(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

}  // namespace

std::string method_name(const ReducerSpec& reducer, const LearnerSpec& learner,
                        data::Task /*task*/) {
    return reducer_display(reducer) + "-" + learner_display(learner);
}

void ExperimentConfig::validate() const {
    if (reducers.empty()) throw ConfigError("experiment: need at least one reducer");
    if (learners.empty()) throw ConfigError("experiment: need at least one learner");
    if (repetitions < 1) throw ConfigError("experiment: repetitions must be >= 1");
    if (threads < 1) throw ConfigError("experiment: threads must be >= 1");
    if (!(split.train_fraction > 0.0 && split.train_fraction < 1.0))
        throw ConfigError("experiment: train_fraction must be in (0,1)");
    if (split.stratified && task == data::Task::Regression)
        throw ConfigError("experiment: stratified split requires class labels");

    int sources = 0;
    if (!embeddings_path.empty()) ++sources;
    if (synthetic.has_value()) ++sources;
    if (!texts_path.empty()) ++sources;
    if (sources != 1)
        throw ConfigError("experiment: exactly one data source required "
                          "(embeddings, synthetic, or texts)");
    if (!embeddings_path.empty() && labels_path.empty())
        throw ConfigError("experiment: embeddings source needs a labels path");
    if (!texts_path.empty() && (!endpoint.has_value() || labels_path.empty()))
        throw ConfigError("experiment: texts source needs endpoint and labels");

    for (const auto& r : reducers)
        if (r.kind != factor::ReducerKind::Identity && r.latent_dim == 0)
            throw ConfigError("experiment: reducer needs latent_dim >= 1");
    std::set<std::string> names;
    for (const auto& l : learners) {
        if (!learner_supports(l.kind, task))
            throw ConfigError("experiment: learner '" + l.kind + "' does not support task " +
                              data::to_string(task));
        for (const auto& r : reducers)
            if (!names.insert(method_name(r, l, task)).second)
                throw ConfigError("experiment: duplicate method name " + method_name(r, l, task) +
                                  " (use 'name' overrides)");
    }
}

embed::EmbedEndpointConfig parse_endpoint_config(const json& j) {
    strict_keys(j,
                {"base_url", "model", "api_key_env", "batch_size", "timeout_seconds",
                 "max_retries", "backoff_base_ms", "max_concurrency", "cache_dir"},
                "endpoint");
    embed::EmbedEndpointConfig ec;
    ec.base_url = get_or<std::string>(j, "base_url", "");
    ec.model = j.at("model").get<std::string>();
    ec.api_key_env = get_or<std::string>(j, "api_key_env", "");
    ec.batch_size = get_or<std::size_t>(j, "batch_size", 16);
    ec.timeout_seconds = get_or<double>(j, "timeout_seconds", 30.0);
    ec.max_retries = get_or<std::size_t>(j, "max_retries", 3);
    ec.backoff_base_ms = get_or<std::size_t>(j, "backoff_base_ms", 1000);
    ec.max_concurrency = get_or<std::size_t>(j, "max_concurrency", 1);
    ec.cache_dir = j.at("cache_dir").get<std::string>();
    return ec;
}

ExperimentConfig parse_experiment_config(const json& j) {
    strict_keys(j, {"schema", "task", "data", "reducers", "learners", "repetitions", "base_seed",
                    "split", "output_dir", "threads", "save_models"},
                "config");
    if (!j.contains("schema") || !j.at("schema").is_number_integer() ||
        j.at("schema").get<int>() != 1)
        throw ConfigError("config: requires \"schema\": 1");
    if (!j.contains("base_seed")) throw ConfigError("config: base_seed is required");

    ExperimentConfig c;
    c.task = data::task_from_string(j.at("task").get<std::string>());
    c.base_seed = j.at("base_seed").get<std::uint64_t>();
    c.repetitions = get_or<std::size_t>(j, "repetitions", 20);
    c.output_dir = get_or<std::string>(j, "output_dir", "out");
    c.threads = get_or<std::size_t>(j, "threads", 1);
    c.save_models = get_or<bool>(j, "save_models", false);

    const json& d = j.at("data");
    strict_keys(d, {"synthetic", "embeddings", "labels", "format", "texts", "endpoint"},
                "config.data");
    if (d.contains("synthetic")) {
        const json& s = d.at("synthetic");
        strict_keys(s,
                    {"n", "d", "r", "noise_sigma", "nonlinearity", "predictive", "seed",
                     "loading", "signal_rows", "signal_scale", "background_scale",
                     "anomaly_fraction"},
                    "config.data.synthetic");
        data::SyntheticSpec spec;
        spec.task = c.task;
        spec.n = s.at("n").get<std::size_t>();
        spec.d = s.at("d").get<std::size_t>();
        spec.r = s.at("r").get<std::size_t>();
        spec.noise_sigma = get_or<double>(s, "noise_sigma", 0.1);
        spec.nonlinearity =
            data::nonlinearity_from_string(get_or<std::string>(s, "nonlinearity", "linear"));
        spec.predictive = get_or<std::vector<std::size_t>>(s, "predictive", {0});
        spec.seed = get_or<std::uint64_t>(s, "seed", c.base_seed);
        spec.loading = data::loading_from_string(get_or<std::string>(s, "loading", "gaussian"));
        spec.signal_rows = get_or<std::size_t>(s, "signal_rows", 0);
        spec.signal_scale = get_or<double>(s, "signal_scale", 1.0);
        spec.background_scale = get_or<double>(s, "background_scale", 1.0);
        spec.anomaly_fraction = get_or<double>(s, "anomaly_fraction", 0.05);
        spec.validate();
        c.synthetic = spec;
    }
    if (d.contains("embeddings")) {
        c.embeddings_path = d.at("embeddings").get<std::string>();
        c.format = data::format_from_string(get_or<std::string>(d, "format", "csv"));
    }
    if (d.contains("labels")) c.labels_path = d.at("labels").get<std::string>();
    if (d.contains("texts")) {
        c.texts_path = d.at("texts").get<std::string>();
        if (!d.contains("endpoint"))
            throw ConfigError("config.data: texts source requires endpoint");
        c.endpoint = parse_endpoint_config(d.at("endpoint"));
    }

    for (const json& r : j.at("reducers")) {
        strict_keys(r,
                    {"kind", "latent_dim", "lambda", "epochs", "batch_size", "learning_rate",
                     "hidden", "predictor_hidden", "name"},
                    "config.reducers[]");
        ReducerSpec spec;
        spec.kind = factor::reducer_from_string(r.at("kind").get<std::string>());
        spec.latent_dim = get_or<std::size_t>(r, "latent_dim", 0);
        spec.lambda = get_or<double>(r, "lambda", 0.5);
        spec.epochs = get_or<std::size_t>(r, "epochs", 100);
        spec.batch_size = get_or<std::size_t>(r, "batch_size", 64);
        spec.learning_rate = get_or<double>(r, "learning_rate", 1e-3);
        spec.hidden = get_or<std::vector<std::size_t>>(r, "hidden", {256});
        spec.predictor_hidden = get_or<std::vector<std::size_t>>(r, "predictor_hidden", {32});
        spec.name = get_or<std::string>(r, "name", "");
        c.reducers.push_back(std::move(spec));
    }
    for (const json& l : j.at("learners")) {
        LearnerSpec spec;
        spec.kind = l.at("kind").get<std::string>();
        spec.name = get_or<std::string>(l, "name", "");
        if (spec.kind == "logistic") {
            strict_keys(l, {"kind", "name", "l2", "epochs", "learning_rate"},
                        "config.learners[logistic]");
            spec.logistic.l2 = get_or<double>(l, "l2", 0.0);
            spec.logistic.epochs = get_or<std::size_t>(l, "epochs", 500);
            spec.logistic.learning_rate = get_or<double>(l, "learning_rate", 0.5);
        } else if (spec.kind == "mlp") {
            strict_keys(l, {"kind", "name", "hidden", "epochs", "batch_size", "learning_rate"},
                        "config.learners[mlp]");
            spec.mlp.hidden = get_or<std::vector<std::size_t>>(l, "hidden", {32});
            spec.mlp.epochs = get_or<std::size_t>(l, "epochs", 200);
            spec.mlp.batch_size = get_or<std::size_t>(l, "batch_size", 64);
            spec.mlp.learning_rate = get_or<double>(l, "learning_rate", 1e-3);
        } else if (spec.kind == "lasso") {
            strict_keys(l, {"kind", "name", "l1", "max_iters", "tol"},
                        "config.learners[lasso]");
            spec.lasso.l1 = get_or<double>(l, "l1", 0.0);
            spec.lasso.max_iters = get_or<std::size_t>(l, "max_iters", 10000);
            spec.lasso.tol = get_or<double>(l, "tol", 1e-7);
        } else if (spec.kind == "iforest") {
            strict_keys(l, {"kind", "name", "n_trees", "subsample"},
                        "config.learners[iforest]");
            spec.iforest.n_trees = get_or<std::size_t>(l, "n_trees", 100);
            spec.iforest.subsample = get_or<std::size_t>(l, "subsample", 256);
        } else {
            throw ConfigError("config.learners: unknown kind '" + spec.kind + "'");
        }
        c.learners.push_back(std::move(spec));
    }

    if (j.contains("split")) {
        const json& s = j.at("split");
        strict_keys(s, {"train_fraction", "stratified", "resample"}, "config.split");
        c.split.train_fraction = get_or<double>(s, "train_fraction", 0.7);
        c.split.stratified =
            get_or<bool>(s, "stratified", c.task != data::Task::Regression);
        const std::string mode = get_or<std::string>(s, "resample", "split");
        if (mode == "split")
            c.split.resample = ResampleMode::Split;
        else if (mode == "seed_only")
            c.split.resample = ResampleMode::SeedOnly;
        else
            throw ConfigError("config.split: resample must be 'split' or 'seed_only'");
    } else {
        c.split.stratified = c.task != data::Task::Regression;
    }

    c.validate();
    return c;
}

ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError(path + ": invalid JSON: " + e.what());
    }
    return parse_experiment_config(j);
}

namespace {

// Minimal RFC-4180 reader for the id,text file (quoted fields may contain
// commas, quotes, and newlines).
std::vector<std::vector<std::string>> read_quoted_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    std::string content((std::istreambuf_iterator<char>(in)),
                        std::istreambuf_iterator<char>());
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < content.size(); ++i) {
        const char ch = content[i];
        if (quoted) {
            if (ch == '"') {
                if (i + 1 < content.size() && content[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(ch);
            }
        } else if (ch == '"' && field.empty()) {
            quoted = true;
        } else if (ch == ',') {
            row.push_back(std::move(field));
            field.clear();
        } else if (ch == '\n') {
            if (!field.empty() && field.back() == '\r') field.pop_back();
            row.push_back(std::move(field));
            field.clear();
            rows.push_back(std::move(row));
            row.clear();
        } else {
            field.push_back(ch);
        }
    }
    if (!field.empty() || !row.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
    }
    if (quoted) throw DataError(path + ": unterminated quoted field");
    return rows;
}

}  // namespace

std::pair<std::vector<std::string>, std::vector<std::string>> load_texts_csv(
    const std::string& path) {
    auto rows = read_quoted_csv(path);
    if (rows.empty() || rows[0].size() != 2 || rows[0][0] != "id" || rows[0][1] != "text")
        throw DataError(path + ": header must be 'id,text'");
    std::vector<std::string> ids, texts;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].size() != 2)
            throw DataError(path + ": line " + std::to_string(i + 1) + ": expected 2 fields");
        ids.push_back(rows[i][0]);
        texts.push_back(rows[i][1]);
    }
    return {std::move(ids), std::move(texts)};
}

data::LabeledDataset load_experiment_data(const ExperimentConfig& config) {
    if (config.synthetic.has_value()) {
        return data::generate_synthetic(*config.synthetic).dataset;
    }
    if (!config.embeddings_path.empty()) {
        auto m = data::load_embeddings(config.embeddings_path, config.format);
        return data::attach_labels(std::move(m), config.labels_path, config.task);
    }
    auto [ids, texts] = load_texts_csv(config.texts_path);
    auto m = embed::embed_texts(texts, *config.endpoint);
    m.ids = std::move(ids);
    m.validate();
    return data::attach_labels(std::move(m), config.labels_path, config.task);
}

namespace {

struct TargetScaler {
    double mean = 0.0, scale = 1.0;
};

TargetScaler fit_target_scaler(const Vector& y) {
    TargetScaler t;
    for (double v : y) t.mean += v;
    t.mean /= static_cast<double>(y.size());
    double var = 0.0;
    for (double v : y) var += (v - t.mean) * (v - t.mean);
    t.scale = std::sqrt(var / static_cast<double>(y.size()));
    if (t.scale <= 0.0) t.scale = 1.0;
    return t;
}

factor::FactorConfig make_factor_config(const ReducerSpec& spec, std::size_t input_dim,
                                        data::Task task, std::size_t num_classes) {
    const std::size_t k =
        spec.kind == factor::ReducerKind::Identity ? input_dim : spec.latent_dim;
    factor::FactorConfig cfg = factor::FactorConfig::defaults(
        spec.kind, input_dim, k, task, num_classes, spec.hidden, spec.predictor_hidden);
    cfg.lambda = spec.lambda;
    cfg.epochs = spec.epochs;
    cfg.batch_size = spec.batch_size;
    cfg.learning_rate = spec.learning_rate;
    return cfg;
}

std::vector<std::size_t> class_histogram(const std::vector<int>& labels, std::size_t c) {
    std::vector<std::size_t> counts(c, 0);
    for (int y : labels) ++counts[static_cast<std::size_t>(y)];
    return counts;
}

std::vector<int> argmax_rows(const Matrix& probs) {
    std::vector<int> out(probs.rows());
    for (std::size_t i = 0; i < probs.rows(); ++i) {
        std::size_t arg = 0;
        for (std::size_t j = 1; j < probs.cols(); ++j)
            if (probs(i, j) > probs(i, arg)) arg = j;
        out[i] = static_cast<int>(arg);
    }
    return out;
}

Vector column(const Matrix& m, std::size_t j) {
    Vector v(m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i) v[i] = m(i, j);
    return v;
}

// Fits one learner on the encoded train matrix and fills in the record's
// metric report from the encoded test matrix.
void run_learner(const ExperimentConfig& config, const LearnerSpec& learner,
                 const Matrix& f_train, const Matrix& f_test,
                 const data::LabeledDataset& train, const data::LabeledDataset& test,
                 double train_target_mean, std::uint64_t seed, RunRecord& record,
                 downstream::DownstreamModel* fitted_out) {
    using downstream::DownstreamModel;
    auto& values = record.report.values;
    record.report.n = f_test.rows();

    if (config.task == data::Task::Regression) {
        DownstreamModel model;
        if (learner.kind == "mlp") {
            downstream::MlpConfig mc = learner.mlp;
            mc.seed = seed;
            model = downstream::fit_mlp_regressor(f_train, train.targets, mc);
        } else {
            model = downstream::fit_lasso(f_train, train.targets, learner.lasso);
        }
        Matrix pred = downstream::predict(model, f_test);
        auto rm = metrics::regression_metrics(test.targets, column(pred, 0), train_target_mean);
        values["mae"] = rm.mae;
        values["rmse"] = rm.rmse;
        values["r2_oos"] = rm.r2_oos;
        if (fitted_out) *fitted_out = std::move(model);
        return;
    }

    record.report.class_counts = class_histogram(test.labels, test.num_classes);

    if (config.task == data::Task::Classification) {
        DownstreamModel model;
        if (learner.kind == "logistic") {
            downstream::LogisticConfig lc = learner.logistic;
            lc.seed = seed;
            model = downstream::fit_logistic(f_train, train.labels, train.num_classes, lc);
        } else {
            downstream::MlpConfig mc = learner.mlp;
            mc.seed = seed;
            model = downstream::fit_mlp_classifier(f_train, train.labels, train.num_classes, mc);
        }
        Matrix probs = downstream::predict(model, f_test);
        auto cm = metrics::classification_metrics(test.labels, argmax_rows(probs),
                                                  test.num_classes);
        values["accuracy"] = cm.accuracy;
        values["macro_f1"] = cm.macro_f1;
        if (cm.positive_f1.has_value()) {
            values["f1"] = *cm.positive_f1;
            values["precision"] = *cm.precision;
            values["recall"] = *cm.recall;
        }
        if (fitted_out) *fitted_out = std::move(model);
        return;
    }

    // Anomaly: scores from the learner, threshold chosen on training scores.
    DownstreamModel model;
    Vector train_scores, test_scores;
    if (learner.kind == "iforest") {
        downstream::IForestConfig ic = learner.iforest;
        ic.seed = seed;
        model = downstream::fit_iforest(f_train, ic);
        train_scores = column(downstream::predict(model, f_train), 0);
        test_scores = column(downstream::predict(model, f_test), 0);
    } else if (learner.kind == "logistic") {
        downstream::LogisticConfig lc = learner.logistic;
        lc.seed = seed;
        model = downstream::fit_logistic(f_train, train.labels, 2, lc);
        train_scores = column(downstream::predict(model, f_train), 1);
        test_scores = column(downstream::predict(model, f_test), 1);
    } else {
        downstream::MlpConfig mc = learner.mlp;
        mc.seed = seed;
        model = downstream::fit_mlp_classifier(f_train, train.labels, 2, mc);
        train_scores = column(downstream::predict(model, f_train), 1);
        test_scores = column(downstream::predict(model, f_test), 1);
    }
    const double threshold = metrics::select_threshold(train_scores, train.labels);
    std::vector<int> pred(test_scores.size());
    for (std::size_t i = 0; i < test_scores.size(); ++i)
        pred[i] = test_scores[i] >= threshold ? 1 : 0;
    auto cm = metrics::classification_metrics(test.labels, pred, 2);
    values["f1"] = cm.positive_f1.value();
    values["auroc"] = metrics::auroc(test_scores, test.labels);
    values["aucpr"] = metrics::aucpr(test_scores, test.labels);
    values["precision"] = cm.precision.value();
    values["recall"] = cm.recall.value();
    values["accuracy"] = cm.accuracy;
    values["macro_f1"] = cm.macro_f1;
    values["threshold"] = threshold;
    if (fitted_out) *fitted_out = std::move(model);
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config,
                                std::optional<std::size_t> only_repetition) {
    config.validate();
    const data::LabeledDataset dataset = load_experiment_data(config);
    dataset.validate();

    std::vector<std::size_t> reps;
    if (only_repetition.has_value()) {
        if (*only_repetition >= config.repetitions)
            throw ConfigError("repetition index out of range");
        reps.push_back(*only_repetition);
    } else {
        for (std::size_t r = 0; r < config.repetitions; ++r) reps.push_back(r);
    }

    // Method order is learner-major (the paper's table layout: one block per
    // learner, reducers within).
    ExperimentResult result;
    for (const auto& l : config.learners)
        for (const auto& r : config.reducers) result.methods.push_back(method_name(r, l, config.task));

    // Jobs share nothing but the immutable dataset; one job = (repetition,
    // reducer): the fitted reducer is reused across all learners.
    struct Job {
        std::size_t rep_pos, reducer_idx;
    };
    std::vector<Job> jobs;
    for (std::size_t p = 0; p < reps.size(); ++p)
        for (std::size_t ri = 0; ri < config.reducers.size(); ++ri) jobs.push_back({p, ri});
    // slot[job][learner] -> record
    std::vector<std::vector<RunRecord>> slots(jobs.size());

    auto run_job = [&](std::size_t job_idx) {
        const Job job = jobs[job_idx];
        const std::size_t rep = reps[job.rep_pos];
        const std::size_t ri = job.reducer_idx;
        const ReducerSpec& rspec = config.reducers[ri];
        const std::uint64_t seed_r = config.base_seed + rep;

        auto& records = slots[job_idx];
        records.resize(config.learners.size());
        for (std::size_t li = 0; li < config.learners.size(); ++li) {
            records[li].method = method_name(rspec, config.learners[li], config.task);
            records[li].repetition = rep;
            records[li].seed = seed_r;
        }

        const auto t0 = std::chrono::steady_clock::now();
        data::SplitResult split;
        Matrix f_train, f_test;
        data::LabeledDataset train_scaled, test_scaled;
        double train_target_mean = 0.0;
        std::string reducer_model_path;
        try {
            const std::uint64_t split_seed =
                config.split.resample == ResampleMode::Split
                    ? derive_seed(seed_r, kSplitStream)
                    : derive_seed(config.base_seed, kSplitStream);
            split = data::split_dataset(dataset, config.split.train_fraction, split_seed,
                                        config.split.stratified);

            auto scaler = data::fit_scaler(split.train.embeddings.values);
            train_scaled = split.train;
            test_scaled = split.test;
            train_scaled.embeddings.values =
                data::apply_scaler(scaler, split.train.embeddings.values);
            test_scaled.embeddings.values =
                data::apply_scaler(scaler, split.test.embeddings.values);
            if (config.task == data::Task::Regression) {
                // Standardize targets with train statistics (population std).
                auto ts = fit_target_scaler(split.train.targets);
                for (double& y : train_scaled.targets) y = (y - ts.mean) / ts.scale;
                for (double& y : test_scaled.targets) y = (y - ts.mean) / ts.scale;
                double m = 0.0;
                for (double y : train_scaled.targets) m += y;
                train_target_mean = m / static_cast<double>(train_scaled.targets.size());
            }

            factor::FactorConfig fcfg =
                make_factor_config(rspec, dataset.dim(), config.task, dataset.num_classes);
            fcfg.seed = derive_seed(seed_r, kReducerStream + ri);
            factor::FactorModel model = factor::train_factor_model(train_scaled, fcfg);
            f_train = factor::encode(model, train_scaled.embeddings.values);
            f_test = factor::encode(model, test_scaled.embeddings.values);

            if (config.save_models) {
                fs::create_directories(fs::path(config.output_dir) / "models");
                reducer_model_path =
                    (fs::path(config.output_dir) / "models" /
                     ("rep" + std::to_string(rep) + "_" + reducer_display(rspec) + ".facm"))
                        .string();
                io::save_factor_model(model, reducer_model_path);
            }
        } catch (const std::exception& e) {
            const auto t1 = std::chrono::steady_clock::now();
            for (auto& rec : records) {
                rec.failed = true;
                rec.error = std::string("reducer: ") + e.what();
                rec.wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
            }
            return;
        }

        for (std::size_t li = 0; li < config.learners.size(); ++li) {
            RunRecord& rec = records[li];
            const auto l0 = std::chrono::steady_clock::now();
            try {
                const std::uint64_t seed_l =
                    derive_seed(seed_r, kLearnerStream + ri * 0x100 + li);
                downstream::DownstreamModel fitted;
                run_learner(config, config.learners[li], f_train, f_test, train_scaled,
                            test_scaled, train_target_mean, seed_l, rec,
                            config.save_models ? &fitted : nullptr);
                if (!reducer_model_path.empty()) rec.model_paths.push_back(reducer_model_path);
                if (config.save_models) {
                    const std::string path =
                        (fs::path(config.output_dir) / "models" /
                         ("rep" + std::to_string(rep) + "_" + rec.method + ".facm"))
                            .string();
                    io::save_downstream_model(fitted, path);
                    rec.model_paths.push_back(path);
                }
            } catch (const std::exception& e) {
                rec.failed = true;
                rec.error = e.what();
                rec.report.values.clear();
            }
            const auto l1 = std::chrono::steady_clock::now();
            rec.wall_ms = std::chrono::duration<double, std::milli>(l1 - l0).count();
        }
    };

    if (config.threads <= 1 || jobs.size() <= 1) {
        for (std::size_t i = 0; i < jobs.size(); ++i) run_job(i);
    } else {
        std::atomic<std::size_t> next{0};
        auto worker = [&]() {
            while (true) {
                const std::size_t i = next.fetch_add(1);
                if (i >= jobs.size()) return;
                run_job(i);
            }
        };
        std::vector<std::thread> pool;
        const std::size_t n_workers = std::min(config.threads, jobs.size());
        for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    // Deterministic order: (method, repetition), method order as declared.
    for (std::size_t li = 0; li < config.learners.size(); ++li)
        for (std::size_t ri = 0; ri < config.reducers.size(); ++ri)
            for (std::size_t p = 0; p < reps.size(); ++p) {
                const std::size_t job_idx = p * config.reducers.size() + ri;
                result.records.push_back(slots[job_idx][li]);
            }

    for (const auto& name : result.methods) {
        AggregateRow row;
        row.method = name;
        std::map<std::string, double> sums;
        for (const auto& rec : result.records) {
            if (rec.method != name || rec.failed) continue;
            ++row.repetitions_used;
            for (const auto& [k, v] : rec.report.values) sums[k] += v;
        }
        if (row.repetitions_used > 0)
            for (const auto& [k, v] : sums)
                row.means[k] = v / static_cast<double>(row.repetitions_used);
        result.aggregates.push_back(std::move(row));
    }
    return result;
}

json records_json(const ExperimentConfig& config, const ExperimentResult& result) {
    json j;
    j["schema"] = 1;
    j["task"] = data::to_string(config.task);
    j["base_seed"] = config.base_seed;
    j["repetitions"] = config.repetitions;
    j["split"] = {{"train_fraction", config.split.train_fraction},
                  {"stratified", config.split.stratified},
                  {"resample", config.split.resample == ResampleMode::Split ? "split"
                                                                            : "seed_only"}};
    j["std_convention"] = "population";
    j["methods"] = result.methods;

    json records = json::array();
    for (const auto& rec : result.records) {
        json r;
        r["method"] = rec.method;
        r["repetition"] = rec.repetition;
        r["seed"] = rec.seed;
        r["failed"] = rec.failed;
        if (rec.failed) r["error"] = rec.error;
        r["n"] = rec.report.n;
        if (!rec.report.class_counts.empty()) r["class_counts"] = rec.report.class_counts;
        r["metrics"] = rec.report.values;
        if (!rec.model_paths.empty()) r["model_paths"] = rec.model_paths;
        records.push_back(std::move(r));
    }
    j["records"] = std::move(records);

    json aggs = json::array();
    for (const auto& agg : result.aggregates) {
        json a;
        a["method"] = agg.method;
        a["repetitions_used"] = agg.repetitions_used;
        a["metrics"] = agg.means;
        aggs.push_back(std::move(a));
    }
    j["aggregates"] = std::move(aggs);
    return j;
}

std::pair<ExperimentConfig, ExperimentResult> parse_records(const json& j) {
    if (!j.contains("schema") || j.at("schema").get<int>() != 1)
        throw DataError("records: requires \"schema\": 1");
    ExperimentConfig config;
    config.task = data::task_from_string(j.at("task").get<std::string>());
    config.base_seed = j.at("base_seed").get<std::uint64_t>();
    config.repetitions = j.at("repetitions").get<std::size_t>();
    const json& s = j.at("split");
    config.split.train_fraction = s.at("train_fraction").get<double>();
    config.split.stratified = s.at("stratified").get<bool>();
    config.split.resample = s.at("resample").get<std::string>() == "split"
                                ? ResampleMode::Split
                                : ResampleMode::SeedOnly;

    ExperimentResult result;
    result.methods = j.at("methods").get<std::vector<std::string>>();
    for (const json& r : j.at("records")) {
        RunRecord rec;
        rec.method = r.at("method").get<std::string>();
        rec.repetition = r.at("repetition").get<std::size_t>();
        rec.seed = r.at("seed").get<std::uint64_t>();
        rec.failed = r.at("failed").get<bool>();
        if (rec.failed) rec.error = r.at("error").get<std::string>();
        rec.report.n = r.at("n").get<std::size_t>();
        if (r.contains("class_counts"))
            rec.report.class_counts = r.at("class_counts").get<std::vector<std::size_t>>();
        rec.report.values = r.at("metrics").get<std::map<std::string, double>>();
        if (r.contains("model_paths"))
            rec.model_paths = r.at("model_paths").get<std::vector<std::string>>();
        result.records.push_back(std::move(rec));
    }
    for (const json& a : j.at("aggregates")) {
        AggregateRow row;
        row.method = a.at("method").get<std::string>();
        row.repetitions_used = a.at("repetitions_used").get<std::size_t>();
        row.means = a.at("metrics").get<std::map<std::string, double>>();
        result.aggregates.push_back(std::move(row));
    }
    return {std::move(config), std::move(result)};
}

namespace {

std::vector<std::string> present_metrics(const ExperimentConfig& config,
                                         const ExperimentResult& result) {
    std::set<std::string> present;
    for (const auto& agg : result.aggregates)
        for (const auto& [k, v] : agg.means) present.insert(k);
    std::vector<std::string> cols;
    for (const auto& m : metric_order(config.task))
        if (present.count(m)) cols.push_back(m);
    for (const auto& m : present)  // anything nonstandard goes last
        if (std::find(cols.begin(), cols.end(), m) == cols.end()) cols.push_back(m);
    return cols;
}

std::string convention_header(const ExperimentConfig& config) {
    std::ostringstream os;
    os << "std convention: population; resample: "
       << (config.split.resample == ResampleMode::Split ? "split" : "seed_only")
       << "; stratified: " << (config.split.stratified ? "true" : "false")
       << "; train_fraction: " << config.split.train_fraction
       << "; base_seed: " << config.base_seed << "; repetitions: " << config.repetitions;
    return os.str();
}

}  // namespace

std::string render_csv(const ExperimentConfig& config, const ExperimentResult& result) {
    if (result.records.empty()) throw DataError("render: no records");
    const auto cols = present_metrics(config, result);
    std::ostringstream os;
    os << "# " << convention_header(config) << "\n";
    os << "method,repetition,seed,failed";
    for (const auto& c : cols) os << ',' << c;
    os << "\n";
    for (const auto& agg : result.aggregates) {
        for (const auto& rec : result.records) {
            if (rec.method != agg.method) continue;
            os << rec.method << ',' << rec.repetition << ',' << rec.seed << ','
               << (rec.failed ? "true" : "false");
            for (const auto& c : cols) {
                os << ',';
                auto it = rec.report.values.find(c);
                if (it != rec.report.values.end()) os << fmt_full(it->second);
            }
            os << "\n";
        }
        os << agg.method << ",mean,," << (agg.repetitions_used == 0 ? "true" : "false");
        for (const auto& c : cols) {
            os << ',';
            auto it = agg.means.find(c);
            if (it != agg.means.end()) os << fmt_full(it->second);
        }
        os << "\n";
    }
    return os.str();
}

std::string render_markdown(const ExperimentConfig& config, const ExperimentResult& result) {
    if (result.records.empty()) throw DataError("render: no records");
    const auto cols = present_metrics(config, result);

    // Best / second-best per column over aggregate means. When the best is
    // tied, every best cell is bolded and nothing is italicized.
    std::map<std::string, std::pair<double, double>> best2;  // col -> (best, second)
    for (const auto& c : cols) {
        if (c == "threshold") continue;
        std::vector<double> vals;
        for (const auto& agg : result.aggregates) {
            auto it = agg.means.find(c);
            if (it != agg.means.end()) vals.push_back(it->second);
        }
        if (vals.empty()) continue;
        std::sort(vals.begin(), vals.end());
        if (!lower_is_better(c)) std::reverse(vals.begin(), vals.end());
        double best = vals[0];
        double second = std::numeric_limits<double>::quiet_NaN();
        const std::size_t best_count =
            static_cast<std::size_t>(std::count(vals.begin(), vals.end(), best));
        if (best_count == 1)
            for (double v : vals)
                if (v != best) {
                    second = v;
                    break;
                }
        best2[c] = {best, second};
    }

    std::ostringstream os;
    os << "<!-- " << convention_header(config) << " -->\n\n";
    os << "# Experiment results (" << data::to_string(config.task) << ")\n\n";
    os << "Aggregate means over " << config.repetitions
       << " repetitions. Best per column in bold, second best in italics.\n\n";
    os << "| Method |";
    for (const auto& c : cols) os << ' ' << c << " |";
    os << "\n|---|";
    for (std::size_t i = 0; i < cols.size(); ++i) os << "---|";
    os << "\n";
    for (const auto& agg : result.aggregates) {
        os << "| " << agg.method << " |";
        for (const auto& c : cols) {
            auto it = agg.means.find(c);
            if (it == agg.means.end()) {
                os << " — |";
                continue;
            }
            std::string cell = fmt_short(it->second);
            auto b = best2.find(c);
            if (b != best2.end()) {
                if (it->second == b->second.first)
                    cell = "**" + cell + "**";
                else if (!std::isnan(b->second.second) && it->second == b->second.second)
                    cell = "_" + cell + "_";
            }
            os << ' ' << cell << " |";
        }
        os << "\n";
    }
    if (std::any_of(result.records.begin(), result.records.end(),
                    [](const RunRecord& r) { return r.failed; })) {
        os << "\nFailed runs:\n\n";
        for (const auto& rec : result.records)
            if (rec.failed)
                os << "- " << rec.method << " repetition " << rec.repetition << ": "
                   << rec.error << "\n";
    }
    return os.str();
}

void write_outputs(const ExperimentConfig& config, const ExperimentResult& result) {
    fs::create_directories(config.output_dir);
    auto write_atomic = [&](const std::string& name, const std::string& content) {
        const fs::path path = fs::path(config.output_dir) / name;
        const fs::path tmp = path.string() + ".tmp";
        {
            std::ofstream out(tmp, std::ios::binary);
            if (!out) throw DataError("cannot write " + tmp.string());
            out << content;
        }
        fs::rename(tmp, path);
    };
    write_atomic("records.json", records_json(config, result).dump(2) + "\n");
    write_atomic("table.csv", render_csv(config, result));
    write_atomic("table.md", render_markdown(config, result));

    std::ostringstream timings;
    timings << "method,repetition,wall_ms\n";
    for (const auto& rec : result.records)
        timings << rec.method << ',' << rec.repetition << ',' << fmt_full(rec.wall_ms) << "\n";
    write_atomic("timings.csv", timings.str());
}

}  // namespace aealt::harness

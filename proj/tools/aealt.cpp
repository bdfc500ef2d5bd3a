// aealt command-line tool: embed | synth | reduce | train | eval | experiment | report
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "aealt/dataset.hpp"
#include "aealt/downstream.hpp"
#include "aealt/embed_client.hpp"
#include "aealt/errors.hpp"
#include "aealt/factor.hpp"
#include "aealt/harness.hpp"
#include "aealt/metrics.hpp"
#include "aealt/model_io.hpp"
#include "aealt/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace aealt;

namespace {

struct Globals {
    std::string config;
    std::string out_dir = "out";
    std::uint64_t seed = 0;
    std::size_t threads = 1;
    bool seed_given = false, out_dir_given = false, threads_given = false;
};

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError(path + ": invalid JSON: " + e.what());
    }
}

void write_atomic(const fs::path& path, const std::string& content) {
    fs::create_directories(path.parent_path().empty() ? "." : path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw DataError("cannot write " + tmp.string());
        out << content;
    }
    fs::rename(tmp, path);
}

// id,value csv (predictions or scores)
std::pair<std::vector<std::string>, Vector> load_predictions(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw DataError(path + ": empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "id,value") throw DataError(path + ": header must be 'id,value'");
    std::vector<std::string> ids;
    Vector values;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos)
            throw DataError(path + ": line " + std::to_string(lineno) + ": expected 2 fields");
        ids.push_back(line.substr(0, comma));
        try {
            values.push_back(std::stod(line.substr(comma + 1)));
        } catch (const std::exception&) {
            throw DataError(path + ": line " + std::to_string(lineno) + ": bad number");
        }
    }
    if (ids.empty()) throw DataError(path + ": no rows");
    return {std::move(ids), std::move(values)};
}

Vector column(const Matrix& m, std::size_t j) {
    Vector v(m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i) v[i] = m(i, j);
    return v;
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

// ---- synth ----------------------------------------------------------------

struct SynthArgs {
    std::string task = "classification";
    data::SyntheticSpec spec;
    std::string nonlinearity = "linear";
    std::string loading = "gaussian";
    std::string format = "csv";
};

void cmd_synth(const Globals& g, SynthArgs& a) {
    a.spec.task = data::task_from_string(a.task);
    a.spec.nonlinearity = data::nonlinearity_from_string(a.nonlinearity);
    a.spec.loading = data::loading_from_string(a.loading);
    a.spec.seed = g.seed;
    a.spec.validate();
    const auto result = data::generate_synthetic(a.spec);
    fs::create_directories(g.out_dir);
    const auto format = data::format_from_string(a.format);
    const std::string emb_name =
        format == data::FileFormat::Csv ? "embeddings.csv" : "embeddings.emb1";
    const fs::path emb_path = fs::path(g.out_dir) / emb_name;
    const fs::path labels_path = fs::path(g.out_dir) / "labels.csv";
    data::save_embeddings(result.dataset.embeddings, emb_path.string(), format);
    data::save_labels(result.dataset, labels_path.string());
    std::cout << "wrote " << emb_path.string() << " (" << a.spec.n << "x" << a.spec.d
              << ") and " << labels_path.string() << "\n";
}

// ---- embed ----------------------------------------------------------------

struct EmbedArgs {
    std::string texts;
    std::string format = "binary";
    bool cache_stats = false;
};

void cmd_embed(const Globals& g, const EmbedArgs& a) {
    if (g.config.empty()) throw ConfigError("embed: --config <endpoint.json> is required");
    const auto endpoint = harness::parse_endpoint_config(read_json_file(g.config));
    if (a.cache_stats) {
        const auto stats = embed::cache_stats(endpoint.cache_dir);
        json j{{"entries", stats.entries},
               {"models", stats.models},
               {"bytes", stats.bytes},
               {"corrupt", stats.corrupt}};
        std::cout << j.dump(2) << "\n";
        return;
    }
    if (a.texts.empty()) throw ConfigError("embed: --texts <id,text csv> is required");
    auto [ids, texts] = harness::load_texts_csv(a.texts);
    auto m = embed::embed_texts(texts, endpoint);
    m.ids = std::move(ids);
    m.validate();
    const auto format = data::format_from_string(a.format);
    const std::string name =
        format == data::FileFormat::Csv ? "embeddings.csv" : "embeddings.emb1";
    fs::create_directories(g.out_dir);
    const fs::path path = fs::path(g.out_dir) / name;
    data::save_embeddings(m, path.string(), format);
    std::cout << "wrote " << path.string() << " (" << m.size() << "x" << m.dim() << ")\n";
}

// ---- reduce ---------------------------------------------------------------

struct ReduceArgs {
    std::string embeddings, labels, model;
    std::string format = "csv";
    std::string kind = "aealt";
    std::string task = "classification";
    std::size_t latent_dim = 0;
    double lambda = 0.5;
    std::size_t epochs = 100;
    std::size_t batch_size = 64;
    double learning_rate = 1e-3;
    std::vector<std::size_t> hidden = {256};
    std::vector<std::size_t> predictor_hidden = {32};
    bool standardize = false;
};

void cmd_reduce(const Globals& g, const ReduceArgs& a) {
    auto m = data::load_embeddings(a.embeddings, data::format_from_string(a.format));
    Matrix x = m.values;
    if (a.standardize) x = data::apply_scaler(data::fit_scaler(x), x);
    fs::create_directories(g.out_dir);

    factor::FactorModel model;
    if (!a.model.empty()) {
        model = io::load_factor_model(a.model);
    } else {
        const auto kind = factor::reducer_from_string(a.kind);
        const auto task = data::task_from_string(a.task);
        data::LabeledDataset ds;
        if (!a.labels.empty()) {
            ds = data::attach_labels(m, a.labels, task);
        } else {
            if (kind == factor::ReducerKind::Aealt)
                throw ConfigError("reduce: --kind aealt requires --labels");
            ds.embeddings = m;
            ds.task = task;
            if (task == data::Task::Regression)
                ds.targets.assign(m.size(), 0.0);
            else {
                ds.labels.assign(m.size(), 0);
                ds.num_classes = 1;
            }
        }
        ds.embeddings.values = x;
        const std::size_t k = kind == factor::ReducerKind::Identity ? m.dim() : a.latent_dim;
        factor::FactorConfig cfg =
            factor::FactorConfig::defaults(kind, m.dim(), k, ds.task, ds.num_classes,
                                           a.hidden, a.predictor_hidden);
        cfg.lambda = a.lambda;
        cfg.epochs = a.epochs;
        cfg.batch_size = a.batch_size;
        cfg.learning_rate = a.learning_rate;
        cfg.seed = g.seed;
        cfg.validate(m.dim());
        model = factor::train_factor_model(ds, cfg);
        const fs::path model_path = fs::path(g.out_dir) / "model.facm";
        io::save_factor_model(model, model_path.string());
        std::cout << "wrote " << model_path.string() << "\n";
    }

    data::EmbeddingMatrix factors;
    factors.ids = m.ids;
    factors.values = factor::encode(model, x);
    const fs::path factors_path = fs::path(g.out_dir) / "factors.csv";
    data::save_embeddings(factors, factors_path.string(), data::FileFormat::Csv);
    std::cout << "wrote " << factors_path.string() << " (" << factors.size() << "x"
              << factors.dim() << ")\n";
}

// ---- train ----------------------------------------------------------------

struct TrainArgs {
    std::string factors, labels;
    std::string format = "csv";
    std::string task = "classification";
    std::string learner = "logistic";
    double l2 = 0.0;
    std::size_t epochs = 0;  // 0 = learner default
    double learning_rate = 0.0;
    std::vector<std::size_t> hidden = {32};
    std::size_t batch_size = 64;
    double l1 = 0.0;
    std::size_t max_iters = 10000;
    double tol = 1e-7;
    std::size_t n_trees = 100;
    std::size_t subsample = 256;
};

void cmd_train(const Globals& g, const TrainArgs& a) {
    const auto task = data::task_from_string(a.task);
    auto m = data::load_embeddings(a.factors, data::format_from_string(a.format));

    downstream::DownstreamModel model;
    if (a.learner == "iforest") {
        if (task != data::Task::Anomaly)
            throw ConfigError("train: iforest supports the anomaly task only");
        downstream::IForestConfig cfg;
        cfg.n_trees = a.n_trees;
        cfg.subsample = a.subsample;
        cfg.seed = g.seed;
        model = downstream::fit_iforest(m.values, cfg);
    } else {
        if (a.labels.empty()) throw ConfigError("train: --labels is required");
        auto ds = data::attach_labels(std::move(m), a.labels, task);
        if (a.learner == "logistic") {
            if (task == data::Task::Regression)
                throw ConfigError("train: logistic does not support regression");
            downstream::LogisticConfig cfg;
            cfg.l2 = a.l2;
            if (a.epochs) cfg.epochs = a.epochs;
            if (a.learning_rate > 0) cfg.learning_rate = a.learning_rate;
            cfg.seed = g.seed;
            model = downstream::fit_logistic(ds.embeddings.values, ds.labels, ds.num_classes,
                                             cfg);
        } else if (a.learner == "mlp") {
            downstream::MlpConfig cfg;
            cfg.hidden = a.hidden;
            if (a.epochs) cfg.epochs = a.epochs;
            if (a.learning_rate > 0) cfg.learning_rate = a.learning_rate;
            cfg.batch_size = a.batch_size;
            cfg.seed = g.seed;
            model = task == data::Task::Regression
                        ? downstream::fit_mlp_regressor(ds.embeddings.values, ds.targets, cfg)
                        : downstream::fit_mlp_classifier(ds.embeddings.values, ds.labels,
                                                         ds.num_classes, cfg);
        } else if (a.learner == "lasso") {
            if (task != data::Task::Regression)
                throw ConfigError("train: lasso supports the regression task only");
            downstream::LassoConfig cfg;
            cfg.l1 = a.l1;
            cfg.max_iters = a.max_iters;
            cfg.tol = a.tol;
            model = downstream::fit_lasso(ds.embeddings.values, ds.targets, cfg);
        } else {
            throw ConfigError("train: unknown learner '" + a.learner + "'");
        }
    }
    fs::create_directories(g.out_dir);
    const fs::path path = fs::path(g.out_dir) / "downstream.facm";
    io::save_downstream_model(model, path.string());
    std::cout << "wrote " << path.string() << " (" << downstream::to_string(model.kind)
              << ")\n";
}

// ---- eval -----------------------------------------------------------------

struct EvalArgs {
    std::string predictions, model, factors, labels;
    std::string format = "csv";
    std::string task = "classification";
    double threshold = std::numeric_limits<double>::quiet_NaN();
    double train_mean = std::numeric_limits<double>::quiet_NaN();
};

void cmd_eval(const Globals& g, const EvalArgs& a) {
    const auto task = data::task_from_string(a.task);
    if (a.labels.empty()) throw ConfigError("eval: --labels is required");
    if (a.predictions.empty() == (a.model.empty() || a.factors.empty()))
        throw ConfigError("eval: provide either --predictions or --model with --factors");

    std::vector<int> y_labels;
    Vector y_targets;
    Vector scores;          // anomaly scores or regression predictions
    std::vector<int> pred;  // classification predictions
    bool iforest = false;

    if (!a.predictions.empty()) {
        auto [ids, values] = load_predictions(a.predictions);
        data::EmbeddingMatrix m;
        m.ids = std::move(ids);
        m.values = Matrix(values.size(), 1);
        for (std::size_t i = 0; i < values.size(); ++i) m.values(i, 0) = values[i];
        auto ds = data::attach_labels(std::move(m), a.labels, task);
        y_labels = ds.labels;
        y_targets = ds.targets;
        scores = column(ds.embeddings.values, 0);
        if (task == data::Task::Classification) {
            pred.reserve(scores.size());
            for (double v : scores) {
                const double r = std::nearbyint(v);
                if (std::abs(v - r) > 1e-9 || r < 0)
                    throw DataError("eval: classification predictions must be integer labels");
                pred.push_back(static_cast<int>(r));
            }
        }
    } else {
        auto model = io::load_downstream_model(a.model);
        auto m = data::load_embeddings(a.factors, data::format_from_string(a.format));
        auto ds = data::attach_labels(std::move(m), a.labels, task);
        y_labels = ds.labels;
        y_targets = ds.targets;
        const Matrix out = downstream::predict(model, ds.embeddings.values);
        iforest = model.kind == downstream::LearnerKind::IForest;
        if (task == data::Task::Classification)
            pred = argmax_rows(out);
        else if (task == data::Task::Anomaly)
            scores = column(out, iforest ? 0 : 1);
        else
            scores = column(out, 0);
    }

    std::map<std::string, double> values;
    if (task == data::Task::Classification) {
        std::size_t c = 0;
        for (int y : y_labels) c = std::max<std::size_t>(c, static_cast<std::size_t>(y) + 1);
        for (int p : pred) c = std::max<std::size_t>(c, static_cast<std::size_t>(p) + 1);
        const auto cm = metrics::classification_metrics(y_labels, pred, c);
        values["accuracy"] = cm.accuracy;
        values["macro_f1"] = cm.macro_f1;
        if (cm.positive_f1.has_value()) {
            values["f1"] = *cm.positive_f1;
            values["precision"] = *cm.precision;
            values["recall"] = *cm.recall;
        }
    } else if (task == data::Task::Anomaly) {
        values["auroc"] = metrics::auroc(scores, y_labels);
        values["aucpr"] = metrics::aucpr(scores, y_labels);
        if (!std::isnan(a.threshold)) {
            std::vector<int> yhat(scores.size());
            for (std::size_t i = 0; i < scores.size(); ++i)
                yhat[i] = scores[i] >= a.threshold ? 1 : 0;
            const auto cm = metrics::classification_metrics(y_labels, yhat, 2);
            values["f1"] = cm.positive_f1.value();
            values["precision"] = cm.precision.value();
            values["recall"] = cm.recall.value();
            values["accuracy"] = cm.accuracy;
            values["macro_f1"] = cm.macro_f1;
            values["threshold"] = a.threshold;
        }
    } else {
        double mean = a.train_mean;
        if (std::isnan(mean)) {
            mean = 0.0;
            for (double y : y_targets) mean += y;
            mean /= static_cast<double>(y_targets.size());
        }
        const auto rm = metrics::regression_metrics(y_targets, scores, mean);
        values["mae"] = rm.mae;
        values["rmse"] = rm.rmse;
        values["r2_oos"] = rm.r2_oos;
    }

    json j{{"task", data::to_string(task)}, {"n", y_labels.empty() ? y_targets.size()
                                                                   : y_labels.size()},
           {"metrics", values}};
    const std::string text = j.dump(2) + "\n";
    write_atomic(fs::path(g.out_dir) / "metrics.json", text);
    std::cout << text;
}

// ---- experiment / report ---------------------------------------------------

struct ExperimentArgs {
    std::optional<std::size_t> repetition;
};

void cmd_experiment(const Globals& g, const ExperimentArgs& a) {
    if (g.config.empty()) throw ConfigError("experiment: --config <cfg.json> is required");
    harness::ExperimentConfig config = harness::load_experiment_config(g.config);
    if (g.out_dir_given) config.output_dir = g.out_dir;
    if (g.threads_given) config.threads = g.threads;
    if (g.seed_given) config.base_seed = g.seed;

    const auto t0 = std::chrono::steady_clock::now();
    const auto result = harness::run_experiment(config, a.repetition);
    harness::write_outputs(config, result);
    const auto dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0);

    std::size_t failed = 0;
    for (const auto& rec : result.records) failed += rec.failed ? 1 : 0;
    std::cout << "wrote " << (fs::path(config.output_dir) / "records.json").string() << " ("
              << result.records.size() << " records, " << result.methods.size()
              << " methods, " << failed << " failed) in " << std::fixed
              << std::setprecision(1) << dt.count() << "s\n";
}

struct ReportArgs {
    std::string records;
    std::string format = "markdown";
};

void cmd_report(const Globals& g, const ReportArgs& a) {
    const auto [config, result] = harness::parse_records(read_json_file(a.records));
    std::string name, content;
    if (a.format == "markdown" || a.format == "md") {
        name = "table.md";
        content = harness::render_markdown(config, result);
    } else if (a.format == "csv") {
        name = "table.csv";
        content = harness::render_csv(config, result);
    } else if (a.format == "json") {
        name = "records.json";
        content = harness::records_json(config, result).dump(2) + "\n";
    } else {
        throw ConfigError("report: format must be markdown, csv, or json");
    }
    // render to stdout unless a destination was asked for
    if (!g.out_dir_given) {
        std::cout << content;
        return;
    }
    const fs::path path = fs::path(g.out_dir) / name;
    write_atomic(path, content);
    std::cout << "wrote " << path.string() << "\n";
}

int run(int argc, char** argv) {
    CLI::App app{"supervised-autoencoder dimension reduction for text embeddings"};
    app.require_subcommand(1);

    Globals g;
    auto* opt_config = app.add_option("--config", g.config, "JSON config file");
    auto* opt_out = app.add_option("--out-dir", g.out_dir, "output directory (default: out)");
    auto* opt_seed = app.add_option("--seed", g.seed, "base RNG seed (default: 0)");
    auto* opt_threads = app.add_option("--threads", g.threads, "worker threads (default: 1)");

    SynthArgs synth;
    auto* s = app.add_subcommand("synth", "generate a synthetic factor-model dataset");
    s->fallthrough();
    s->add_option("--task", synth.task, "classification | anomaly | regression");
    s->add_option("--n", synth.spec.n, "rows");
    s->add_option("--d", synth.spec.d, "embedding dimension");
    s->add_option("--r", synth.spec.r, "true factor count");
    s->add_option("--noise-sigma", synth.spec.noise_sigma, "additive noise sigma");
    s->add_option("--nonlinearity", synth.nonlinearity, "linear | tanh | quadratic");
    s->add_option("--predictive", synth.spec.predictive, "predictive factor indices")
        ->delimiter(',');
    s->add_option("--loading", synth.loading, "gaussian | identity | grouped");
    s->add_option("--signal-rows", synth.spec.signal_rows, "grouped: rows per signal block");
    s->add_option("--signal-scale", synth.spec.signal_scale, "grouped: signal magnitude");
    s->add_option("--background-scale", synth.spec.background_scale,
                  "grouped: background magnitude");
    s->add_option("--anomaly-fraction", synth.spec.anomaly_fraction, "anomaly rate");
    s->add_option("--format", synth.format, "csv | binary");
    s->callback([&] { cmd_synth(g, synth); });

    EmbedArgs embed_args;
    auto* e = app.add_subcommand("embed", "embed an id,text csv via the endpoint in --config");
    e->fallthrough();
    e->add_option("--texts", embed_args.texts, "csv with header id,text");
    e->add_option("--format", embed_args.format, "csv | binary (default: binary)");
    e->add_flag("--cache-stats", embed_args.cache_stats, "print cache statistics and exit");
    e->callback([&] { cmd_embed(g, embed_args); });

    ReduceArgs reduce;
    auto* r = app.add_subcommand("reduce", "fit a factor model and/or encode embeddings");
    r->fallthrough();
    r->add_option("--embeddings", reduce.embeddings, "embeddings file")->required();
    r->add_option("--labels", reduce.labels, "labels csv (required for --kind aealt)");
    r->add_option("--model", reduce.model, "existing .facm model (apply mode)");
    r->add_option("--format", reduce.format, "csv | binary");
    r->add_option("--kind", reduce.kind, "aealt | vanilla_ae | pca | identity");
    r->add_option("--task", reduce.task, "classification | anomaly | regression");
    r->add_option("-k,--k,--latent-dim", reduce.latent_dim, "bottleneck width");
    r->add_option("--lambda", reduce.lambda, "supervision weight in [0,1]");
    r->add_option("--epochs", reduce.epochs, "training epochs");
    r->add_option("--batch-size", reduce.batch_size, "minibatch size");
    r->add_option("--learning-rate", reduce.learning_rate, "Adam learning rate");
    r->add_option("--hidden", reduce.hidden, "encoder/decoder hidden widths")->delimiter(',');
    r->add_option("--predictor-hidden", reduce.predictor_hidden, "predictor hidden widths")
        ->delimiter(',');
    r->add_flag("--standardize", reduce.standardize,
                "standardize the input matrix before fitting/encoding");
    r->callback([&] { cmd_reduce(g, reduce); });

    TrainArgs train;
    auto* t = app.add_subcommand("train", "fit a downstream learner on encoded factors");
    t->fallthrough();
    t->add_option("--factors", train.factors, "factors file")->required();
    t->add_option("--labels", train.labels, "labels csv");
    t->add_option("--format", train.format, "csv | binary");
    t->add_option("--task", train.task, "classification | anomaly | regression");
    t->add_option("--learner", train.learner, "logistic | mlp | lasso | iforest");
    t->add_option("--l2", train.l2, "logistic: l2 penalty");
    t->add_option("--epochs", train.epochs, "logistic/mlp: epochs");
    t->add_option("--learning-rate", train.learning_rate, "logistic/mlp: learning rate");
    t->add_option("--hidden", train.hidden, "mlp: hidden widths")->delimiter(',');
    t->add_option("--batch-size", train.batch_size, "mlp: minibatch size");
    t->add_option("--l1", train.l1, "lasso: l1 penalty");
    t->add_option("--max-iters", train.max_iters, "lasso: max coordinate sweeps");
    t->add_option("--tol", train.tol, "lasso: convergence tolerance");
    t->add_option("--n-trees", train.n_trees, "iforest: tree count");
    t->add_option("--subsample", train.subsample, "iforest: per-tree subsample size");
    t->callback([&] { cmd_train(g, train); });

    EvalArgs eval_args;
    auto* v = app.add_subcommand("eval", "compute metrics for predictions or a saved model");
    v->fallthrough();
    v->add_option("--predictions", eval_args.predictions, "csv with header id,value");
    v->add_option("--model", eval_args.model, "downstream .facm model");
    v->add_option("--factors", eval_args.factors, "factors file (with --model)");
    v->add_option("--labels", eval_args.labels, "labels csv");
    v->add_option("--format", eval_args.format, "csv | binary");
    v->add_option("--task", eval_args.task, "classification | anomaly | regression");
    v->add_option("--threshold", eval_args.threshold, "anomaly: decision threshold");
    v->add_option("--train-mean", eval_args.train_mean,
                  "regression: training-target mean for the r2_oos baseline");
    v->callback([&] { cmd_eval(g, eval_args); });

    ExperimentArgs exp;
    std::int64_t rep = -1;
    auto* x = app.add_subcommand("experiment", "run the full grid from a JSON config");
    x->fallthrough();
    x->add_option("--repetition", rep, "re-run a single repetition index");
    x->callback([&] {
        g.seed_given = opt_seed->count() > 0;
        g.out_dir_given = opt_out->count() > 0;
        g.threads_given = opt_threads->count() > 0;
        if (rep >= 0) exp.repetition = static_cast<std::size_t>(rep);
        cmd_experiment(g, exp);
    });

    ReportArgs report;
    auto* p = app.add_subcommand("report", "render a records.json into a table");
    p->fallthrough();
    p->add_option("--records", report.records, "records.json path")->required();
    p->add_option("--format", report.format, "markdown | csv | json");
    p->callback([&] {
        g.out_dir_given = opt_out->count() > 0;
        cmd_report(g, report);
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        const int code = app.exit(err);
        return code == 0 ? 0 : 2;
    }
    (void)opt_config;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const ConfigError& e) {
        std::cerr << "error[config]: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "error[data]: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error[runtime]: " << e.what() << "\n";
        return 4;
    }
}

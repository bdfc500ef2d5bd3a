#include "aealt/factor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "aealt/downstream.hpp"
#include "aealt/errors.hpp"
#include "aealt/linalg.hpp"
#include "aealt/rng.hpp"

namespace aealt::factor {

ReducerKind reducer_from_string(const std::string& s) {
    if (s == "aealt") return ReducerKind::Aealt;
    if (s == "vanilla_ae") return ReducerKind::VanillaAe;
    if (s == "pca") return ReducerKind::Pca;
    if (s == "identity") return ReducerKind::Identity;
    throw ConfigError("unknown reducer kind: " + s);
}

std::string to_string(ReducerKind k) {
    switch (k) {
        case ReducerKind::Aealt: return "aealt";
        case ReducerKind::VanillaAe: return "vanilla_ae";
        case ReducerKind::Pca: return "pca";
        case ReducerKind::Identity: return "identity";
    }
    return "?";
}

std::string reducer_display_name(ReducerKind k) {
    switch (k) {
        case ReducerKind::Aealt: return "AEALT";
        case ReducerKind::VanillaAe: return "AE";
        case ReducerKind::Pca: return "PCA";
        case ReducerKind::Identity: return "Vanilla";
    }
    return "?";
}

FactorConfig FactorConfig::defaults(ReducerKind kind, std::size_t input_dim,
                                    std::size_t latent_dim, data::Task task,
                                    std::size_t num_classes,
                                    const std::vector<std::size_t>& hidden,
                                    const std::vector<std::size_t>& predictor_hidden) {
    FactorConfig c;
    c.kind = kind;
    c.latent_dim = latent_dim;
    c.task = task;
    c.num_classes = num_classes;

    auto relu_chain = [](std::size_t in, const std::vector<std::size_t>& mids, std::size_t out,
                         nn::Activation final_act) {
        nn::NetworkSpec s;
        s.layer_dims.push_back(in);
        for (std::size_t h : mids) {
            s.layer_dims.push_back(h);
            s.activations.push_back(nn::Activation::Relu);
        }
        s.layer_dims.push_back(out);
        s.activations.push_back(final_act);
        return s;
    };

    c.encoder = relu_chain(input_dim, hidden, latent_dim, nn::Activation::Identity);
    c.decoder = relu_chain(latent_dim, hidden, input_dim, nn::Activation::Identity);
    const bool classify = task != data::Task::Regression;
    c.predictor = relu_chain(latent_dim, predictor_hidden, classify ? num_classes : 1,
                             classify ? nn::Activation::Softmax : nn::Activation::Identity);
    return c;
}

FactorConfig FactorConfig::with_latent_dim(std::size_t k) const {
    FactorConfig c = *this;
    c.latent_dim = k;
    if (!c.encoder.layer_dims.empty()) c.encoder.layer_dims.back() = k;
    if (!c.decoder.layer_dims.empty()) c.decoder.layer_dims.front() = k;
    if (!c.predictor.layer_dims.empty()) c.predictor.layer_dims.front() = k;
    return c;
}

void FactorConfig::validate(std::size_t input_dim) const {
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("lambda must be in [0,1]");
    if (latent_dim == 0) throw ConfigError("latent_dim must be >= 1");
    if (latent_dim > input_dim) throw ConfigError("latent_dim exceeds embedding dim");
    if (kind == ReducerKind::Identity && latent_dim != input_dim)
        throw ConfigError("identity reducer requires latent_dim == embedding dim");
    if (kind == ReducerKind::Aealt || kind == ReducerKind::VanillaAe) {
        if (epochs == 0 || batch_size == 0)
            throw ConfigError("epochs and batch_size must be positive");
        encoder.validate();
        decoder.validate();
        if (encoder.input_dim() != input_dim) throw ConfigError("encoder input dim mismatch");
        if (encoder.output_dim() != latent_dim)
            throw ConfigError("encoder output dim must equal latent_dim");
        if (decoder.input_dim() != latent_dim)
            throw ConfigError("decoder input dim must equal latent_dim");
        if (decoder.output_dim() != input_dim) throw ConfigError("decoder output dim mismatch");
        if (kind == ReducerKind::Aealt) {
            predictor.validate();
            if (predictor.input_dim() != latent_dim)
                throw ConfigError("predictor input dim must equal latent_dim");
            const std::size_t want =
                task == data::Task::Regression ? 1 : num_classes;
            if (predictor.output_dim() != want)
                throw ConfigError("predictor output dim does not match task");
        }
    }
}

namespace {

// Supervised loss sum + gradient for the predictor output.
std::pair<double, Matrix> supervised_loss(const FactorConfig& config, const Matrix& output,
                                          const BatchTargets& y) {
    if (config.task == data::Task::Regression) {
        if (y.values == nullptr) throw DataError("regression targets missing");
        if (y.values->size() != output.rows())
            throw DataError("target length does not match batch");
        Matrix t(output.rows(), 1);
        for (std::size_t i = 0; i < t.rows(); ++i) t(i, 0) = (*y.values)[i];
        return nn::squared_error_loss(output, t);
    }
    if (y.labels == nullptr) throw DataError("class labels missing");
    return nn::cross_entropy_loss(output, *y.labels);
}

}  // namespace

CompositeLoss composite_loss(const FactorConfig& config, const AealtParams& params,
                             const Matrix& batch_x, const BatchTargets& batch_y) {
    if (!(config.lambda >= 0.0 && config.lambda <= 1.0))
        throw ConfigError("lambda must be in [0,1]");
    if (config.kind != ReducerKind::Aealt && config.kind != ReducerKind::VanillaAe)
        throw UnsupportedError("composite_loss requires an autoencoder reducer");

    auto enc_acts = nn::forward(config.encoder, params.encoder, batch_x);
    auto dec_acts = nn::forward(config.decoder, params.decoder, enc_acts.back());
    CompositeLoss out;
    out.reconstruction = nn::squared_error_loss(dec_acts.back(), batch_x).first;
    if (params.has_predictor) {
        auto pred_acts = nn::forward(config.predictor, params.predictor, enc_acts.back());
        out.supervised = supervised_loss(config, pred_acts.back(), batch_y).first;
    }
    out.total = (1.0 - config.lambda) * out.reconstruction + config.lambda * out.supervised;
    return out;
}

namespace {

FactorModel train_autoencoder(const data::LabeledDataset& train, const FactorConfig& config) {
    const Matrix& x = train.embeddings.values;
    const std::size_t n = x.rows();

    FactorModel model;
    model.kind = config.kind;
    model.input_dim = x.cols();
    model.latent_dim = config.latent_dim;
    model.config = config;
    model.has_predictor = config.kind == ReducerKind::Aealt;
    model.encoder = nn::init_params(config.encoder, derive_seed(config.seed, 0));
    model.decoder = nn::init_params(config.decoder, derive_seed(config.seed, 1));
    if (model.has_predictor)
        model.predictor = nn::init_params(config.predictor, derive_seed(config.seed, 2));

    nn::AdamState enc_adam = nn::AdamState::for_spec(config.encoder, config.learning_rate);
    nn::AdamState dec_adam = nn::AdamState::for_spec(config.decoder, config.learning_rate);
    nn::AdamState pred_adam = nn::AdamState::for_spec(config.predictor, config.learning_rate);

    Rng shuffle_rng(derive_seed(config.seed, 3));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});

    const double lam = config.lambda;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double epoch_total = 0.0;
        for (std::size_t start = 0, batch_no = 0; start < n;
             start += config.batch_size, ++batch_no) {
            const std::size_t stop = std::min(n, start + config.batch_size);
            std::vector<std::size_t> rows(order.begin() + static_cast<std::ptrdiff_t>(start),
                                          order.begin() + static_cast<std::ptrdiff_t>(stop));
            Matrix bx = take_rows(x, rows);
            const double inv_b = 1.0 / static_cast<double>(rows.size());

            auto enc_acts = nn::forward(config.encoder, model.encoder, bx);
            const Matrix& f = enc_acts.back();
            auto dec_acts = nn::forward(config.decoder, model.decoder, f);

            auto [recon_sum, recon_grad] = nn::squared_error_loss(dec_acts.back(), bx);
            for (std::size_t i = 0; i < recon_grad.size(); ++i)
                recon_grad.data()[i] *= (1.0 - lam) * inv_b;
            auto dec_back = nn::backward(config.decoder, model.decoder, dec_acts, recon_grad);
            Matrix f_grad = std::move(dec_back.input_grad);

            double sup_sum = 0.0;
            if (model.has_predictor) {
                std::vector<int> blabels;
                Vector btargets;
                BatchTargets by;
                if (config.task == data::Task::Regression) {
                    for (std::size_t i : rows) btargets.push_back(train.targets[i]);
                    by.values = &btargets;
                } else {
                    for (std::size_t i : rows) blabels.push_back(train.labels[i]);
                    by.labels = &blabels;
                }
                auto pred_acts = nn::forward(config.predictor, model.predictor, f);
                auto [s, sup_grad] = supervised_loss(config, pred_acts.back(), by);
                sup_sum = s;
                for (std::size_t i = 0; i < sup_grad.size(); ++i)
                    sup_grad.data()[i] *= lam * inv_b;
                auto pred_back =
                    nn::backward(config.predictor, model.predictor, pred_acts, sup_grad);
                for (std::size_t i = 0; i < f_grad.size(); ++i)
                    f_grad.data()[i] += pred_back.input_grad.data()[i];
                nn::adam_step_inplace(model.predictor, pred_back.param_grads, pred_adam);
            }

            auto enc_back = nn::backward(config.encoder, model.encoder, enc_acts, f_grad);
            nn::adam_step_inplace(model.encoder, enc_back.param_grads, enc_adam);
            nn::adam_step_inplace(model.decoder, dec_back.param_grads, dec_adam);

            const double total = (1.0 - lam) * recon_sum + lam * sup_sum;
            if (!std::isfinite(total))
                throw DataError("training diverged: non-finite loss at epoch " +
                                std::to_string(epoch) + ", batch " + std::to_string(batch_no));
            epoch_total += total;
        }
        const double mean = epoch_total / static_cast<double>(n);
        model.loss_trace.push_back(
            model.loss_trace.empty() ? mean : std::min(model.loss_trace.back(), mean));
    }
    return model;
}

}  // namespace

FactorModel train_factor_model(const data::LabeledDataset& train, const FactorConfig& config_in) {
    if (train.size() == 0) throw DataError("train_factor_model: empty training set");
    FactorConfig config = config_in;
    if (config.kind == ReducerKind::VanillaAe) config.lambda = 0.0;  // forced by definition
    config.validate(train.dim());
    if (config.task != train.task)
        throw ConfigError("factor config task does not match dataset task");

    switch (config.kind) {
        case ReducerKind::Identity: {
            FactorModel m;
            m.kind = ReducerKind::Identity;
            m.input_dim = train.dim();
            m.latent_dim = train.dim();
            m.config = config;
            return m;
        }
        case ReducerKind::Pca: {
            FactorModel m = fit_pca(train.embeddings.values, config.latent_dim);
            m.config = config;
            return m;
        }
        case ReducerKind::Aealt:
            if (train.task != data::Task::Regression && train.labels.empty())
                throw DataError("aealt requires labels");
            [[fallthrough]];
        case ReducerKind::VanillaAe:
            return train_autoencoder(train, config);
    }
    throw ConfigError("unreachable reducer kind");
}

Matrix encode(const FactorModel& model, const Matrix& x) {
    if (x.cols() != model.input_dim) throw DataError("encode: input dim mismatch");
    switch (model.kind) {
        case ReducerKind::Identity:
            return x;
        case ReducerKind::Pca: {
            Matrix centered = x;
            for (std::size_t i = 0; i < centered.rows(); ++i)
                for (std::size_t j = 0; j < centered.cols(); ++j)
                    centered(i, j) -= model.mean[j];
            return matmul_a_bt(centered, model.components);
        }
        default:
            return nn::forward(model.config.encoder, model.encoder, x).back();
    }
}

Matrix reconstruct(const FactorModel& model, const Matrix& factors) {
    if (factors.cols() != model.latent_dim) throw DataError("reconstruct: factor dim mismatch");
    switch (model.kind) {
        case ReducerKind::Identity:
            return factors;
        case ReducerKind::Pca: {
            Matrix out = matmul(factors, model.components);
            add_row_vector(out, model.mean);
            return out;
        }
        default:
            return nn::forward(model.config.decoder, model.decoder, factors).back();
    }
}

Matrix predict_head(const FactorModel& model, const Matrix& factors) {
    if (model.kind != ReducerKind::Aealt || !model.has_predictor)
        throw UnsupportedError("predict_head is only defined for aealt models");
    if (factors.cols() != model.latent_dim) throw DataError("predict_head: factor dim mismatch");
    return nn::forward(model.config.predictor, model.predictor, factors).back();
}

FactorModel fit_pca(const Matrix& x, std::size_t k) {
    const std::size_t n = x.rows(), d = x.cols();
    if (n < 2) throw DataError("fit_pca: need at least 2 rows");
    if (k < 1 || k > std::min(n - 1, d))
        throw ConfigError("fit_pca: k must be in [1, min(n-1, d)]");

    FactorModel m;
    m.kind = ReducerKind::Pca;
    m.input_dim = d;
    m.latent_dim = k;
    m.mean = col_means(x);

    Matrix centered = x;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) centered(i, j) -= m.mean[j];
    Matrix cov = matmul_at_b(centered, centered);
    for (std::size_t i = 0; i < cov.size(); ++i)
        cov.data()[i] /= static_cast<double>(n - 1);

    double total_var = 0.0;
    for (std::size_t j = 0; j < d; ++j) total_var += cov(j, j);
    if (total_var <= 0.0) throw DataError("fit_pca: zero-variance data");

    EigenDecomposition eig = symmetric_eigen(cov);
    m.components = Matrix(k, d);
    m.eigenvalues.assign(eig.eigenvalues.begin(),
                         eig.eigenvalues.begin() + static_cast<std::ptrdiff_t>(k));
    for (std::size_t i = 0; i < k; ++i) {
        // Sign convention: the largest-magnitude entry of each component is
        // positive (first such entry wins on exact ties).
        std::size_t arg = 0;
        double best = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            const double a = std::abs(eig.eigenvectors(i, j));
            if (a > best) {
                best = a;
                arg = j;
            }
        }
        const double flip = eig.eigenvectors(i, arg) < 0.0 ? -1.0 : 1.0;
        for (std::size_t j = 0; j < d; ++j) m.components(i, j) = flip * eig.eigenvectors(i, j);
    }
    return m;
}

std::size_t select_latent_dim(const data::LabeledDataset& train,
                              const std::vector<std::size_t>& candidates,
                              const FactorConfig& config) {
    if (candidates.empty()) throw ConfigError("select_latent_dim: no candidates");
    for (std::size_t k : candidates)
        if (k == 0 || k > train.dim())
            throw ConfigError("select_latent_dim: candidate outside [1, d]");

    std::vector<std::size_t> ks = candidates;
    std::sort(ks.begin(), ks.end());
    ks.erase(std::unique(ks.begin(), ks.end()), ks.end());

    const bool classify = train.task != data::Task::Regression;
    auto inner = data::split_dataset(train, 0.8, derive_seed(config.seed, 0x5e1ec7), classify);

    double best_score = classify ? -1.0 : std::numeric_limits<double>::infinity();
    std::size_t best_k = ks.front();
    for (std::size_t k : ks) {
        FactorConfig cfg = config.with_latent_dim(k);
        cfg.seed = derive_seed(config.seed, 0xd100 + k);
        FactorModel model = train_factor_model(inner.train, cfg);
        Matrix f_tr = encode(model, inner.train.embeddings.values);
        Matrix f_val = encode(model, inner.test.embeddings.values);

        double score;
        if (classify) {
            Matrix probs;
            if (model.kind == ReducerKind::Aealt) {
                probs = predict_head(model, f_val);
            } else {
                downstream::LogisticConfig probe;
                probe.epochs = 300;
                probe.learning_rate = 0.5;
                probe.seed = derive_seed(cfg.seed, 7);
                auto lg = downstream::fit_logistic(f_tr, inner.train.labels,
                                                   inner.train.num_classes, probe);
                probs = downstream::predict(lg, f_val);
            }
            std::size_t correct = 0;
            for (std::size_t i = 0; i < probs.rows(); ++i) {
                std::size_t arg = 0;
                for (std::size_t j = 1; j < probs.cols(); ++j)
                    if (probs(i, j) > probs(i, arg)) arg = j;
                if (static_cast<int>(arg) == inner.test.labels[i]) ++correct;
            }
            score = static_cast<double>(correct) / static_cast<double>(probs.rows());
            if (score > best_score) {
                best_score = score;
                best_k = k;
            }
        } else {
            Vector pred;
            if (model.kind == ReducerKind::Aealt) {
                Matrix out = predict_head(model, f_val);
                for (std::size_t i = 0; i < out.rows(); ++i) pred.push_back(out(i, 0));
            } else {
                downstream::LassoConfig probe;  // l1 = 0: plain least squares
                auto ls = downstream::fit_lasso(f_tr, inner.train.targets, probe);
                Matrix out = downstream::predict(ls, f_val);
                for (std::size_t i = 0; i < out.rows(); ++i) pred.push_back(out(i, 0));
            }
            double sse = 0.0;
            for (std::size_t i = 0; i < pred.size(); ++i) {
                const double e = pred[i] - inner.test.targets[i];
                sse += e * e;
            }
            score = sse / static_cast<double>(pred.size());
            if (score < best_score) {
                best_score = score;
                best_k = k;
            }
        }
    }
    return best_k;
}

}  // namespace aealt::factor

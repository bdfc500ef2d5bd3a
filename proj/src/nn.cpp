#include "aealt/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "aealt/errors.hpp"
#include "aealt/rng.hpp"

namespace aealt::nn {

Activation activation_from_string(std::string_view s) {
    if (s == "relu") return Activation::Relu;
    if (s == "identity" || s == "linear") return Activation::Identity;
    if (s == "sigmoid") return Activation::Sigmoid;
    if (s == "softmax") return Activation::Softmax;
    throw ConfigError("unknown activation: " + std::string(s));
}

std::string to_string(Activation a) {
    switch (a) {
        case Activation::Relu: return "relu";
        case Activation::Identity: return "identity";
        case Activation::Sigmoid: return "sigmoid";
        case Activation::Softmax: return "softmax";
    }
    return "?";
}

void NetworkSpec::validate() const {
    if (layer_dims.size() < 2) throw ConfigError("network needs at least input and output dims");
    if (activations.size() != layer_dims.size() - 1)
        throw ConfigError("need exactly one activation per weighted layer");
    for (std::size_t d : layer_dims)
        if (d == 0) throw ConfigError("zero-width layer");
    for (std::size_t l = 0; l + 1 < activations.size(); ++l)
        if (activations[l] == Activation::Softmax)
            throw ConfigError("softmax is only supported as the output activation");
}

NetworkParams NetworkParams::zeros_like(const NetworkSpec& spec) {
    NetworkParams p;
    for (std::size_t l = 0; l + 1 < spec.layer_dims.size(); ++l) {
        p.weights.emplace_back(spec.layer_dims[l + 1], spec.layer_dims[l]);
        p.biases.emplace_back(spec.layer_dims[l + 1], 0.0);
    }
    return p;
}

std::size_t NetworkParams::parameter_count() const {
    std::size_t n = 0;
    for (const auto& w : weights) n += w.size();
    for (const auto& b : biases) n += b.size();
    return n;
}

NetworkParams init_params(const NetworkSpec& spec, std::uint64_t seed) {
    spec.validate();
    NetworkParams p = NetworkParams::zeros_like(spec);
    Rng rng(seed);
    for (std::size_t l = 0; l < p.weights.size(); ++l) {
        const double fan_in = static_cast<double>(spec.layer_dims[l]);
        const double fan_out = static_cast<double>(spec.layer_dims[l + 1]);
        const double bound = std::sqrt(6.0 / (fan_in + fan_out));
        Matrix& w = p.weights[l];
        for (std::size_t i = 0; i < w.size(); ++i) w.data()[i] = rng.uniform(-bound, bound);
        // biases stay zero
    }
    return p;
}

static void apply_activation(Matrix& z, Activation a) {
    switch (a) {
        case Activation::Identity:
            return;
        case Activation::Relu:
            for (std::size_t i = 0; i < z.size(); ++i)
                if (z.data()[i] < 0.0) z.data()[i] = 0.0;
            return;
        case Activation::Sigmoid:
            for (std::size_t i = 0; i < z.size(); ++i)
                z.data()[i] = 1.0 / (1.0 + std::exp(-z.data()[i]));
            return;
        case Activation::Softmax:
            for (std::size_t r = 0; r < z.rows(); ++r) {
                double* row = z.row(r);
                double mx = row[0];
                for (std::size_t j = 1; j < z.cols(); ++j) mx = std::max(mx, row[j]);
                double sum = 0.0;
                for (std::size_t j = 0; j < z.cols(); ++j) {
                    row[j] = std::exp(row[j] - mx);
                    sum += row[j];
                }
                for (std::size_t j = 0; j < z.cols(); ++j) row[j] /= sum;
            }
            return;
    }
}

std::vector<Matrix> forward(const NetworkSpec& spec, const NetworkParams& params,
                            const Matrix& batch) {
    if (batch.cols() != spec.input_dim())
        throw DataError("forward: batch width does not match input dim");
    std::vector<Matrix> acts;
    acts.reserve(spec.depth() + 1);
    acts.push_back(batch);
    for (std::size_t l = 0; l < spec.depth(); ++l) {
        Matrix z = matmul_a_bt(acts.back(), params.weights[l]);
        add_row_vector(z, params.biases[l]);
        apply_activation(z, spec.activations[l]);
        acts.push_back(std::move(z));
    }
    return acts;
}

BackwardResult backward(const NetworkSpec& spec, const NetworkParams& params,
                        const std::vector<Matrix>& activations, const Matrix& output_grad) {
    if (activations.size() != spec.depth() + 1)
        throw DataError("backward: activation stack does not match spec depth");
    BackwardResult res;
    res.param_grads = NetworkParams::zeros_like(spec);
    Matrix grad = output_grad;  // dL/d(post-activation) of the current layer
    for (std::size_t li = spec.depth(); li-- > 0;) {
        const Matrix& post = activations[li + 1];
        Matrix dz(grad.rows(), grad.cols());
        switch (spec.activations[li]) {
            case Activation::Identity:
                dz = grad;
                break;
            case Activation::Relu:
                for (std::size_t i = 0; i < dz.size(); ++i)
                    dz.data()[i] = post.data()[i] > 0.0 ? grad.data()[i] : 0.0;
                break;
            case Activation::Sigmoid:
                for (std::size_t i = 0; i < dz.size(); ++i) {
                    const double p = post.data()[i];
                    dz.data()[i] = grad.data()[i] * p * (1.0 - p);
                }
                break;
            case Activation::Softmax:
                // Row-wise Jacobian-vector product: dz = p .* (g - (g . p)).
                for (std::size_t r = 0; r < dz.rows(); ++r) {
                    const double* p = post.row(r);
                    const double* g = grad.row(r);
                    double dot = 0.0;
                    for (std::size_t j = 0; j < dz.cols(); ++j) dot += g[j] * p[j];
                    double* out = dz.row(r);
                    for (std::size_t j = 0; j < dz.cols(); ++j) out[j] = p[j] * (g[j] - dot);
                }
                break;
        }
        res.param_grads.weights[li] = matmul_at_b(dz, activations[li]);
        res.param_grads.biases[li] = col_sums(dz);
        grad = matmul(dz, params.weights[li]);
    }
    res.input_grad = std::move(grad);
    return res;
}

AdamState AdamState::for_spec(const NetworkSpec& spec, double learning_rate) {
    AdamState s;
    s.m = NetworkParams::zeros_like(spec);
    s.v = NetworkParams::zeros_like(spec);
    s.learning_rate = learning_rate;
    return s;
}

void adam_step_inplace(NetworkParams& params, const NetworkParams& grads, AdamState& state) {
    state.t += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
    auto update = [&](double* theta, double* m, double* v, const double* g, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) {
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            theta[i] -= state.learning_rate * mhat / (std::sqrt(vhat) + state.epsilon);
        }
    };
    for (std::size_t l = 0; l < params.weights.size(); ++l) {
        update(params.weights[l].data(), state.m.weights[l].data(), state.v.weights[l].data(),
               grads.weights[l].data(), params.weights[l].size());
        update(params.biases[l].data(), state.m.biases[l].data(), state.v.biases[l].data(),
               grads.biases[l].data(), params.biases[l].size());
    }
}

std::pair<NetworkParams, AdamState> adam_step(const NetworkParams& params,
                                              const NetworkParams& grads,
                                              const AdamState& state) {
    NetworkParams p = params;
    AdamState s = state;
    adam_step_inplace(p, grads, s);
    return {std::move(p), std::move(s)};
}

double grad_check(const NetworkSpec& spec, const NetworkParams& params, const Matrix& batch,
                  const LossFn& loss) {
    const double h = 1e-5;
    auto acts = forward(spec, params, batch);
    auto [loss0, out_grad] = loss(acts.back());
    (void)loss0;
    BackwardResult analytic = backward(spec, params, acts, out_grad);

    NetworkParams probe = params;
    auto eval = [&]() {
        auto a = forward(spec, probe, batch);
        return loss(a.back()).first;
    };

    const std::size_t total = params.parameter_count();
    // Check every coordinate for small nets, strided sampling for big ones.
    const std::size_t stride = total <= 4096 ? 1 : total / 1024;
    double max_rel = 0.0;
    std::size_t flat = 0;
    auto probe_array = [&](double* p, const double* g, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i, ++flat) {
            if (flat % stride != 0) continue;
            const double orig = p[i];
            p[i] = orig + h;
            const double lp = eval();
            p[i] = orig - h;
            const double lm = eval();
            p[i] = orig;
            const double numeric = (lp - lm) / (2.0 * h);
            const double denom = std::max({std::abs(numeric), std::abs(g[i]), 1e-6});
            max_rel = std::max(max_rel, std::abs(numeric - g[i]) / denom);
        }
    };
    for (std::size_t l = 0; l < probe.weights.size(); ++l) {
        probe_array(probe.weights[l].data(), analytic.param_grads.weights[l].data(),
                    probe.weights[l].size());
        probe_array(probe.biases[l].data(), analytic.param_grads.biases[l].data(),
                    probe.biases[l].size());
    }
    return max_rel;
}

std::pair<double, Matrix> squared_error_loss(const Matrix& output, const Matrix& target) {
    if (output.rows() != target.rows() || output.cols() != target.cols())
        throw DataError("squared_error_loss: shape mismatch");
    double total = 0.0;
    Matrix grad(output.rows(), output.cols());
    for (std::size_t i = 0; i < output.size(); ++i) {
        const double diff = output.data()[i] - target.data()[i];
        total += diff * diff;
        grad.data()[i] = 2.0 * diff;
    }
    return {total, std::move(grad)};
}

std::pair<double, Matrix> cross_entropy_loss(const Matrix& probs, const std::vector<int>& labels) {
    if (probs.rows() != labels.size()) throw DataError("cross_entropy_loss: label count mismatch");
    double total = 0.0;
    Matrix grad(probs.rows(), probs.cols());
    const double tiny = 1e-300;
    for (std::size_t i = 0; i < probs.rows(); ++i) {
        const int y = labels[i];
        if (y < 0 || static_cast<std::size_t>(y) >= probs.cols())
            throw DataError("cross_entropy_loss: label out of range");
        const double p = std::max(probs(i, static_cast<std::size_t>(y)), tiny);
        total += -std::log(p);
        grad(i, static_cast<std::size_t>(y)) = -1.0 / p;
    }
    return {total, std::move(grad)};
}

Matrix one_hot(const std::vector<int>& labels, std::size_t num_classes) {
    Matrix m(labels.size(), num_classes);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= num_classes)
            throw DataError("one_hot: label out of range");
        m(i, static_cast<std::size_t>(labels[i])) = 1.0;
    }
    return m;
}

TrainResult train_minibatch(const NetworkSpec& spec, const Matrix& x, const BatchLossFn& loss,
                            const TrainOptions& opts) {
    spec.validate();
    if (opts.epochs == 0 || opts.batch_size == 0)
        throw ConfigError("train_minibatch: epochs and batch_size must be positive");
    if (x.rows() == 0) throw DataError("train_minibatch: empty batch");

    TrainResult res;
    res.params = init_params(spec, derive_seed(opts.seed, 0));
    AdamState adam = AdamState::for_spec(spec, opts.learning_rate);
    Rng shuffle_rng(derive_seed(opts.seed, 1));

    std::vector<std::size_t> order(x.rows());
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (std::size_t epoch = 0; epoch < opts.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += opts.batch_size) {
            const std::size_t stop = std::min(order.size(), start + opts.batch_size);
            std::vector<std::size_t> rows(order.begin() + static_cast<std::ptrdiff_t>(start),
                                          order.begin() + static_cast<std::ptrdiff_t>(stop));
            Matrix bx = take_rows(x, rows);
            auto acts = forward(spec, res.params, bx);
            auto [sum, grad] = loss(acts.back(), rows);
            if (!std::isfinite(sum))
                throw DataError("train_minibatch: non-finite loss at epoch " +
                                std::to_string(epoch));
            epoch_loss += sum;
            // Mean loss per batch: scale the gradient by 1/|batch|.
            const double inv = 1.0 / static_cast<double>(rows.size());
            for (std::size_t i = 0; i < grad.size(); ++i) grad.data()[i] *= inv;
            BackwardResult back = backward(spec, res.params, acts, grad);
            adam_step_inplace(res.params, back.param_grads, adam);
        }
        res.loss_trace.push_back(epoch_loss / static_cast<double>(x.rows()));
    }
    return res;
}

}  // namespace aealt::nn

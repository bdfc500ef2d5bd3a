#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "aealt/matrix.hpp"

namespace aealt::nn {

enum class Activation { Relu, Identity, Sigmoid, Softmax };

Activation activation_from_string(std::string_view s);
std::string to_string(Activation a);

// Feed-forward architecture: layer_dims = {input, hidden..., output} and one
// activation per weighted layer. Softmax is only legal as the last layer's
// activation.
struct NetworkSpec {
    std::vector<std::size_t> layer_dims;
    std::vector<Activation> activations;

    std::size_t depth() const { return activations.size(); }
    std::size_t input_dim() const { return layer_dims.front(); }
    std::size_t output_dim() const { return layer_dims.back(); }
    void validate() const;  // throws ConfigError

    bool operator==(const NetworkSpec&) const = default;
};

struct NetworkParams {
    std::vector<Matrix> weights;  // weights[l] is layer_dims[l+1] x layer_dims[l]
    std::vector<Vector> biases;   // biases[l] has layer_dims[l+1] entries

    static NetworkParams zeros_like(const NetworkSpec& spec);
    std::size_t parameter_count() const;
};

// Glorot-uniform weights (bound sqrt(6/(fan_in+fan_out))), zero biases.
// Draw order is fixed: layer by layer, weight entries in row-major order.
NetworkParams init_params(const NetworkSpec& spec, std::uint64_t seed);

// Returns every layer's activation values, with the input batch at index 0
// and the network output at index depth().
std::vector<Matrix> forward(const NetworkSpec& spec, const NetworkParams& params,
                            const Matrix& batch);

struct BackwardResult {
    NetworkParams param_grads;
    Matrix input_grad;
};

// activations must come from forward() on the same spec/params.
// output_grad is dLoss/dOutput for the batch.
BackwardResult backward(const NetworkSpec& spec, const NetworkParams& params,
                        const std::vector<Matrix>& activations, const Matrix& output_grad);

struct AdamState {
    NetworkParams m, v;
    long t = 0;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    static AdamState for_spec(const NetworkSpec& spec, double learning_rate);
};

// Pure version (returns updated copies) and the in-place fast path used by
// the trainers. Both apply the standard bias-corrected Adam update.
std::pair<NetworkParams, AdamState> adam_step(const NetworkParams& params,
                                              const NetworkParams& grads,
                                              const AdamState& state);
void adam_step_inplace(NetworkParams& params, const NetworkParams& grads, AdamState& state);

// Loss adapter: maps a network output batch to (total loss, dLoss/dOutput).
using LossFn = std::function<std::pair<double, Matrix>(const Matrix& output)>;

// Central finite differences (h = 1e-5) against backward() over every
// parameter; returns the maximum relative error.
double grad_check(const NetworkSpec& spec, const NetworkParams& params, const Matrix& batch,
                  const LossFn& loss);

// Loss building blocks. Both return the SUM over the batch (callers divide
// by batch size where a mean is wanted) and the gradient wrt the output.
std::pair<double, Matrix> squared_error_loss(const Matrix& output, const Matrix& target);
std::pair<double, Matrix> cross_entropy_loss(const Matrix& probs, const std::vector<int>& labels);

Matrix one_hot(const std::vector<int>& labels, std::size_t num_classes);

struct TrainOptions {
    std::size_t epochs = 100;
    std::size_t batch_size = 64;
    double learning_rate = 1e-3;
    std::uint64_t seed = 0;
};

// Generic minibatch Adam trainer for a single network. loss receives the
// output for the rows listed in `rows` (indices into x), returns (sum, grad).
using BatchLossFn =
    std::function<std::pair<double, Matrix>(const Matrix& output, const std::vector<std::size_t>& rows)>;

struct TrainResult {
    NetworkParams params;
    Vector loss_trace;  // per-epoch mean loss
};

TrainResult train_minibatch(const NetworkSpec& spec, const Matrix& x, const BatchLossFn& loss,
                            const TrainOptions& opts);

}  // namespace aealt::nn

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "aealt/dataset.hpp"
#include "aealt/matrix.hpp"
#include "aealt/nn.hpp"

namespace aealt::factor {

enum class ReducerKind { Aealt, VanillaAe, Pca, Identity };

ReducerKind reducer_from_string(const std::string& s);
std::string to_string(ReducerKind k);
// Table-facing names: AEALT, AE (vanilla autoencoder), PCA, Vanilla (raw
// embeddings, no reduction).
std::string reducer_display_name(ReducerKind k);

struct FactorConfig {
    ReducerKind kind = ReducerKind::Aealt;
    std::size_t latent_dim = 2;
    double lambda = 0.5;
    data::Task task = data::Task::Classification;
    std::size_t num_classes = 2;  // predictor head width for classification/anomaly

    nn::NetworkSpec encoder, decoder, predictor;

    std::size_t epochs = 100;
    std::size_t batch_size = 64;
    double learning_rate = 1e-3;
    std::uint64_t seed = 0;

    // Default architecture: encoder d->hidden->k, decoder k->hidden->d,
    // predictor k->32->output; relu hidden layers, identity bottleneck.
    static FactorConfig defaults(ReducerKind kind, std::size_t input_dim,
                                 std::size_t latent_dim, data::Task task,
                                 std::size_t num_classes,
                                 const std::vector<std::size_t>& hidden = {256},
                                 const std::vector<std::size_t>& predictor_hidden = {32});

    // Rebuilds the bottleneck width (adjusts all three specs).
    FactorConfig with_latent_dim(std::size_t k) const;

    void validate(std::size_t input_dim) const;
};

struct FactorModel {
    ReducerKind kind = ReducerKind::Identity;
    std::size_t input_dim = 0;
    std::size_t latent_dim = 0;

    // aealt / vanilla_ae
    nn::NetworkParams encoder, decoder, predictor;
    bool has_predictor = false;

    // pca
    Matrix components;   // k x d, orthonormal rows
    Vector mean;         // d
    Vector eigenvalues;  // descending, length k

    Vector loss_trace;  // per-epoch, monotone-smoothed (running minimum)
    FactorConfig config;
};

struct CompositeLoss {
    double total = 0.0;  // (1-lambda)*reconstruction + lambda*supervised
    double reconstruction = 0.0;
    double supervised = 0.0;
};

// Network parameters of an autoencoder under training.
struct AealtParams {
    nn::NetworkParams encoder, decoder, predictor;
    bool has_predictor = false;
};

// Targets for one batch; exactly one member is used depending on the task.
struct BatchTargets {
    const std::vector<int>* labels = nullptr;
    const Vector* values = nullptr;
};

// Loss sums over the batch per the training objective; the trainer divides
// by batch size internally.
CompositeLoss composite_loss(const FactorConfig& config, const AealtParams& params,
                             const Matrix& batch_x, const BatchTargets& batch_y);

FactorModel train_factor_model(const data::LabeledDataset& train, const FactorConfig& config);

Matrix encode(const FactorModel& model, const Matrix& x);
Matrix reconstruct(const FactorModel& model, const Matrix& factors);
Matrix predict_head(const FactorModel& model, const Matrix& factors);

FactorModel fit_pca(const Matrix& x, std::size_t k);

// Trains one model per candidate k on an inner 80/20 split of `train` and
// returns the candidate with the best validation metric (accuracy for
// classification/anomaly, MSE for regression); ties go to the smaller k.
std::size_t select_latent_dim(const data::LabeledDataset& train,
                              const std::vector<std::size_t>& candidates,
                              const FactorConfig& config);

}  // namespace aealt::factor

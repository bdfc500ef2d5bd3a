#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "aealt/dataset.hpp"
#include "aealt/matrix.hpp"
#include "aealt/nn.hpp"

namespace aealt::downstream {

enum class LearnerKind { Logistic, MlpClassifier, MlpRegressor, Lasso, IForest };

std::string to_string(LearnerKind k);
// Table-facing names: Logistic, MLP, LASSO, IForest.
std::string learner_display_name(LearnerKind k);

struct LogisticConfig {
    double l2 = 0.0;
    std::size_t epochs = 500;
    double learning_rate = 0.5;
    std::uint64_t seed = 0;  // kept for interface uniformity; fit is deterministic
};

struct LassoConfig {
    double l1 = 0.0;
    std::size_t max_iters = 10000;
    double tol = 1e-7;
};

struct MlpConfig {
    std::vector<std::size_t> hidden = {32};
    std::size_t epochs = 200;
    std::size_t batch_size = 64;
    double learning_rate = 1e-3;
    std::uint64_t seed = 0;
};

struct IForestConfig {
    std::size_t n_trees = 100;
    std::size_t subsample = 256;
    std::uint64_t seed = 0;
};

struct IsolationNode {
    int feature = -1;  // -1 marks a leaf
    double split = 0.0;
    int left = -1, right = -1;
    std::size_t size = 0;  // leaf sample count
};

struct IsolationTree {
    std::vector<IsolationNode> nodes;  // node 0 is the root
};

struct DownstreamModel {
    LearnerKind kind = LearnerKind::Logistic;
    std::size_t input_dim = 0;
    std::size_t num_classes = 0;  // classifiers

    // logistic: softmax regression weights (c x k) and bias
    Matrix linear_weights;
    Vector linear_bias;

    // mlp
    nn::NetworkSpec mlp_spec;
    nn::NetworkParams mlp_params;

    // lasso: coefficients in the internally standardized design, plus the
    // standardization statistics and the (unpenalized) intercept = mean(y)
    Vector lasso_weights;
    Vector lasso_mean, lasso_scale;
    double lasso_intercept = 0.0;

    // iforest
    std::vector<IsolationTree> trees;
    std::size_t subsample_size = 0;
};

// Softmax regression by full-batch gradient descent (deterministic).
DownstreamModel fit_logistic(const Matrix& x, const std::vector<int>& labels,
                             std::size_t num_classes, const LogisticConfig& config);

// Cyclic coordinate descent with soft-thresholding on the standardized
// design; objective (1/2n)||y - Xw - b||^2 + l1*||w||_1, intercept free.
DownstreamModel fit_lasso(const Matrix& x, const Vector& targets, const LassoConfig& config);

DownstreamModel fit_mlp_classifier(const Matrix& x, const std::vector<int>& labels,
                                   std::size_t num_classes, const MlpConfig& config);
DownstreamModel fit_mlp_regressor(const Matrix& x, const Vector& targets,
                                  const MlpConfig& config);

DownstreamModel fit_iforest(const Matrix& x, const IForestConfig& config);

// Class probabilities (n x c), regression values (n x 1), or anomaly scores
// (n x 1) depending on the learner kind.
Matrix predict(const DownstreamModel& model, const Matrix& x);

// Average path length c(m) of an unsuccessful BST search — the isolation
// forest score normalizer. Exposed for tests.
double average_path_length(std::size_t m);

}  // namespace aealt::downstream

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "aealt/matrix.hpp"

namespace aealt::data {

enum class Task { Classification, Regression, Anomaly };

Task task_from_string(const std::string& s);
std::string to_string(Task t);

struct EmbeddingMatrix {
    std::vector<std::string> ids;
    Matrix values;

    std::size_t size() const { return values.rows(); }
    std::size_t dim() const { return values.cols(); }
    void validate() const;  // finite values, unique non-empty ids, d > 0
};

struct LabeledDataset {
    EmbeddingMatrix embeddings;
    Task task = Task::Classification;
    std::vector<int> labels;  // classification / anomaly
    Vector targets;           // regression
    std::size_t num_classes = 0;

    std::size_t size() const { return embeddings.size(); }
    std::size_t dim() const { return embeddings.dim(); }
    void validate() const;  // shape agreement + dense labels in [0, c)
};

enum class FileFormat { Csv, Binary };
FileFormat format_from_string(const std::string& s);

EmbeddingMatrix load_embeddings(const std::string& path, FileFormat format);
void save_embeddings(const EmbeddingMatrix& m, const std::string& path, FileFormat format);

// Labels csv has columns id,target; ids must match the embeddings exactly
// (missing or extra ids are errors). Values are parsed per task.
LabeledDataset attach_labels(EmbeddingMatrix embeddings, const std::string& labels_path,
                             Task task);
void save_labels(const LabeledDataset& ds, const std::string& path);

LabeledDataset subset(const LabeledDataset& ds, const std::vector<std::size_t>& indices);

struct SplitResult {
    LabeledDataset train, test;
    std::vector<std::size_t> train_indices, test_indices;  // ascending
};

// Train size = round-half-up(fraction * n). Stratified allocation uses
// largest-remainder quotas per class and requires >= 2 members per class.
SplitResult split_dataset(const LabeledDataset& ds, double train_fraction, std::uint64_t seed,
                          bool stratified);

struct StandardScaler {
    Vector mean;
    Vector scale;                // population std; 1.0 where constant
    std::vector<bool> constant;  // flagged zero-variance columns
};

StandardScaler fit_scaler(const Matrix& train);
Matrix apply_scaler(const StandardScaler& s, const Matrix& m);
Matrix invert_scaler(const StandardScaler& s, const Matrix& m);

enum class Nonlinearity { Linear, Tanh, Quadratic };
Nonlinearity nonlinearity_from_string(const std::string& s);
std::string to_string(Nonlinearity g);

enum class LoadingKind { Gaussian, Identity, Grouped };
LoadingKind loading_from_string(const std::string& s);
std::string to_string(LoadingKind k);

struct SyntheticSpec {
    std::size_t n = 1000;
    std::size_t d = 16;
    std::size_t r = 4;  // true factor count
    Task task = Task::Classification;
    double noise_sigma = 0.1;
    Nonlinearity nonlinearity = Nonlinearity::Linear;
    std::vector<std::size_t> predictive = {0};  // subset of [0, r)
    std::uint64_t seed = 0;

    // Loading-matrix construction. "gaussian" draws A ~ N(0, 1/r) i.i.d.;
    // "identity" sets A = I (requires d >= r); "grouped" dedicates
    // signal_rows embedding rows to the predictive factors (entries
    // +-signal_scale*U(0.8,1.2)) and spreads the rest round-robin over the
    // remaining factors at background_scale. Grouped construction lets tests
    // control how much linear variance the predictive factors carry.
    LoadingKind loading = LoadingKind::Gaussian;
    std::size_t signal_rows = 0;
    double signal_scale = 1.0;
    double background_scale = 1.0;

    double anomaly_fraction = 0.05;  // anomaly task only

    void validate() const;
};

struct SyntheticData {
    LabeledDataset dataset;
    Matrix factors;  // true n×r factor draws
    Matrix loading;  // d×r loading matrix actually used
};

// X = g(F A^T) + sigma*E with F, E standard normal. Classification labels
// are 1[sum of predictive factors > 0]; anomaly labels use the upper
// anomaly_fraction quantile of that sum; regression targets add 0.1*noise.
SyntheticData generate_synthetic(const SyntheticSpec& spec);

}  // namespace aealt::data

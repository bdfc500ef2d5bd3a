#include "aealt/downstream.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <unordered_set>

#include "aealt/errors.hpp"
#include "aealt/rng.hpp"

namespace aealt::downstream {

std::string to_string(LearnerKind k) {
    switch (k) {
        case LearnerKind::Logistic: return "logistic";
        case LearnerKind::MlpClassifier: return "mlp_classifier";
        case LearnerKind::MlpRegressor: return "mlp_regressor";
        case LearnerKind::Lasso: return "lasso";
        case LearnerKind::IForest: return "iforest";
    }
    return "?";
}

std::string learner_display_name(LearnerKind k) {
    switch (k) {
        case LearnerKind::Logistic: return "Logistic";
        case LearnerKind::MlpClassifier:
        case LearnerKind::MlpRegressor: return "MLP";
        case LearnerKind::Lasso: return "LASSO";
        case LearnerKind::IForest: return "IForest";
    }
    return "?";
}

namespace {

void softmax_rows(Matrix& z) {
    for (std::size_t i = 0; i < z.rows(); ++i) {
        double* row = z.row(i);
        double mx = row[0];
        for (std::size_t j = 1; j < z.cols(); ++j) mx = std::max(mx, row[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < z.cols(); ++j) {
            row[j] = std::exp(row[j] - mx);
            sum += row[j];
        }
        for (std::size_t j = 0; j < z.cols(); ++j) row[j] /= sum;
    }
}

void check_labels(const Matrix& x, const std::vector<int>& labels, std::size_t num_classes) {
    if (labels.size() != x.rows()) throw DataError("label count does not match rows");
    if (x.rows() == 0) throw DataError("empty training set");
    if (num_classes < 2) throw ConfigError("need at least 2 classes");
    for (int y : labels)
        if (y < 0 || static_cast<std::size_t>(y) >= num_classes)
            throw DataError("label out of range");
}

}  // namespace

DownstreamModel fit_logistic(const Matrix& x, const std::vector<int>& labels,
                             std::size_t num_classes, const LogisticConfig& config) {
    check_labels(x, labels, num_classes);
    std::unordered_set<int> distinct(labels.begin(), labels.end());
    if (distinct.size() < 2) throw DataError("fit_logistic: single-class training data");
    if (config.l2 < 0.0) throw ConfigError("fit_logistic: l2 must be >= 0");

    const std::size_t n = x.rows(), k = x.cols(), c = num_classes;
    DownstreamModel m;
    m.kind = LearnerKind::Logistic;
    m.input_dim = k;
    m.num_classes = c;
    m.linear_weights = Matrix(c, k);
    m.linear_bias.assign(c, 0.0);

    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        Matrix p = matmul_a_bt(x, m.linear_weights);
        add_row_vector(p, m.linear_bias);
        softmax_rows(p);
        // G = (P - Y) / n
        for (std::size_t i = 0; i < n; ++i) p(i, static_cast<std::size_t>(labels[i])) -= 1.0;
        for (std::size_t i = 0; i < p.size(); ++i) p.data()[i] *= inv_n;
        Matrix gw = matmul_at_b(p, x);
        Vector gb = col_sums(p);
        for (std::size_t i = 0; i < gw.size(); ++i)
            gw.data()[i] += config.l2 * m.linear_weights.data()[i];
        for (std::size_t i = 0; i < gw.size(); ++i)
            m.linear_weights.data()[i] -= config.learning_rate * gw.data()[i];
        for (std::size_t j = 0; j < c; ++j) m.linear_bias[j] -= config.learning_rate * gb[j];
    }
    return m;
}

DownstreamModel fit_lasso(const Matrix& x, const Vector& targets, const LassoConfig& config) {
    if (targets.size() != x.rows()) throw DataError("fit_lasso: target count mismatch");
    if (x.rows() == 0) throw DataError("fit_lasso: empty training set");
    if (!all_finite(targets)) throw DataError("fit_lasso: non-finite target");
    if (!all_finite(x)) throw DataError("fit_lasso: non-finite design entry");
    if (config.l1 < 0.0) throw ConfigError("fit_lasso: l1 must be >= 0");
    if (config.tol <= 0.0) throw ConfigError("fit_lasso: tol must be > 0");

    const std::size_t n = x.rows(), p = x.cols();
    DownstreamModel m;
    m.kind = LearnerKind::Lasso;
    m.input_dim = p;

    // Standardize columns (population std); constant columns get scale 1 and
    // a permanently-zero coefficient.
    m.lasso_mean = col_means(x);
    m.lasso_scale.assign(p, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < p; ++j) {
            const double d = x(i, j) - m.lasso_mean[j];
            m.lasso_scale[j] += d * d;
        }
    std::vector<bool> constant(p, false);
    for (std::size_t j = 0; j < p; ++j) {
        double s = std::sqrt(m.lasso_scale[j] / static_cast<double>(n));
        if (s <= 1e-12 * std::max(1.0, std::abs(m.lasso_mean[j]))) {
            constant[j] = true;
            s = 1.0;
        }
        m.lasso_scale[j] = s;
    }
    Matrix xs(n, p);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < p; ++j)
            xs(i, j) = (x(i, j) - m.lasso_mean[j]) / m.lasso_scale[j];

    double ybar = 0.0;
    for (double y : targets) ybar += y;
    ybar /= static_cast<double>(n);
    m.lasso_intercept = ybar;

    // nu_j = (1/n) sum xs_ij^2 (1 for standardized columns, 0 for constant).
    Vector nu(p, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < p; ++j) nu[j] += xs(i, j) * xs(i, j);
    for (std::size_t j = 0; j < p; ++j) nu[j] /= static_cast<double>(n);

    m.lasso_weights.assign(p, 0.0);
    Vector resid(n);
    for (std::size_t i = 0; i < n; ++i) resid[i] = targets[i] - ybar;

    auto soft = [](double z, double g) {
        if (z > g) return z - g;
        if (z < -g) return z + g;
        return 0.0;
    };

    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t sweep = 0; sweep < config.max_iters; ++sweep) {
        double max_delta = 0.0;
        for (std::size_t j = 0; j < p; ++j) {
            if (constant[j] || nu[j] == 0.0) continue;
            double rho = 0.0;
            for (std::size_t i = 0; i < n; ++i) rho += xs(i, j) * resid[i];
            rho = rho * inv_n + nu[j] * m.lasso_weights[j];
            const double w_new = soft(rho, config.l1) / nu[j];
            const double delta = w_new - m.lasso_weights[j];
            if (delta != 0.0) {
                for (std::size_t i = 0; i < n; ++i) resid[i] -= xs(i, j) * delta;
                m.lasso_weights[j] = w_new;
            }
            max_delta = std::max(max_delta, std::abs(delta));
        }
        if (max_delta < config.tol) break;
    }
    if (!all_finite(m.lasso_weights)) throw DataError("fit_lasso: diverged");
    return m;
}

namespace {

DownstreamModel fit_mlp(const Matrix& x, const nn::BatchLossFn& loss, std::size_t out_dim,
                        nn::Activation out_act, const MlpConfig& config, LearnerKind kind) {
    if (x.rows() == 0) throw DataError("fit_mlp: empty training set");
    nn::NetworkSpec spec;
    spec.layer_dims.push_back(x.cols());
    for (std::size_t h : config.hidden) {
        spec.layer_dims.push_back(h);
        spec.activations.push_back(nn::Activation::Relu);
    }
    spec.layer_dims.push_back(out_dim);
    spec.activations.push_back(out_act);

    nn::TrainOptions opts;
    opts.epochs = config.epochs;
    opts.batch_size = config.batch_size;
    opts.learning_rate = config.learning_rate;
    opts.seed = config.seed;
    auto trained = nn::train_minibatch(spec, x, loss, opts);

    DownstreamModel m;
    m.kind = kind;
    m.input_dim = x.cols();
    m.mlp_spec = std::move(spec);
    m.mlp_params = std::move(trained.params);
    return m;
}

}  // namespace

DownstreamModel fit_mlp_classifier(const Matrix& x, const std::vector<int>& labels,
                                   std::size_t num_classes, const MlpConfig& config) {
    check_labels(x, labels, num_classes);
    auto loss = [&labels](const Matrix& out, const std::vector<std::size_t>& rows) {
        std::vector<int> batch;
        batch.reserve(rows.size());
        for (std::size_t i : rows) batch.push_back(labels[i]);
        return nn::cross_entropy_loss(out, batch);
    };
    DownstreamModel m = fit_mlp(x, loss, num_classes, nn::Activation::Softmax, config,
                                LearnerKind::MlpClassifier);
    m.num_classes = num_classes;
    return m;
}

DownstreamModel fit_mlp_regressor(const Matrix& x, const Vector& targets,
                                  const MlpConfig& config) {
    if (targets.size() != x.rows()) throw DataError("fit_mlp_regressor: target count mismatch");
    if (!all_finite(targets)) throw DataError("fit_mlp_regressor: non-finite target");
    auto loss = [&targets](const Matrix& out, const std::vector<std::size_t>& rows) {
        Matrix t(rows.size(), 1);
        for (std::size_t i = 0; i < rows.size(); ++i) t(i, 0) = targets[rows[i]];
        return nn::squared_error_loss(out, t);
    };
    return fit_mlp(x, loss, 1, nn::Activation::Identity, config, LearnerKind::MlpRegressor);
}

double average_path_length(std::size_t m) {
    if (m <= 1) return 0.0;
    if (m == 2) return 1.0;
    const double dm = static_cast<double>(m);
    const double euler_gamma = 0.5772156649015329;
    return 2.0 * (std::log(dm - 1.0) + euler_gamma) - 2.0 * (dm - 1.0) / dm;
}

namespace {

struct TreeBuilder {
    const Matrix& x;
    IsolationTree& tree;
    Rng& rng;
    std::size_t depth_limit;

    int build(std::vector<std::size_t>& rows, std::size_t depth) {
        const int node_id = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        if (rows.size() <= 1 || depth >= depth_limit) {
            tree.nodes[static_cast<std::size_t>(node_id)].size = rows.size();
            return node_id;
        }
        // Features with spread at this node.
        std::vector<std::size_t> eligible;
        for (std::size_t j = 0; j < x.cols(); ++j) {
            double lo = x(rows[0], j), hi = lo;
            for (std::size_t i : rows) {
                lo = std::min(lo, x(i, j));
                hi = std::max(hi, x(i, j));
            }
            if (hi > lo) eligible.push_back(j);
        }
        if (eligible.empty()) {
            tree.nodes[static_cast<std::size_t>(node_id)].size = rows.size();
            return node_id;
        }
        const std::size_t feature = eligible[rng.index(eligible.size())];
        double lo = x(rows[0], feature), hi = lo;
        for (std::size_t i : rows) {
            lo = std::min(lo, x(i, feature));
            hi = std::max(hi, x(i, feature));
        }
        double split;
        do {
            split = rng.uniform(lo, hi);
        } while (!(split > lo && split < hi));  // strictly inside => non-empty children

        std::vector<std::size_t> left, right;
        for (std::size_t i : rows) (x(i, feature) < split ? left : right).push_back(i);
        rows.clear();
        rows.shrink_to_fit();

        const int l = build(left, depth + 1);
        const int r = build(right, depth + 1);
        IsolationNode& node = tree.nodes[static_cast<std::size_t>(node_id)];
        node.feature = static_cast<int>(feature);
        node.split = split;
        node.left = l;
        node.right = r;
        return node_id;
    }
};

double path_length(const IsolationTree& tree, const Matrix& x, std::size_t row) {
    std::size_t node = 0;
    double depth = 0.0;
    while (tree.nodes[node].feature >= 0) {
        const IsolationNode& nd = tree.nodes[node];
        node = static_cast<std::size_t>(
            x(row, static_cast<std::size_t>(nd.feature)) < nd.split ? nd.left : nd.right);
        depth += 1.0;
    }
    return depth + average_path_length(tree.nodes[node].size);
}

}  // namespace

DownstreamModel fit_iforest(const Matrix& x, const IForestConfig& config) {
    if (x.rows() < 2) throw DataError("fit_iforest: need at least 2 rows");
    if (config.n_trees == 0) throw ConfigError("fit_iforest: n_trees must be >= 1");
    if (config.subsample < 2) throw ConfigError("fit_iforest: subsample must be >= 2");
    std::size_t m = config.subsample;
    if (m > x.rows()) {
        std::cerr << "warning: iforest subsample " << m << " clamped to n=" << x.rows() << "\n";
        m = x.rows();
    }

    DownstreamModel model;
    model.kind = LearnerKind::IForest;
    model.input_dim = x.cols();
    model.subsample_size = m;
    const std::size_t depth_limit =
        static_cast<std::size_t>(std::ceil(std::log2(static_cast<double>(m))));

    for (std::size_t t = 0; t < config.n_trees; ++t) {
        Rng rng(derive_seed(config.seed, t));
        std::vector<std::size_t> rows;
        if (m == x.rows()) {
            rows.resize(x.rows());
            std::iota(rows.begin(), rows.end(), std::size_t{0});
        } else {
            // Partial Fisher-Yates: first m entries are a uniform subsample.
            std::vector<std::size_t> pool(x.rows());
            std::iota(pool.begin(), pool.end(), std::size_t{0});
            for (std::size_t i = 0; i < m; ++i)
                std::swap(pool[i], pool[i + rng.index(pool.size() - i)]);
            rows.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(m));
        }
        model.trees.emplace_back();
        TreeBuilder builder{x, model.trees.back(), rng, depth_limit};
        builder.build(rows, 0);
    }
    return model;
}

Matrix predict(const DownstreamModel& model, const Matrix& x) {
    if (x.cols() != model.input_dim) throw DataError("predict: input dim mismatch");
    switch (model.kind) {
        case LearnerKind::Logistic: {
            Matrix p = matmul_a_bt(x, model.linear_weights);
            add_row_vector(p, model.linear_bias);
            softmax_rows(p);
            return p;
        }
        case LearnerKind::MlpClassifier:
        case LearnerKind::MlpRegressor:
            return nn::forward(model.mlp_spec, model.mlp_params, x).back();
        case LearnerKind::Lasso: {
            Matrix out(x.rows(), 1);
            for (std::size_t i = 0; i < x.rows(); ++i) {
                double v = model.lasso_intercept;
                for (std::size_t j = 0; j < x.cols(); ++j)
                    v += model.lasso_weights[j] * (x(i, j) - model.lasso_mean[j]) /
                         model.lasso_scale[j];
                out(i, 0) = v;
            }
            return out;
        }
        case LearnerKind::IForest: {
            Matrix out(x.rows(), 1);
            const double norm = average_path_length(model.subsample_size);
            for (std::size_t i = 0; i < x.rows(); ++i) {
                double h = 0.0;
                for (const auto& tree : model.trees) h += path_length(tree, x, i);
                h /= static_cast<double>(model.trees.size());
                out(i, 0) = std::pow(2.0, -h / norm);
            }
            return out;
        }
    }
    throw ConfigError("unreachable learner kind");
}

}  // namespace aealt::downstream

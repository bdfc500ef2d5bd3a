// Release gate: ten end-to-end checks over the library and CLI, printed as
// one PASS/FAIL line each. argv[1] is the path to the aealt CLI binary (used
// by the determinism check). Exits nonzero if any check fails.
#include <Eigen/Dense>

// httplib drags in <resolv.h>, whose _res macro breaks Eigen if seen first
#include <httplib.h>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include "aealt/dataset.hpp"
#include "aealt/downstream.hpp"
#include "aealt/embed_client.hpp"
#include "aealt/factor.hpp"
#include "aealt/matrix.hpp"
#include "aealt/metrics.hpp"
#include "aealt/nn.hpp"
#include "aealt/rng.hpp"

using namespace aealt;
namespace fs = std::filesystem;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return buf;
}

// ---- 1. backward() vs central finite differences ---------------------------

bool criterion1(std::string& detail) {
    const auto t0 = Clock::now();
    Rng rng(101);
    const nn::Activation pool[] = {nn::Activation::Relu, nn::Activation::Identity,
                                   nn::Activation::Sigmoid};
    double worst = 0.0;
    for (int t = 0; t < 50; ++t) {
        const bool use_ce = t % 2 == 1;
        const std::size_t depth = 1 + rng.index(4);
        nn::NetworkSpec spec;
        spec.layer_dims.resize(depth + 1);
        for (auto& d : spec.layer_dims) d = 1 + rng.index(16);
        if (use_ce && spec.layer_dims.back() < 2) spec.layer_dims.back() = 2;
        spec.activations.resize(depth);
        for (auto& a : spec.activations) a = pool[rng.index(3)];
        if (use_ce) spec.activations.back() = nn::Activation::Softmax;
        spec.validate();

        const auto params = nn::init_params(spec, derive_seed(101, std::uint64_t(t)));
        Matrix batch(4, spec.input_dim());
        for (std::size_t i = 0; i < batch.size(); ++i) batch.data()[i] = rng.uniform(-2.0, 2.0);

        nn::LossFn loss;
        if (use_ce) {
            std::vector<int> labels(batch.rows());
            for (auto& l : labels) l = int(rng.index(spec.output_dim()));
            loss = [labels](const Matrix& out) { return nn::cross_entropy_loss(out, labels); };
        } else {
            Matrix target(batch.rows(), spec.output_dim());
            for (std::size_t i = 0; i < target.size(); ++i)
                target.data()[i] = rng.uniform(-1.0, 1.0);
            loss = [target](const Matrix& out) { return nn::squared_error_loss(out, target); };
        }
        worst = std::max(worst, nn::grad_check(spec, params, batch, loss));
    }
    const double secs = seconds_since(t0);
    detail = "50 specs, max rel err " + fmt(worst) + ", " + fmt(secs) + "s";
    return worst < 1e-4 && secs < 60.0;
}

// ---- 2. composite loss endpoints are bitwise-exact --------------------------

bool criterion2(std::string& detail) {
    Rng rng(202);
    for (int t = 0; t < 100; ++t) {
        const data::Task task = t % 3 == 0   ? data::Task::Classification
                                : t % 3 == 1 ? data::Task::Anomaly
                                             : data::Task::Regression;
        const std::size_t d = 2 + rng.index(10);
        const std::size_t k = 1 + rng.index(d);
        const std::size_t classes =
            task == data::Task::Classification ? 2 + rng.index(3) : 2;
        auto cfg = factor::FactorConfig::defaults(factor::ReducerKind::Aealt, d, k, task,
                                                  classes, {1 + rng.index(8)},
                                                  {1 + rng.index(8)});

        factor::AealtParams params;
        params.encoder = nn::init_params(cfg.encoder, rng.next_u64());
        params.decoder = nn::init_params(cfg.decoder, rng.next_u64());
        params.predictor = nn::init_params(cfg.predictor, rng.next_u64());
        params.has_predictor = true;

        const std::size_t b = 1 + rng.index(8);
        Matrix x(b, d);
        for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform(-1.5, 1.5);
        std::vector<int> labels(b);
        Vector values(b);
        for (std::size_t i = 0; i < b; ++i) {
            labels[i] = int(rng.index(classes));
            values[i] = rng.uniform(-2.0, 2.0);
        }
        factor::BatchTargets y;
        if (task == data::Task::Regression)
            y.values = &values;
        else
            y.labels = &labels;

        cfg.lambda = 0.0;
        const auto l0 = factor::composite_loss(cfg, params, x, y);
        cfg.lambda = 1.0;
        const auto l1 = factor::composite_loss(cfg, params, x, y);
        if (l0.total != l0.reconstruction || l1.total != l1.supervised) {
            detail = "bitwise mismatch at batch " + std::to_string(t);
            return false;
        }
    }
    detail = "100 batches, both endpoints bitwise";
    return true;
}

// ---- 3. fit_pca vs an independent eigendecomposition ------------------------

bool criterion3(std::string& detail) {
    Rng rng(303);
    double worst_ev = 0.0, worst_angle = 0.0;
    for (int t = 0; t < 20; ++t) {
        const std::size_t n = 10, d = 6;
        Matrix x(n, d);
        for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
        const std::size_t k = 1 + std::size_t(t) % 5;

        const auto model = factor::fit_pca(x, k);

        Eigen::MatrixXd xe(n, d);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j) xe(long(i), long(j)) = x(i, j);
        const Eigen::RowVectorXd mean = xe.colwise().mean();
        const Eigen::MatrixXd centered = xe.rowwise() - mean;
        const Eigen::MatrixXd cov = centered.transpose() * centered / double(n - 1);
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);

        Eigen::MatrixXd q1(k, d), q2(k, d);
        for (std::size_t j = 0; j < k; ++j) {
            const long src = long(d) - 1 - long(j);  // solver sorts ascending
            worst_ev =
                std::max(worst_ev, std::abs(model.eigenvalues[j] - es.eigenvalues()(src)));
            for (std::size_t c = 0; c < d; ++c) {
                q1(long(j), long(c)) = model.components(j, c);
                q2(long(j), long(c)) = es.eigenvectors()(long(c), src);
            }
        }
        // sin of the largest principal angle between the two k-subspaces
        const Eigen::MatrixXd resid = q2 - (q2 * q1.transpose()) * q1;
        const Eigen::JacobiSVD<Eigen::MatrixXd> svd(resid);
        worst_angle =
            std::max(worst_angle, std::asin(std::min(1.0, svd.singularValues()(0))));
    }
    detail = "max eigenvalue dev " + fmt(worst_ev) + ", max angle " + fmt(worst_angle);
    return worst_ev < 1e-9 && worst_angle < 1e-8;
}

// ---- 4. linear autoencoder reaches the PCA-2 optimum ------------------------

bool criterion4(std::string& detail) {
    const auto t0 = Clock::now();
    data::SyntheticSpec spec;
    spec.n = 200;
    spec.d = 8;
    spec.r = 3;
    spec.task = data::Task::Regression;
    spec.noise_sigma = 0.3;
    spec.nonlinearity = data::Nonlinearity::Linear;
    spec.seed = 404;
    auto gen = data::generate_synthetic(spec);

    const auto scaler = data::fit_scaler(gen.dataset.embeddings.values);
    const Matrix xs = data::apply_scaler(scaler, gen.dataset.embeddings.values);

    auto mse_of = [&](const factor::FactorModel& m) {
        const Matrix recon = factor::reconstruct(m, factor::encode(m, xs));
        double sq = 0.0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            const double dlt = recon.data()[i] - xs.data()[i];
            sq += dlt * dlt;
        }
        return sq / double(xs.rows());
    };

    const double mse_pca = mse_of(factor::fit_pca(xs, 2));

    auto cfg = factor::FactorConfig::defaults(factor::ReducerKind::VanillaAe, 8, 2,
                                              data::Task::Regression, 2, {}, {});
    cfg.epochs = 500;
    cfg.batch_size = 32;
    cfg.learning_rate = 1e-3;
    cfg.seed = 4;
    data::LabeledDataset ds = gen.dataset;
    ds.embeddings.values = xs;
    const double mse_ae = mse_of(factor::train_factor_model(ds, cfg));

    const double secs = seconds_since(t0);
    detail = "ae/pca mse ratio " + fmt(mse_ae / mse_pca) + ", " + fmt(secs) + "s";
    return mse_pca > 0.0 && mse_ae <= 1.05 * mse_pca && secs < 30.0;
}

// ---- 5. rank metrics vs exhaustive enumeration ------------------------------

double brute_auroc(const Vector& s, const std::vector<int>& y) {
    long long wins = 0, ties = 0, np = 0, nn2 = 0;
    for (int l : y) (l == 1 ? np : nn2)++;
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (y[i] != 1) continue;
        for (std::size_t j = 0; j < y.size(); ++j) {
            if (y[j] != 0) continue;
            if (s[i] > s[j])
                ++wins;
            else if (s[i] == s[j])
                ++ties;
        }
    }
    return (double(wins) + 0.5 * double(ties)) / (double(np) * double(nn2));
}

std::vector<double> distinct_desc(const Vector& s) {
    std::vector<double> v(s.begin(), s.end());
    std::sort(v.begin(), v.end(), std::greater<>());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
}

double brute_aucpr(const Vector& s, const std::vector<int>& y) {
    long long np = 0;
    for (int l : y) np += l == 1;
    long long tp = 0, fp = 0;
    double ap = 0.0;
    for (double v : distinct_desc(s)) {
        long long gp = 0, gn = 0;
        for (std::size_t i = 0; i < y.size(); ++i)
            if (s[i] == v) (y[i] == 1 ? gp : gn)++;
        tp += gp;
        fp += gn;
        if (gp > 0) ap += double(gp) / double(np) * (double(tp) / double(tp + fp));
    }
    return ap;
}

double brute_threshold(const Vector& s, const std::vector<int>& y) {
    std::vector<double> cand = distinct_desc(s);
    std::reverse(cand.begin(), cand.end());  // scan ascending, keep >= ties
    double best_t = cand.front(), best_f1 = -1.0;
    for (double t : cand) {
        long long tp = 0, fp = 0, fn = 0;
        for (std::size_t i = 0; i < y.size(); ++i) {
            const bool pos = s[i] >= t;
            if (pos && y[i] == 1)
                ++tp;
            else if (pos && y[i] == 0)
                ++fp;
            else if (!pos && y[i] == 1)
                ++fn;
        }
        const double denom = double(2 * tp + fp + fn);
        const double f1 = denom == 0.0 ? 0.0 : 2.0 * double(tp) / denom;
        if (f1 >= best_f1) {
            best_f1 = f1;
            best_t = t;
        }
    }
    return best_t;
}

bool criterion5(std::string& detail) {
    const auto m = metrics::classification_metrics({1, 1, 0, 0}, {1, 0, 0, 0}, 2);
    if (!(m.precision && *m.precision == 1.0 && m.recall && *m.recall == 0.5 &&
          m.positive_f1 && std::abs(*m.positive_f1 - 2.0 / 3.0) < 1e-15 &&
          m.accuracy == 0.75)) {
        detail = "hand-counted example mismatch";
        return false;
    }

    const double alphabet[3] = {0.25, 0.5, 0.75};
    long long checked = 0;
    for (std::size_t n = 2; n <= 8; ++n) {
        std::size_t codes = 1;
        for (std::size_t i = 0; i < n; ++i) codes *= 3;
        Vector s(n);
        std::vector<int> y(n);
        for (std::size_t code = 0; code < codes; ++code) {
            std::size_t c = code;
            for (std::size_t i = 0; i < n; ++i) {
                s[i] = alphabet[c % 3];
                c /= 3;
            }
            const std::size_t full = (std::size_t(1) << n) - 1;
            for (std::size_t mask = 1; mask < full; ++mask) {  // both classes present
                for (std::size_t i = 0; i < n; ++i) y[i] = int((mask >> i) & 1);
                if (metrics::auroc(s, y) != brute_auroc(s, y) ||
                    metrics::aucpr(s, y) != brute_aucpr(s, y) ||
                    metrics::select_threshold(s, y) != brute_threshold(s, y)) {
                    detail = "mismatch at n=" + std::to_string(n) +
                             " code=" + std::to_string(code) + " mask=" + std::to_string(mask);
                    return false;
                }
                ++checked;
            }
        }
    }
    detail = std::to_string(checked) + " datasets exact, hand example ok";
    return true;
}

// ---- 6. lasso vs least squares / soft threshold / KKT -----------------------

Vector solve_linear(Matrix a, Vector b) {
    const std::size_t n = b.size();
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(a(r, col)) > std::abs(a(piv, col))) piv = r;
        if (piv != col) {
            for (std::size_t j = 0; j < n; ++j) std::swap(a(col, j), a(piv, j));
            std::swap(b[col], b[piv]);
        }
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = a(r, col) / a(col, col);
            for (std::size_t j = col; j < n; ++j) a(r, j) -= f * a(col, j);
            b[r] -= f * b[col];
        }
    }
    Vector out(n);
    for (std::size_t i = n; i-- > 0;) {
        double v = b[i];
        for (std::size_t j = i + 1; j < n; ++j) v -= a(i, j) * out[j];
        out[i] = v / a(i, i);
    }
    return out;
}

bool criterion6(std::string& detail) {
    Rng rng(606);

    // (a) l1 = 0 reproduces least squares (compared via fitted values)
    const std::size_t n = 40, d = 5;
    Matrix x(n, d);
    for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
    Vector yv(n);
    for (std::size_t i = 0; i < n; ++i)
        yv[i] = 2.0 * x(i, 0) - x(i, 1) + 0.5 * x(i, 3) + 0.5 * rng.normal();

    downstream::LassoConfig cfg;
    cfg.l1 = 0.0;
    cfg.max_iters = 200000;
    cfg.tol = 1e-13;
    const auto model = downstream::fit_lasso(x, yv, cfg);
    const Matrix pred = downstream::predict(model, x);

    Matrix aug(n, d + 1);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) aug(i, j) = x(i, j);
        aug(i, d) = 1.0;
    }
    const Matrix gram = matmul_at_b(aug, aug);
    Vector rhs(d + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j <= d; ++j) rhs[j] += aug(i, j) * yv[i];
    const Vector beta = solve_linear(gram, rhs);
    double worst_ls = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double o = 0.0;
        for (std::size_t j = 0; j <= d; ++j) o += aug(i, j) * beta[j];
        worst_ls = std::max(worst_ls, std::abs(pred(i, 0) - o));
    }

    // (b) orthogonal +-1 design: solution is the soft-threshold closed form
    const std::size_t hn = 8;
    Matrix h(hn, hn);
    h(0, 0) = 1.0;
    for (std::size_t sz = 1; sz < hn; sz *= 2)
        for (std::size_t i = 0; i < sz; ++i)
            for (std::size_t j = 0; j < sz; ++j) {
                h(i, j + sz) = h(i, j);
                h(i + sz, j) = h(i, j);
                h(i + sz, j + sz) = -h(i, j);
            }
    Matrix hx(hn, hn - 1);
    for (std::size_t i = 0; i < hn; ++i)
        for (std::size_t j = 1; j < hn; ++j) hx(i, j - 1) = h(i, j);
    Vector hy(hn);
    for (auto& v : hy) v = rng.uniform(-3.0, 3.0);
    double ybar = 0.0;
    for (double v : hy) ybar += v;
    ybar /= double(hn);

    double worst_soft = 0.0;
    for (const double l1 : {0.05, 0.3, 1.0}) {
        downstream::LassoConfig hc;
        hc.l1 = l1;
        hc.max_iters = 1000;
        hc.tol = 1e-13;
        const auto hm = downstream::fit_lasso(hx, hy, hc);
        for (std::size_t j = 0; j + 1 < hn; ++j) {
            double rho = 0.0;
            for (std::size_t i = 0; i < hn; ++i) rho += hx(i, j) * (hy[i] - ybar);
            rho /= double(hn);
            const double want = rho > l1 ? rho - l1 : (rho < -l1 ? rho + l1 : 0.0);
            worst_soft = std::max(worst_soft, std::abs(hm.lasso_weights[j] - want));
        }
    }

    // (c) KKT stationarity on a correlated design
    const std::size_t kn = 30, kd = 6;
    Matrix kx(kn, kd);
    for (std::size_t i = 0; i < kn; ++i) {
        kx(i, 0) = rng.normal();
        kx(i, 1) = rng.normal();
        kx(i, 2) = rng.normal();
        kx(i, 3) = kx(i, 0) + 0.5 * rng.normal();
        kx(i, 4) = kx(i, 1) - kx(i, 2) + 0.3 * rng.normal();
        kx(i, 5) = rng.normal();
    }
    Vector ky(kn);
    for (std::size_t i = 0; i < kn; ++i)
        ky[i] = 1.5 * kx(i, 0) - 0.8 * kx(i, 4) + 0.4 * rng.normal();
    downstream::LassoConfig kc;
    kc.l1 = 0.1;
    kc.max_iters = 500000;
    kc.tol = 1e-12;
    const auto km = downstream::fit_lasso(kx, ky, kc);
    const Matrix kpred = downstream::predict(km, kx);
    double kkt = 0.0;
    for (std::size_t j = 0; j < kd; ++j) {
        double corr = 0.0;
        for (std::size_t i = 0; i < kn; ++i) {
            const double xs = (kx(i, j) - km.lasso_mean[j]) / km.lasso_scale[j];
            corr += xs * (ky[i] - kpred(i, 0));
        }
        corr /= double(kn);
        const double w = km.lasso_weights[j];
        const double viol = w != 0.0 ? std::abs(corr - (w > 0.0 ? kc.l1 : -kc.l1))
                                     : std::max(0.0, std::abs(corr) - kc.l1);
        kkt = std::max(kkt, viol);
    }

    detail = "ls dev " + fmt(worst_ls) + ", soft dev " + fmt(worst_soft) + ", kkt " + fmt(kkt);
    return worst_ls < 1e-6 && worst_soft < 1e-8 && kkt <= 1e-8;
}

// ---- 7. supervised factors beat unsupervised ones ---------------------------

double logistic_accuracy(const Matrix& ftr, const std::vector<int>& ytr, const Matrix& fte,
                         const std::vector<int>& yte) {
    const auto scaler = data::fit_scaler(ftr);
    const Matrix str = data::apply_scaler(scaler, ftr);
    const Matrix ste = data::apply_scaler(scaler, fte);
    downstream::LogisticConfig lc;
    lc.l2 = 0.0;
    lc.epochs = 500;
    lc.learning_rate = 0.5;
    const auto lm = downstream::fit_logistic(str, ytr, 2, lc);
    const Matrix p = downstream::predict(lm, ste);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < p.rows(); ++i)
        correct += (p(i, 1) > p(i, 0) ? 1 : 0) == yte[i];
    return double(correct) / double(p.rows());
}

bool criterion7(std::string& detail) {
    const auto t0 = Clock::now();
    const std::size_t reps = 10;
    double aealt = 0.0, pca = 0.0, ae = 0.0, oracle = 0.0;
    for (std::size_t rep = 0; rep < reps; ++rep) {
        data::SyntheticSpec spec;
        spec.n = 4000;
        spec.d = 64;
        spec.r = 8;
        spec.task = data::Task::Classification;
        spec.noise_sigma = 0.5;
        spec.nonlinearity = data::Nonlinearity::Tanh;
        spec.predictive = {0};
        spec.seed = 1000 + rep;
        spec.loading = data::LoadingKind::Grouped;
        spec.signal_rows = 6;
        spec.signal_scale = 10.0;
        spec.background_scale = 2.0;
        const auto gen = data::generate_synthetic(spec);

        const auto split = data::split_dataset(gen.dataset, 0.7, derive_seed(700, rep), true);
        const auto scaler = data::fit_scaler(split.train.embeddings.values);
        const Matrix xtr = data::apply_scaler(scaler, split.train.embeddings.values);
        const Matrix xte = data::apply_scaler(scaler, split.test.embeddings.values);
        const auto& ytr = split.train.labels;
        const auto& yte = split.test.labels;

        data::LabeledDataset tr = split.train;
        tr.embeddings.values = xtr;

        auto acc_of = [&](const factor::FactorModel& m) {
            return logistic_accuracy(factor::encode(m, xtr), ytr, factor::encode(m, xte), yte);
        };

        auto cfg = factor::FactorConfig::defaults(factor::ReducerKind::Aealt, 64, 2,
                                                  data::Task::Classification, 2, {128}, {32});
        cfg.lambda = 0.95;
        cfg.epochs = 80;
        cfg.batch_size = 64;
        cfg.learning_rate = 2e-3;
        cfg.seed = rep;
        aealt += acc_of(factor::train_factor_model(tr, cfg));

        auto vcfg = cfg;
        vcfg.kind = factor::ReducerKind::VanillaAe;
        ae += acc_of(factor::train_factor_model(tr, vcfg));

        pca += acc_of(factor::fit_pca(xtr, 2));

        oracle += logistic_accuracy(take_rows(gen.factors, split.train_indices), ytr,
                                    take_rows(gen.factors, split.test_indices), yte);
    }
    aealt /= double(reps);
    pca /= double(reps);
    ae /= double(reps);
    oracle /= double(reps);
    const double secs = seconds_since(t0);
    detail = "mean acc: aealt " + fmt(aealt) + ", pca " + fmt(pca) + ", ae " + fmt(ae) +
             ", oracle " + fmt(oracle) + ", " + fmt(secs) + "s";
    return aealt >= pca + 0.05 && aealt >= ae + 0.05 && std::abs(oracle - aealt) <= 0.02 &&
           secs < 300.0;
}

// ---- 8. train-selected threshold transfers to test --------------------------

bool criterion8(std::string& detail) {
    const std::size_t reps = 10;
    double gap_sum = 0.0, gap_max = 0.0;
    for (std::size_t rep = 0; rep < reps; ++rep) {
        data::SyntheticSpec spec;
        spec.n = 4000;
        spec.d = 64;
        spec.r = 8;
        spec.task = data::Task::Anomaly;
        spec.noise_sigma = 0.05;
        spec.nonlinearity = data::Nonlinearity::Tanh;
        spec.predictive = {0};
        spec.seed = 2000 + rep;
        spec.loading = data::LoadingKind::Grouped;
        spec.signal_rows = 16;
        spec.signal_scale = 0.7;
        spec.background_scale = 2.0;
        spec.anomaly_fraction = 0.05;
        const auto gen = data::generate_synthetic(spec);

        const auto split = data::split_dataset(gen.dataset, 0.7, derive_seed(800, rep), true);
        const auto scaler = data::fit_scaler(split.train.embeddings.values);
        const Matrix xtr = data::apply_scaler(scaler, split.train.embeddings.values);
        const Matrix xte = data::apply_scaler(scaler, split.test.embeddings.values);
        const auto& ytr = split.train.labels;
        const auto& yte = split.test.labels;

        data::LabeledDataset tr = split.train;
        tr.embeddings.values = xtr;

        auto cfg = factor::FactorConfig::defaults(factor::ReducerKind::Aealt, 64, 4,
                                                  data::Task::Anomaly, 2, {128}, {32});
        cfg.lambda = 0.95;
        cfg.epochs = 50;
        cfg.batch_size = 64;
        cfg.learning_rate = 2e-3;
        cfg.seed = rep;
        const auto fm = factor::train_factor_model(tr, cfg);

        const Matrix ftr_raw = factor::encode(fm, xtr);
        const auto fscaler = data::fit_scaler(ftr_raw);
        const Matrix ftr = data::apply_scaler(fscaler, ftr_raw);
        const Matrix fte = data::apply_scaler(fscaler, factor::encode(fm, xte));

        downstream::MlpConfig mc;
        mc.hidden = {32};
        mc.epochs = 300;
        mc.batch_size = 64;
        mc.learning_rate = 1e-3;
        mc.seed = rep;
        const auto mlp = downstream::fit_mlp_classifier(ftr, ytr, 2, mc);

        auto scores_of = [&](const Matrix& f) {
            const Matrix p = downstream::predict(mlp, f);
            Vector s(p.rows());
            for (std::size_t i = 0; i < p.rows(); ++i) s[i] = p(i, 1);
            return s;
        };
        const Vector str = scores_of(ftr), ste = scores_of(fte);

        auto test_f1_at = [&](double thr) {
            std::vector<int> pred(ste.size());
            for (std::size_t i = 0; i < ste.size(); ++i) pred[i] = ste[i] >= thr ? 1 : 0;
            return *metrics::classification_metrics(yte, pred, 2).positive_f1;
        };
        const double transferred = test_f1_at(metrics::select_threshold(str, ytr));
        const double optimal = test_f1_at(metrics::select_threshold(ste, yte));
        const double gap = optimal - transferred;
        gap_sum += gap;
        gap_max = std::max(gap_max, gap);
    }
    const double gap_mean = gap_sum / double(reps);
    detail = "mean f1 gap " + fmt(gap_mean) + ", max " + fmt(gap_max);
    return gap_mean <= 0.05;
}

// ---- 9. experiment runs are byte-identical -----------------------------------

bool criterion9(const std::string& cli, std::string& detail) {
    if (cli.empty()) {
        detail = "missing CLI path argument";
        return false;
    }
    const fs::path dir = fs::temp_directory_path() / "aealt_acceptance_exp";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const fs::path cfg_path = dir / "experiment.json";
    {
        std::ofstream out(cfg_path);
        out << R"({
  "schema": 1,
  "task": "classification",
  "base_seed": 9,
  "repetitions": 2,
  "data": {
    "synthetic": {"n": 120, "d": 8, "r": 2, "noise_sigma": 0.2, "nonlinearity": "tanh",
                  "predictive": [0], "loading": "grouped", "signal_rows": 4,
                  "signal_scale": 2.0, "background_scale": 1.0}
  },
  "reducers": [
    {"kind": "aealt", "latent_dim": 2, "lambda": 0.9, "epochs": 15, "hidden": [16],
     "batch_size": 32},
    {"kind": "pca", "latent_dim": 2}
  ],
  "learners": [
    {"kind": "logistic", "epochs": 100},
    {"kind": "mlp", "hidden": [8], "epochs": 20, "batch_size": 32}
  ],
  "split": {"train_fraction": 0.7}
})";
    }

    auto run_once = [&](const std::string& sub) {
        const std::string cmd = cli + " experiment --config " + cfg_path.string() +
                                " --out-dir " + (dir / sub).string() + " --threads 2 > " +
                                (dir / (sub + ".log")).string() + " 2>&1";
        return std::system(cmd.c_str());
    };
    if (run_once("a") != 0 || run_once("b") != 0) {
        detail = "experiment exited nonzero";
        return false;
    }

    auto slurp = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        return std::string((std::istreambuf_iterator<char>(in)),
                           std::istreambuf_iterator<char>());
    };
    const std::string a = slurp(dir / "a" / "records.json");
    const std::string b = slurp(dir / "b" / "records.json");
    detail = "records.json " + std::to_string(a.size()) + " bytes, runs identical";
    return !a.empty() && a == b;
}

// ---- 10. embed client: cache hits, ordering, retry --------------------------

Vector stub_embedding(const std::string& text) {
    return {double(text.size()), text.empty() ? 0.0 : double(text[0]), 0.5};
}

struct AcceptanceStub {
    httplib::Server svr;
    std::thread th;
    int port = 0;
    std::atomic<int> requests{0};
    std::atomic<int> fail_next{0};

    AcceptanceStub() {
        svr.Post("/v1/embeddings", [this](const httplib::Request& req, httplib::Response& res) {
            ++requests;
            if (fail_next.fetch_sub(1) > 0) {
                res.status = 500;
                res.set_content("unavailable", "text/plain");
                return;
            }
            fail_next.store(0);
            const json body = json::parse(req.body);
            json data = json::array();
            for (const auto& t : body.at("input")) {
                json item;
                item["embedding"] = stub_embedding(t.get<std::string>());
                data.push_back(item);
            }
            json out;
            out["data"] = data;
            res.set_content(out.dump(), "application/json");
        });
        port = svr.bind_to_any_port("127.0.0.1");
        th = std::thread([this] { svr.listen_after_bind(); });
        svr.wait_until_ready();
    }
    ~AcceptanceStub() {
        svr.stop();
        th.join();
    }
};

bool criterion10(std::string& detail) {
    AcceptanceStub server;
    if (server.port <= 0) {
        detail = "stub bind failed";
        return false;
    }
    const fs::path cache = fs::temp_directory_path() / "aealt_acceptance_cache";
    fs::remove_all(cache);

    embed::EmbedEndpointConfig cfg;
    cfg.base_url = "http://127.0.0.1:" + std::to_string(server.port) + "/v1/embeddings";
    cfg.model = "stub-model";
    cfg.batch_size = 2;
    cfg.timeout_seconds = 5.0;
    cfg.max_retries = 3;
    cfg.backoff_base_ms = 1;
    cfg.cache_dir = cache.string();

    const std::vector<std::string> texts = {"alpha", "bravo", "charlie", "delta", "echo"};
    const auto cold = embed::embed_texts(texts, cfg);
    const int cold_requests = server.requests.load();
    if (cold_requests != 3) {
        detail = "expected 3 cold requests, saw " + std::to_string(cold_requests);
        return false;
    }
    const auto warm = embed::embed_texts(texts, cfg);
    if (server.requests.load() != cold_requests) {
        detail = "cache hit still issued requests";
        return false;
    }
    if (!(warm.values == cold.values)) {
        detail = "warm result differs from cold";
        return false;
    }

    // order preserved when cached and fresh texts interleave
    const std::vector<std::string> mixed = {"echo", "zulu", "alpha", "yankee", "charlie"};
    const auto mixed_out = embed::embed_texts(mixed, cfg);
    if (server.requests.load() != cold_requests + 1) {
        detail = "expected exactly one request for the two misses";
        return false;
    }
    for (std::size_t i = 0; i < mixed.size(); ++i) {
        const Vector want = stub_embedding(mixed[i]);
        if (mixed_out.ids[i] != std::to_string(i)) {
            detail = "row ids out of order";
            return false;
        }
        for (std::size_t j = 0; j < want.size(); ++j)
            if (mixed_out.values(i, j) != want[j]) {
                detail = "row " + std::to_string(i) + " is not the requested text";
                return false;
            }
    }

    // transient 500s: two failures, then success, with exponential backoff
    cfg.backoff_base_ms = 50;
    server.fail_next = 2;
    const int before = server.requests.load();
    const auto t0 = Clock::now();
    const auto one = embed::embed_texts({"retry-me"}, cfg);
    const double secs = seconds_since(t0);
    if (server.requests.load() - before != 3) {
        detail = "expected 2 failures + 1 success, saw " +
                 std::to_string(server.requests.load() - before);
        return false;
    }
    const Vector want = stub_embedding("retry-me");
    for (std::size_t j = 0; j < want.size(); ++j)
        if (one.values(0, j) != want[j]) {
            detail = "retry result wrong";
            return false;
        }
    if (secs < 0.14) {  // 50ms + 100ms sleeps expected
        detail = "backoff too fast (" + fmt(secs) + "s)";
        return false;
    }
    if (secs > 2.0) {
        detail = "backoff too slow (" + fmt(secs) + "s)";
        return false;
    }
    detail = "zero-request cache hits, order kept, 3 attempts in " + fmt(secs) + "s";
    return true;
}

}  // namespace

int main(int argc, char** argv) {
    const std::string cli = argc > 1 ? argv[1] : "";
    const std::vector<std::function<bool(std::string&)>> criteria = {
        criterion1,
        criterion2,
        criterion3,
        criterion4,
        criterion5,
        criterion6,
        criterion7,
        criterion8,
        [&cli](std::string& d) { return criterion9(cli, d); },
        criterion10,
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        std::string detail;
        bool ok = false;
        try {
            ok = criteria[i](detail);
        } catch (const std::exception& e) {
            detail = std::string("exception: ") + e.what();
        }
        std::cout << "criterion " << (i + 1) << ": " << (ok ? "PASS" : "FAIL")
                  << (detail.empty() ? "" : " (" + detail + ")") << std::endl;
        failures += ok ? 0 : 1;
    }
    return failures == 0 ? 0 : 1;
}

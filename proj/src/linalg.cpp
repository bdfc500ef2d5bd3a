#include "aealt/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "aealt/errors.hpp"

namespace aealt {

EigenDecomposition symmetric_eigen(const Matrix& sym) {
    const std::size_t n = sym.rows();
    if (n != sym.cols()) throw DataError("symmetric_eigen: matrix not square");
    Matrix a = sym;
    // v accumulates the rotations; starts as identity.
    Matrix v(n, n);
    for (std::size_t i = 0; i < n; ++i) v(i, i) = 1.0;

    auto off_diag_sq = [&]() {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) s += a(i, j) * a(i, j);
        return s;
    };

    const double eps = 1e-14;
    double scale = 0.0;
    for (std::size_t i = 0; i < n; ++i) scale = std::max(scale, std::abs(sym(i, i)));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) scale = std::max(scale, std::abs(sym(i, j)));
    if (scale == 0.0) scale = 1.0;

    for (int sweep = 0; sweep < 100 && off_diag_sq() > eps * eps * scale * scale * n * n; ++sweep) {
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (std::abs(apq) <= eps * scale) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                // Update a = J^T a J over rows/cols p and q.
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v(k, p), vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return a(x, x) > a(y, y); });

    EigenDecomposition out;
    out.eigenvalues.resize(n);
    out.eigenvectors = Matrix(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        out.eigenvalues[i] = a(order[i], order[i]);
        for (std::size_t j = 0; j < n; ++j) out.eigenvectors(i, j) = v(j, order[i]);
    }
    return out;
}

Matrix orthonormalize_rows(const Matrix& m) {
    Matrix q = m;
    for (std::size_t i = 0; i < q.rows(); ++i) {
        double* ri = q.row(i);
        for (int pass = 0; pass < 2; ++pass) {  // re-orthogonalize for stability
            for (std::size_t k = 0; k < i; ++k) {
                const double* rk = q.row(k);
                double dot = 0.0;
                for (std::size_t j = 0; j < q.cols(); ++j) dot += ri[j] * rk[j];
                for (std::size_t j = 0; j < q.cols(); ++j) ri[j] -= dot * rk[j];
            }
        }
        double norm = 0.0;
        for (std::size_t j = 0; j < q.cols(); ++j) norm += ri[j] * ri[j];
        norm = std::sqrt(norm);
        if (norm < 1e-12) throw DataError("orthonormalize_rows: rank-deficient basis");
        for (std::size_t j = 0; j < q.cols(); ++j) ri[j] /= norm;
    }
    return q;
}

double max_principal_angle(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) throw DataError("max_principal_angle: dim mismatch");
    Matrix qa = orthonormalize_rows(a);
    Matrix qb = orthonormalize_rows(b);
    if (qa.rows() > qb.rows()) std::swap(qa, qb);
    // Sine formulation: the singular values of qa - (qa qb^T) qb are the sines
    // of the principal angles. The cosine route (acos of singular values of
    // qa qb^T) cannot resolve angles below ~sqrt(eps), this one can.
    Matrix proj = matmul(matmul_a_bt(qa, qb), qb);
    Matrix r = qa;
    for (std::size_t i = 0; i < r.size(); ++i) r.data()[i] -= proj.data()[i];
    Matrix rrt = matmul_a_bt(r, r);
    EigenDecomposition e = symmetric_eigen(rrt);
    double max_sin_sq = 0.0;
    for (std::size_t i = 0; i < rrt.rows(); ++i)
        max_sin_sq = std::max(max_sin_sq, std::max(0.0, e.eigenvalues[i]));
    return std::asin(std::min(1.0, std::sqrt(max_sin_sq)));
}

}  // namespace aealt

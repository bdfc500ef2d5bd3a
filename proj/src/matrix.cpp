#include "aealt/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "aealt/errors.hpp"

namespace aealt {

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    Matrix m(rows.size(), rows.size() ? rows.begin()->size() : 0);
    std::size_t i = 0;
    for (const auto& r : rows) {
        if (r.size() != m.cols_) throw DataError("from_rows: ragged rows");
        std::copy(r.begin(), r.end(), m.row(i));
        ++i;
    }
    return m;
}

void Matrix::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

static void check_inner(std::size_t a, std::size_t b, const char* what) {
    if (a != b) throw DataError(std::string("matmul shape mismatch in ") + what);
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    check_inner(a.cols(), b.rows(), "a*b");
    Matrix c(a.rows(), b.cols());
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    // i-k-j order: the inner loop is a contiguous axpy over b's row, which the
    // compiler vectorizes. Good enough for the matrix sizes we see.
    for (std::size_t i = 0; i < m; ++i) {
        const double* ai = a.row(i);
        double* ci = c.row(i);
        for (std::size_t p = 0; p < k; ++p) {
            const double av = ai[p];
            if (av == 0.0) continue;
            const double* bp = b.row(p);
            for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
        }
    }
    return c;
}

Matrix matmul_at_b(const Matrix& a, const Matrix& b) {
    check_inner(a.rows(), b.rows(), "a^T*b");
    Matrix c(a.cols(), b.cols());
    const std::size_t k = a.rows(), m = a.cols(), n = b.cols();
    for (std::size_t p = 0; p < k; ++p) {
        const double* ap = a.row(p);
        const double* bp = b.row(p);
        for (std::size_t i = 0; i < m; ++i) {
            const double av = ap[i];
            if (av == 0.0) continue;
            double* ci = c.row(i);
            for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
        }
    }
    return c;
}

Matrix matmul_a_bt(const Matrix& a, const Matrix& b) {
    check_inner(a.cols(), b.cols(), "a*b^T");
    Matrix c(a.rows(), b.rows());
    const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
    for (std::size_t i = 0; i < m; ++i) {
        const double* ai = a.row(i);
        double* ci = c.row(i);
        for (std::size_t j = 0; j < n; ++j) {
            const double* bj = b.row(j);
            double s = 0.0;
            for (std::size_t p = 0; p < k; ++p) s += ai[p] * bj[p];
            ci[j] = s;
        }
    }
    return c;
}

Matrix transpose(const Matrix& a) {
    Matrix t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
    return t;
}

void add_row_vector(Matrix& m, const Vector& v) {
    if (v.size() != m.cols()) throw DataError("add_row_vector: length mismatch");
    for (std::size_t i = 0; i < m.rows(); ++i) {
        double* r = m.row(i);
        for (std::size_t j = 0; j < m.cols(); ++j) r[j] += v[j];
    }
}

Vector col_sums(const Matrix& m) {
    Vector s(m.cols(), 0.0);
    for (std::size_t i = 0; i < m.rows(); ++i) {
        const double* r = m.row(i);
        for (std::size_t j = 0; j < m.cols(); ++j) s[j] += r[j];
    }
    return s;
}

Vector col_means(const Matrix& m) {
    Vector s = col_sums(m);
    if (m.rows() == 0) return s;
    for (double& x : s) x /= static_cast<double>(m.rows());
    return s;
}

Matrix take_rows(const Matrix& m, const std::vector<std::size_t>& idx) {
    Matrix out(idx.size(), m.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] >= m.rows()) throw DataError("take_rows: index out of range");
        std::memcpy(out.row(i), m.row(idx[i]), m.cols() * sizeof(double));
    }
    return out;
}

double frobenius_sq(const Matrix& m) {
    double s = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) s += m.data()[i] * m.data()[i];
    return s;
}

bool all_finite(const Matrix& m) {
    for (std::size_t i = 0; i < m.size(); ++i)
        if (!std::isfinite(m.data()[i])) return false;
    return true;
}

bool all_finite(const Vector& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

}  // namespace aealt

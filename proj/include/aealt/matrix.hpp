#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

namespace aealt {

using Vector = std::vector<double>;

// Dense row-major matrix of doubles. Deliberately minimal: the library only
// needs the handful of operations below, and keeping the storage a plain
// std::vector makes serialization and exact-equality checks trivial.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double value = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, value) {}

    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    double* row(std::size_t i) { return data_.data() + i * cols_; }
    const double* row(std::size_t i) const { return data_.data() + i * cols_; }

    void fill(double value);

    friend bool operator==(const Matrix& a, const Matrix& b) {
        return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// c = a * b
Matrix matmul(const Matrix& a, const Matrix& b);
// c = a^T * b  (a is k x m, b is k x n, result m x n)
Matrix matmul_at_b(const Matrix& a, const Matrix& b);
// c = a * b^T  (a is m x k, b is n x k, result m x n)
Matrix matmul_a_bt(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& a);

// Broadcasts: adds v to every row of m in place.
void add_row_vector(Matrix& m, const Vector& v);
Vector col_sums(const Matrix& m);
Vector col_means(const Matrix& m);

Matrix take_rows(const Matrix& m, const std::vector<std::size_t>& idx);

double frobenius_sq(const Matrix& m);
bool all_finite(const Matrix& m);
bool all_finite(const Vector& v);

}  // namespace aealt

#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

namespace llc {

// Dense row-major matrix of doubles. The only tensor type used anywhere.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols);  // zero-filled

    static Matrix from_rows(std::size_t rows, std::size_t cols,
                            std::initializer_list<double> values);

    double& at(std::size_t i, std::size_t j) { return values_[i * cols_ + j]; }
    double at(std::size_t i, std::size_t j) const { return values_[i * cols_ + j]; }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return values_.size(); }
    bool empty() const { return values_.empty(); }

    double* data() { return values_.data(); }
    const double* data() const { return values_.data(); }

    void fill(double v);
    bool all_finite() const;
    // Throws NumericError naming `what` if any entry is NaN/Inf.
    void require_finite(const char* what) const;

    bool operator==(const Matrix& other) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> values_;
};

// out[i][j] = sum_m a[i][m] * b[j][m], i.e. A * B^T. Shapes a: n×d, b: k×d.
// Fixed accumulation order (inner loop over m ascending).
Matrix matmul_nt(const Matrix& a, const Matrix& b);

// out[i][j] = sum_m a[m][i] * b[m][j], i.e. A^T * B. Shapes a: n×d, b: n×k.
Matrix matmul_tn(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& a);

void add_inplace(Matrix& dst, const Matrix& src);
void scale_inplace(Matrix& dst, double s);

}  // namespace llc

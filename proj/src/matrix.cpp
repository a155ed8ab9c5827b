#include "llc/matrix.hpp"

#include <cmath>
#include <string>

#include "llc/error.hpp"

namespace llc {

Matrix::Matrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), values_(rows * cols, 0.0) {}

Matrix Matrix::from_rows(std::size_t rows, std::size_t cols,
                         std::initializer_list<double> values) {
    if (values.size() != rows * cols) {
        throw DimensionError("from_rows: got " + std::to_string(values.size()) +
                             " values for a " + std::to_string(rows) + "x" +
                             std::to_string(cols) + " matrix");
    }
    Matrix m(rows, cols);
    std::size_t i = 0;
    for (double v : values) m.values_[i++] = v;
    return m;
}

void Matrix::fill(double v) {
    for (double& x : values_) x = v;
}

bool Matrix::all_finite() const {
    for (double x : values_) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

void Matrix::require_finite(const char* what) const {
    if (!all_finite()) {
        throw NumericError(std::string(what) + ": non-finite entry");
    }
}

static void check_same_inner(const char* op, std::size_t a, std::size_t b,
                             const Matrix& ma, const Matrix& mb) {
    if (a != b) {
        throw DimensionError(std::string(op) + ": shapes " + std::to_string(ma.rows()) +
                             "x" + std::to_string(ma.cols()) + " and " +
                             std::to_string(mb.rows()) + "x" + std::to_string(mb.cols()) +
                             " do not conform");
    }
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    check_same_inner("matmul_nt", a.cols(), b.cols(), a, b);
    Matrix out(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < b.rows(); ++j) {
            double acc = 0.0;
            for (std::size_t m = 0; m < a.cols(); ++m) acc += a.at(i, m) * b.at(j, m);
            out.at(i, j) = acc;
        }
    }
    return out;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    check_same_inner("matmul_tn", a.rows(), b.rows(), a, b);
    Matrix out(a.cols(), b.cols());
    for (std::size_t i = 0; i < a.cols(); ++i) {
        for (std::size_t j = 0; j < b.cols(); ++j) {
            double acc = 0.0;
            for (std::size_t m = 0; m < a.rows(); ++m) acc += a.at(m, i) * b.at(m, j);
            out.at(i, j) = acc;
        }
    }
    return out;
}

Matrix transpose(const Matrix& a) {
    Matrix out(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) out.at(j, i) = a.at(i, j);
    return out;
}

void add_inplace(Matrix& dst, const Matrix& src) {
    check_same_inner("add_inplace", dst.size(), src.size(), dst, src);
    for (std::size_t i = 0; i < dst.size(); ++i) dst.data()[i] += src.data()[i];
}

void scale_inplace(Matrix& dst, double s) {
    for (std::size_t i = 0; i < dst.size(); ++i) dst.data()[i] *= s;
}

}  // namespace llc

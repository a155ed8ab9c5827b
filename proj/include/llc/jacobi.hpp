#pragma once

#include <cstddef>

#include "llc/matrix.hpp"

namespace llc {

struct EigenDecomposition {
    std::vector<double> eigenvalues;  // descending
    Matrix eigenvectors;              // column j pairs with eigenvalues[j]
};

// Cyclic Jacobi rotations on a symmetric matrix. Sized for desk-scale inputs
// (hundreds of rows); sweep cap exceeded raises a numeric error.
EigenDecomposition jacobi_eigen_symmetric(const Matrix& sym, std::size_t max_sweeps = 100);

}  // namespace llc

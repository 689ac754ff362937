#pragma once

// Thin LAPACKE wrappers for the dense blocks produced by component splitting.

#include "nctorus/algebra.hpp"

#include <Eigen/Dense>

#include <vector>

namespace nct::detail {

/// Eigenvalues of a Hermitian matrix (lower triangle referenced), ascending.
std::vector<double> hermitian_eigenvalues(Eigen::MatrixXcd a);

/// Generalized eigenvalues of A x = lambda B x with B positive definite.
std::vector<double> hermitian_pencil_eigenvalues(Eigen::MatrixXcd a, Eigen::MatrixXcd b);

/// Singular values, descending.
std::vector<double> singular_values(Eigen::MatrixXcd a);

}  // namespace nct::detail

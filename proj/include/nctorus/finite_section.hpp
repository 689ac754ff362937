#pragma once

// Finite sections of operators on the GNS space H_0, whose orthonormal basis
// is the set of monomials U^m V^n.

#include "nctorus/algebra.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cstdint>
#include <iosfwd>
#include <vector>

namespace nct {

using SparseMatrix = Eigen::SparseMatrix<cplx>;

/// Index window {(m,n) : |m|,|n| <= N}, enumerated row-major by m then n.
class BasisWindow {
 public:
  explicit BasisWindow(int bandwidth);

  int bandwidth() const { return bandwidth_; }
  int side() const { return 2 * bandwidth_ + 1; }
  std::size_t dimension() const { return static_cast<std::size_t>(side()) * side(); }
  bool contains(int m, int n) const { return std::abs(m) <= bandwidth_ && std::abs(n) <= bandwidth_; }
  std::size_t index(int m, int n) const;
  Mode mode(std::size_t index) const;
  std::size_t vacuum() const { return index(0, 0); }

  bool operator==(const BasisWindow&) const = default;

 private:
  int bandwidth_;
};

class FiniteSectionOperator {
 public:
  FiniteSectionOperator(BasisWindow window, SparseMatrix entries, bool selfadjoint = false);

  const BasisWindow& window() const { return window_; }
  const SparseMatrix& entries() const { return entries_; }
  bool is_selfadjoint() const { return selfadjoint_; }
  std::size_t dimension() const { return window_.dimension(); }

  cplx at(std::size_t row, std::size_t col) const;
  Eigen::MatrixXcd dense() const;

 private:
  BasisWindow window_;
  SparseMatrix entries_;
  bool selfadjoint_;
};

struct SpectrumResult {
  std::vector<double> eigenvalues;  // ascending
  std::size_t blocks = 0;           // independent diagonal blocks that were solved
  std::size_t largest_block = 0;
};

/// Column (m,n) holds the coefficients of a U^m V^n, clipped to the window.
FiniteSectionOperator left_mult_matrix(const NcElement& a, const BasisWindow& w);

FiniteSectionOperator flat_laplacian_matrix(const ModuliPoint& tau, const BasisWindow& w);

/// Eigenvalues of the flat Laplacian on the window without assembling it.
std::vector<double> flat_spectrum(const ModuliPoint& tau, int bandwidth);

struct PerturbedLaplacian {
  FiniteSectionOperator op;
  double asymmetry;  // max |M - M^dagger| before symmetrization
};

/// K D K with K = left multiplication by k and D the flat Laplacian.
PerturbedLaplacian perturbed_laplacian_matrix(const ConformalData& cd, const BasisWindow& w);

struct LaplacianPencil {
  FiniteSectionOperator op;    // A^dagger G_1 A
  FiniteSectionOperator gram;  // G_phi
};

/// Laplacian on H_phi as the Hermitian pencil (A^dagger G_1 A, G_phi).
LaplacianPencil gram_laplacian_matrix(const ConformalData& cd, const BasisWindow& w);

/// Full ascending spectrum of a selfadjoint finite section.
SpectrumResult hermitian_spectrum(const FiniteSectionOperator& m, bool positive = false);

/// Generalized eigenvalues of the pencil, ascending.
SpectrumResult pencil_spectrum(const LaplacianPencil& pencil);

/// Singular values, descending.
std::vector<double> singular_values(const FiniteSectionOperator& m);

cplx vacuum_expectation(const FiniteSectionOperator& m);

/// Vacuum entry of the inverse, by a sparse LU solve against the vacuum vector.
cplx inverse_vacuum_expectation(const FiniteSectionOperator& m);

/// 16-byte header ("NCT0", u32 dimension, u32 bandwidth, u32 reserved) then
/// little-endian float64 (re, im) pairs in row-major order.
void write_binary(std::ostream& os, const FiniteSectionOperator& m);
FiniteSectionOperator read_binary(std::istream& is);

void write_eigenvalues_csv(std::ostream& os, const std::vector<double>& values);

/// Groups the indices of a square sparsity pattern into connected components.
std::vector<std::vector<Eigen::Index>> sparsity_components(const std::vector<const SparseMatrix*>& mats);

}  // namespace nct

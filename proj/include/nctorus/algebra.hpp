#pragma once

// Truncated Fourier series in the smooth noncommutative torus algebra.
//
// An element is a finite sum  sum a_{m,n} U^m V^n  with VU = e^{2 pi i theta} UV.
// Products are exact: bandwidths add and nothing is dropped unless truncate()
// is called explicitly.

#include <complex>
#include <compare>
#include <cstddef>
#include <map>
#include <stdexcept>
#include <string>

namespace nct {

using cplx = std::complex<double>;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kDefaultTolerance = 1e-12;

class DeformationAngle {
 public:
  explicit DeformationAngle(double theta);

  /// (sqrt(5) - 1) / 2
  static DeformationAngle golden();

  double value() const { return theta_; }
  bool operator==(const DeformationAngle&) const = default;

 private:
  double theta_;
};

/// Conformal structure tau in the upper half plane.
class ModuliPoint {
 public:
  ModuliPoint(double re, double im);

  double re() const { return re_; }
  double im() const { return im_; }
  double abs2() const { return re_ * re_ + im_ * im_; }

  /// Q(xi) = xi1^2 + 2 Re(tau) xi1 xi2 + |tau|^2 xi2^2
  double quadratic_form(double xi1, double xi2) const {
    return xi1 * xi1 + 2.0 * re_ * xi1 * xi2 + abs2() * xi2 * xi2;
  }

  bool operator==(const ModuliPoint&) const = default;

 private:
  double re_;
  double im_;
};

struct Mode {
  int m = 0;
  int n = 0;
  auto operator<=>(const Mode&) const = default;
};

/// e^{2 pi i theta k}, reduced in extended precision.
cplx rotation_phase(DeformationAngle theta, long long k);

class NcElement {
 public:
  using Coeffs = std::map<Mode, cplx>;

  explicit NcElement(DeformationAngle theta, int bandwidth = 0);

  static NcElement scalar(DeformationAngle theta, cplx c);

  DeformationAngle theta() const { return theta_; }
  int bandwidth() const { return bandwidth_; }
  const Coeffs& coeffs() const { return coeffs_; }
  std::size_t size() const { return coeffs_.size(); }
  bool is_zero() const { return coeffs_.empty(); }

  cplx coeff(int m, int n) const;

  /// Overwrites the coefficient at (m,n); the index must lie in the bandwidth box.
  void set(int m, int n, cplx c);

  /// Accumulates into (m,n), widening the bandwidth if needed.
  void add(int m, int n, cplx c);

  /// Returns a copy whose nominal bandwidth is at least `bandwidth`.
  NcElement widened(int bandwidth) const;

  double l1_norm() const;
  double max_abs() const;

  NcElement& operator+=(const NcElement& other);
  NcElement& operator-=(const NcElement& other);
  NcElement& operator*=(cplx c);

 private:
  DeformationAngle theta_;
  int bandwidth_;
  Coeffs coeffs_;
};

NcElement operator+(NcElement a, const NcElement& b);
NcElement operator-(NcElement a, const NcElement& b);
NcElement operator-(NcElement a);
NcElement operator*(cplx c, NcElement a);
NcElement operator*(NcElement a, cplx c);

NcElement make_monomial(int m, int n, cplx c, DeformationAngle theta);

/// Exact twisted product; the result bandwidth is a.bandwidth() + b.bandwidth().
NcElement mul(const NcElement& a, const NcElement& b);
NcElement operator*(const NcElement& a, const NcElement& b);

/// (U^m V^n)^* = e^{2 pi i theta mn} U^{-m} V^{-n}
NcElement adjoint(const NcElement& a);

/// Normalized trace: the (0,0) coefficient.
cplx trace_t(const NcElement& a);

/// delta_1 multiplies the (m,n) coefficient by m, delta_2 by n.
NcElement delta(int axis, const NcElement& a);

/// delta_1 + conj(tau) delta_2
NcElement dbar(const NcElement& a, const ModuliPoint& tau);
/// delta_1 + tau delta_2
NcElement dbar_star(const NcElement& a, const ModuliPoint& tau);

double max_abs_difference(const NcElement& a, const NcElement& b);
bool approx_equal(const NcElement& a, const NcElement& b, double tol = kDefaultTolerance);
bool is_selfadjoint(const NcElement& a, double tol = kDefaultTolerance);

struct TruncateResult {
  NcElement element;
  double discarded_mass;  // l1 norm of the dropped coefficients
};

TruncateResult truncate(const NcElement& a, int bandwidth);

struct ExpResult {
  NcElement value;
  double convergence;  // l2 change of the coefficients between pad and pad-1
  bool converged;
};

/// e^{scale h} for selfadjoint h, read off the vacuum column of the matrix
/// exponential of the left-multiplication finite section on a window of
/// bandwidth h.bandwidth() + pad.
ExpResult exp_selfadjoint(const NcElement& h, double scale, int pad, double tol = 1e-10);

struct NormBounds {
  double lower;  // largest singular value of the finite section
  double upper;  // l1 norm of the coefficients
};

NormBounds norm_bounds(const NcElement& a, int window);

/// Inverse of a positive invertible element by a Neumann series about its l1
/// norm, truncating every partial product to `box`.
NcElement neumann_inverse(const NcElement& a, int box, double tol = 1e-14, int max_terms = 5000);

/// Conformal structure tau plus Weyl factor k = e^{h/2}.
class ConformalData {
 public:
  ConformalData(ModuliPoint tau, NcElement h, int pad = 24, double tol = 1e-10);

  const ModuliPoint& tau() const { return tau_; }
  const NcElement& h() const { return h_; }
  const NcElement& k() const { return k_; }
  /// k^2 = e^{h}
  const NcElement& k2() const { return k2_; }
  /// k^{-2} = e^{-h}
  const NcElement& k_inv2() const { return k_inv2_; }
  int pad() const { return pad_; }
  double tolerance() const { return tol_; }
  DeformationAngle theta() const { return h_.theta(); }

  /// Largest reported convergence metric among the cached exponentials.
  double exp_convergence() const { return exp_convergence_; }

 private:
  ModuliPoint tau_;
  NcElement h_;
  int pad_;
  double tol_;
  NcElement k_;
  NcElement k2_;
  NcElement k_inv2_;
  double exp_convergence_ = 0.0;
};

/// phi(a) = t(a e^{-h})
cplx phi(const NcElement& a, const ConformalData& cd);

/// Modular operator: e^{-h} a e^{h}
NcElement modular(const NcElement& a, const ConformalData& cd);

std::string to_string(const NcElement& a, int precision = 6);

}  // namespace nct

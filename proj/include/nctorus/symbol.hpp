#pragma once

// Classical pseudodifferential symbols on the noncommutative torus.
//
// A GradedSymbol stores homogeneous layers in polar form: the layer of degree d
// is  sum_w r^d e^{i w phi} c_{d,w}  with c_{d,w} in the algebra, so xi
// derivatives and products act exactly on (d, w) labels.

#include "nctorus/algebra.hpp"
#include "nctorus/finite_section.hpp"

#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace nct {

inline constexpr int kDefaultWindingCutoff = 32;

using WindingSeries = std::map<int, NcElement>;

/// Full (non-truncated) symbol xi -> rho(xi), used where the homogeneous
/// expansion is singular or not convergent.
using ExactSymbol = std::function<NcElement(double xi1, double xi2)>;

class GradedSymbol {
 public:
  /// Retains layers top_order, top_order-1, ..., top_order-depth+1. A complete
  /// symbol has every lower layer identically zero (polynomial symbols).
  GradedSymbol(DeformationAngle theta, int top_order, int depth, int winding_cutoff = kDefaultWindingCutoff,
               bool complete = false);

  DeformationAngle theta() const { return theta_; }
  int top_order() const { return top_order_; }
  int depth() const { return depth_; }
  int lowest_order() const { return top_order_ - depth_ + 1; }
  int winding_cutoff() const { return winding_cutoff_; }
  bool complete() const { return complete_; }
  /// Lowest degree whose layer is known exactly.
  int known_down_to() const;

  const std::map<int, WindingSeries>& layers() const { return layers_; }
  NcElement coefficient(int degree, int winding) const;
  bool is_zero() const { return layers_.empty(); }

  /// Accumulates into (degree, winding). Windings beyond the cutoff are dropped
  /// and their l1 mass is recorded as overflow.
  void add(int degree, int winding, const NcElement& c);

  /// l1 mass discarded by the winding cutoff (including upstream overflow).
  double winding_overflow() const { return overflow_; }
  void add_overflow(double mass) { overflow_ += mass; }

  /// sum_w e^{i w phi} c_{degree,w}
  NcElement layer_at(int degree, double phi) const;

  /// sum_d r^d layer_at(d, phi) at xi != 0.
  NcElement evaluate(double xi1, double xi2) const;

  bool has_exact() const { return static_cast<bool>(exact_); }
  const ExactSymbol& exact() const { return exact_; }
  void attach_exact(ExactSymbol f) { exact_ = std::move(f); }

  GradedSymbol& operator*=(cplx c);

 private:
  DeformationAngle theta_;
  int top_order_;
  int depth_;
  int winding_cutoff_;
  bool complete_;
  double overflow_ = 0.0;
  std::map<int, WindingSeries> layers_;
  ExactSymbol exact_;
};

GradedSymbol operator+(const GradedSymbol& p, const GradedSymbol& q);
GradedSymbol operator-(const GradedSymbol& p, const GradedSymbol& q);
GradedSymbol operator*(cplx c, GradedSymbol p);

/// Largest coefficient magnitude in the layer of the given degree.
double layer_magnitude(const GradedSymbol& s, int degree);

/// Differential-operator symbol sum a_{j1,j2} xi1^j1 xi2^j2.
class PolySymbol {
 public:
  explicit PolySymbol(DeformationAngle theta) : theta_(theta) {}

  static PolySymbol constant(const NcElement& a);
  /// a xi1^j1 xi2^j2
  static PolySymbol monomial(int j1, int j2, const NcElement& a);

  DeformationAngle theta() const { return theta_; }
  const std::map<std::pair<int, int>, NcElement>& monomials() const { return monomials_; }
  int degree() const;

  void add(int j1, int j2, const NcElement& a);
  NcElement evaluate(double xi1, double xi2) const;
  GradedSymbol to_graded(int winding_cutoff = kDefaultWindingCutoff) const;

  PolySymbol& operator+=(const PolySymbol& other);

 private:
  DeformationAngle theta_;
  std::map<std::pair<int, int>, NcElement> monomials_;
};

GradedSymbol xi_derivative(const GradedSymbol& s, int axis);

/// delta_axis applied to every coefficient.
GradedSymbol delta_symbol(int axis, const GradedSymbol& s);

/// Pointwise product rho(xi) rho'(xi), layers of degree >= order_cutoff.
GradedSymbol pointwise_product(const GradedSymbol& p, const GradedSymbol& q, int order_cutoff);

/// sigma(PQ) ~ sum 1/(l1! l2!) d1^l1 d2^l2 (p) delta1^l1 delta2^l2 (q), layers >= order_cutoff.
GradedSymbol compose(const GradedSymbol& p, const GradedSymbol& q, int order_cutoff);

/// sigma(P^*) ~ sum 1/(l1! l2!) d1^l1 d2^l2 delta1^l1 delta2^l2 (p^*).
GradedSymbol adjoint_symbol(const GradedSymbol& p, int order_cutoff);

enum class OriginPolicy {
  exact_or_zero,  // attached exact symbol if any, else negative-order layers give 0 at the origin
  strict,         // throw instead of regularizing
};

struct ApplyStats {
  int regularized = 0;  // origin evaluations where a singular layer was set to zero
};

/// Value of the symbol at an integer frequency, with the origin policy applied.
NcElement symbol_at_mode(const GradedSymbol& p, int m, int n, OriginPolicy policy, ApplyStats* stats = nullptr);

/// P(U^m V^n) = rho(m,n) U^m V^n, extended linearly.
NcElement apply_op(const GradedSymbol& p, const NcElement& a, OriginPolicy policy = OriginPolicy::exact_or_zero,
                   ApplyStats* stats = nullptr);
NcElement apply_op(const PolySymbol& p, const NcElement& a);

FiniteSectionOperator finite_section_of_op(const GradedSymbol& p, const BasisWindow& w,
                                           OriginPolicy policy = OriginPolicy::exact_or_zero,
                                           ApplyStats* stats = nullptr);
FiniteSectionOperator finite_section_of_op(const PolySymbol& p, const BasisWindow& w);

struct AngularSeries {
  std::map<int, cplx> coefficients;  // |w| <= cutoff
  double tail;                       // l1 mass of the sampled coefficients beyond the cutoff
};

/// Fourier coefficients on the unit circle by trapezoidal quadrature.
AngularSeries angular_fourier(const std::function<cplx(double)>& f, int cutoff, int samples = 0);

/// Angular series of Q(cos phi, sin phi)^power, exact for tau = i.
AngularSeries quadratic_form_power(const ModuliPoint& tau, int power, int cutoff);

/// Symbol of (c0 + Lap_tau)^{-1}: layers (-1)^j c0^j Q^{-1-j} for j < depth, with
/// the exact rational symbol attached.
GradedSymbol classicalize_resolvent(double c0, const ModuliPoint& tau, int depth, DeformationAngle theta,
                                    int winding_cutoff = kDefaultWindingCutoff);

/// Scalar |xi|^degree times an algebra coefficient, as a single-layer symbol.
GradedSymbol radial_power_symbol(int degree, const NcElement& coefficient);

/// 2 pi t(c_{-2,0}): integral over the unit circle of t(rho_{-2}).
cplx residue(const GradedSymbol& p);

enum class Verdict { elliptic, degenerate, inconclusive };

struct EllipticityReport {
  Verdict verdict;
  double constant;        // sup over directions of ||rho(xi)^{-1}|| (1+|xi|)^n in the large-|xi| limit
  double min_singular;    // smallest singular value over all directions
  double coarse_min_singular;
  int directions;
};

EllipticityReport ellipticity_check(const GradedSymbol& p, int grid, int window, double tol = 1e-8);

std::string to_string(Verdict v);
std::string pretty(const GradedSymbol& s, int precision = 6);

}  // namespace nct

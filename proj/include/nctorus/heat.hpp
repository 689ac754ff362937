#pragma once

// Parametrix of k Lap k - lambda and the heat coefficients B_0, B_2.
//
// Parametric symbols are kept in expanded form: a sum of words in the
// resolvent B0 = (Q(xi) k^2 - lambda)^{-1} and algebra atoms, each with a
// polynomial coefficient in xi. The xi-derivative of B0 is applied
// structurally, so every b_j is exact before any numerics happen.

#include "nctorus/algebra.hpp"
#include "nctorus/finite_section.hpp"
#include "nctorus/symbol.hpp"

#include <array>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace nct {

class XiPolynomial {
 public:
  using Terms = std::map<std::pair<int, int>, cplx>;  // (a, b) -> c xi1^a xi2^b

  XiPolynomial() = default;
  static XiPolynomial constant(cplx c);
  static XiPolynomial monomial(int a, int b, cplx c);
  /// Q(xi)
  static XiPolynomial quadratic_form(const ModuliPoint& tau);
  /// d Q / d xi_axis
  static XiPolynomial quadratic_form_gradient(const ModuliPoint& tau, int axis);

  const Terms& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }
  cplx evaluate(double xi1, double xi2) const;
  XiPolynomial derivative(int axis) const;

  XiPolynomial& operator+=(const XiPolynomial& other);
  XiPolynomial& operator*=(cplx c);

 private:
  void accumulate(int a, int b, cplx c);
  Terms terms_;
};

XiPolynomial operator*(const XiPolynomial& p, const XiPolynomial& q);

/// Algebra atoms delta_1^e1 delta_2^e2 (base), interned so that equal atoms
/// share one id.
class AtomTable {
 public:
  int add_base(const std::string& name, const NcElement& element);
  /// delta_1^e1 delta_2^e2 applied to the base atom behind `id`.
  int derived(int id, int e1, int e2);

  const NcElement& element(int id) const { return atoms_.at(static_cast<std::size_t>(id)).element; }
  std::string name(int id) const;
  std::size_t size() const { return atoms_.size(); }

 private:
  struct Atom {
    int base;
    int e1;
    int e2;
    NcElement element;
  };
  std::vector<std::string> base_names_;
  std::vector<NcElement> bases_;
  std::vector<Atom> atoms_;
  std::map<std::array<int, 3>, int> index_;
};

inline constexpr int kResolventFactor = -1;

class ResolventExpr {
 public:
  using Word = std::vector<int>;  // kResolventFactor or atom ids, left to right
  using Terms = std::map<Word, XiPolynomial>;

  ResolventExpr() = default;
  static ResolventExpr resolvent();
  static ResolventExpr atom(int id, const XiPolynomial& coefficient);
  static ResolventExpr scalar(const XiPolynomial& coefficient);

  const Terms& terms() const { return terms_; }
  std::size_t size() const { return terms_.size(); }
  bool is_zero() const { return terms_.empty(); }
  void add(const Word& word, const XiPolynomial& coefficient);

  ResolventExpr& operator+=(const ResolventExpr& other);
  ResolventExpr& operator-=(const ResolventExpr& other);
  ResolventExpr& operator*=(cplx c);

 private:
  Terms terms_;
};

ResolventExpr operator+(ResolventExpr a, const ResolventExpr& b);
ResolventExpr operator-(ResolventExpr a, const ResolventExpr& b);
ResolventExpr operator*(const ResolventExpr& a, const ResolventExpr& b);
ResolventExpr operator*(cplx c, ResolventExpr a);

struct LaplaceSymbolData {
  ModuliPoint tau;
  std::array<double, 3> a2_q;     // coefficients of xi1^2, xi1 xi2, xi2^2 in Q
  NcElement k2;                   // a2 = Q(xi) k^2
  std::array<NcElement, 2> a1;    // a1 = xi1 a1[0] + xi2 a1[1]
  NcElement a0;
  NcElement k_inv2;
};

/// Full symbol of k Lap k.
LaplaceSymbolData laplace_symbol(const ConformalData& cd);

struct Parametrix {
  LaplaceSymbolData symbol;
  AtomTable atoms;
  int k2_atom = 0;
  std::array<ResolventExpr, 3> a;  // a[k] of order k; a[2] without the -lambda
  std::vector<ResolventExpr> b;
  std::vector<std::size_t> term_counts;
};

/// b_0 .. b_{n_max} of the resolvent parametrix (n_max <= 2).
Parametrix parametrix_terms(const LaplaceSymbolData& ls, int n_max);

ResolventExpr xi_derivative(const ResolventExpr& e, int axis, const Parametrix& par);
/// delta_axis of a resolvent-free expression, by Leibniz over its atoms.
ResolventExpr delta_expr(const ResolventExpr& e, int axis, AtomTable& atoms);

/// Matrix value on the window at (xi, lambda); B0 by dense solve.
FiniteSectionOperator eval_expr(const ResolventExpr& e, const Parametrix& par, double xi1, double xi2, cplx lambda,
                                const BasisWindow& w, double tol = 1e-10);

/// Terms of (b_0 + .. + b_{n_max}) o (a_2 - lambda + a_1 + a_0) of parametric
/// order `order` (<= 0), without the -lambda b_{-order} term.
ResolventExpr composition_layer(Parametrix& par, int order);

struct ParametrixResidual {
  double order_minus_1;  // max entry of the order -1 layer
  double order_minus_2;
};

/// Window-matrix evaluation of the composition layers at (xi, lambda).
ParametrixResidual parametrix_residual(Parametrix& par, double xi1, double xi2, cplx lambda, const BasisWindow& w);

struct GradedParametrixCheck {
  double identity_error;  // order 0 layer minus 1
  double order_minus_1;
  double order_minus_2;
  double winding_overflow;
};

/// At lambda = 0 the b_j are classical symbols; composes them with the symbol
/// of k Lap k through the graded calculus.
GradedParametrixCheck graded_parametrix_check(const Parametrix& par, int winding_cutoff = kDefaultWindingCutoff);

/// Parabola lambda(u) = mu (u - i)^2 around [0, inf), trapezoid nodes
/// u = j h, |j| <= half_nodes. Weights carry the orientation, lambda'(u) and
/// 1/(2 pi i), so sum w_j e^{-lambda_j} (s - lambda_j)^{-1} = e^{-s}.
struct ContourSpec {
  int half_nodes = 32;
  double step = 0.0;   // 0 selects 3 / half_nodes
  double scale = 0.0;  // 0 selects pi half_nodes / 12

  double resolved_step() const;
  double resolved_scale() const;
  /// Largest spectral value the node set integrates to ~1e-12.
  double spectral_reach() const { return 25.0 * half_nodes; }
};

struct ContourNodes {
  std::vector<cplx> lambda;
  std::vector<cplx> weight;
};

ContourNodes contour_nodes(const ContourSpec& spec);

/// Max entry of (contour integral of e^{-lambda}(M - lambda)^{-1}) - e^{-M}
/// for Hermitian M.
double contour_exponential_error(const ContourSpec& spec, const Eigen::MatrixXcd& m);

struct XiQuadrature {
  int window = 24;           // basis window for the vacuum entries
  int radial_nodes = 64;     // Gauss-Legendre on [0, R]
  int angular_nodes = 64;    // trapezoid, exact for the polynomial degrees involved
  double tail_tolerance = 1e-9;
};

struct HeatCoefficientResult {
  double value;
  double imaginary_part;
  double quadrature_error;  // |I_n - I_{n/2}| radially
  double tail_bound;
  double radius;
  double min_k2;            // smallest eigenvalue of the k^2 section
  double max_k2;
  std::size_t words;
  std::size_t block_dimension;
};

/// B_{2n}: lambda over the contour, xi in polar coordinates adapted to tau.
HeatCoefficientResult heat_coefficient(int n, const Parametrix& par, const ContourSpec& contour,
                                       const XiQuadrature& quad);

/// pi / Im(tau) t(k^{-2})
double heat_b0_closed_form(const ConformalData& cd, int window = 40);

struct HeatTraceFit {
  double b0;
  double b2;
  double c2;                // guard coefficient of t^2
  double residual;          // rms of the fit
  double t_min;
  double t_max;
  double ceiling_fraction;  // admissible t need e^{-t fraction lambda_max} < 1e-12
  std::vector<std::pair<double, double>> samples;  // (t, t trace e^{-t L}) over the used window
};

/// Fits t Tr e^{-tL} = B0 + B2 t + c2 t^2 on the admissible part of t_grid.
HeatTraceFit heat_trace_fit(const std::vector<double>& eigenvalues, const std::vector<double>& t_grid,
                            double ceiling_fraction = 0.25);

/// n log-spaced values in [lo, hi].
std::vector<double> log_grid(double lo, double hi, int n);

}  // namespace nct

#include "nctorus/symbol.hpp"

#include <algorithm>
#include <climits>
#include <cmath>
#include <iomanip>
#include <limits>
#include <optional>
#include <numbers>
#include <sstream>

namespace nct {

namespace {

constexpr int kUnbounded = INT_MIN / 4;

bool same_theta(const GradedSymbol& p, const GradedSymbol& q) { return p.theta() == q.theta(); }

double factorial(int k) {
  double f = 1.0;
  for (int i = 2; i <= k; ++i) f *= i;
  return f;
}

// r^d e^{i w phi} at the integer point (m, n) != 0. When the layer is a
// polynomial (z^a zbar^b with z = m + i n) the value is computed in integer
// arithmetic so polynomial symbols act exactly.
cplx homogeneous_value(int d, int w, int m, int n) {
  if ((d + w) % 2 == 0 && d >= std::abs(w)) {
    const int a = (d + w) / 2, b = (d - w) / 2;
    cplx z(m, n), zb(m, -n), v(1.0, 0.0);
    for (int i = 0; i < a; ++i) v *= z;
    for (int i = 0; i < b; ++i) v *= zb;
    return v;
  }
  const double r = std::hypot(static_cast<double>(m), static_cast<double>(n));
  const double phi = std::atan2(static_cast<double>(n), static_cast<double>(m));
  return std::polar(std::pow(r, d), w * phi);
}

// rho * c U^m V^n accumulated into out.
void add_times_monomial(const NcElement& rho, int m, int n, cplx c, NcElement& out) {
  for (const auto& [md, v] : rho.coeffs())
    out.add(md.m + m, md.n + n, c * v * rotation_phase(rho.theta(), static_cast<long long>(md.n) * m));
}

std::optional<ExactSymbol> exact_of(const GradedSymbol& s) {
  if (s.has_exact()) return s.exact();
  if (s.complete()) return ExactSymbol([s](double x1, double x2) { return s.evaluate(x1, x2); });
  return std::nullopt;
}

GradedSymbol with_layers_of(const GradedSymbol& like, int top, int lowest, bool complete) {
  return GradedSymbol(like.theta(), top, top - lowest + 1, like.winding_cutoff(), complete);
}

bool all_zero(const std::vector<const GradedSymbol*>& v) {
  return std::all_of(v.begin(), v.end(), [](const GradedSymbol* s) { return s->is_zero(); });
}

// Table T[l1][l2] = f1^l1 f2^l2 (s) for l1 + l2 <= max_order.
template <class F1, class F2>
std::vector<std::vector<GradedSymbol>> derivative_table(const GradedSymbol& s, int max_order, F1 f1, F2 f2) {
  std::vector<std::vector<GradedSymbol>> t(static_cast<std::size_t>(max_order + 1));
  for (int l1 = 0; l1 <= max_order; ++l1) {
    auto& row = t[static_cast<std::size_t>(l1)];
    row.reserve(static_cast<std::size_t>(max_order - l1 + 1));
    row.push_back(l1 == 0 ? s : f1(t[static_cast<std::size_t>(l1 - 1)][0]));
    for (int l2 = 1; l1 + l2 <= max_order; ++l2) row.push_back(f2(row.back()));
  }
  return t;
}

// Accumulates coef * a(xi) b(xi) into out, restricted to degrees >= out.lowest_order().
// Returns true if a nonzero product fell below that range.
bool accumulate_product(const GradedSymbol& a, const GradedSymbol& b, cplx coef, GradedSymbol& out) {
  bool dropped = false;
  for (const auto& [da, wa] : a.layers())
    for (const auto& [db, wb] : b.layers()) {
      const int d = da + db;
      if (d < out.lowest_order()) {
        dropped = true;
        continue;
      }
      for (const auto& [ia, ca] : wa)
        for (const auto& [ib, cb] : wb) out.add(d, ia + ib, coef * mul(ca, cb));
    }
  return dropped;
}

}  // namespace

GradedSymbol::GradedSymbol(DeformationAngle theta, int top_order, int depth, int winding_cutoff, bool complete)
    : theta_(theta), top_order_(top_order), depth_(depth), winding_cutoff_(winding_cutoff), complete_(complete) {
  if (depth < 1) throw Error("symbol depth must be at least 1");
  if (winding_cutoff < 0) throw Error("winding cutoff must be non-negative");
}

int GradedSymbol::known_down_to() const { return complete_ ? kUnbounded : lowest_order(); }

NcElement GradedSymbol::coefficient(int degree, int winding) const {
  auto it = layers_.find(degree);
  if (it == layers_.end()) return NcElement(theta_);
  auto jt = it->second.find(winding);
  return jt == it->second.end() ? NcElement(theta_) : jt->second;
}

void GradedSymbol::add(int degree, int winding, const NcElement& c) {
  if (!(c.theta() == theta_)) throw Error("symbol coefficient has a different deformation angle");
  if (degree > top_order_) throw Error("layer degree " + std::to_string(degree) + " above top order");
  if (c.is_zero()) return;
  if (degree < lowest_order()) {
    if (!complete_) throw Error("layer degree " + std::to_string(degree) + " below retained depth");
    depth_ = top_order_ - degree + 1;
  }
  if (std::abs(winding) > winding_cutoff_) {
    overflow_ += c.l1_norm();
    return;
  }
  auto& series = layers_[degree];
  auto [it, inserted] = series.try_emplace(winding, c);
  if (!inserted) {
    it->second += c;
    if (it->second.is_zero()) series.erase(it);
  }
  if (series.empty()) layers_.erase(degree);
}

NcElement GradedSymbol::layer_at(int degree, double phi) const {
  NcElement out(theta_);
  auto it = layers_.find(degree);
  if (it == layers_.end()) return out;
  for (const auto& [w, c] : it->second) out += std::polar(1.0, w * phi) * c;
  return out;
}

NcElement GradedSymbol::evaluate(double xi1, double xi2) const {
  const double r = std::hypot(xi1, xi2);
  NcElement out(theta_);
  if (r == 0.0) {
    for (const auto& [d, series] : layers_) {
      if (d < 0) throw Error("symbol of negative order evaluated at the origin");
      if (d == 0) out += coefficient(0, 0);
    }
    return out;
  }
  const double phi = std::atan2(xi2, xi1);
  for (const auto& [d, series] : layers_) out += std::pow(r, d) * layer_at(d, phi);
  return out;
}

GradedSymbol& GradedSymbol::operator*=(cplx c) {
  for (auto& [d, series] : layers_)
    for (auto& [w, e] : series) e *= c;
  std::erase_if(layers_, [](auto& kv) {
    std::erase_if(kv.second, [](const auto& we) { return we.second.is_zero(); });
    return kv.second.empty();
  });
  overflow_ *= std::abs(c);
  if (exact_) {
    auto f = exact_;
    exact_ = [f, c](double x1, double x2) { return c * f(x1, x2); };
  }
  return *this;
}

namespace {

GradedSymbol combine(const GradedSymbol& p, const GradedSymbol& q, double sign) {
  if (!same_theta(p, q)) throw Error("symbol sum: mismatched deformation angles");
  const int top = std::max(p.top_order(), q.top_order());
  const bool complete = p.complete() && q.complete();
  const int lowest = complete ? std::min(p.lowest_order(), q.lowest_order())
                              : std::max(p.known_down_to(), q.known_down_to());
  GradedSymbol out(p.theta(), top, top - lowest + 1, std::max(p.winding_cutoff(), q.winding_cutoff()), complete);
  for (const auto* s : {&p, &q}) {
    const double f = s == &p ? 1.0 : sign;
    for (const auto& [d, series] : s->layers()) {
      if (d < lowest) continue;
      for (const auto& [w, c] : series) out.add(d, w, f * c);
    }
  }
  out.add_overflow(p.winding_overflow() + q.winding_overflow());
  auto ep = exact_of(p), eq = exact_of(q);
  if (ep && eq && (p.has_exact() || q.has_exact()))
    out.attach_exact([fp = *ep, fq = *eq, sign](double x1, double x2) { return fp(x1, x2) + sign * fq(x1, x2); });
  return out;
}

}  // namespace

GradedSymbol operator+(const GradedSymbol& p, const GradedSymbol& q) { return combine(p, q, 1.0); }
GradedSymbol operator-(const GradedSymbol& p, const GradedSymbol& q) { return combine(p, q, -1.0); }
GradedSymbol operator*(cplx c, GradedSymbol p) { return p *= c; }

double layer_magnitude(const GradedSymbol& s, int degree) {
  double m = 0.0;
  auto it = s.layers().find(degree);
  if (it == s.layers().end()) return 0.0;
  for (const auto& [w, c] : it->second) m = std::max(m, c.max_abs());
  return m;
}

PolySymbol PolySymbol::constant(const NcElement& a) { return monomial(0, 0, a); }

PolySymbol PolySymbol::monomial(int j1, int j2, const NcElement& a) {
  PolySymbol p(a.theta());
  p.add(j1, j2, a);
  return p;
}

int PolySymbol::degree() const {
  int d = 0;
  for (const auto& [j, a] : monomials_) d = std::max(d, j.first + j.second);
  return d;
}

void PolySymbol::add(int j1, int j2, const NcElement& a) {
  if (j1 < 0 || j2 < 0) throw Error("polynomial symbol exponents must be non-negative");
  if (!(a.theta() == theta_)) throw Error("polynomial symbol: mismatched deformation angles");
  if (a.is_zero()) return;
  auto [it, inserted] = monomials_.try_emplace({j1, j2}, a);
  if (!inserted) {
    it->second += a;
    if (it->second.is_zero()) monomials_.erase(it);
  }
}

NcElement PolySymbol::evaluate(double xi1, double xi2) const {
  NcElement out(theta_);
  for (const auto& [j, a] : monomials_) out += (std::pow(xi1, j.first) * std::pow(xi2, j.second)) * a;
  return out;
}

GradedSymbol PolySymbol::to_graded(int winding_cutoff) const {
  const int top = degree();
  GradedSymbol out(theta_, top, top + 1, winding_cutoff, true);
  // xi1 = (z + zbar)/2, xi2 = (z - zbar)/(2i); z^a zbar^b = r^{a+b} e^{i(a-b)phi}
  for (const auto& [j, a] : monomials_) {
    const auto [j1, j2] = j;
    const cplx scale = 1.0 / (std::pow(2.0, j1) * std::pow(cplx(0.0, 2.0), j2));
    for (int k = 0; k <= j1; ++k)
      for (int l = 0; l <= j2; ++l) {
        const double binom = std::tgamma(j1 + 1.0) / (std::tgamma(k + 1.0) * std::tgamma(j1 - k + 1.0)) *
                             std::tgamma(j2 + 1.0) / (std::tgamma(l + 1.0) * std::tgamma(j2 - l + 1.0));
        const double sgn = (j2 - l) % 2 == 0 ? 1.0 : -1.0;
        const int zpow = k + l;
        const int d = j1 + j2;
        out.add(d, 2 * zpow - d, (scale * binom * sgn) * a);
      }
  }
  return out;
}

PolySymbol& PolySymbol::operator+=(const PolySymbol& other) {
  for (const auto& [j, a] : other.monomials_) add(j.first, j.second, a);
  return *this;
}

GradedSymbol xi_derivative(const GradedSymbol& s, int axis) {
  if (axis != 1 && axis != 2) throw Error("xi_derivative: axis must be 1 or 2");
  GradedSymbol out(s.theta(), s.top_order() - 1, s.depth(), s.winding_cutoff(), s.complete());
  out.add_overflow(s.winding_overflow());
  const cplx i(0.0, 1.0);
  for (const auto& [d, series] : s.layers())
    for (const auto& [w, c] : series) {
      const double a = 0.5 * (d + w), b = 0.5 * (d - w);
      const cplx fa = axis == 1 ? cplx(a) : i * a;
      const cplx fb = axis == 1 ? cplx(b) : -i * b;
      if (fa != cplx(0.0)) out.add(d - 1, w - 1, fa * c);
      if (fb != cplx(0.0)) out.add(d - 1, w + 1, fb * c);
    }
  return out;
}

GradedSymbol delta_symbol(int axis, const GradedSymbol& s) {
  GradedSymbol out(s.theta(), s.top_order(), s.depth(), s.winding_cutoff(), s.complete());
  out.add_overflow(s.winding_overflow());
  for (const auto& [d, series] : s.layers())
    for (const auto& [w, c] : series) out.add(d, w, delta(axis, c));
  return out;
}

GradedSymbol pointwise_product(const GradedSymbol& p, const GradedSymbol& q, int order_cutoff) {
  if (!same_theta(p, q)) throw Error("pointwise_product: mismatched deformation angles");
  const int top = p.top_order() + q.top_order();
  if (order_cutoff > top) throw Error("order cutoff above the leading order of the product");
  const int low = std::max({order_cutoff, p.known_down_to() + q.top_order(), q.known_down_to() + p.top_order()});
  GradedSymbol out = with_layers_of(p, top, low, false);
  const bool dropped = accumulate_product(p, q, 1.0, out);
  const bool complete = p.complete() && q.complete() && !dropped && low == order_cutoff;
  GradedSymbol result(p.theta(), top, out.depth(), out.winding_cutoff(), complete);
  for (const auto& [d, series] : out.layers())
    for (const auto& [w, c] : series) result.add(d, w, c);
  result.add_overflow(out.winding_overflow() + p.winding_overflow() + q.winding_overflow());
  auto ep = exact_of(p), eq = exact_of(q);
  if (ep && eq && (p.has_exact() || q.has_exact()))
    result.attach_exact([fp = *ep, fq = *eq](double x1, double x2) { return mul(fp(x1, x2), fq(x1, x2)); });
  return result;
}

GradedSymbol compose(const GradedSymbol& p, const GradedSymbol& q, int order_cutoff) {
  if (!same_theta(p, q)) throw Error("compose: mismatched deformation angles");
  const int top = p.top_order() + q.top_order();
  if (order_cutoff > top) throw Error("order cutoff above the leading order of the composition");
  const int low = std::max({order_cutoff, p.known_down_to() + q.top_order(), q.known_down_to() + p.top_order()});
  const int max_l = top - low;

  auto dp = derivative_table(
      p, max_l + 1, [](const GradedSymbol& s) { return xi_derivative(s, 1); },
      [](const GradedSymbol& s) { return xi_derivative(s, 2); });
  auto dq = derivative_table(
      q, max_l + 1, [](const GradedSymbol& s) { return delta_symbol(1, s); },
      [](const GradedSymbol& s) { return delta_symbol(2, s); });

  GradedSymbol out = with_layers_of(p, top, low, false);
  bool dropped = false;
  for (int l1 = 0; l1 <= max_l; ++l1)
    for (int l2 = 0; l1 + l2 <= max_l; ++l2) {
      const double coef = 1.0 / (factorial(l1) * factorial(l2));
      dropped |= accumulate_product(dp[static_cast<std::size_t>(l1)][static_cast<std::size_t>(l2)],
                                    dq[static_cast<std::size_t>(l1)][static_cast<std::size_t>(l2)], coef, out);
    }
  // Terms of order max_l + 1 and beyond vanish identically when every
  // (d^l p)(delta^l q) with |l| = max_l + 1 has a zero factor.
  bool tail_zero = true;
  for (int l1 = 0; l1 <= max_l + 1; ++l1) {
    const auto& a = dp[static_cast<std::size_t>(l1)][static_cast<std::size_t>(max_l + 1 - l1)];
    const auto& b = dq[static_cast<std::size_t>(l1)][static_cast<std::size_t>(max_l + 1 - l1)];
    if (!all_zero({&a}) && !all_zero({&b})) tail_zero = false;
  }
  const bool complete = p.complete() && q.complete() && !dropped && tail_zero && low == order_cutoff;

  GradedSymbol result(p.theta(), top, out.depth(), out.winding_cutoff(), complete);
  for (const auto& [d, series] : out.layers())
    for (const auto& [w, c] : series) result.add(d, w, c);
  result.add_overflow(out.winding_overflow() + p.winding_overflow() + q.winding_overflow());
  return result;
}

GradedSymbol adjoint_symbol(const GradedSymbol& p, int order_cutoff) {
  const int top = p.top_order();
  if (order_cutoff > top) throw Error("order cutoff above the leading order of the symbol");
  const int low = std::max(order_cutoff, p.known_down_to());
  const int max_l = top - low;

  GradedSymbol star(p.theta(), top, p.depth(), p.winding_cutoff(), p.complete());
  for (const auto& [d, series] : p.layers())
    for (const auto& [w, c] : series) star.add(d, -w, adjoint(c));

  auto step = [](int axis) {
    return [axis](const GradedSymbol& s) { return xi_derivative(delta_symbol(axis, s), axis); };
  };
  auto t = derivative_table(star, max_l + 1, step(1), step(2));

  GradedSymbol out = with_layers_of(p, top, low, false);
  bool dropped = false;
  for (int l1 = 0; l1 <= max_l; ++l1)
    for (int l2 = 0; l1 + l2 <= max_l; ++l2) {
      const double coef = 1.0 / (factorial(l1) * factorial(l2));
      for (const auto& [d, series] : t[static_cast<std::size_t>(l1)][static_cast<std::size_t>(l2)].layers()) {
        if (d < low) {
          dropped = true;
          continue;
        }
        for (const auto& [w, c] : series) out.add(d, w, coef * c);
      }
    }
  bool tail_zero = true;
  for (int l1 = 0; l1 <= max_l + 1; ++l1)
    if (!t[static_cast<std::size_t>(l1)][static_cast<std::size_t>(max_l + 1 - l1)].is_zero()) tail_zero = false;
  const bool complete = p.complete() && !dropped && tail_zero && low == order_cutoff;

  GradedSymbol result(p.theta(), top, out.depth(), out.winding_cutoff(), complete);
  for (const auto& [d, series] : out.layers())
    for (const auto& [w, c] : series) result.add(d, w, c);
  result.add_overflow(out.winding_overflow() + p.winding_overflow());
  return result;
}

NcElement symbol_at_mode(const GradedSymbol& p, int m, int n, OriginPolicy policy, ApplyStats* stats) {
  if (p.has_exact()) return p.exact()(m, n);
  NcElement rho(p.theta());
  if (m != 0 || n != 0) {
    for (const auto& [d, series] : p.layers())
      for (const auto& [w, c] : series) rho += homogeneous_value(d, w, m, n) * c;
    return rho;
  }
  bool singular = false;
  for (const auto& [d, series] : p.layers()) {
    if (d > 0) continue;
    for (const auto& [w, c] : series) {
      if (d == 0 && w == 0)
        rho += c;
      else
        singular = true;
    }
  }
  if (singular) {
    if (policy == OriginPolicy::strict) throw Error("symbol is singular at the zero frequency");
    if (stats) ++stats->regularized;
  }
  return rho;
}

NcElement apply_op(const GradedSymbol& p, const NcElement& a, OriginPolicy policy, ApplyStats* stats) {
  if (!(p.theta() == a.theta())) throw Error("apply_op: mismatched deformation angles");
  NcElement out(a.theta());
  for (const auto& [md, c] : a.coeffs()) add_times_monomial(symbol_at_mode(p, md.m, md.n, policy, stats), md.m, md.n, c, out);
  return out;
}

namespace {

NcElement poly_at_mode(const PolySymbol& p, int m, int n) {
  NcElement rho(p.theta());
  for (const auto& [j, a] : p.monomials()) {
    double v = 1.0;
    for (int i = 0; i < j.first; ++i) v *= m;
    for (int i = 0; i < j.second; ++i) v *= n;
    rho += v * a;
  }
  return rho;
}

template <class F>
FiniteSectionOperator section_from_modes(const BasisWindow& w, DeformationAngle theta, F rho_at) {
  std::vector<Eigen::Triplet<cplx, Eigen::Index>> t;
  const int bw = w.bandwidth();
  for (int m = -bw; m <= bw; ++m)
    for (int n = -bw; n <= bw; ++n) {
      const NcElement rho = rho_at(m, n);
      const auto col = static_cast<Eigen::Index>(w.index(m, n));
      for (const auto& [md, v] : rho.coeffs()) {
        const int r = m + md.m, s = n + md.n;
        if (!w.contains(r, s)) continue;
        t.emplace_back(static_cast<Eigen::Index>(w.index(r, s)), col,
                       v * rotation_phase(theta, static_cast<long long>(md.n) * m));
      }
    }
  const auto dim = static_cast<Eigen::Index>(w.dimension());
  SparseMatrix mat(dim, dim);
  mat.setFromTriplets(t.begin(), t.end());
  return {w, std::move(mat), false};
}

}  // namespace

NcElement apply_op(const PolySymbol& p, const NcElement& a) {
  if (!(p.theta() == a.theta())) throw Error("apply_op: mismatched deformation angles");
  NcElement out(a.theta());
  for (const auto& [md, c] : a.coeffs()) add_times_monomial(poly_at_mode(p, md.m, md.n), md.m, md.n, c, out);
  return out;
}

FiniteSectionOperator finite_section_of_op(const GradedSymbol& p, const BasisWindow& w, OriginPolicy policy,
                                           ApplyStats* stats) {
  return section_from_modes(w, p.theta(), [&](int m, int n) { return symbol_at_mode(p, m, n, policy, stats); });
}

FiniteSectionOperator finite_section_of_op(const PolySymbol& p, const BasisWindow& w) {
  return section_from_modes(w, p.theta(), [&](int m, int n) { return poly_at_mode(p, m, n); });
}

AngularSeries angular_fourier(const std::function<cplx(double)>& f, int cutoff, int samples) {
  if (cutoff < 0) throw Error("angular cutoff must be non-negative");
  int M = samples > 0 ? samples : std::max(16 * cutoff, 512);
  if (M % 2) ++M;
  std::vector<cplx> vals(static_cast<std::size_t>(M));
  const double h = 2.0 * std::numbers::pi / M;
  for (int k = 0; k < M; ++k) vals[static_cast<std::size_t>(k)] = f(k * h);

  AngularSeries out{{}, 0.0};
  std::vector<std::pair<int, cplx>> all;
  double peak = 0.0;
  std::vector<cplx> roots(static_cast<std::size_t>(M));
  for (int k = 0; k < M; ++k) roots[static_cast<std::size_t>(k)] = std::polar(1.0, -k * h);
  for (int w = -M / 2 + 1; w <= M / 2; ++w) {
    cplx c(0.0, 0.0);
    const long long wm = ((w % M) + M) % M;
    for (int k = 0; k < M; ++k)
      c += vals[static_cast<std::size_t>(k)] * roots[static_cast<std::size_t>((wm * k) % M)];
    c /= static_cast<double>(M);
    all.emplace_back(w, c);
    peak = std::max(peak, std::abs(c));
  }
  const double chop = 4.0 * std::numeric_limits<double>::epsilon() * peak;
  for (const auto& [w, c] : all) {
    if (std::abs(w) > cutoff || std::abs(c) <= chop)
      out.tail += std::abs(c);
    else
      out.coefficients[w] = c;
  }
  return out;
}

AngularSeries quadratic_form_power(const ModuliPoint& tau, int power, int cutoff) {
  if (tau.re() == 0.0 && tau.im() == 1.0) return {{{0, cplx(1.0, 0.0)}}, 0.0};
  if (power >= 0) {
    // Q(cos, sin) = c0 + c2 e^{2i phi} + conj(c2) e^{-2i phi}; positive powers by convolution.
    const cplx c2((1.0 - tau.abs2()) / 4.0, -tau.re() / 2.0);
    const std::map<int, cplx> q{{-2, std::conj(c2)}, {0, (1.0 + tau.abs2()) / 2.0}, {2, c2}};
    std::map<int, cplx> acc{{0, 1.0}};
    for (int i = 0; i < power; ++i) {
      std::map<int, cplx> next;
      for (const auto& [wa, a] : acc)
        for (const auto& [wb, b] : q) next[wa + wb] += a * b;
      acc = std::move(next);
    }
    AngularSeries out{{}, 0.0};
    for (const auto& [w, c] : acc) {
      if (c == cplx(0.0, 0.0)) continue;
      if (std::abs(w) > cutoff)
        out.tail += std::abs(c);
      else
        out.coefficients[w] = c;
    }
    return out;
  }
  return angular_fourier(
      [&](double phi) { return cplx(std::pow(tau.quadratic_form(std::cos(phi), std::sin(phi)), power), 0.0); },
      cutoff);
}

GradedSymbol classicalize_resolvent(double c0, const ModuliPoint& tau, int depth, DeformationAngle theta,
                                    int winding_cutoff) {
  if (depth < 1) throw Error("classicalize_resolvent: depth must be at least 1");
  GradedSymbol out(theta, -2, 2 * depth - 1, winding_cutoff, false);
  for (int j = 0; j < depth; ++j) {
    const AngularSeries s = quadratic_form_power(tau, -1 - j, winding_cutoff);
    const double f = std::pow(-c0, j);
    for (const auto& [w, c] : s.coefficients) out.add(-2 - 2 * j, w, NcElement::scalar(theta, f * c));
    out.add_overflow(std::abs(f) * s.tail);
  }
  if (c0 > 0.0)
    out.attach_exact([c0, tau, theta](double x1, double x2) {
      return NcElement::scalar(theta, 1.0 / (c0 + tau.quadratic_form(x1, x2)));
    });
  return out;
}

GradedSymbol radial_power_symbol(int degree, const NcElement& coefficient) {
  GradedSymbol out(coefficient.theta(), degree, 1, kDefaultWindingCutoff, true);
  out.add(degree, 0, coefficient);
  return out;
}

cplx residue(const GradedSymbol& p) {
  return 2.0 * std::numbers::pi * trace_t(p.coefficient(-2, 0));
}

EllipticityReport ellipticity_check(const GradedSymbol& p, int grid, int window, double tol) {
  if (grid < 1) throw Error("ellipticity_check: grid must be positive");
  if (window < 0) throw Error("ellipticity_check: window must be non-negative");
  EllipticityReport rep{Verdict::degenerate, std::numeric_limits<double>::infinity(), 0.0, 0.0, grid};
  if (layer_magnitude(p, p.top_order()) == 0.0) return rep;

  const BasisWindow fine(window), coarse(window / 2);
  double fine_min = std::numeric_limits<double>::infinity();
  double coarse_min = std::numeric_limits<double>::infinity();
  for (int k = 0; k < grid; ++k) {
    const double phi = 2.0 * std::numbers::pi * k / grid;
    const NcElement rho = p.layer_at(p.top_order(), phi);
    fine_min = std::min(fine_min, singular_values(left_mult_matrix(rho, fine)).back());
    coarse_min = std::min(coarse_min, singular_values(left_mult_matrix(rho, coarse)).back());
  }
  rep.min_singular = fine_min;
  rep.coarse_min_singular = coarse_min;
  rep.constant = fine_min > 0.0 ? 1.0 / fine_min : std::numeric_limits<double>::infinity();
  if (fine_min < tol)
    rep.verdict = Verdict::degenerate;
  else if (fine_min < 0.75 * coarse_min)
    rep.verdict = Verdict::inconclusive;  // still falling with the window size
  else
    rep.verdict = Verdict::elliptic;
  return rep;
}

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::elliptic: return "elliptic";
    case Verdict::degenerate: return "degenerate";
    case Verdict::inconclusive: return "inconclusive";
  }
  return "unknown";
}

std::string pretty(const GradedSymbol& s, int precision) {
  std::ostringstream os;
  os << "symbol of order " << s.top_order() << ", layers " << s.top_order() << ".."
     << (s.complete() ? std::string("(complete)") : std::to_string(s.lowest_order()));
  if (s.has_exact()) os << ", exact symbol attached";
  if (s.winding_overflow() > 0.0) os << ", winding overflow " << std::setprecision(3) << s.winding_overflow();
  os << '\n';
  for (auto it = s.layers().rbegin(); it != s.layers().rend(); ++it) {
    os << "  |xi|^" << it->first << ":\n";
    for (const auto& [w, c] : it->second) {
      os << "    ";
      if (w != 0) os << "e^{" << w << "i phi} ";
      os << "(" << to_string(c, precision) << ")\n";
    }
  }
  return os.str();
}

}  // namespace nct

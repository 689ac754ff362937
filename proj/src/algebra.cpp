#include "nctorus/algebra.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <sstream>
#include <vector>

namespace nct {

namespace {

int box_radius(const Mode& md) { return std::max(std::abs(md.m), std::abs(md.n)); }

void drop_exact_zeros(NcElement::Coeffs& c) {
  std::erase_if(c, [](const auto& kv) { return kv.second == cplx(0.0, 0.0); });
}

// e^{scale L_h} applied to the vacuum vector, where L_h is the finite section
// of left multiplication on the box of the given radius. The action is summed
// as a Taylor series in substeps of operator norm at most 1 (||L_h|| <= ||h||_1).
NcElement exp_at_radius(const NcElement& h, double scale, int radius) {
  const int side = 2 * radius + 1;
  auto at = [&](int m, int n) { return static_cast<std::size_t>(m + radius) * side + (n + radius); };

  const double eta = std::abs(scale) * h.l1_norm();
  const int steps = std::max(1, static_cast<int>(std::ceil(eta)));
  const double step_scale = scale / steps;

  struct Term {
    int dm, dn;
    std::vector<cplx> by_m;  // c e^{2 pi i theta dn m} for source row m
  };
  std::vector<Term> terms;
  for (const auto& [md, c] : h.coeffs()) {
    Term t{md.m, md.n, std::vector<cplx>(static_cast<std::size_t>(side))};
    for (int m = -radius; m <= radius; ++m)
      t.by_m[static_cast<std::size_t>(m + radius)] =
          step_scale * c * rotation_phase(h.theta(), static_cast<long long>(md.n) * m);
    terms.push_back(std::move(t));
  }

  auto apply = [&](const std::vector<cplx>& x) {
    std::vector<cplx> y(x.size());
    for (int m = -radius; m <= radius; ++m)
      for (int n = -radius; n <= radius; ++n) {
        const cplx v = x[at(m, n)];
        if (v == cplx(0.0, 0.0)) continue;
        for (const Term& t : terms) {
          const int r = m + t.dm, s = n + t.dn;
          if (std::abs(r) > radius || std::abs(s) > radius) continue;
          y[at(r, s)] += t.by_m[static_cast<std::size_t>(m + radius)] * v;
        }
      }
    return y;
  };

  std::vector<cplx> v(static_cast<std::size_t>(side) * side);
  v[at(0, 0)] = 1.0;
  const double sub = eta / steps;
  for (int s = 0; s < steps; ++s) {
    std::vector<cplx> acc = v, term = v;
    double bound = 1.0;
    for (int j = 1; j < 200 && bound > 1e-18; ++j) {
      term = apply(term);
      for (auto& x : term) x /= static_cast<double>(j);
      for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += term[i];
      bound *= sub / j;
    }
    v = std::move(acc);
  }

  // Entries below 1e-20 of the total mass are underflow noise from the series.
  double mass = 0.0;
  for (const cplx& c : v) mass += std::abs(c);
  NcElement out(h.theta(), radius);
  for (int m = -radius; m <= radius; ++m)
    for (int n = -radius; n <= radius; ++n) {
      const cplx c = v[at(m, n)];
      if (std::abs(c) > 1e-20 * mass) out.set(m, n, c);
    }
  return out;
}

}  // namespace

DeformationAngle::DeformationAngle(double theta) : theta_(theta) {
  if (!(theta > 0.0 && theta < 1.0)) throw Error("deformation angle must lie in (0,1)");
}

DeformationAngle DeformationAngle::golden() { return DeformationAngle((std::sqrt(5.0) - 1.0) / 2.0); }

ModuliPoint::ModuliPoint(double re, double im) : re_(re), im_(im) {
  if (!(im > 0.0) || !std::isfinite(re) || !std::isfinite(im))
    throw Error("tau must lie in the upper half plane");
}

cplx rotation_phase(DeformationAngle theta, long long k) {
  const long double x = static_cast<long double>(theta.value()) * static_cast<long double>(k);
  const long double frac = x - std::floor(x);
  const long double angle = 2.0L * std::numbers::pi_v<long double> * frac;
  return {static_cast<double>(std::cos(angle)), static_cast<double>(std::sin(angle))};
}

NcElement::NcElement(DeformationAngle theta, int bandwidth) : theta_(theta), bandwidth_(bandwidth) {
  if (bandwidth < 0) throw Error("bandwidth must be non-negative");
}

NcElement NcElement::scalar(DeformationAngle theta, cplx c) {
  NcElement e(theta, 0);
  if (c != cplx(0.0, 0.0)) e.coeffs_[{0, 0}] = c;
  return e;
}

cplx NcElement::coeff(int m, int n) const {
  auto it = coeffs_.find({m, n});
  return it == coeffs_.end() ? cplx(0.0, 0.0) : it->second;
}

void NcElement::set(int m, int n, cplx c) {
  if (std::max(std::abs(m), std::abs(n)) > bandwidth_)
    throw Error("coefficient index (" + std::to_string(m) + "," + std::to_string(n) + ") outside bandwidth " +
                std::to_string(bandwidth_));
  if (c == cplx(0.0, 0.0))
    coeffs_.erase({m, n});
  else
    coeffs_[{m, n}] = c;
}

void NcElement::add(int m, int n, cplx c) {
  if (c == cplx(0.0, 0.0)) return;
  bandwidth_ = std::max({bandwidth_, std::abs(m), std::abs(n)});
  auto [it, inserted] = coeffs_.try_emplace({m, n}, c);
  if (!inserted) {
    it->second += c;
    if (it->second == cplx(0.0, 0.0)) coeffs_.erase(it);
  }
}

NcElement NcElement::widened(int bandwidth) const {
  NcElement out = *this;
  out.bandwidth_ = std::max(bandwidth_, bandwidth);
  return out;
}

double NcElement::l1_norm() const {
  double s = 0.0;
  for (const auto& [md, c] : coeffs_) s += std::abs(c);
  return s;
}

double NcElement::max_abs() const {
  double s = 0.0;
  for (const auto& [md, c] : coeffs_) s = std::max(s, std::abs(c));
  return s;
}

NcElement& NcElement::operator+=(const NcElement& other) {
  if (!(theta_ == other.theta_)) throw Error("mismatched deformation angles");
  bandwidth_ = std::max(bandwidth_, other.bandwidth_);
  for (const auto& [md, c] : other.coeffs_) coeffs_[md] += c;
  drop_exact_zeros(coeffs_);
  return *this;
}

NcElement& NcElement::operator-=(const NcElement& other) {
  if (!(theta_ == other.theta_)) throw Error("mismatched deformation angles");
  bandwidth_ = std::max(bandwidth_, other.bandwidth_);
  for (const auto& [md, c] : other.coeffs_) coeffs_[md] -= c;
  drop_exact_zeros(coeffs_);
  return *this;
}

NcElement& NcElement::operator*=(cplx c) {
  for (auto& [md, v] : coeffs_) v *= c;
  drop_exact_zeros(coeffs_);
  return *this;
}

NcElement operator+(NcElement a, const NcElement& b) { return a += b; }
NcElement operator-(NcElement a, const NcElement& b) { return a -= b; }
NcElement operator-(NcElement a) { return a *= -1.0; }
NcElement operator*(cplx c, NcElement a) { return a *= c; }
NcElement operator*(NcElement a, cplx c) { return a *= c; }

NcElement make_monomial(int m, int n, cplx c, DeformationAngle theta) {
  NcElement e(theta, std::max(std::abs(m), std::abs(n)));
  e.set(m, n, c);
  return e;
}

NcElement mul(const NcElement& a, const NcElement& b) {
  if (!(a.theta() == b.theta())) throw Error("mul: mismatched deformation angles");
  const int bw = a.bandwidth() + b.bandwidth();
  NcElement out(a.theta(), bw);
  if (a.is_zero() || b.is_zero()) return out;

  // (U^m V^n)(U^p V^q) = e^{2 pi i theta np} U^{m+p} V^{n+q}
  const long long span = static_cast<long long>(a.bandwidth()) * b.bandwidth();
  std::vector<cplx> phase(static_cast<std::size_t>(2 * span + 1));
  for (long long k = -span; k <= span; ++k) phase[static_cast<std::size_t>(k + span)] = rotation_phase(a.theta(), k);

  const int side = 2 * bw + 1;
  std::vector<cplx> acc(static_cast<std::size_t>(side) * side);
  for (const auto& [ma, ca] : a.coeffs()) {
    for (const auto& [mb, cb] : b.coeffs()) {
      const long long k = static_cast<long long>(ma.n) * mb.m;
      const std::size_t idx = static_cast<std::size_t>(ma.m + mb.m + bw) * side + (ma.n + mb.n + bw);
      acc[idx] += ca * cb * phase[static_cast<std::size_t>(k + span)];
    }
  }
  for (int i = 0; i < side; ++i)
    for (int j = 0; j < side; ++j) {
      const cplx v = acc[static_cast<std::size_t>(i) * side + j];
      if (v != cplx(0.0, 0.0)) out.set(i - bw, j - bw, v);
    }
  return out;
}

NcElement operator*(const NcElement& a, const NcElement& b) { return mul(a, b); }

NcElement adjoint(const NcElement& a) {
  NcElement out(a.theta(), a.bandwidth());
  for (const auto& [md, c] : a.coeffs())
    out.set(-md.m, -md.n, std::conj(c) * rotation_phase(a.theta(), static_cast<long long>(md.m) * md.n));
  return out;
}

cplx trace_t(const NcElement& a) { return a.coeff(0, 0); }

NcElement delta(int axis, const NcElement& a) {
  if (axis != 1 && axis != 2) throw Error("delta: axis must be 1 or 2");
  NcElement out(a.theta(), a.bandwidth());
  for (const auto& [md, c] : a.coeffs()) {
    const int w = axis == 1 ? md.m : md.n;
    if (w != 0) out.set(md.m, md.n, static_cast<double>(w) * c);
  }
  return out;
}

NcElement dbar(const NcElement& a, const ModuliPoint& tau) {
  return delta(1, a) + cplx(tau.re(), -tau.im()) * delta(2, a);
}

NcElement dbar_star(const NcElement& a, const ModuliPoint& tau) {
  return delta(1, a) + cplx(tau.re(), tau.im()) * delta(2, a);
}

double max_abs_difference(const NcElement& a, const NcElement& b) {
  double d = 0.0;
  for (const auto& [md, c] : a.coeffs()) d = std::max(d, std::abs(c - b.coeff(md.m, md.n)));
  for (const auto& [md, c] : b.coeffs())
    if (!a.coeffs().count(md)) d = std::max(d, std::abs(c));
  return d;
}

bool approx_equal(const NcElement& a, const NcElement& b, double tol) {
  return a.theta() == b.theta() && max_abs_difference(a, b) <= tol;
}

bool is_selfadjoint(const NcElement& a, double tol) { return max_abs_difference(a, adjoint(a)) <= tol; }

TruncateResult truncate(const NcElement& a, int bandwidth) {
  if (bandwidth < 0) throw Error("truncate: bandwidth must be non-negative");
  NcElement out(a.theta(), bandwidth);
  double dropped = 0.0;
  for (const auto& [md, c] : a.coeffs()) {
    if (box_radius(md) <= bandwidth)
      out.set(md.m, md.n, c);
    else
      dropped += std::abs(c);
  }
  return {std::move(out), dropped};
}

ExpResult exp_selfadjoint(const NcElement& h, double scale, int pad, double tol) {
  if (pad < 0) throw Error("exp_selfadjoint: pad must be non-negative");
  if (!is_selfadjoint(h, 1e-12 * std::max(1.0, h.l1_norm())))
    throw Error("exp_selfadjoint: input is not selfadjoint");
  const int radius = h.bandwidth() + pad;
  NcElement value = exp_at_radius(h, scale, radius);

  double conv = 0.0;
  if (pad > 0) {
    const NcElement coarse = exp_at_radius(h, scale, radius - 1);
    double s = 0.0;
    for (const auto& [md, c] : value.coeffs()) s += std::norm(c - coarse.coeff(md.m, md.n));
    conv = std::sqrt(s);
  } else {
    const bool trivial = h.coeffs().empty() || (h.size() == 1 && h.coeffs().count({0, 0}));
    conv = trivial ? 0.0 : std::numeric_limits<double>::infinity();
  }
  return {std::move(value), conv, conv <= tol};
}

NormBounds norm_bounds(const NcElement& a, int window) {
  if (window < 0) throw Error("norm_bounds: window must be non-negative");
  const int side = 2 * window + 1;
  const Eigen::Index dim = static_cast<Eigen::Index>(side) * side;
  Eigen::MatrixXcd mat = Eigen::MatrixXcd::Zero(dim, dim);
  auto idx = [&](int m, int n) { return static_cast<Eigen::Index>(m + window) * side + (n + window); };
  for (int m = -window; m <= window; ++m)
    for (int n = -window; n <= window; ++n)
      for (const auto& [md, c] : a.coeffs()) {
        const int r = m + md.m, s = n + md.n;
        if (std::abs(r) > window || std::abs(s) > window) continue;
        mat(idx(r, s), idx(m, n)) += c * rotation_phase(a.theta(), static_cast<long long>(md.n) * m);
      }
  double lower = 0.0;
  if (dim > 0 && !a.is_zero()) {
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(mat);
    lower = svd.singularValues()(0);
  }
  return {lower, a.l1_norm()};
}

NcElement neumann_inverse(const NcElement& a, int box, double tol, int max_terms) {
  const double c = a.l1_norm();
  if (c == 0.0) throw Error("neumann_inverse: zero element");
  const DeformationAngle th = a.theta();
  // a = c (1 - y)  =>  a^{-1} = c^{-1} sum_j y^j
  const NcElement y = NcElement::scalar(th, 1.0) - (1.0 / c) * a;
  NcElement term = NcElement::scalar(th, 1.0 / c);
  NcElement sum = term;
  for (int j = 0; j < max_terms; ++j) {
    term = truncate(mul(term, y), box).element;
    sum += term;
    if (term.l1_norm() < tol) return sum;
  }
  throw Error("neumann_inverse: series did not converge");
}

ConformalData::ConformalData(ModuliPoint tau, NcElement h, int pad, double tol)
    : tau_(tau), h_(std::move(h)), pad_(pad), tol_(tol), k_(h_.theta()), k2_(h_.theta()), k_inv2_(h_.theta()) {
  if (!is_selfadjoint(h_, tol)) throw Error("conformal factor h must be selfadjoint");
  auto k = exp_selfadjoint(h_, 0.5, pad, tol);
  auto k2 = exp_selfadjoint(h_, 1.0, pad, tol);
  auto kinv2 = exp_selfadjoint(h_, -1.0, pad, tol);
  exp_convergence_ = std::max({k.convergence, k2.convergence, kinv2.convergence});
  k_ = std::move(k.value);
  k2_ = std::move(k2.value);
  k_inv2_ = std::move(kinv2.value);

  const NcElement one = NcElement::scalar(h_.theta(), 1.0);
  const double err = max_abs_difference(mul(k_inv2_, mul(k_, k_)), one);
  if (err > tol)
    throw Error("conformal data: k^{-2} k k differs from 1 by " + std::to_string(err) + "; increase pad");
}

cplx phi(const NcElement& a, const ConformalData& cd) { return trace_t(mul(a, cd.k_inv2())); }

NcElement modular(const NcElement& a, const ConformalData& cd) { return mul(mul(cd.k_inv2(), a), cd.k2()); }

std::string to_string(const NcElement& a, int precision) {
  if (a.is_zero()) return "0";
  std::ostringstream os;
  os << std::setprecision(precision);
  bool first = true;
  for (const auto& [md, c] : a.coeffs()) {
    if (!first) os << " + ";
    first = false;
    os << "(" << c.real() << (c.imag() < 0 ? "-" : "+") << std::abs(c.imag()) << "i)";
    if (md.m != 0) os << "U^" << md.m;
    if (md.n != 0) os << "V^" << md.n;
  }
  return os.str();
}

}  // namespace nct

#include "nctorus/heat.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <set>

namespace nct {

namespace {

constexpr double kPi = std::numbers::pi;

double factorial(int k) {
  double f = 1.0;
  for (int i = 2; i <= k; ++i) f *= i;
  return f;
}

void check_axis(int axis) {
  if (axis != 1 && axis != 2) throw Error("axis must be 1 or 2");
}

}  // namespace

// ---------------------------------------------------------------- XiPolynomial

XiPolynomial XiPolynomial::constant(cplx c) { return monomial(0, 0, c); }

XiPolynomial XiPolynomial::monomial(int a, int b, cplx c) {
  XiPolynomial p;
  p.accumulate(a, b, c);
  return p;
}

XiPolynomial XiPolynomial::quadratic_form(const ModuliPoint& tau) {
  XiPolynomial p;
  p.accumulate(2, 0, 1.0);
  p.accumulate(1, 1, 2.0 * tau.re());
  p.accumulate(0, 2, tau.abs2());
  return p;
}

XiPolynomial XiPolynomial::quadratic_form_gradient(const ModuliPoint& tau, int axis) {
  check_axis(axis);
  XiPolynomial p;
  if (axis == 1) {
    p.accumulate(1, 0, 2.0);
    p.accumulate(0, 1, 2.0 * tau.re());
  } else {
    p.accumulate(1, 0, 2.0 * tau.re());
    p.accumulate(0, 1, 2.0 * tau.abs2());
  }
  return p;
}

void XiPolynomial::accumulate(int a, int b, cplx c) {
  if (c == cplx(0.0, 0.0)) return;
  auto [it, inserted] = terms_.try_emplace({a, b}, c);
  if (!inserted) {
    it->second += c;
    if (it->second == cplx(0.0, 0.0)) terms_.erase(it);
  }
}

cplx XiPolynomial::evaluate(double xi1, double xi2) const {
  cplx v(0.0, 0.0);
  for (const auto& [e, c] : terms_) v += c * (std::pow(xi1, e.first) * std::pow(xi2, e.second));
  return v;
}

XiPolynomial XiPolynomial::derivative(int axis) const {
  check_axis(axis);
  XiPolynomial out;
  for (const auto& [e, c] : terms_) {
    const int k = axis == 1 ? e.first : e.second;
    if (k == 0) continue;
    if (axis == 1)
      out.accumulate(e.first - 1, e.second, static_cast<double>(k) * c);
    else
      out.accumulate(e.first, e.second - 1, static_cast<double>(k) * c);
  }
  return out;
}

XiPolynomial& XiPolynomial::operator+=(const XiPolynomial& other) {
  for (const auto& [e, c] : other.terms_) accumulate(e.first, e.second, c);
  return *this;
}

XiPolynomial& XiPolynomial::operator*=(cplx c) {
  if (c == cplx(0.0, 0.0)) {
    terms_.clear();
    return *this;
  }
  for (auto& [e, v] : terms_) v *= c;
  return *this;
}

XiPolynomial operator*(const XiPolynomial& p, const XiPolynomial& q) {
  XiPolynomial out;
  for (const auto& [ep, cp] : p.terms())
    for (const auto& [eq, cq] : q.terms())
      out += XiPolynomial::monomial(ep.first + eq.first, ep.second + eq.second, cp * cq);
  return out;
}

// ------------------------------------------------------------------- AtomTable

int AtomTable::add_base(const std::string& name, const NcElement& element) {
  const int base = static_cast<int>(bases_.size());
  base_names_.push_back(name);
  bases_.push_back(element);
  const int id = static_cast<int>(atoms_.size());
  atoms_.push_back({base, 0, 0, element});
  index_[{base, 0, 0}] = id;
  return id;
}

int AtomTable::derived(int id, int e1, int e2) {
  const Atom& a = atoms_.at(static_cast<std::size_t>(id));
  const std::array<int, 3> key{a.base, a.e1 + e1, a.e2 + e2};
  if (auto it = index_.find(key); it != index_.end()) return it->second;
  NcElement el = bases_[static_cast<std::size_t>(key[0])];
  for (int i = 0; i < key[1]; ++i) el = delta(1, el);
  for (int i = 0; i < key[2]; ++i) el = delta(2, el);
  const int out = static_cast<int>(atoms_.size());
  atoms_.push_back({key[0], key[1], key[2], std::move(el)});
  index_[key] = out;
  return out;
}

std::string AtomTable::name(int id) const {
  const Atom& a = atoms_.at(static_cast<std::size_t>(id));
  std::string s;
  for (int i = 0; i < a.e1; ++i) s += "d1 ";
  for (int i = 0; i < a.e2; ++i) s += "d2 ";
  return s + base_names_[static_cast<std::size_t>(a.base)];
}

// -------------------------------------------------------------- ResolventExpr

ResolventExpr ResolventExpr::resolvent() {
  ResolventExpr e;
  e.add({kResolventFactor}, XiPolynomial::constant(1.0));
  return e;
}

ResolventExpr ResolventExpr::atom(int id, const XiPolynomial& coefficient) {
  ResolventExpr e;
  e.add({id}, coefficient);
  return e;
}

ResolventExpr ResolventExpr::scalar(const XiPolynomial& coefficient) {
  ResolventExpr e;
  e.add({}, coefficient);
  return e;
}

void ResolventExpr::add(const Word& word, const XiPolynomial& coefficient) {
  if (coefficient.is_zero()) return;
  auto [it, inserted] = terms_.try_emplace(word, coefficient);
  if (!inserted) {
    it->second += coefficient;
    if (it->second.is_zero()) terms_.erase(it);
  }
}

ResolventExpr& ResolventExpr::operator+=(const ResolventExpr& other) {
  for (const auto& [w, p] : other.terms_) add(w, p);
  return *this;
}

ResolventExpr& ResolventExpr::operator-=(const ResolventExpr& other) {
  for (const auto& [w, p] : other.terms_) {
    XiPolynomial neg = p;
    neg *= -1.0;
    add(w, neg);
  }
  return *this;
}

ResolventExpr& ResolventExpr::operator*=(cplx c) {
  if (c == cplx(0.0, 0.0)) {
    terms_.clear();
    return *this;
  }
  for (auto& [w, p] : terms_) p *= c;
  return *this;
}

ResolventExpr operator+(ResolventExpr a, const ResolventExpr& b) { return a += b; }
ResolventExpr operator-(ResolventExpr a, const ResolventExpr& b) { return a -= b; }
ResolventExpr operator*(cplx c, ResolventExpr a) { return a *= c; }

ResolventExpr operator*(const ResolventExpr& a, const ResolventExpr& b) {
  ResolventExpr out;
  for (const auto& [wa, pa] : a.terms())
    for (const auto& [wb, pb] : b.terms()) {
      ResolventExpr::Word w = wa;
      w.insert(w.end(), wb.begin(), wb.end());
      out.add(w, pa * pb);
    }
  return out;
}

// ------------------------------------------------------------ symbol of k Lap k

LaplaceSymbolData laplace_symbol(const ConformalData& cd) {
  const ModuliPoint& tau = cd.tau();
  const NcElement& k = cd.k();
  const NcElement d1 = delta(1, k), d2 = delta(2, k);
  const double re = tau.re(), ab = tau.abs2();
  const NcElement kd1 = k * d1, kd2 = k * d2;
  LaplaceSymbolData ls{tau,
                       {1.0, 2.0 * re, ab},
                       cd.k2(),
                       {2.0 * kd1 + (2.0 * re) * kd2, (2.0 * ab) * kd2 + (2.0 * re) * kd1},
                       k * delta(1, d1) + ab * (k * delta(2, d2)) + (2.0 * re) * (k * delta(2, d1)),
                       cd.k_inv2()};
  return ls;
}

// ------------------------------------------------------------------ parametrix

ResolventExpr xi_derivative(const ResolventExpr& e, int axis, const Parametrix& par) {
  check_axis(axis);
  ResolventExpr out;
  const XiPolynomial grad = XiPolynomial::quadratic_form_gradient(par.symbol.tau, axis);
  for (const auto& [w, p] : e.terms()) {
    out.add(w, p.derivative(axis));
    XiPolynomial coef = p * grad;
    coef *= -1.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (w[i] != kResolventFactor) continue;
      ResolventExpr::Word nw(w.begin(), w.begin() + static_cast<std::ptrdiff_t>(i));
      nw.insert(nw.end(), {kResolventFactor, par.k2_atom, kResolventFactor});
      nw.insert(nw.end(), w.begin() + static_cast<std::ptrdiff_t>(i) + 1, w.end());
      out.add(nw, coef);
    }
  }
  return out;
}

ResolventExpr delta_expr(const ResolventExpr& e, int axis, AtomTable& atoms) {
  check_axis(axis);
  ResolventExpr out;
  for (const auto& [w, p] : e.terms()) {
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (w[i] == kResolventFactor) throw Error("delta_expr: expression contains the resolvent");
      const int id = atoms.derived(w[i], axis == 1 ? 1 : 0, axis == 2 ? 1 : 0);
      if (atoms.element(id).is_zero()) continue;
      ResolventExpr::Word nw = w;
      nw[i] = id;
      out.add(nw, p);
    }
  }
  return out;
}

namespace {

ResolventExpr atom_term(const AtomTable& atoms, int id, const XiPolynomial& p) {
  if (atoms.element(id).is_zero()) return {};
  return ResolventExpr::atom(id, p);
}

ResolventExpr xi_derivative_multi(ResolventExpr e, int l1, int l2, const Parametrix& par) {
  for (int i = 0; i < l1; ++i) e = xi_derivative(e, 1, par);
  for (int i = 0; i < l2; ++i) e = xi_derivative(e, 2, par);
  return e;
}

ResolventExpr delta_multi(ResolventExpr e, int l1, int l2, AtomTable& atoms) {
  for (int i = 0; i < l1; ++i) e = delta_expr(e, 1, atoms);
  for (int i = 0; i < l2; ++i) e = delta_expr(e, 2, atoms);
  return e;
}

// sum over j <= j_max, k, l with -2 - j - |l| + k == order of
// (1/l!) d^l b_j delta^l a_k.
ResolventExpr order_terms(Parametrix& par, int order, int j_max) {
  ResolventExpr out;
  for (int j = 0; j <= j_max; ++j)
    for (int k = 0; k <= 2; ++k) {
      const int l = k - 2 - j - order;
      if (l < 0) continue;
      for (int l1 = 0; l1 <= l; ++l1) {
        const int l2 = l - l1;
        const ResolventExpr db = xi_derivative_multi(par.b[static_cast<std::size_t>(j)], l1, l2, par);
        const ResolventExpr da = delta_multi(par.a[static_cast<std::size_t>(k)], l1, l2, par.atoms);
        if (db.is_zero() || da.is_zero()) continue;
        out += (1.0 / (factorial(l1) * factorial(l2))) * (db * da);
      }
    }
  return out;
}

}  // namespace

Parametrix parametrix_terms(const LaplaceSymbolData& ls, int n_max) {
  if (n_max < 0 || n_max > 2) throw Error("parametrix_terms: n_max must be 0, 1 or 2");
  Parametrix par{ls, {}, 0, {}, {}, {}};
  par.k2_atom = par.atoms.add_base("K2", ls.k2);
  const int a11 = par.atoms.add_base("A1_1", ls.a1[0]);
  const int a12 = par.atoms.add_base("A1_2", ls.a1[1]);
  const int a0 = par.atoms.add_base("A0", ls.a0);
  par.a[2] = atom_term(par.atoms, par.k2_atom, XiPolynomial::quadratic_form(ls.tau));
  par.a[1] = atom_term(par.atoms, a11, XiPolynomial::monomial(1, 0, 1.0)) +
             atom_term(par.atoms, a12, XiPolynomial::monomial(0, 1, 1.0));
  par.a[0] = atom_term(par.atoms, a0, XiPolynomial::constant(1.0));

  const ResolventExpr b0 = ResolventExpr::resolvent();
  par.b.push_back(b0);
  for (int n = 1; n <= n_max; ++n) {
    // b_n (a_2 - lambda) = -(all order -n terms with j < n)
    ResolventExpr rest = order_terms(par, -n, n - 1);
    par.b.push_back(-1.0 * (rest * b0));
  }
  for (const auto& b : par.b) par.term_counts.push_back(b.size());
  return par;
}

ResolventExpr composition_layer(Parametrix& par, int order) {
  if (order > 0) throw Error("composition_layer: order must be <= 0");
  return order_terms(par, order, static_cast<int>(par.b.size()) - 1);
}

// ---------------------------------------------------------------- evaluation

namespace {

Eigen::MatrixXcd word_value(const ResolventExpr::Word& w, const std::map<int, Eigen::MatrixXcd>& atoms,
                            const Eigen::MatrixXcd& resolvent) {
  const auto n = resolvent.rows();
  Eigen::MatrixXcd acc = Eigen::MatrixXcd::Identity(n, n);
  for (int f : w) acc = acc * (f == kResolventFactor ? resolvent : atoms.at(f));
  return acc;
}

struct WindowEvaluator {
  const Parametrix& par;
  const BasisWindow& w;
  std::map<int, Eigen::MatrixXcd> atoms;
  Eigen::MatrixXcd resolvent;

  WindowEvaluator(const Parametrix& p, const BasisWindow& win, double xi1, double xi2, cplx lambda, double tol)
      : par(p), w(win) {
    const Eigen::MatrixXcd k2 = left_mult_matrix(par.atoms.element(par.k2_atom), w).dense();
    const double q = par.symbol.tau.quadratic_form(xi1, xi2);
    const auto n = k2.rows();
    const Eigen::MatrixXcd a = q * k2;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(a, Eigen::EigenvaluesOnly);
    double dist = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < n; ++i) dist = std::min(dist, std::abs(es.eigenvalues()(i) - lambda));
    if (dist < tol * std::max(1.0, std::abs(lambda)))
      throw Error("eval_expr: lambda is within " + std::to_string(dist) + " of the spectrum of Q(xi) k^2");
    resolvent = (a - lambda * Eigen::MatrixXcd::Identity(n, n)).partialPivLu().inverse();
  }

  const Eigen::MatrixXcd& atom(int id) {
    auto it = atoms.find(id);
    if (it == atoms.end()) it = atoms.emplace(id, left_mult_matrix(par.atoms.element(id), w).dense()).first;
    return it->second;
  }

  Eigen::MatrixXcd value(const ResolventExpr& e, double xi1, double xi2) {
    const auto n = resolvent.rows();
    Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(n, n);
    for (const auto& [word, p] : e.terms()) {
      for (int f : word)
        if (f != kResolventFactor) atom(f);
      out += p.evaluate(xi1, xi2) * word_value(word, atoms, resolvent);
    }
    return out;
  }
};

FiniteSectionOperator from_dense(const BasisWindow& w, const Eigen::MatrixXcd& m) {
  SparseMatrix s = m.sparseView();
  return FiniteSectionOperator(w, std::move(s));
}

}  // namespace

FiniteSectionOperator eval_expr(const ResolventExpr& e, const Parametrix& par, double xi1, double xi2, cplx lambda,
                                const BasisWindow& w, double tol) {
  WindowEvaluator ev(par, w, xi1, xi2, lambda, tol);
  return from_dense(w, ev.value(e, xi1, xi2));
}

ParametrixResidual parametrix_residual(Parametrix& par, double xi1, double xi2, cplx lambda, const BasisWindow& w) {
  if (par.b.size() < 3) throw Error("parametrix_residual: needs b_0, b_1 and b_2");
  const ResolventExpr l1 = composition_layer(par, -1);
  const ResolventExpr l2 = composition_layer(par, -2);
  WindowEvaluator ev(par, w, xi1, xi2, lambda, 1e-10);
  const Eigen::MatrixXcd g1 = ev.value(l1, xi1, xi2) - lambda * ev.value(par.b[1], xi1, xi2);
  const Eigen::MatrixXcd g2 = ev.value(l2, xi1, xi2) - lambda * ev.value(par.b[2], xi1, xi2);
  return {g1.cwiseAbs().maxCoeff(), g2.cwiseAbs().maxCoeff()};
}

GradedParametrixCheck graded_parametrix_check(const Parametrix& par, int winding_cutoff) {
  if (par.b.size() < 3) throw Error("graded_parametrix_check: needs b_0, b_1 and b_2");
  const DeformationAngle theta = par.symbol.k2.theta();
  const ModuliPoint tau = par.symbol.tau;
  // At lambda = 0, B0 = Q^{-1} k^{-2}; a word with c resolvents and the
  // monomial xi1^a xi2^b is homogeneous of degree a + b - 2c.
  GradedSymbol bsum(theta, -2, 3, winding_cutoff);
  std::map<std::pair<int, int>, AngularSeries> angular;
  for (const auto& bj : par.b)
    for (const auto& [word, p] : bj.terms()) {
      NcElement el = NcElement::scalar(theta, 1.0);
      int c = 0;
      for (int f : word) {
        if (f == kResolventFactor) {
          ++c;
          el = el * par.symbol.k_inv2;
        } else {
          el = el * par.atoms.element(f);
        }
      }
      for (const auto& [e, coef] : p.terms()) {
        const auto key = std::make_pair(e.first * 64 + e.second, c);
        auto it = angular.find(key);
        if (it == angular.end()) {
          const int a = e.first, b = e.second;
          it = angular
                   .emplace(key, angular_fourier(
                                     [&](double phi) {
                                       const double x = std::cos(phi), y = std::sin(phi);
                                       return cplx(std::pow(x, a) * std::pow(y, b) *
                                                       std::pow(tau.quadratic_form(x, y), -c),
                                                   0.0);
                                     },
                                     winding_cutoff))
                   .first;
        }
        const int degree = e.first + e.second - 2 * c;
        for (const auto& [w, v] : it->second.coefficients) bsum.add(degree, w, (coef * v) * el);
        bsum.add_overflow(std::abs(coef) * it->second.tail * el.l1_norm());
      }
    }

  PolySymbol a(theta);
  const auto& q = par.symbol.a2_q;
  a.add(2, 0, q[0] * par.symbol.k2);
  a.add(1, 1, q[1] * par.symbol.k2);
  a.add(0, 2, q[2] * par.symbol.k2);
  a.add(1, 0, par.symbol.a1[0]);
  a.add(0, 1, par.symbol.a1[1]);
  a.add(0, 0, par.symbol.a0);
  const GradedSymbol prod = compose(bsum, a.to_graded(winding_cutoff), -2);

  GradedParametrixCheck out{0.0, layer_magnitude(prod, -1), layer_magnitude(prod, -2), prod.winding_overflow()};
  for (const auto& [w, c] : prod.layers().count(0) ? prod.layers().at(0) : WindingSeries{}) {
    NcElement dev = c;
    if (w == 0) dev -= NcElement::scalar(theta, 1.0);
    out.identity_error = std::max(out.identity_error, dev.max_abs());
  }
  if (!prod.layers().count(0)) out.identity_error = 1.0;
  return out;
}

// ------------------------------------------------------------------- contour

double ContourSpec::resolved_step() const { return step > 0.0 ? step : 3.0 / half_nodes; }
double ContourSpec::resolved_scale() const { return scale > 0.0 ? scale : kPi * half_nodes / 12.0; }

ContourNodes contour_nodes(const ContourSpec& spec) {
  if (spec.half_nodes < 1) throw Error("contour: half_nodes must be positive");
  const double h = spec.resolved_step(), mu = spec.resolved_scale();
  ContourNodes out;
  const cplx i(0.0, 1.0);
  for (int j = -spec.half_nodes; j <= spec.half_nodes; ++j) {
    const double u = j * h;
    const cplx lam = mu * (u - i) * (u - i);
    const cplx dlam = 2.0 * mu * (u - i);
    // the parabola runs counterclockwise around [0, inf); the clockwise
    // traversal gives e^{-s}, hence the sign
    out.lambda.push_back(lam);
    out.weight.push_back(-h * dlam / (2.0 * kPi * i));
  }
  return out;
}

double contour_exponential_error(const ContourSpec& spec, const Eigen::MatrixXcd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(m);
  const auto n = m.rows();
  const Eigen::MatrixXcd exact =
      es.eigenvectors() * (-es.eigenvalues().array()).exp().matrix().asDiagonal() * es.eigenvectors().adjoint();
  const ContourNodes c = contour_nodes(spec);
  Eigen::MatrixXcd acc = Eigen::MatrixXcd::Zero(n, n);
  for (std::size_t j = 0; j < c.lambda.size(); ++j) {
    const Eigen::MatrixXcd r = (m - c.lambda[j] * Eigen::MatrixXcd::Identity(n, n)).partialPivLu().inverse();
    acc += (c.weight[j] * std::exp(-c.lambda[j])) * r;
  }
  return (acc - exact).cwiseAbs().maxCoeff();
}

// ------------------------------------------------------------- heat quadrature

namespace {

// Gauss-Legendre nodes and weights on [0, R].
void gauss_legendre(int n, double R, std::vector<double>& x, std::vector<double>& w) {
  x.assign(static_cast<std::size_t>(n), 0.0);
  w.assign(static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < n; ++i) {
    double z = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = z;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) p0 = 1.0;
      dp = n * (z * p1 - p0) / (z * z - 1.0);
      const double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    x[static_cast<std::size_t>(i)] = 0.5 * R * (1.0 - z);
    w[static_cast<std::size_t>(i)] = R / ((1.0 - z * z) * dp * dp);
  }
}

struct SuffixTrie {
  struct Node {
    std::map<int, std::size_t> children;
    std::vector<std::size_t> words;  // words fully applied at this node
  };
  std::vector<Node> nodes{Node{}};

  void insert(const ResolventExpr::Word& w, std::size_t id) {
    std::size_t cur = 0;
    for (auto it = w.rbegin(); it != w.rend(); ++it) {
      auto f = nodes[cur].children.find(*it);
      if (f == nodes[cur].children.end()) {
        nodes.push_back(Node{});
        f = nodes[cur].children.emplace(*it, nodes.size() - 1).first;
      }
      cur = f->second;
    }
    nodes[cur].words.push_back(id);
  }
};

class RadialIntegrand {
 public:
  RadialIntegrand(const ResolventExpr& e, const Parametrix& par, const ContourSpec& contour, const XiQuadrature& q)
      : tau_(par.symbol.tau) {
    const BasisWindow w(q.window);
    std::set<int> used{par.k2_atom};
    for (const auto& [word, p] : e.terms())
      for (int f : word)
        if (f != kResolventFactor) used.insert(f);
    std::map<int, FiniteSectionOperator> sections;
    std::vector<const SparseMatrix*> ptrs;
    for (int id : used) {
      auto it = sections.emplace(id, left_mult_matrix(par.atoms.element(id), w)).first;
      ptrs.push_back(&it->second.entries());
    }
    const auto comps = sparsity_components(ptrs);
    const auto vac = static_cast<Eigen::Index>(w.vacuum());
    std::vector<Eigen::Index> block;
    for (const auto& c : comps)
      if (std::find(c.begin(), c.end(), vac) != c.end()) block = c;
    const auto n = static_cast<Eigen::Index>(block.size());
    std::vector<Eigen::Index> local(w.dimension(), -1);
    for (Eigen::Index i = 0; i < n; ++i) local[static_cast<std::size_t>(block[static_cast<std::size_t>(i)])] = i;

    auto restrict = [&](const SparseMatrix& s) {
      Eigen::MatrixXcd d = Eigen::MatrixXcd::Zero(n, n);
      for (Eigen::Index col = 0; col < s.outerSize(); ++col)
        for (SparseMatrix::InnerIterator it(s, col); it; ++it) {
          const auto r = local[static_cast<std::size_t>(it.row())], c = local[static_cast<std::size_t>(it.col())];
          if (r >= 0 && c >= 0) d(r, c) = it.value();
        }
      return d;
    };
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(restrict(sections.at(par.k2_atom).entries()));
    mu_ = es.eigenvalues();
    if (mu_.minCoeff() <= 0.0) throw Error("heat_coefficient: the k^2 section is not positive");
    const Eigen::MatrixXcd& V = es.eigenvectors();
    for (int id : used) atoms_[id] = V.adjoint() * restrict(sections.at(id).entries()) * V;
    vacuum_ = V.row(local[static_cast<std::size_t>(vac)]).adjoint();
    block_ = static_cast<std::size_t>(n);

    const ContourNodes cn = contour_nodes(contour);
    lambda_ = Eigen::Map<const Eigen::VectorXcd>(cn.lambda.data(), static_cast<Eigen::Index>(cn.lambda.size()));
    pre_.resize(lambda_.size());
    for (Eigen::Index l = 0; l < lambda_.size(); ++l)
      pre_(l) = cn.weight[static_cast<std::size_t>(l)] * std::exp(-lambda_(l));

    // angular moments of the polar substitution
    // xi1 = r (cos t - (Re tau / Im tau) sin t), xi2 = r sin t / Im tau
    const int M = q.angular_nodes;
    const double ratio = tau_.re() / tau_.im();
    for (const auto& [word, p] : e.terms()) {
      std::map<int, cplx> by_power;
      for (const auto& [ex, c] : p.terms()) {
        double mom = 0.0;
        for (int k = 0; k < M; ++k) {
          const double t = 2.0 * kPi * k / M;
          const double c1 = std::cos(t) - ratio * std::sin(t), c2 = std::sin(t) / tau_.im();
          mom += std::pow(c1, ex.first) * std::pow(c2, ex.second);
        }
        by_power[ex.first + ex.second] += c * (mom * 2.0 * kPi / M);
      }
      trie_.insert(word, radial_.size());
      radial_.emplace_back(by_power.begin(), by_power.end());
    }
    words_ = radial_.size();
  }

  double min_mu() const { return mu_.minCoeff(); }
  double max_mu() const { return mu_.maxCoeff(); }
  std::size_t block() const { return block_; }
  std::size_t words() const { return words_; }

  /// r / Im(tau) sum_words G_word(r) contour-integral of the vacuum entry.
  cplx operator()(double r) const {
    const auto n = mu_.size(), L = lambda_.size();
    Eigen::MatrixXcd denom(n, L);
    for (Eigen::Index l = 0; l < L; ++l)
      for (Eigen::Index i = 0; i < n; ++i) denom(i, l) = 1.0 / (r * r * mu_(i) - lambda_(l));
    Eigen::MatrixXcd start = vacuum_.replicate(1, L);
    cplx total(0.0, 0.0);
    visit(0, start, denom, r, total);
    return total * (r / tau_.im());
  }

 private:
  void visit(std::size_t node, const Eigen::MatrixXcd& x, const Eigen::MatrixXcd& denom, double r,
             cplx& total) const {
    const auto& nd = trie_.nodes[node];
    if (!nd.words.empty()) {
      const Eigen::VectorXcd proj = (vacuum_.adjoint() * x).transpose();
      const cplx contour = (proj.array() * pre_.array()).sum();
      for (std::size_t id : nd.words) {
        cplx g(0.0, 0.0);
        for (const auto& [pw, c] : radial_[id]) g += c * std::pow(r, pw);
        total += g * contour;
      }
    }
    for (const auto& [f, child] : nd.children) {
      const Eigen::MatrixXcd y = f == kResolventFactor ? Eigen::MatrixXcd(x.cwiseProduct(denom))
                                                       : Eigen::MatrixXcd(atoms_.at(f) * x);
      visit(child, y, denom, r, total);
    }
  }

  ModuliPoint tau_;
  Eigen::VectorXd mu_;
  std::map<int, Eigen::MatrixXcd> atoms_;
  Eigen::VectorXcd vacuum_;
  Eigen::VectorXcd lambda_;
  Eigen::VectorXcd pre_;
  SuffixTrie trie_;
  std::vector<std::vector<std::pair<int, cplx>>> radial_;
  std::size_t block_ = 0;
  std::size_t words_ = 0;
};

cplx radial_integral(const RadialIntegrand& f, int nodes, double R) {
  std::vector<double> x, w;
  gauss_legendre(nodes, R, x, w);
  cplx acc(0.0, 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) acc += w[i] * f(x[i]);
  return acc;
}

}  // namespace

HeatCoefficientResult heat_coefficient(int n, const Parametrix& par, const ContourSpec& contour,
                                       const XiQuadrature& quad) {
  if (n != 0 && n != 2) throw Error("heat_coefficient: n must be 0 or 2");
  if (static_cast<std::size_t>(n) >= par.b.size()) throw Error("heat_coefficient: parametrix lacks b_" + std::to_string(n));
  if (quad.radial_nodes < 4) throw Error("heat_coefficient: radial_nodes must be at least 4");
  const RadialIntegrand f(par.b[static_cast<std::size_t>(n)], par, contour, quad);
  const double kappa = f.min_mu();
  const double im = par.symbol.tau.im();

  // Radial cutoff: the integrand decays like e^{-r^2 kappa} times a polynomial.
  double R = std::sqrt(std::log(1.0 / quad.tail_tolerance) / kappa);
  double tail = std::numeric_limits<double>::infinity();
  for (int attempt = 0; attempt < 8; ++attempt) {
    if (n == 0) {
      tail = kPi / (im * kappa) * std::exp(-R * R * kappa);
    } else {
      double g = 0.0;
      for (double s : {0.9, 0.95, 1.0}) g = std::max(g, std::abs(f(s * R)));
      tail = g / (2.0 * R * kappa);
    }
    if (tail <= quad.tail_tolerance) break;
    R *= 1.15;
  }
  if (tail > quad.tail_tolerance)
    throw Error("heat_coefficient: radial tail bound " + std::to_string(tail) + " exceeds tolerance");
  if (R * R * f.max_mu() > contour.spectral_reach())
    throw Error("heat_coefficient: spectrum up to " + std::to_string(R * R * f.max_mu()) +
                " is beyond the contour reach; increase half_nodes");

  const cplx full = radial_integral(f, quad.radial_nodes, R);
  const cplx half = radial_integral(f, quad.radial_nodes / 2, R);
  return {full.real(), full.imag(), std::abs(full - half), tail, R, kappa, f.max_mu(), f.words(), f.block()};
}

double heat_b0_closed_form(const ConformalData& cd, int window) {
  const cplx t = inverse_vacuum_expectation(left_mult_matrix(cd.k2(), BasisWindow(window)));
  return kPi / cd.tau().im() * t.real();
}

std::vector<double> log_grid(double lo, double hi, int n) {
  if (!(lo > 0.0) || !(hi > lo) || n < 2) throw Error("log_grid: need 0 < lo < hi and n >= 2");
  std::vector<double> g(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) g[static_cast<std::size_t>(i)] = lo * std::pow(hi / lo, i / (n - 1.0));
  return g;
}

HeatTraceFit heat_trace_fit(const std::vector<double>& eigenvalues, const std::vector<double>& t_grid,
                            double ceiling_fraction) {
  if (eigenvalues.empty()) throw Error("heat_trace_fit: empty spectrum");
  if (!(ceiling_fraction > 0.0 && ceiling_fraction <= 1.0)) throw Error("heat_trace_fit: bad ceiling fraction");
  const double lmax = *std::max_element(eigenvalues.begin(), eigenvalues.end());
  HeatTraceFit fit{0.0, 0.0, 0.0, 0.0, 0.0, 0.0, ceiling_fraction, {}};
  for (double t : t_grid) {
    if (!(t > 0.0)) throw Error("heat_trace_fit: t must be positive");
    if (std::exp(-t * ceiling_fraction * lmax) >= 1e-12) continue;
    double s = 0.0;
    for (auto it = eigenvalues.rbegin(); it != eigenvalues.rend(); ++it) s += std::exp(-t * *it);
    fit.samples.emplace_back(t, t * s);
  }
  if (fit.samples.size() < 3)
    throw Error("heat_trace_fit: only " + std::to_string(fit.samples.size()) +
                " admissible t values; the window is too small for this t grid");
  const auto m = static_cast<Eigen::Index>(fit.samples.size());
  Eigen::MatrixXd A(m, 3);
  Eigen::VectorXd y(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double t = fit.samples[static_cast<std::size_t>(i)].first;
    A(i, 0) = 1.0;
    A(i, 1) = t;
    A(i, 2) = t * t;
    y(i) = fit.samples[static_cast<std::size_t>(i)].second;
  }
  const Eigen::VectorXd c = A.colPivHouseholderQr().solve(y);
  fit.b0 = c(0);
  fit.b2 = c(1);
  fit.c2 = c(2);
  fit.residual = std::sqrt((A * c - y).squaredNorm() / static_cast<double>(m));
  fit.t_min = fit.samples.front().first;
  fit.t_max = fit.samples.back().first;
  return fit;
}

}  // namespace nct

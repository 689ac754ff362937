#include "doctest.h"
#include "random_elements.hpp"

#include "nctorus/symbol.hpp"

#include <cmath>
#include <numbers>

using namespace nct;
using nct::testing::golden;

namespace {

const DeformationAngle th = golden();
const ModuliPoint tau_i(0.0, 1.0);

NcElement one() { return NcElement::scalar(th, 1.0); }
NcElement U() { return make_monomial(1, 0, 1.0, th); }

NcElement default_h() { return 0.4 * (U() + adjoint(U())); }

// <x, y> = t(y^* x) in the orthonormal monomial basis
cplx inner(const NcElement& x, const NcElement& y) {
  cplx s(0.0);
  for (const auto& [md, c] : x.coeffs()) s += c * std::conj(y.coeff(md.m, md.n));
  return s;
}

double max_layer_difference(const GradedSymbol& a, const GradedSymbol& b, int down_to) {
  double d = 0.0;
  for (int deg = std::max(a.top_order(), b.top_order()); deg >= down_to; --deg)
    for (int w = -a.winding_cutoff(); w <= a.winding_cutoff(); ++w)
      d = std::max(d, max_abs_difference(a.coefficient(deg, w), b.coefficient(deg, w)));
  return d;
}

PolySymbol random_poly(std::mt19937_64& rng, int degree, int bandwidth) {
  PolySymbol p(th);
  for (int j1 = 0; j1 <= degree; ++j1)
    for (int j2 = 0; j1 + j2 <= degree; ++j2) p.add(j1, j2, nct::testing::random_element(rng, bandwidth, 3));
  return p;
}

// order-d classical layer with a few random windings of matching parity
GradedSymbol random_classical(std::mt19937_64& rng, int top, int depth, int bandwidth) {
  GradedSymbol s(th, top, depth);
  for (int d = top; d > top - depth; --d)
    for (int w = -2; w <= 2; ++w)
      if ((d - w) % 2 == 0) s.add(d, w, nct::testing::random_element(rng, bandwidth, 3, 0.5));
  return s;
}

double section_difference(const FiniteSectionOperator& a, const Eigen::MatrixXcd& b, int margin) {
  const BasisWindow& w = a.window();
  const Eigen::MatrixXcd da = a.dense();
  double d = 0.0;
  for (std::size_t r = 0; r < w.dimension(); ++r)
    for (std::size_t c = 0; c < w.dimension(); ++c) {
      const Mode mr = w.mode(r), mc = w.mode(c);
      const int inner = w.bandwidth() - margin;
      if (std::max(std::abs(mr.m), std::abs(mr.n)) > inner || std::max(std::abs(mc.m), std::abs(mc.n)) > inner) continue;
      const auto ri = static_cast<Eigen::Index>(r), ci = static_cast<Eigen::Index>(c);
      d = std::max(d, std::abs(da(ri, ci) - b(ri, ci)));
    }
  return d;
}

}  // namespace

TEST_CASE("xi derivatives follow the winding rule") {
  GradedSymbol r2(th, 2, 3, kDefaultWindingCutoff, true);
  r2.add(2, 0, one());
  const GradedSymbol d1 = xi_derivative(r2, 1);
  CHECK(d1.top_order() == 1);
  CHECK(max_abs_difference(d1.coefficient(1, 1), one()) < 1e-15);
  CHECK(max_abs_difference(d1.coefficient(1, -1), one()) < 1e-15);
  const GradedSymbol two_xi1 = PolySymbol::monomial(1, 0, 2.0 * one()).to_graded();
  CHECK(max_layer_difference(d1, two_xi1, 0) < 1e-15);

  GradedSymbol c(th, 0, 1, kDefaultWindingCutoff, true);
  c.add(0, 0, one());
  CHECK(xi_derivative(c, 1).is_zero());

  const GradedSymbol xy = PolySymbol::monomial(1, 1, one()).to_graded();
  CHECK(max_layer_difference(xi_derivative(xy, 2), PolySymbol::monomial(1, 0, one()).to_graded(), 0) < 1e-15);
}

TEST_CASE("xi derivatives match finite differences on non-polynomial layers") {
  GradedSymbol s(th, -2, 1);
  s.add(-2, 0, one());
  s.add(-2, 2, cplx(0.3, 0.1) * one());
  s.add(-2, -2, cplx(0.3, -0.1) * one());
  for (int axis : {1, 2}) {
    const GradedSymbol ds = xi_derivative(s, axis);
    for (double phi : {0.2, 1.3, 2.9}) {
      const double x = 1.7 * std::cos(phi), y = 1.7 * std::sin(phi), h = 1e-5;
      const cplx fd = ((axis == 1 ? s.evaluate(x + h, y) : s.evaluate(x, y + h)).coeff(0, 0) -
                       (axis == 1 ? s.evaluate(x - h, y) : s.evaluate(x, y - h)).coeff(0, 0)) /
                      (2 * h);
      CHECK(std::abs(ds.evaluate(x, y).coeff(0, 0) - fd) < 1e-8);
    }
  }
}

TEST_CASE("polynomial symbols convert exactly") {
  std::mt19937_64 rng(4);
  const PolySymbol p = random_poly(rng, 3, 2);
  const GradedSymbol g = p.to_graded();
  CHECK(g.complete());
  CHECK(g.top_order() == 3);
  for (auto [x, y] : {std::pair{0.3, -1.2}, std::pair{2.0, 0.5}, std::pair{-1.1, -0.4}})
    CHECK(max_abs_difference(g.evaluate(x, y), p.evaluate(x, y)) < 1e-13);
  for (const auto& [d, series] : g.layers())
    for (const auto& [w, c] : series) {
      CHECK(std::abs(w) <= d);
      CHECK((d - w) % 2 == 0);
    }
}

TEST_CASE("composition of differential operators") {
  const GradedSymbol d1 = PolySymbol::monomial(1, 0, one()).to_graded();
  const GradedSymbol sq = compose(d1, d1, 0);
  CHECK(sq.top_order() == 2);
  CHECK(sq.complete());
  CHECK(max_layer_difference(sq, PolySymbol::monomial(2, 0, one()).to_graded(), 0) < 1e-15);

  std::mt19937_64 rng(8);
  const NcElement a = nct::testing::random_element(rng, 2, 4);
  const NcElement b = nct::testing::random_element(rng, 2, 4);
  const PolySymbol pa = PolySymbol::monomial(1, 0, a), pb = PolySymbol::monomial(1, 0, b);
  const GradedSymbol ab = compose(pa.to_graded(), pb.to_graded(), 0);
  PolySymbol expected = PolySymbol::monomial(2, 0, mul(a, b));
  expected += PolySymbol::monomial(1, 0, mul(a, delta(1, b)));
  CHECK(max_layer_difference(ab, expected.to_graded(), 0) < 1e-13);

  for (int m = -3; m <= 3; ++m)
    for (int n = -3; n <= 3; ++n) {
      const NcElement x = make_monomial(m, n, 1.0, th);
      CHECK(max_abs_difference(apply_op(ab, x), apply_op(pa, apply_op(pb, x))) < 1e-12);
    }
}

TEST_CASE("composition matches operator products on finite sections") {
  std::mt19937_64 rng(15);
  const BasisWindow w(6);
  for (int i = 0; i < 20; ++i) {
    const PolySymbol p = random_poly(rng, 2, 1);
    const PolySymbol q = random_poly(rng, 2, 1);
    const GradedSymbol pq = compose(p.to_graded(), q.to_graded(), 0);
    CHECK(pq.complete());
    const Eigen::MatrixXcd prod = finite_section_of_op(p, w).dense() * finite_section_of_op(q, w).dense();
    CHECK(section_difference(finite_section_of_op(pq, w), prod, 2) < 1e-12 * std::max(1.0, prod.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("adjoint symbols") {
  const cplx c(0.4, -1.3);
  const GradedSymbol cx = PolySymbol::monomial(1, 0, NcElement::scalar(th, c)).to_graded();
  CHECK(max_layer_difference(adjoint_symbol(cx, 0),
                             PolySymbol::monomial(1, 0, NcElement::scalar(th, std::conj(c))).to_graded(), 0) < 1e-15);

  std::mt19937_64 rng(21);
  const NcElement a = nct::testing::random_element(rng, 2, 4);
  const GradedSymbol pa = PolySymbol::monomial(1, 0, a).to_graded();
  PolySymbol expected = PolySymbol::monomial(1, 0, adjoint(a));
  expected += PolySymbol::constant(delta(1, adjoint(a)));
  CHECK(max_layer_difference(adjoint_symbol(pa, 0), expected.to_graded(), 0) < 1e-13);

  const ModuliPoint tau(0.5, 1.5);
  PolySymbol lap(th);
  lap.add(2, 0, one());
  lap.add(1, 1, 2.0 * tau.re() * one());
  lap.add(0, 2, tau.abs2() * one());
  const GradedSymbol gl = lap.to_graded();
  CHECK(max_layer_difference(adjoint_symbol(gl, 0), gl, 0) < 1e-14);
}

TEST_CASE("adjoint pairing on monomials") {
  std::mt19937_64 rng(31);
  for (int i = 0; i < 20; ++i) {
    const PolySymbol p = random_poly(rng, 2, 2);
    const GradedSymbol g = p.to_graded();
    const GradedSymbol gs = adjoint_symbol(g, 0);
    CHECK(gs.complete());
    CHECK(max_layer_difference(adjoint_symbol(gs, 0), g, 0) < 1e-12);
    const NcElement u = nct::testing::random_element(rng, 3, 5);
    const NcElement v = nct::testing::random_element(rng, 3, 5);
    CHECK(std::abs(inner(apply_op(g, u), v) - inner(u, apply_op(gs, v))) < 1e-10);
  }
}

TEST_CASE("composition is associative above the cutoff") {
  std::mt19937_64 rng(41);
  for (int i = 0; i < 10; ++i) {
    const GradedSymbol p = random_classical(rng, 1, 4, 2);
    const GradedSymbol q = random_classical(rng, 0, 4, 2);
    const GradedSymbol r = random_classical(rng, 2, 4, 1);
    const int cutoff = 0;
    const GradedSymbol left = compose(compose(p, q, -2), r, cutoff);
    const GradedSymbol right = compose(p, compose(q, r, -1), cutoff);
    CHECK(left.lowest_order() == right.lowest_order());
    CHECK(max_layer_difference(left, right, left.lowest_order()) < 1e-12);
  }
}

TEST_CASE("degree bookkeeping") {
  std::mt19937_64 rng(43);
  const GradedSymbol p = random_classical(rng, 1, 3, 1);
  const GradedSymbol q = random_classical(rng, -2, 3, 1);
  const GradedSymbol pq = compose(p, q, -3);
  CHECK(pq.top_order() == -1);
  CHECK(pq.lowest_order() == -3);
  const GradedSymbol dp = xi_derivative(p, 2);
  CHECK(dp.top_order() == 0);
  CHECK(dp.lowest_order() == p.lowest_order() - 1);
  for (const auto& [d, s] : dp.layers()) CHECK(d <= 0);
  CHECK_THROWS_AS(compose(p, q, 0), Error);
}

TEST_CASE("residue is a trace") {
  std::mt19937_64 rng(47);
  for (auto [a, b] : {std::pair{1, -3}, std::pair{0, -2}, std::pair{2, -4}, std::pair{-1, -1}}) {
    const GradedSymbol p = random_classical(rng, a, 4, 2);
    const GradedSymbol q = random_classical(rng, b, 4, 2);
    const cplx r = residue(compose(p, q, -2) - compose(q, p, -2));
    CHECK(std::abs(r) < 1e-10);
  }
}

TEST_CASE("operator action") {
  const GradedSymbol d1 = PolySymbol::monomial(1, 0, one()).to_graded();
  const NcElement x = make_monomial(3, -2, 1.0, th);
  CHECK(max_abs_difference(apply_op(d1, x), 3.0 * x) < 1e-15);

  std::mt19937_64 rng(2);
  const NcElement a = nct::testing::random_element(rng, 3, 6);
  const GradedSymbol id = PolySymbol::constant(one()).to_graded();
  CHECK(max_abs_difference(apply_op(id, a), a) < 1e-15);

  const GradedSymbol res = classicalize_resolvent(1.0, tau_i, 2, th);
  for (int m = -3; m <= 3; ++m)
    for (int n = -3; n <= 3; ++n)
      CHECK(max_abs_difference(apply_op(res, make_monomial(m, n, 1.0, th)),
                               make_monomial(m, n, 1.0 / (1.0 + m * m + n * n), th)) < 1e-15);
}

TEST_CASE("finite sections of symbols") {
  const BasisWindow w(4);
  const FiniteSectionOperator id = finite_section_of_op(PolySymbol::constant(one()).to_graded(), w);
  CHECK((id.dense() - Eigen::MatrixXcd::Identity(81, 81)).norm() == 0.0);

  const ModuliPoint tau(1.0, 1.0);
  PolySymbol lap(th);
  lap.add(2, 0, one());
  lap.add(1, 1, 2.0 * tau.re() * one());
  lap.add(0, 2, tau.abs2() * one());
  CHECK((finite_section_of_op(lap.to_graded(), w).dense() - flat_laplacian_matrix(tau, w).dense()).norm() < 1e-12);
  CHECK((finite_section_of_op(lap, w).dense() - flat_laplacian_matrix(tau, w).dense()).norm() == 0.0);

  const GradedSymbol inv = radial_power_symbol(-2, one());
  ApplyStats stats;
  const FiniteSectionOperator s = finite_section_of_op(inv, w, OriginPolicy::exact_or_zero, &stats);
  CHECK(stats.regularized == 1);
  CHECK(s.at(w.vacuum(), w.vacuum()) == cplx(0.0));
  for (int m = -4; m <= 4; ++m)
    for (int n = -4; n <= 4; ++n)
      if (m != 0 || n != 0)
        CHECK(std::abs(s.at(w.index(m, n), w.index(m, n)) - 1.0 / (m * m + n * n)) < 1e-15);
  CHECK_THROWS_AS(finite_section_of_op(inv, w, OriginPolicy::strict), Error);
}

TEST_CASE("classicalized resolvent") {
  const GradedSymbol s1 = classicalize_resolvent(1.0, tau_i, 1, th);
  CHECK(s1.top_order() == -2);
  CHECK(s1.layers().size() == 1);
  CHECK(max_abs_difference(s1.coefficient(-2, 0), one()) == 0.0);

  const GradedSymbol s2 = classicalize_resolvent(1.0, tau_i, 2, th);
  CHECK(s2.layers().size() == 2);
  CHECK(max_abs_difference(s2.coefficient(-4, 0), -1.0 * one()) == 0.0);

  const ModuliPoint tau(1.0, 1.0);
  const GradedSymbol s = classicalize_resolvent(1.0, tau, 1, th);
  const GradedSymbol wide = classicalize_resolvent(1.0, tau, 1, th, 96);
  CHECK(s.coefficient(-2, 2).max_abs() > 0.05);
  // Q^{-1} decays like 0.447^{|w|/2} in winding for tau = 1+i
  CHECK(s.winding_overflow() > 1e-7);
  CHECK(s.winding_overflow() < 1e-5);
  CHECK(wide.winding_overflow() < 1e-12);  // sampled-noise floor
  for (int k = 0; k < 64; ++k) {
    const double phi = 2.0 * std::numbers::pi * k / 64.0 + 0.01;
    const double q = tau.quadratic_form(std::cos(phi), std::sin(phi));
    CHECK(std::abs(s.layer_at(-2, phi).coeff(0, 0) - 1.0 / q) <= s.winding_overflow());
    CHECK(std::abs(wide.layer_at(-2, phi).coeff(0, 0) - 1.0 / q) < 1e-13);
  }
}

TEST_CASE("residues") {
  CHECK(std::abs(residue(classicalize_resolvent(1.0, tau_i, 1, th)) - 2.0 * std::numbers::pi) < 1e-10);
  CHECK(std::abs(residue(classicalize_resolvent(1.0, tau_i, 3, th)) - 2.0 * std::numbers::pi) < 1e-10);
  CHECK(residue(radial_power_symbol(-3, one())) == cplx(0.0));

  const ConformalData cd(tau_i, default_h());
  GradedSymbol p(th, -2, 1);
  p.add(-2, 0, cd.k_inv2());
  p.add(-2, 2, 0.2 * cd.k_inv2());
  cplx quad(0.0);
  for (int k = 0; k < 4096; ++k) quad += trace_t(p.layer_at(-2, 2.0 * std::numbers::pi * k / 4096.0));
  quad *= 2.0 * std::numbers::pi / 4096.0;
  CHECK(std::abs(residue(p) - quad) < 1e-12);
  CHECK(std::abs(residue(p) - 2.0 * std::numbers::pi * trace_t(cd.k_inv2())) < 1e-12);
}

TEST_CASE("ellipticity") {
  PolySymbol lap(th);
  lap.add(2, 0, one());
  lap.add(0, 2, one());
  const EllipticityReport flat = ellipticity_check(lap.to_graded(), 16, 4);
  CHECK(flat.verdict == Verdict::elliptic);
  CHECK(flat.constant == doctest::Approx(1.0));

  const EllipticityReport zero = ellipticity_check(GradedSymbol(th, 0, 1), 8, 2);
  CHECK(zero.verdict == Verdict::degenerate);

  const ConformalData cd(tau_i, default_h());
  PolySymbol a2(th);
  a2.add(2, 0, cd.k2());
  a2.add(0, 2, cd.k2());
  const EllipticityReport pert = ellipticity_check(a2.to_graded(), 16, 8);
  CHECK(pert.verdict == Verdict::elliptic);
  // ||k^{-2}|| = e^{0.8}, min over directions of Q is 1
  CHECK(pert.constant == doctest::Approx(std::exp(0.8)).epsilon(0.02));
  CHECK(pert.constant <= std::exp(0.8) + 1e-9);

  // 1 + U has 0 in its spectrum: singular values keep falling with the window
  GradedSymbol deg(th, 0, 1);
  deg.add(0, 0, one() + U());
  CHECK(ellipticity_check(deg, 4, 8).verdict != Verdict::elliptic);
}

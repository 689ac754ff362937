#include "doctest.h"
#include "random_elements.hpp"

#include "nctorus/algebra.hpp"

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

using namespace nct;
using nct::testing::golden;

namespace {

const DeformationAngle th = golden();

NcElement U() { return make_monomial(1, 0, 1.0, th); }
NcElement V() { return make_monomial(0, 1, 1.0, th); }

// Normal-orders a word in the letters U, u (= U^-1), V, v (= V^-1) by adjacent
// swaps, counting the phase exponent: V^a U^b = e^{2 pi i theta ab} U^b V^a.
struct Normal {
  int m = 0, n = 0;
  long long phase = 0;
};

Normal normal_order(std::string w) {
  auto is_u = [](char c) { return c == 'U' || c == 'u'; };
  auto sgn = [](char c) { return (c == 'U' || c == 'V') ? 1 : -1; };
  Normal out;
  bool swapped = true;
  while (swapped) {
    swapped = false;
    for (std::size_t i = 0; i + 1 < w.size(); ++i) {
      if (!is_u(w[i]) && is_u(w[i + 1])) {
        out.phase += sgn(w[i]) * sgn(w[i + 1]);
        std::swap(w[i], w[i + 1]);
        swapped = true;
      }
    }
  }
  for (char c : w) (is_u(c) ? out.m : out.n) += sgn(c);
  return out;
}

std::string word(int m, int n) {
  std::string s(static_cast<std::size_t>(std::abs(m)), m >= 0 ? 'U' : 'u');
  s += std::string(static_cast<std::size_t>(std::abs(n)), n >= 0 ? 'V' : 'v');
  return s;
}

cplx phase(long long k) { return std::exp(cplx(0.0, 2.0 * std::numbers::pi * th.value() * static_cast<double>(k))); }

}  // namespace

TEST_CASE("monomials and generators") {
  const NcElement one = make_monomial(0, 0, 1.0, th);
  CHECK(one.bandwidth() == 0);
  CHECK(one.coeff(0, 0) == cplx(1.0));
  CHECK(U().coeff(1, 0) == cplx(1.0));
  CHECK(V().coeff(0, 1) == cplx(1.0));
  CHECK(make_monomial(2, -3, cplx(0.5, 1.0), th).bandwidth() == 3);
}

TEST_CASE("deformation angle and moduli validation") {
  CHECK_THROWS_AS(DeformationAngle(0.0), Error);
  CHECK_THROWS_AS(DeformationAngle(1.0), Error);
  CHECK_THROWS_AS(ModuliPoint(0.3, 0.0), Error);
  CHECK(ModuliPoint(1.0, 1.0).quadratic_form(1.0, 1.0) == doctest::Approx(5.0));
}

TEST_CASE("product rule") {
  const NcElement uv = mul(U(), V());
  CHECK(uv.size() == 1);
  CHECK(uv.coeff(1, 1) == cplx(1.0));

  const NcElement vu = mul(V(), U());
  CHECK(std::abs(vu.coeff(1, 1) - phase(1)) < 1e-15);

  // U^2 V * U V^3 against generator-string rewriting
  const NcElement p = mul(make_monomial(2, 1, 1.0, th), make_monomial(1, 3, 1.0, th));
  const Normal nf = normal_order("UUV" + std::string("UVVV"));
  CHECK(nf.m == 3);
  CHECK(nf.n == 4);
  CHECK(nf.phase == 1);
  CHECK(std::abs(p.coeff(3, 4) - phase(nf.phase)) < 1e-14);
  CHECK(p.bandwidth() == 5);

  CHECK_THROWS_AS(mul(U(), make_monomial(1, 0, 1.0, DeformationAngle(0.3))), Error);
}

TEST_CASE("random monomial products match word rewriting") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> d(-4, 4);
  for (int i = 0; i < 200; ++i) {
    const int m = d(rng), n = d(rng), p = d(rng), q = d(rng);
    const Normal nf = normal_order(word(m, n) + word(p, q));
    const NcElement prod = mul(make_monomial(m, n, 1.0, th), make_monomial(p, q, 1.0, th));
    REQUIRE(nf.m == m + p);
    REQUIRE(nf.n == n + q);
    CHECK(std::abs(prod.coeff(m + p, n + q) - phase(nf.phase)) < 1e-13);
  }
}

TEST_CASE("adjoint") {
  CHECK(approx_equal(adjoint(make_monomial(0, 0, 1.0, th)), make_monomial(0, 0, 1.0, th)));
  // (UV)^* = V^-1 U^-1, rewritten
  const Normal nf = normal_order("vu");
  const NcElement a = adjoint(mul(U(), V()));
  CHECK(std::abs(a.coeff(nf.m, nf.n) - phase(nf.phase)) < 1e-14);
  CHECK(std::abs(a.coeff(-1, -1) - phase(1)) < 1e-14);
  const NcElement iu = adjoint(make_monomial(1, 0, cplx(0.0, 1.0), th));
  CHECK(iu.coeff(-1, 0) == cplx(0.0, -1.0));
}

TEST_CASE("trace and derivations") {
  CHECK(trace_t(make_monomial(0, 0, 1.0, th)) == cplx(1.0));
  CHECK(trace_t(make_monomial(3, -2, 1.0, th)) == cplx(0.0));
  CHECK(approx_equal(delta(1, U()), U()));
  CHECK(delta(2, make_monomial(0, 0, 1.0, th)).is_zero());
  const NcElement lhs = delta(1, mul(U(), V()));
  const NcElement rhs = mul(delta(1, U()), V()) + mul(U(), delta(1, V()));
  CHECK(approx_equal(lhs, rhs));
  CHECK(lhs.coeff(1, 1) == cplx(1.0));
  CHECK_THROWS_AS(delta(3, U()), Error);

  const ModuliPoint i(0.0, 1.0), two_i(0.0, 2.0);
  CHECK(approx_equal(dbar(U(), i), U()));
  CHECK(approx_equal(dbar(V(), i), make_monomial(0, 1, cplx(0.0, -1.0), th)));
  CHECK(approx_equal(dbar_star(V(), two_i), make_monomial(0, 1, cplx(0.0, 2.0), th)));
}

TEST_CASE("trace cyclicity against the direct coefficient sum") {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 50; ++i) {
    const NcElement a = nct::testing::random_element(rng, 8, 20);
    const NcElement b = nct::testing::random_element(rng, 8, 20);
    cplx oracle(0.0);
    for (const auto& [md, c] : a.coeffs())
      oracle += c * b.coeff(-md.m, -md.n) * phase(-static_cast<long long>(md.m) * md.n);
    CHECK(std::abs(trace_t(mul(a, b)) - oracle) < 1e-12);
    CHECK(std::abs(trace_t(mul(a, b)) - trace_t(mul(b, a))) < 1e-12);
  }
}

TEST_CASE("truncate") {
  const auto r = truncate(make_monomial(3, 0, 1.0, th), 2);
  CHECK(r.element.is_zero());
  CHECK(r.discarded_mass == doctest::Approx(1.0));

  std::mt19937_64 rng(3);
  const NcElement a = nct::testing::random_element(rng, 3, 10);
  const NcElement b = nct::testing::random_element(rng, 3, 10);
  CHECK(approx_equal(truncate(a, a.bandwidth()).element, a, 0.0));

  // naive convolution then drop
  NcElement naive(th, 2);
  for (const auto& [ma, ca] : a.coeffs())
    for (const auto& [mb, cb] : b.coeffs()) {
      const int m = ma.m + mb.m, n = ma.n + mb.n;
      if (std::abs(m) <= 2 && std::abs(n) <= 2) naive.add(m, n, ca * cb * phase(static_cast<long long>(ma.n) * mb.m));
    }
  CHECK(approx_equal(truncate(mul(a, b), 2).element, naive, 1e-13));
}

TEST_CASE("exponential of a selfadjoint element") {
  const NcElement zero(th);
  CHECK(approx_equal(exp_selfadjoint(zero, 0.5, 4).value, make_monomial(0, 0, 1.0, th)));
  const NcElement s = NcElement::scalar(th, 0.7);
  CHECK(approx_equal(exp_selfadjoint(s, 1.0, 3).value, NcElement::scalar(th, std::exp(0.7))));

  const NcElement h = 0.4 * (U() + adjoint(U()));
  const ExpResult e = exp_selfadjoint(h, 1.0, 24);
  CHECK(e.converged);

  // power series; the remainder after 40 terms is below 0.8^40/40!
  NcElement series = NcElement::scalar(th, 1.0);
  NcElement term = series;
  for (int j = 1; j <= 40; ++j) {
    term = (1.0 / j) * mul(term, h);
    series += term;
  }
  CHECK(max_abs_difference(e.value, series) < 1e-10);

  // commutative subalgebra: e^{c(z + 1/z)} = sum I_k(2c) z^k
  for (int k = 0; k <= 6; ++k) CHECK(std::abs(e.value.coeff(k, 0) - std::cyl_bessel_i(k, 0.8)) < 1e-12);

  CHECK_THROWS_AS(exp_selfadjoint(U(), 1.0, 4), Error);
  CHECK_FALSE(exp_selfadjoint(h, 1.0, 0).converged);
}

TEST_CASE("exponential inverse consistency") {
  std::mt19937_64 rng(17);
  for (int i = 0; i < 10; ++i) {
    const NcElement h = nct::testing::random_selfadjoint(rng, 2, 4, 0.15);
    const ExpResult p = exp_selfadjoint(h, 1.0, 12);
    const ExpResult m = exp_selfadjoint(h, -1.0, 12);
    CHECK(max_abs_difference(mul(p.value, m.value), NcElement::scalar(th, 1.0)) <
          1e-9 + 10.0 * (p.convergence + m.convergence));
  }
}

TEST_CASE("norm bounds") {
  const NormBounds one = norm_bounds(NcElement::scalar(th, 1.0), 3);
  CHECK(one.lower == doctest::Approx(1.0));
  CHECK(one.upper == doctest::Approx(1.0));
  const NormBounds u = norm_bounds(U(), 3);
  CHECK(u.lower == doctest::Approx(1.0));
  CHECK(u.upper == doctest::Approx(1.0));

  const NcElement c = U() + adjoint(U());
  double prev = 0.0;
  for (int w : {1, 2, 4, 8}) {
    const NormBounds b = norm_bounds(c, w);
    CHECK(b.lower >= prev - 1e-12);
    CHECK(b.lower <= b.upper + 1e-12);
    CHECK(b.upper == doctest::Approx(2.0));
    prev = b.lower;
  }
  // 2 cos(pi/(2w+2)) on a path of 2w+1 sites
  CHECK(prev == doctest::Approx(2.0 * std::cos(std::numbers::pi / 18.0)).epsilon(1e-10));
}

TEST_CASE("Neumann inverse") {
  const NcElement h = 0.4 * (U() + adjoint(U()));
  const NcElement k2 = exp_selfadjoint(h, 1.0, 24).value;
  const NcElement inv = neumann_inverse(k2, 40);
  CHECK(max_abs_difference(truncate(mul(inv, k2), 10).element, NcElement::scalar(th, 1.0)) < 1e-12);
  CHECK(std::abs(trace_t(inv) - std::cyl_bessel_i(0, 0.8)) < 1e-12);
}

TEST_CASE("conformal data, phi and the modular operator") {
  const ModuliPoint tau(0.0, 1.0);
  const ConformalData flat(tau, NcElement(th));
  CHECK(std::abs(phi(NcElement::scalar(th, 1.0), flat) - 1.0) < 1e-15);

  const NcElement h = 0.4 * (U() + adjoint(U()));
  const ConformalData cd(tau, h);
  CHECK(std::abs(phi(NcElement::scalar(th, 1.0), cd) - trace_t(cd.k_inv2())) < 1e-15);
  CHECK(std::abs(trace_t(cd.k_inv2()) - std::cyl_bessel_i(0, 0.8)) < 1e-12);
  CHECK(approx_equal(mul(cd.k(), cd.k()), cd.k2(), 1e-10));
  CHECK(approx_equal(modular(NcElement::scalar(th, 1.0), cd), NcElement::scalar(th, 1.0), 1e-10));
  CHECK(approx_equal(modular(V(), flat), V()));

  std::mt19937_64 rng(23);
  const NcElement a = nct::testing::random_element(rng, 3, 8);
  CHECK(std::abs(trace_t(modular(a, cd)) - trace_t(a)) < 1e-10);

  CHECK_THROWS_AS(ConformalData(tau, U()), Error);
}

TEST_CASE("invariants on random inputs") {
  std::mt19937_64 rng(2024);
  for (int i = 0; i < 200; ++i) {
    const NcElement a = nct::testing::random_element(rng, 4, 12);
    const NcElement b = nct::testing::random_element(rng, 4, 12);
    const NcElement c = nct::testing::random_element(rng, 2, 6);
    // associativity
    CHECK(max_abs_difference(mul(mul(a, b), c), mul(a, mul(b, c))) < 1e-11);
    for (int j : {1, 2}) {
      // integration by parts
      CHECK(std::abs(trace_t(mul(a, delta(j, b))) + trace_t(mul(delta(j, a), b))) < 1e-10);
      // star compatibility
      CHECK(max_abs_difference(delta(j, adjoint(a)), -adjoint(delta(j, a))) < 1e-12);
      // Leibniz
      CHECK(max_abs_difference(delta(j, mul(a, b)), mul(delta(j, a), b) + mul(a, delta(j, b))) < 1e-10);
    }
    CHECK(max_abs_difference(adjoint(adjoint(a)), a) < 1e-14);
    const cplx z(0.3, -1.7);
    CHECK(max_abs_difference(adjoint(z * a), std::conj(z) * adjoint(a)) < 1e-13);
    CHECK(max_abs_difference(adjoint(mul(a, b)), mul(adjoint(b), adjoint(a))) < 1e-11);
    const cplx pos = trace_t(mul(adjoint(a), a));
    CHECK(pos.real() >= 0.0);
    CHECK(std::abs(pos.imag()) < 1e-12);
  }
}

TEST_CASE("KMS identity") {
  std::mt19937_64 rng(99);
  for (int i = 0; i < 20; ++i) {
    const NcElement h = nct::testing::random_selfadjoint(rng, 4, 2, 0.1);
    const ConformalData cd(ModuliPoint(0.0, 1.0), h, 40);
    for (int j = 0; j < 10; ++j) {
      const NcElement a = nct::testing::random_element(rng, 4, 6);
      const NcElement b = nct::testing::random_element(rng, 4, 6);
      CHECK(std::abs(phi(mul(a, b), cd) - phi(mul(b, modular(a, cd)), cd)) < 1e-10);
    }
  }
}

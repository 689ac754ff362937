#include "nctorus/acceptance.hpp"

#include "nctorus/heat.hpp"
#include "nctorus/spectral.hpp"
#include "nctorus/symbol.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <sstream>

namespace nct {

namespace {

constexpr double kPi = std::numbers::pi;

const DeformationAngle& golden() {
  static const DeformationAngle th = DeformationAngle::golden();
  return th;
}

NcElement default_h() {
  const NcElement u = make_monomial(1, 0, 1.0, golden());
  return 0.4 * (u + adjoint(u));
}

NcElement random_element(std::mt19937_64& rng, int bandwidth, int terms, double scale = 1.0) {
  std::uniform_int_distribution<int> idx(-bandwidth, bandwidth);
  std::normal_distribution<double> g(0.0, scale);
  NcElement a(golden(), bandwidth);
  for (int i = 0; i < terms; ++i) a.add(idx(rng), idx(rng), cplx(g(rng), g(rng)));
  return a;
}

NcElement random_selfadjoint(std::mt19937_64& rng, int bandwidth, int terms, double scale) {
  const NcElement a = random_element(rng, bandwidth, terms, scale);
  return 0.5 * (a + adjoint(a));
}

PolySymbol random_poly(std::mt19937_64& rng, int degree, int bandwidth) {
  PolySymbol p(golden());
  for (int j1 = 0; j1 <= degree; ++j1)
    for (int j2 = 0; j1 + j2 <= degree; ++j2) p.add(j1, j2, random_element(rng, bandwidth, 3));
  return p;
}

// <x, y> = t(y^* x)
cplx inner(const NcElement& x, const NcElement& y) {
  cplx s(0.0);
  for (const auto& [md, c] : x.coeffs()) s += c * std::conj(y.coeff(md.m, md.n));
  return s;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

struct Outcome {
  bool pass;
  std::string detail;
};

double relative(double a, double b) { return std::abs(a - b) / std::abs(b); }

double flat_slope(const ModuliPoint& tau, int N) {
  const CountingData cd(flat_spectrum(tau, N), N, kDefaultCeilingFraction, box_ceiling(tau, N));
  return weyl_slope(cd).slope;
}

std::size_t lattice_count(const ModuliPoint& tau, double lambda) {
  std::size_t c = 0;
  const int r = static_cast<int>(std::ceil(2.0 * std::sqrt(lambda) / tau.im())) + 2;
  for (int m = -r; m <= r; ++m)
    for (int n = -r; n <= r; ++n)
      if (tau.quadratic_form(m, n) < lambda) ++c;
  return c;
}

Outcome flat_weyl(double s) {
  const ModuliPoint tau(0.0, 1.0);
  constexpr int N = 400;
  const CountingData cd(flat_spectrum(tau, N), N, kDefaultCeilingFraction, box_ceiling(tau, N));
  const double slope = weyl_slope(cd).slope;
  // the counting function must reproduce the Gauss-circle count exactly
  bool counts_agree = true;
  for (double l : {1000.5, 0.5 * cd.ceiling(), cd.ceiling()})
    counts_agree = counts_agree && counting_function(cd, l) == lattice_count(tau, l);
  const double err = relative(slope, kPi);
  return {err <= 0.03 * s && counts_agree,
          fmt("slope %.6f vs pi, rel err %.2e (tol %.2e), lattice counts %s", slope, err, 0.03 * s,
              counts_agree ? "agree" : "DISAGREE")};
}

Outcome anisotropic_weyl(double s) {
  const double a = flat_slope(ModuliPoint(0.0, 2.0), 400);
  const double b = flat_slope(ModuliPoint(1.0, 1.0), 400);
  const double ea = relative(a, kPi / 2.0), eb = relative(b, kPi);
  return {ea <= 0.03 * s && eb <= 0.03 * s,
          fmt("tau=2i slope %.6f (rel err %.2e), tau=1+i slope %.6f (rel err %.2e), tol %.2e", a, ea, b, eb,
              0.03 * s)};
}

Outcome perturbed_weyl(double s) {
  const ConformalData cd(ModuliPoint(0.0, 1.0), default_h());
  constexpr int N = 48;
  const BasisWindow w(N);
  const double kmin =
      hermitian_spectrum(FiniteSectionOperator(w, left_mult_matrix(cd.k2(), w).entries(), true), true)
          .eigenvalues.front();
  const auto ev = hermitian_spectrum(perturbed_laplacian_matrix(cd, w).op, true).eigenvalues;
  const CountingData c(ev, N, kDefaultCeilingFraction, box_ceiling(cd.tau(), N, kmin));
  const double slope = weyl_slope(c).slope;
  const double target = weyl_constant_closed_form(cd).constant;
  const double err = relative(slope, target);
  return {err <= 0.10 * s, fmt("slope %.6f vs pi t(k^-2) = %.6f, rel err %.2e (tol %.2e)", slope, target, err,
                               0.10 * s)};
}

Outcome heat_routes(double s) {
  const ModuliPoint tau(0.0, 1.0);
  const auto grid = log_grid(1e-3, 0.3, 40);

  const ConformalData flat(tau, NcElement(golden()));
  const double fq = heat_coefficient(0, parametrix_terms(laplace_symbol(flat), 0), ContourSpec{}, XiQuadrature{}).value;
  const double ff = heat_trace_fit(flat_spectrum(tau, 400), grid).b0;
  const double fc = heat_b0_closed_form(flat);
  const double flat_err = std::max({std::abs(fq - kPi), std::abs(ff - kPi), std::abs(fc - kPi)});

  const ConformalData cd(tau, default_h());
  const double q = heat_coefficient(0, parametrix_terms(laplace_symbol(cd), 0), ContourSpec{}, XiQuadrature{}).value;
  const auto ev = hermitian_spectrum(perturbed_laplacian_matrix(cd, BasisWindow(48)).op, true).eigenvalues;
  const double f = heat_trace_fit(ev, grid).b0;
  const double c = heat_b0_closed_form(cd);
  const double gap = std::max({relative(q, c), relative(f, c), relative(q, f)});
  return {flat_err <= 0.01 * s && gap <= 0.05 * s,
          fmt("perturbed B0 quadrature %.6f, fit %.6f, closed form %.6f, max pairwise rel gap %.2e (tol %.2e); "
              "flat max |B0 - pi| %.2e (tol %.2e)",
              q, f, c, gap, 0.05 * s, flat_err, 0.01 * s)};
}

Outcome residue_anchor(double s) {
  const cplx r = residue(classicalize_resolvent(1.0, ModuliPoint(0.0, 1.0), 2, golden()));
  const double err = std::abs(r - 2.0 * kPi);
  return {err <= 1e-10 * s, fmt("residue %.15f%+.2ei, |res - 2 pi| %.2e (tol %.2e)", r.real(), r.imag(), err,
                                1e-10 * s)};
}

Outcome dixmier_anchor(double s) {
  std::vector<double> mu;
  for (int m = -1000; m <= 1000; ++m)
    for (int n = -1000; n <= 1000; ++n)
      if (m * m + n * n <= 1000000) mu.push_back(1.0 / (1.0 + m * m + n * n));
  const auto e = dixmier_estimate(DixmierData(std::move(mu)));
  const double err = relative(e.value, kPi);
  return {err <= 0.05 * s && e.drift < 0.02 * s,
          fmt("estimate %.6f vs pi, rel err %.2e (tol %.2e), drift %.2e (tol %.2e), %zu values", e.value, err,
              0.05 * s, e.drift, 0.02 * s, e.count)};
}

Outcome connes_ratio(double s) {
  const ConformalData cd(ModuliPoint(0.0, 1.0), default_h());
  const auto r = connes_trace_check(radial_power_symbol(-2, cd.k_inv2()), BasisWindow(48));
  const double tol = 0.15 * s;
  const bool ok = r.ratio >= 0.5 * (1.0 - tol) && r.ratio <= 0.5 * (1.0 + tol) && !r.vanishing;
  return {ok, fmt("Dixmier %.6f, residue %.6f, ratio %.4f (band [%.4f, %.4f]), drift %.2e, %zu of %zu values",
                  r.dixmier.value, r.residue.real(), r.ratio, 0.5 * (1.0 - tol), 0.5 * (1.0 + tol),
                  r.dixmier.drift, r.trusted, r.total)};
}

Outcome parametrix_identity(double s) {
  const Parametrix par = parametrix_terms(laplace_symbol(ConformalData(ModuliPoint(0.0, 1.0), default_h())), 2);
  const auto g = graded_parametrix_check(par);
  const double worst = std::max({g.identity_error, g.order_minus_1, g.order_minus_2});
  return {worst < 1e-8 * s,
          fmt("order 0 - 1: %.2e, order -1: %.2e, order -2: %.2e (tol %.2e), winding overflow %.2e",
              g.identity_error, g.order_minus_1, g.order_minus_2, 1e-8 * s, g.winding_overflow)};
}

Outcome algebraic_invariants(double s) {
  constexpr int kCases = 200;
  std::mt19937_64 rng(20240611);
  const DeformationAngle th = golden();
  struct Tally {
    const char* name;
    double tol;
    double worst = 0.0;
  };
  Tally comm{"commutation", 1e-12}, cyc{"cyclicity", 1e-10}, ibp{"integration by parts", 1e-10},
      star{"star rule", 1e-12}, leib{"Leibniz", 1e-10}, kms{"KMS", 1e-10}, pair{"adjoint pairing", 1e-10},
      comp{"composition", 1e-10};

  const NcElement U = make_monomial(1, 0, 1.0, th), V = make_monomial(0, 1, 1.0, th);
  comm.worst = max_abs_difference(mul(V, U), rotation_phase(th, 1) * mul(U, V));
  std::uniform_int_distribution<int> idx(-4, 4);
  for (int i = 0; i < kCases; ++i) {
    const int m = idx(rng), n = idx(rng), p = idx(rng), q = idx(rng);
    const NcElement x = make_monomial(m, n, 1.0, th), y = make_monomial(p, q, 1.0, th);
    const double d =
        max_abs_difference(mul(x, y), rotation_phase(th, static_cast<long long>(n) * p - static_cast<long long>(m) * q) * mul(y, x));
    comm.worst = std::max(comm.worst, d);
  }

  for (int i = 0; i < kCases; ++i) {
    const NcElement a = random_element(rng, 4, 12), b = random_element(rng, 4, 12);
    cyc.worst = std::max(cyc.worst, std::abs(trace_t(mul(a, b)) - trace_t(mul(b, a))));
    for (int j : {1, 2}) {
      ibp.worst = std::max(ibp.worst, std::abs(trace_t(mul(a, delta(j, b))) + trace_t(mul(delta(j, a), b))));
      star.worst = std::max(star.worst, max_abs_difference(delta(j, adjoint(a)), -adjoint(delta(j, a))));
      leib.worst = std::max(leib.worst,
                            max_abs_difference(delta(j, mul(a, b)), mul(delta(j, a), b) + mul(a, delta(j, b))));
    }
  }

  for (int i = 0; i < 20; ++i) {
    const ConformalData cd(ModuliPoint(0.0, 1.0), random_selfadjoint(rng, 4, 2, 0.1), 40);
    for (int j = 0; j < 10; ++j) {
      const NcElement a = random_element(rng, 4, 6), b = random_element(rng, 4, 6);
      kms.worst = std::max(kms.worst, std::abs(phi(mul(a, b), cd) - phi(mul(b, modular(a, cd)), cd)));
    }
  }

  for (int i = 0; i < kCases; ++i) {
    const GradedSymbol g = random_poly(rng, 2, 2).to_graded();
    const GradedSymbol gs = adjoint_symbol(g, 0);
    const NcElement u = random_element(rng, 3, 5), v = random_element(rng, 3, 5);
    pair.worst = std::max(pair.worst, std::abs(inner(apply_op(g, u), v) - inner(u, apply_op(gs, v))));
  }

  for (int i = 0; i < kCases; ++i) {
    const PolySymbol p = random_poly(rng, 2, 2), q = random_poly(rng, 2, 2);
    const GradedSymbol pq = compose(p.to_graded(), q.to_graded(), 0);
    const NcElement u = random_element(rng, 4, 6);
    const NcElement direct = apply_op(p, apply_op(q, u));
    comp.worst = std::max(comp.worst, max_abs_difference(apply_op(pq, u), direct) / std::max(1.0, direct.max_abs()));
  }

  bool ok = true;
  std::ostringstream os;
  for (const Tally* t : {&comm, &cyc, &ibp, &star, &leib, &kms, &pair, &comp}) {
    const bool pass = t->worst <= t->tol * s;
    ok = ok && pass;
    os << (t == &comm ? "" : ", ") << t->name << ' ' << fmt("%.1e", t->worst) << (pass ? "" : " FAIL");
  }
  os << fmt(" (%d cases each, tolerance scale %g)", kCases, s);
  return {ok, os.str()};
}

Outcome cross_construction(double s) {
  const ConformalData cd(ModuliPoint(0.0, 1.0), default_h());
  std::ostringstream os;
  bool ok = true;
  for (const auto& [N, tol] : {std::pair{16, 0.01}, std::pair{24, 0.003}}) {
    const auto pe = pencil_spectrum(gram_laplacian_matrix(cd, BasisWindow(N))).eigenvalues;
    const auto ke = hermitian_spectrum(perturbed_laplacian_matrix(cd, BasisWindow(N)).op).eigenvalues;
    double worst = std::abs(pe[0] - ke[0]);  // zero mode, absolute
    for (std::size_t j = 1; j < 10; ++j) worst = std::max(worst, relative(pe[j], ke[j]));
    const bool pass = worst <= tol * s;
    ok = ok && pass;
    os << (N == 16 ? "" : ", ") << fmt("N=%d max rel gap %.2e (tol %.2e)", N, worst, tol * s);
  }
  return {ok, os.str()};
}

struct Criterion {
  const char* name;
  double seconds_limit;
  Outcome (*run)(double);
};

const Criterion kCriteria[kCriterionCount] = {
    {"flat Weyl law", 10.0, flat_weyl},
    {"anisotropic flat Weyl law", 10.0, anisotropic_weyl},
    {"perturbed Weyl law", 600.0, perturbed_weyl},
    {"heat coefficient three-route agreement", 300.0, heat_routes},
    {"residue anchor", 1.0, residue_anchor},
    {"Dixmier anchor", 30.0, dixmier_anchor},
    {"Connes trace ratio", 600.0, connes_ratio},
    {"parametrix identity", 600.0, parametrix_identity},
    {"algebraic invariant suite", 30.0, algebraic_invariants},
    {"cross-construction spectrum", 60.0, cross_construction},
};

}  // namespace

CriterionResult run_criterion(int id, double tolerance_scale) {
  if (id < 1 || id > kCriterionCount) throw Error("run_criterion: no criterion " + std::to_string(id));
  if (!(tolerance_scale > 0.0)) throw Error("run_criterion: tolerance scale must be positive");
  const Criterion& c = kCriteria[id - 1];
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = c.run(tolerance_scale);
  } catch (const std::exception& e) {
    o = {false, std::string("error: ") + e.what()};
  }
  const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (sec > c.seconds_limit) {
    o.pass = false;
    o.detail += fmt("; runtime %.1f s over the %.0f s limit", sec, c.seconds_limit);
  }
  return {id, c.name, o.pass, o.detail, sec};
}

std::vector<CriterionResult> run_acceptance(double tolerance_scale,
                                            const std::function<void(const CriterionResult&)>& on_result) {
  std::vector<CriterionResult> out;
  for (int id = 1; id <= kCriterionCount; ++id) {
    out.push_back(run_criterion(id, tolerance_scale));
    if (on_result) on_result(out.back());
  }
  return out;
}

std::string tap_line(const CriterionResult& r) {
  return std::string(r.pass ? "ok " : "not ok ") + std::to_string(r.id) + " - " + r.name + ": " + r.detail +
         fmt(" [%.2f s]", r.seconds);
}

}  // namespace nct

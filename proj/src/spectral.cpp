#include "nctorus/spectral.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>
#include <numbers>
#include <ostream>
#include <string_view>

namespace nct {

namespace {

constexpr double kPi = std::numbers::pi;

struct LineFit {
  double slope;
  double intercept;
  double stderr_slope;
};

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  const auto n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0) throw Error("line fit: degenerate abscissae");
  const double slope = sxy / sxx, icpt = my - slope * mx;
  double rss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - icpt - slope * x[i];
    rss += r * r;
  }
  const double se = x.size() > 2 ? std::sqrt(rss / (n - 2.0) / sxx) : 0.0;
  return {slope, icpt, se};
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, static_cast<std::size_t>(res.ptr - buf));
}

}  // namespace

double box_ceiling(const ModuliPoint& tau, int bandwidth, double k_min2) {
  if (bandwidth < 1) throw Error("box_ceiling: bandwidth must be positive");
  if (!(k_min2 > 0.0)) throw Error("box_ceiling: k_min2 must be positive");
  const double n = bandwidth;
  return k_min2 * n * n * tau.im() * tau.im() / std::max(1.0, tau.abs2());
}

CountingData::CountingData(std::vector<double> eigenvalues, int bandwidth, double ceiling_fraction, double box_limit)
    : eigenvalues_(std::move(eigenvalues)), bandwidth_(bandwidth), fraction_(ceiling_fraction) {
  if (eigenvalues_.empty()) throw Error("CountingData: empty spectrum");
  if (!(ceiling_fraction > 0.0 && ceiling_fraction <= 1.0)) throw Error("CountingData: bad ceiling fraction");
  std::sort(eigenvalues_.begin(), eigenvalues_.end());
  if (eigenvalues_.front() < -1e-8) throw Error("CountingData: negative eigenvalue");
  const double by_fraction = fraction_ * eigenvalues_.back();
  if (box_limit < by_fraction) {
    ceiling_ = box_limit;
    source_ = "box";
  } else {
    ceiling_ = by_fraction;
    source_ = "fraction";
  }
}

std::size_t counting_function(const CountingData& cd, double lambda) {
  if (lambda > cd.ceiling())
    throw Error("counting_function: lambda " + format_double(lambda) + " is above the validity ceiling " +
                format_double(cd.ceiling()));
  const auto& ev = cd.eigenvalues();
  return static_cast<std::size_t>(std::lower_bound(ev.begin(), ev.end(), lambda) - ev.begin());
}

SlopeFit weyl_slope(const CountingData& cd, double lo, double hi, int points) {
  if (!(lo > 0.0) || !(hi > lo)) throw Error("weyl_slope: empty fit window");
  if (hi > cd.ceiling()) throw Error("weyl_slope: fit window exceeds the validity ceiling");
  if (points < 3) throw Error("weyl_slope: need at least 3 points");
  std::vector<double> x, y;
  for (int i = 0; i < points; ++i) {
    const double l = lo * std::pow(hi / lo, i / (points - 1.0));
    x.push_back(l);
    y.push_back(static_cast<double>(counting_function(cd, l)));
  }
  const LineFit f = fit_line(x, y);
  return {f.slope, f.stderr_slope, f.intercept, lo, hi, points};
}

SlopeFit weyl_slope(const CountingData& cd) { return weyl_slope(cd, cd.ceiling() / 20.0, cd.ceiling()); }

WeylClosedForm weyl_constant_closed_form(const ConformalData& cd, int window) {
  const double t = inverse_vacuum_expectation(left_mult_matrix(cd.k2(), BasisWindow(window))).real();
  const double s = trace_t(neumann_inverse(cd.k2(), window)).real();
  const double im = cd.tau().im();
  return {kPi / im * t, 4.0 * kPi * kPi / im * t, t, s, std::abs(t - s)};
}

DixmierData::DixmierData(std::vector<double> values) : mu_(std::move(values)) {
  for (double v : mu_)
    if (!(v >= 0.0)) throw Error("DixmierData: values must be non-negative");
  std::sort(mu_.begin(), mu_.end(), std::greater<>());
  sums_.resize(mu_.size());
  double acc = 0.0, comp = 0.0;  // compensated summation
  for (std::size_t i = 0; i < mu_.size(); ++i) {
    const double yv = mu_[i] - comp;
    const double t = acc + yv;
    comp = (t - acc) - yv;
    acc = t;
    sums_[i] = acc;
  }
}

namespace {

// Slope of Trace_N against log N on log-spaced N in [a, b].
double log_slope(const DixmierData& dd, double a, double b) {
  constexpr int kSamples = 200;
  std::vector<double> x, y;
  long long prev = -1;
  for (int i = 0; i < kSamples; ++i) {
    const auto N = static_cast<long long>(std::llround(a * std::pow(b / a, i / (kSamples - 1.0))));
    if (N == prev || N < 1 || N > static_cast<long long>(dd.size())) continue;
    prev = N;
    x.push_back(std::log(static_cast<double>(N)));
    y.push_back(dd.partial_sums()[static_cast<std::size_t>(N - 1)]);
  }
  if (x.size() < 3) throw Error("dixmier_estimate: fit window too short");
  return fit_line(x, y).slope;
}

}  // namespace

DixmierEstimate dixmier_estimate(const DixmierData& dd) {
  const std::size_t n = dd.size();
  if (n < kMinDixmierValues)
    throw Error("dixmier_estimate: need at least " + std::to_string(kMinDixmierValues) + " values, got " +
                std::to_string(n));
  const double nn = static_cast<double>(n);
  DixmierEstimate e{};
  e.count = n;
  e.value = log_slope(dd, std::sqrt(nn), nn);
  e.slope_early = log_slope(dd, nn / 4.0, nn / 2.0);
  e.slope_late = log_slope(dd, nn / 2.0, nn);
  const double scale = std::max(std::abs(e.slope_late), std::numeric_limits<double>::min());
  e.drift = std::abs(e.slope_late - e.slope_early) / scale;

  // (1/log n) int_1^{log n} Trace_{e^s} / s ds, trapezoid in s
  constexpr int kNodes = 4000;
  const double smax = std::log(nn);
  double integral = 0.0;
  for (int i = 0; i <= kNodes; ++i) {
    const double s = 1.0 + (smax - 1.0) * i / kNodes;
    const auto N = std::clamp<std::size_t>(static_cast<std::size_t>(std::floor(std::exp(s))), 1, n);
    const double f = dd.partial_sums()[N - 1] / s;
    integral += (i == 0 || i == kNodes ? 0.5 : 1.0) * f;
  }
  e.cesaro = smax > 1.0 ? integral * (smax - 1.0) / kNodes / smax : 0.0;
  return e;
}

ConnesTraceReport connes_trace_check(const GradedSymbol& p, const BasisWindow& w, double trusted_fraction) {
  if (p.top_order() != -2) throw Error("connes_trace_check: symbol must have top order -2");
  if (!(trusted_fraction > 0.0 && trusted_fraction <= 1.0)) throw Error("connes_trace_check: bad trusted fraction");
  const FiniteSectionOperator op = finite_section_of_op(p, w);
  std::vector<double> sv = singular_values(op);
  const int N = w.bandwidth();
  const double r2 = 2.0 * trusted_fraction * N * N;
  std::size_t trusted = 0;
  for (int m = -N; m <= N; ++m)
    for (int n = -N; n <= N; ++n)
      if (m * m + n * n <= r2) ++trusted;
  ConnesTraceReport rep{};
  rep.total = sv.size();
  rep.trusted = std::min(trusted, sv.size());
  rep.bandwidth = N;
  sv.resize(rep.trusted);
  double sup = 0.0;
  for (std::size_t i = 0; i < sv.size(); ++i) sup = std::max(sup, (i + 1.0) * sv[i]);
  rep.dixmier = dixmier_estimate(DixmierData(std::move(sv)));
  rep.residue = residue(p);
  rep.half_residue = 0.5 * rep.residue.real();
  rep.ratio = std::abs(rep.residue) > 0.0 ? rep.dixmier.value / rep.residue.real()
                                          : std::numeric_limits<double>::quiet_NaN();
  // a summable sequence shows a log-slope that keeps shrinking between the
  // dyadic windows; a measurable L^{1,infty} one settles
  rep.vanishing = std::abs(rep.dixmier.value) <= 0.05 * sup ||
                  rep.dixmier.slope_late < kVanishingDecay * rep.dixmier.slope_early;
  return rep;
}

ResolventTraceReport perturbed_resolvent_trace(const ConformalData& cd, int bandwidth) {
  const BasisWindow w(bandwidth);
  const FiniteSectionOperator k2(w, left_mult_matrix(cd.k2(), w).entries(), true);
  const double kmin = hermitian_spectrum(k2, true).eigenvalues.front();
  const double ceiling = box_ceiling(cd.tau(), bandwidth, kmin);
  const auto ev = hermitian_spectrum(perturbed_laplacian_matrix(cd, w).op, true).eigenvalues;
  std::vector<double> mu;
  for (double l : ev)
    if (l < ceiling) mu.push_back(1.0 / (1.0 + std::max(l, 0.0)));
  ResolventTraceReport rep{};
  rep.trusted = mu.size();
  rep.bandwidth = bandwidth;
  rep.dixmier = dixmier_estimate(DixmierData(std::move(mu)));
  rep.closed_form = weyl_constant_closed_form(cd).constant;
  rep.ratio = rep.dixmier.value / rep.closed_form;
  return rep;
}

void write_staircase_csv(std::ostream& os, const CountingData& cd, const std::vector<double>& lambdas) {
  os << "lambda,count\r\n";
  for (double l : lambdas) os << format_double(l) << ',' << counting_function(cd, l) << "\r\n";
}

}  // namespace nct

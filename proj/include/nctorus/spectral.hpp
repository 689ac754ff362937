#pragma once

// Eigenvalue counting, Weyl-law slopes and Dixmier-trace estimates.

#include "nctorus/algebra.hpp"
#include "nctorus/finite_section.hpp"
#include "nctorus/symbol.hpp"

#include <cstddef>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

namespace nct {

inline constexpr double kDefaultCeilingFraction = 0.25;

/// Largest lambda such that every mode with Q(xi) k_min^2 <= lambda lies in
/// the window {|m|,|n| <= N}: k_min2 N^2 Im(tau)^2 / max(1, |tau|^2).
double box_ceiling(const ModuliPoint& tau, int bandwidth, double k_min2 = 1.0);

class CountingData {
 public:
  /// The validity ceiling is min(fraction * max eigenvalue, box_limit).
  CountingData(std::vector<double> eigenvalues, int bandwidth, double ceiling_fraction = kDefaultCeilingFraction,
               double box_limit = std::numeric_limits<double>::infinity());

  const std::vector<double>& eigenvalues() const { return eigenvalues_; }
  int bandwidth() const { return bandwidth_; }
  double ceiling() const { return ceiling_; }
  double ceiling_fraction() const { return fraction_; }
  /// Which bound set the ceiling: "fraction" or "box".
  const std::string& ceiling_source() const { return source_; }

 private:
  std::vector<double> eigenvalues_;
  int bandwidth_;
  double fraction_;
  double ceiling_;
  std::string source_;
};

/// #{j : lambda_j < lambda}
std::size_t counting_function(const CountingData& cd, double lambda);

struct SlopeFit {
  double slope;
  double stderr_slope;
  double intercept;
  double lo;
  double hi;
  int points;
};

/// Least-squares N(lambda) = a + s lambda over a log-spaced grid in [lo, hi].
SlopeFit weyl_slope(const CountingData& cd, double lo, double hi, int points = 64);
/// Fit over [ceiling / 20, ceiling].
SlopeFit weyl_slope(const CountingData& cd);

struct WeylClosedForm {
  double constant;       // pi / Im(tau) t(k^{-2})
  double volume;         // 4 pi^2 / Im(tau) t(k^{-2})
  double trace_k_inv2;   // by the vacuum entry of the inverse section of k^2
  double series_trace;   // by the Neumann series in the algebra
  double route_gap;
};

WeylClosedForm weyl_constant_closed_form(const ConformalData& cd, int window = 40);

class DixmierData {
 public:
  /// Any order; the values are sorted descending.
  explicit DixmierData(std::vector<double> values);

  const std::vector<double>& values() const { return mu_; }
  /// partial_sums()[N-1] = mu_1 + ... + mu_N
  const std::vector<double>& partial_sums() const { return sums_; }
  std::size_t size() const { return mu_.size(); }

 private:
  std::vector<double> mu_;
  std::vector<double> sums_;
};

struct DixmierEstimate {
  double value;        // slope of Trace_N against log N over [sqrt(n), n]
  double drift;        // relative slope change between [n/4, n/2] and [n/2, n]
  double cesaro;       // Cesaro mean of Trace_N / log N at N = n
  double slope_early;  // slope over [n/4, n/2]
  double slope_late;   // slope over [n/2, n]
  std::size_t count;
};

inline constexpr std::size_t kMinDixmierValues = 1000;
/// Late/early dyadic slope ratio below which the partial sums are read as convergent.
inline constexpr double kVanishingDecay = 0.8;

DixmierEstimate dixmier_estimate(const DixmierData& dd);

struct ConnesTraceReport {
  cplx residue;
  double half_residue;
  DixmierEstimate dixmier;
  double ratio;              // Dixmier / residue
  bool vanishing;            // negligible against sup n mu_n, or log-slope still decaying
  std::size_t trusted;       // leading singular values used
  std::size_t total;
  int bandwidth;
};

/// Singular values of the finite section of P_rho, the leading ones whose
/// count matches the lattice points with m^2 + n^2 <= 2 fraction N^2, fed to
/// dixmier_estimate and compared with residue(p).
ConnesTraceReport connes_trace_check(const GradedSymbol& p, const BasisWindow& w,
                                     double trusted_fraction = kDefaultCeilingFraction);

struct ResolventTraceReport {
  DixmierEstimate dixmier;
  double closed_form;  // pi t(k^{-2}) / Im(tau)
  double ratio;
  std::size_t trusted;
  int bandwidth;
};

/// (1 + Lap')^{-1} from the K D K spectrum below the box ceiling, against the
/// Weyl constant.
ResolventTraceReport perturbed_resolvent_trace(const ConformalData& cd, int bandwidth);

/// Staircase of N(lambda) on the given grid, as CSV.
void write_staircase_csv(std::ostream& os, const CountingData& cd, const std::vector<double>& lambdas);

}  // namespace nct

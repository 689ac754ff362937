#pragma once

// Experiment configuration and the runners behind the command line tool.

#include "nctorus/algebra.hpp"
#include "nctorus/io.hpp"

#include <filesystem>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

namespace nct {

inline constexpr int kSchemaVersion = 1;

std::string library_version();

struct HCoefficient {
  int m = 0;
  int n = 0;
  double re = 0.0;
  double im = 0.0;
  bool operator==(const HCoefficient&) const = default;
};

struct ContourConfig {
  int half_nodes = 32;
  double step = 0.0;   // 0: 3 / half_nodes
  double scale = 0.0;  // 0: pi half_nodes / 12
  bool operator==(const ContourConfig&) const = default;
};

struct WeylConfig {
  std::string spectrum = "perturbed";  // or "flat-analytic"
  int analytic_bandwidth = 400;
  double ceiling_fraction = 0.25;
  double fit_lo = 0.0;  // 0: ceiling / 20
  double fit_hi = 0.0;  // 0: ceiling
  int fit_points = 64;
  double tolerance = 0.10;
  bool operator==(const WeylConfig&) const = default;
};

struct HeatConfig {
  std::string spectrum = "perturbed";  // or "flat-analytic"
  int analytic_bandwidth = 400;
  int window = 24;
  int radial_nodes = 64;
  int angular_nodes = 64;
  double tail_tolerance = 1e-9;
  double t_min = 1e-3;
  double t_max = 0.3;
  int t_points = 40;
  double ceiling_fraction = 0.25;
  double tolerance = 0.05;       // pairwise relative agreement of the three B0 routes
  double flat_tolerance = 0.01;  // absolute, when h = 0
  double contour_tolerance = 1e-8;
  bool operator==(const HeatConfig&) const = default;
};

struct ConnesConfig {
  std::string preset = "k-weighted";  // resolvent | k-weighted | order-3 | perturbed-resolvent | file
  std::string symbol_path;            // GradedSymbol JSON for preset "file"
  double trusted_fraction = 0.25;
  double tolerance = 0.15;
  bool operator==(const ConnesConfig&) const = default;
};

struct ExperimentConfig {
  double theta = 0.0;  // default: golden ratio conjugate
  double tau_re = 0.0;
  double tau_im = 1.0;
  std::vector<HCoefficient> h;  // symmetrized, sorted by (m, n)
  int bandwidth = 48;
  int pad = 24;
  ContourConfig contour;
  WeylConfig weyl;
  HeatConfig heat;
  ConnesConfig connes;
  std::string output_dir = "out";

  bool operator==(const ExperimentConfig&) const = default;

  DeformationAngle deformation() const { return DeformationAngle(theta); }
  ModuliPoint tau() const { return ModuliPoint(tau_re, tau_im); }
  NcElement h_element() const;
  bool flat() const { return h.empty(); }
};

/// Error located in a configuration source.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& source, int line, const std::string& message);
  int line() const { return line_; }

 private:
  int line_;
};

/// The shipped default: theta golden, tau = i, h = 0.4 (U + U^*), N = 48.
ExperimentConfig default_config();

/// Completes h to a selfadjoint coefficient list: each (m, n, c) gets its
/// partner (-m, -n, conj(c) e^{2 pi i theta m n}); a supplied partner must agree.
std::vector<HCoefficient> symmetrize_h(const std::vector<HCoefficient>& h, double theta, double tol = 1e-12);

/// Parses a config (or a run manifest carrying one under "config") over the defaults.
ExperimentConfig load_config(const std::string& text, const std::string& source = "<config>");
ExperimentConfig load_config_file(const std::filesystem::path& path);
Json emit_config(const ExperimentConfig& cfg);

struct RunOptions {
  std::filesystem::path out_dir;  // empty: cfg.output_dir
  double tolerance_scale = 1.0;
};

struct RunResult {
  bool pass = false;
  Json report;
  std::vector<std::filesystem::path> files;
};

RunResult run_weyl(const ExperimentConfig& cfg, const RunOptions& opt);
RunResult run_heat(const ExperimentConfig& cfg, const RunOptions& opt);
RunResult run_residue(const ExperimentConfig& cfg, const RunOptions& opt);
RunResult run_connes_trace(const ExperimentConfig& cfg, const RunOptions& opt);
/// Acceptance suite; one TAP line per criterion on `tap`.
RunResult run_verify(const ExperimentConfig& cfg, const RunOptions& opt, std::ostream& tap);
inline constexpr int kAutoOrderCutoff = std::numeric_limits<int>::min();

/// Graded composition of two symbol files down to `order_cutoff`
/// (kAutoOrderCutoff: two orders below the product's top order).
RunResult run_compose(const std::filesystem::path& left, const std::filesystem::path& right, int order_cutoff,
                      const ExperimentConfig& cfg, const RunOptions& opt);

}  // namespace nct

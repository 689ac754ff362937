// Command line front end: one subcommand per pipeline, JSON config in, CSV and JSON reports out.

#include "nctorus/harness.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <optional>

namespace {

struct Common {
  std::string config;
  std::string out;
  std::optional<int> bandwidth;
  double tolerance_scale = 1.0;
};

nct::ExperimentConfig resolve(const Common& c) {
  nct::ExperimentConfig cfg = c.config.empty() ? nct::default_config() : nct::load_config_file(c.config);
  if (c.bandwidth) {
    if (*c.bandwidth < 1) throw nct::Error("--bandwidth must be positive");
    cfg.bandwidth = *c.bandwidth;
    cfg.weyl.analytic_bandwidth = *c.bandwidth;
    cfg.heat.analytic_bandwidth = *c.bandwidth;
  }
  if (!c.out.empty()) cfg.output_dir = c.out;
  return cfg;
}

int finish(const std::string& name, const nct::RunResult& r) {
  std::cout << name << ": " << (r.pass ? "pass" : "FAIL");
  if (!r.files.empty()) std::cout << " -> " << r.files.front().parent_path().string();
  std::cout << std::endl;
  return r.pass ? EXIT_SUCCESS : EXIT_FAILURE;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spectral computations on the noncommutative two torus"};
  app.require_subcommand(1);
  app.set_version_flag("--version", nct::library_version());

  Common common;
  app.add_option("--config", common.config, "experiment config (JSON) or a run manifest to replay")
      ->check(CLI::ExistingFile);
  app.add_option("--out", common.out, "output directory (default: output_dir from the config)");
  app.add_option("--bandwidth", common.bandwidth, "window N for finite sections and analytic spectra");
  app.add_option("--tolerance-scale", common.tolerance_scale, "multiplier on every pass/fail tolerance")
      ->check(CLI::PositiveNumber);

  auto* weyl = app.add_subcommand("weyl", "eigenvalue counting slope against the Weyl constant");
  auto* heat = app.add_subcommand("heat", "B0 and B2 by quadrature, heat-trace fit and closed form");
  auto* res = app.add_subcommand("residue", "noncommutative residue of the configured symbol");
  auto* connes = app.add_subcommand("connes-trace", "Dixmier estimate against half the residue");
  auto* verify = app.add_subcommand("verify", "run the acceptance suite (TAP output)");
  auto* comp = app.add_subcommand("compose", "graded composition of two symbol files");
  std::string left, right;
  std::optional<int> cutoff;
  comp->add_option("left", left, "GradedSymbol JSON")->required()->check(CLI::ExistingFile);
  comp->add_option("right", right, "GradedSymbol JSON")->required()->check(CLI::ExistingFile);
  comp->add_option("--order-cutoff", cutoff, "lowest order kept (default: top order - 2)");
  for (auto* sc : {weyl, heat, res, connes, verify, comp}) sc->fallthrough();

  CLI11_PARSE(app, argc, argv);

  try {
    const nct::ExperimentConfig cfg = resolve(common);
    nct::RunOptions opt;
    opt.out_dir = cfg.output_dir;
    opt.tolerance_scale = common.tolerance_scale;
    if (*weyl) return finish("weyl", nct::run_weyl(cfg, opt));
    if (*heat) return finish("heat", nct::run_heat(cfg, opt));
    if (*res) return finish("residue", nct::run_residue(cfg, opt));
    if (*connes) return finish("connes-trace", nct::run_connes_trace(cfg, opt));
    if (*verify) return finish("verify", nct::run_verify(cfg, opt, std::cout));
    if (*comp) return finish("compose", nct::run_compose(left, right, cutoff.value_or(nct::kAutoOrderCutoff), cfg, opt));
  } catch (const std::exception& e) {
    std::cerr << "nctorus: error: " << e.what() << std::endl;
    return 2;
  }
  return EXIT_FAILURE;
}

#include "doctest.h"

#include "nctorus/harness.hpp"

#include <fstream>
#include <sstream>
#include <unistd.h>

using namespace nct;
namespace fs = std::filesystem;

namespace {

const fs::path kConfigDir = fs::path(NCTORUS_SOURCE_DIR) / "config";

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct TempDir {
  fs::path path = fs::temp_directory_path() / ("nctorus_harness_" + std::to_string(::getpid()));
  TempDir() { fs::create_directories(path); }
  ~TempDir() { fs::remove_all(path); }
};

int error_line(const std::string& text) {
  try {
    load_config(text, "t.json");
  } catch (const ConfigError& e) {
    return e.line();
  }
  return 0;
}

}  // namespace

TEST_CASE("shipped defaults file matches default_config") {
  CHECK(load_config_file(kConfigDir / "defaults.json") == default_config());
  CHECK(load_config("{}") == default_config());
}

TEST_CASE("config round trip") {
  for (const auto& entry : fs::directory_iterator(kConfigDir)) {
    CAPTURE(entry.path().string());
    const ExperimentConfig cfg = load_config_file(entry.path());
    CHECK(load_config(dump(emit_config(cfg))) == cfg);
  }
  ExperimentConfig odd = default_config();
  odd.theta = 0.123456789;
  odd.tau_re = -0.3;
  odd.tau_im = 1.7;
  odd.h = symmetrize_h({{2, 3, 0.1, -0.05}, {0, 0, 0.2, 0.0}}, odd.theta);
  odd.weyl.fit_lo = 10.0;
  odd.weyl.fit_hi = 500.0;
  odd.connes.preset = "order-3";
  CHECK(load_config(dump(emit_config(odd))) == odd);
}

TEST_CASE("h symmetrization") {
  const double theta = 0.3;
  const auto h = symmetrize_h({{1, 1, 0.2, 0.1}}, theta);
  REQUIRE(h.size() == 2);
  CHECK(h[0].m == -1);
  CHECK(h[0].n == -1);
  // (c U V)^* = conj(c) e^{2 pi i theta} U^-1 V^-1
  const cplx partner = std::conj(cplx(0.2, 0.1)) * std::exp(cplx(0.0, 2.0 * 3.141592653589793 * theta));
  CHECK(std::abs(cplx(h[0].re, h[0].im) - partner) < 1e-15);
  ExperimentConfig cfg = default_config();
  cfg.theta = theta;
  cfg.h = h;
  const NcElement e = cfg.h_element();
  CHECK(is_selfadjoint(e, 1e-15));

  CHECK(symmetrize_h(h, theta) == h);
  CHECK_THROWS_AS(symmetrize_h({{1, 0, 0.4, 0.0}, {-1, 0, 0.3, 0.0}}, theta), Error);
  CHECK_THROWS_AS(symmetrize_h({{1, 0, 0.4, 0.0}, {1, 0, 0.4, 0.0}}, theta), Error);
  CHECK(symmetrize_h({{0, 0, 1.5, 0.0}}, theta).size() == 1);
}

TEST_CASE("config errors carry the line") {
  CHECK(error_line("{\n  \"tau\": [0, 1],\n  \"weyl\": {\n    \"tolerence\": 0.1\n  }\n}\n") == 4);
  CHECK(error_line("{\n  \"tau\": [0, -1]\n}\n") == 2);
  CHECK(error_line("{\n  \"bandwidth\": 4.5\n}\n") == 2);
  CHECK(error_line("{\n  \"bandwidth\": 4,,\n}\n") == 2);
  CHECK(error_line("{\n  \"h\": [[1, 0, 0.4, 0],\n        [-1, 0, 0.3, 0]]\n}\n") == 3);
  CHECK(error_line("{\n  \"h\": [\n    [0, 0, 0.4, 0.1]\n  ]\n}\n") == 3);
  CHECK(error_line("{\n \"theta\": 1.5}") == 2);
  CHECK(error_line("{\n\n \"heat\": {\"t_min\": 1.0,\n \"t_max\": 0.5}}") == 3);
  CHECK(error_line("{\"connes\": {\"preset\": \"file\"}}") == 1);
  CHECK(error_line("[1, 2]") == 1);
  CHECK(error_line("{\"schema_version\": 2}") == 1);

  try {
    load_config("{\n  \"pad\": -1\n}", "cfg.json");
    FAIL("expected an error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).rfind("cfg.json:2: ", 0) == 0);
  }
  // inside a manifest the lines refer to the manifest text
  CHECK(error_line("{\"version\": \"x\",\n \"config\": {\n  \"bandwidth\": 0}}") == 3);
}

TEST_CASE("runs write reports, CSV and manifests") {
  TempDir tmp;
  ExperimentConfig cfg = load_config_file(kConfigDir / "flat.json");
  cfg.weyl.analytic_bandwidth = 60;
  RunOptions opt;
  opt.out_dir = tmp.path / "a";
  const RunResult r = run_weyl(cfg, opt);
  CHECK(r.pass);
  CHECK(r.report.at("schema_version") == kSchemaVersion);
  const fs::path dir = tmp.path / "a" / "weyl";
  for (const char* f : {"eigenvalues.csv", "staircase.csv", "report.json", "manifest.json"})
    CHECK(fs::exists(dir / f));
  const std::string stair = slurp(dir / "staircase.csv");
  CHECK(stair.rfind("lambda,count\r\n", 0) == 0);
  CHECK(stair.find('\n') == stair.find("\r\n") + 1);

  const Json manifest = Json::parse(slurp(dir / "manifest.json"));
  CHECK(manifest.at("version") == library_version());
  CHECK(manifest.contains("created"));
  CHECK(slurp(dir / "report.json").find("created") == std::string::npos);

  // replaying the manifest reproduces every data file byte for byte
  const ExperimentConfig replay = load_config_file(dir / "manifest.json");
  CHECK(replay == cfg);
  RunOptions opt2;
  opt2.out_dir = tmp.path / "b";
  run_weyl(replay, opt2);
  for (const char* f : {"eigenvalues.csv", "staircase.csv", "report.json"})
    CHECK(slurp(dir / f) == slurp(tmp.path / "b" / "weyl" / f));

  // negative control: a tolerance scale far below the fit error fails
  opt2.tolerance_scale = 1e-9;
  CHECK_FALSE(run_weyl(cfg, opt2).pass);
}

TEST_CASE("heat, residue and connes-trace runs") {
  TempDir tmp;
  RunOptions opt;
  opt.out_dir = tmp.path;
  ExperimentConfig flat = load_config_file(kConfigDir / "flat.json");
  flat.heat.analytic_bandwidth = 200;
  const RunResult h = run_heat(flat, opt);
  CHECK(h.pass);
  CHECK(std::abs(h.report.at("b0").at("heat_trace_fit").get<double>() - 3.141592653589793) < 0.01);
  CHECK(slurp(tmp.path / "heat" / "heat_trace.csv").rfind("t,t_trace\r\n", 0) == 0);

  ExperimentConfig cfg = default_config();
  cfg.connes.preset = "resolvent";
  const RunResult res = run_residue(cfg, opt);
  CHECK(res.pass);
  CHECK(std::abs(res.report.at("residue")[0].get<double>() - 2.0 * 3.141592653589793) < 1e-10);

  cfg.bandwidth = 32;
  cfg.connes.preset = "order-3";
  const RunResult c3 = run_connes_trace(cfg, opt);
  CHECK(c3.pass);
  CHECK(c3.report.at("vanishing") == true);

  cfg.connes.preset = "perturbed-resolvent";
  CHECK_THROWS_AS(run_residue(cfg, opt), Error);
}

TEST_CASE("compose run") {
  TempDir tmp;
  const fs::path p = tmp.path / "p.json";
  std::ofstream(p) << R"({"top_order": 1, "complete": true,
    "layers": {"1": {"1": {"theta": 0.3, "coeffs": [[1, 0, 1, 0]]}}}})";
  RunOptions opt;
  opt.out_dir = tmp.path / "out";
  const RunResult r = run_compose(p, p, kAutoOrderCutoff, default_config(), opt);
  CHECK(r.pass);
  const GradedSymbol s = graded_symbol_from_json(Json::parse(slurp(tmp.path / "out" / "compose" / "symbol.json")));
  CHECK(s.top_order() == 2);
  // (xi1 + i xi2) U composed with itself: leading layer (xi1 + i xi2)^2 U^2
  CHECK(s.coefficient(2, 2).coeff(2, 0) == cplx(1.0, 0.0));
  CHECK(r.report.at("order_cutoff") == 0);
}

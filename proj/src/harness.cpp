#include "nctorus/harness.hpp"

#include "nctorus/acceptance.hpp"
#include "nctorus/heat.hpp"
#include "nctorus/spectral.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <map>
#include <numbers>
#include <ostream>
#include <set>
#include <sstream>

#ifndef NCTORUS_VERSION
#define NCTORUS_VERSION "0.0.0"
#endif

namespace nct {

namespace fs = std::filesystem;

std::string library_version() { return NCTORUS_VERSION; }

ConfigError::ConfigError(const std::string& source, int line, const std::string& message)
    : Error(source + ":" + std::to_string(line) + ": " + message), line_(line) {}

NcElement ExperimentConfig::h_element() const {
  NcElement a(deformation());
  for (const auto& c : h) a.add(c.m, c.n, cplx(c.re, c.im));
  return a;
}

std::vector<HCoefficient> symmetrize_h(const std::vector<HCoefficient>& h, double theta, double tol) {
  const DeformationAngle th(theta);
  std::map<std::pair<int, int>, cplx> given;
  for (const auto& c : h) {
    if (!given.emplace(std::pair{c.m, c.n}, cplx(c.re, c.im)).second)
      throw Error("h: duplicate coefficient at (" + std::to_string(c.m) + ", " + std::to_string(c.n) + ")");
  }
  std::map<std::pair<int, int>, cplx> out = given;
  for (const auto& [mn, c] : given) {
    const auto [m, n] = mn;
    const cplx partner = adjoint(make_monomial(m, n, c, th)).coeff(-m, -n);
    const auto it = given.find({-m, -n});
    if (it == given.end()) {
      out[{-m, -n}] = partner;
    } else if (std::abs(it->second - partner) > tol * std::max(1.0, std::abs(partner))) {
      throw Error("h: coefficients at (" + std::to_string(m) + ", " + std::to_string(n) + ") and (" +
                  std::to_string(-m) + ", " + std::to_string(-n) + ") are not adjoint partners");
    }
  }
  std::vector<HCoefficient> res;
  for (auto [mn, c] : out) {
    if (c == cplx(0.0)) continue;
    if (mn == std::pair{0, 0}) c = c.real();
    res.push_back({mn.first, mn.second, c.real(), c.imag()});
  }
  return res;
}

ExperimentConfig default_config() {
  ExperimentConfig cfg;
  cfg.theta = DeformationAngle::golden().value();
  cfg.h = {{-1, 0, 0.4, 0.0}, {1, 0, 0.4, 0.0}};
  return cfg;
}

namespace {

// ---- line locations of JSON pointers in the source text ----

std::string escape_token(const std::string& key) {
  std::string out;
  for (char c : key) {
    if (c == '~')
      out += "~0";
    else if (c == '/')
      out += "~1";
    else
      out += c;
  }
  return out;
}

std::map<std::string, int> locate_pointers(const std::string& text) {
  struct Frame {
    bool object;
    std::string path;
    int index = 0;
    bool expect_key = true;
  };
  std::map<std::string, int> lines;
  std::vector<Frame> stack;
  int line = 1;
  auto value_start = [&] {
    if (!stack.empty() && !stack.back().object)
      lines.emplace(stack.back().path + "/" + std::to_string(stack.back().index), line);
  };
  auto child_path = [&](const std::string& key_or_index) {
    return stack.empty() ? std::string() : stack.back().path + "/" + key_or_index;
  };
  std::string last_key;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c == '\n') {
      ++line;
    } else if (c == '"') {
      std::string s;
      for (++i; i < text.size() && text[i] != '"'; ++i) {
        if (text[i] == '\\' && i + 1 < text.size()) ++i;
        if (text[i] == '\n') ++line;
        s += text[i];
      }
      if (!stack.empty() && stack.back().object && stack.back().expect_key) {
        last_key = escape_token(s);
        lines.emplace(stack.back().path + "/" + last_key, line);
        stack.back().expect_key = false;
      } else {
        value_start();
      }
    } else if (c == '{' || c == '[') {
      value_start();
      std::string path;
      if (!stack.empty())
        path = child_path(stack.back().object ? last_key : std::to_string(stack.back().index));
      stack.push_back({c == '{', path});
      if (stack.size() == 1) lines.emplace("", line);
    } else if (c == '}' || c == ']') {
      if (!stack.empty()) stack.pop_back();
    } else if (c == ',') {
      if (!stack.empty()) {
        if (stack.back().object)
          stack.back().expect_key = true;
        else
          ++stack.back().index;
      }
    } else if (c == ':' || c == ' ' || c == '\t' || c == '\r') {
    } else {
      value_start();
      while (i + 1 < text.size() && std::string_view(",]}\n \t\r").find(text[i + 1]) == std::string_view::npos) ++i;
    }
  }
  return lines;
}

class ConfigReader {
 public:
  ConfigReader(const std::string& text, std::string source, std::string prefix)
      : lines_(locate_pointers(text)), source_(std::move(source)), prefix_(std::move(prefix)) {}

  [[noreturn]] void fail(const std::string& ptr, const std::string& msg) const {
    std::string p = prefix_ + ptr;
    while (true) {
      if (auto it = lines_.find(p); it != lines_.end()) throw ConfigError(source_, it->second, msg);
      const auto cut = p.rfind('/');
      if (cut == std::string::npos) break;
      p.resize(cut);
    }
    throw ConfigError(source_, 1, msg);
  }

  void check_keys(const Json& obj, const std::string& ptr, std::initializer_list<const char*> allowed) const {
    if (!obj.is_object()) fail(ptr, "\"" + ptr + "\" must be an object");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [k, v] : obj.items())
      if (!ok.count(k)) fail(ptr + "/" + escape_token(k), "unknown key \"" + k + "\" in " + (ptr.empty() ? "config" : ptr));
  }

  void number(const Json& obj, const std::string& ptr, const char* key, double& out) const {
    if (!obj.contains(key)) return;
    const Json& v = obj.at(key);
    if (!v.is_number()) fail(ptr + "/" + key, std::string("\"") + key + "\" must be a number");
    out = v.get<double>();
  }

  void integer(const Json& obj, const std::string& ptr, const char* key, int& out) const {
    if (!obj.contains(key)) return;
    const Json& v = obj.at(key);
    if (!v.is_number_integer()) fail(ptr + "/" + key, std::string("\"") + key + "\" must be an integer");
    out = v.get<int>();
  }

  void string(const Json& obj, const std::string& ptr, const char* key, std::string& out) const {
    if (!obj.contains(key)) return;
    const Json& v = obj.at(key);
    if (!v.is_string()) fail(ptr + "/" + key, std::string("\"") + key + "\" must be a string");
    out = v.get<std::string>();
  }

  void require(bool cond, const std::string& ptr, const std::string& msg) const {
    if (!cond) fail(ptr, msg);
  }

 private:
  std::map<std::string, int> lines_;
  std::string source_;
  std::string prefix_;
};

void read_config(const Json& j, const ConfigReader& r, ExperimentConfig& cfg) {
  r.check_keys(j, "", {"schema_version", "theta", "tau", "h", "bandwidth", "pad", "contour", "weyl", "heat", "connes",
                       "output_dir"});
  if (j.contains("schema_version")) {
    int v = 0;
    r.integer(j, "", "schema_version", v);
    r.require(v == kSchemaVersion, "/schema_version",
              "unsupported schema_version " + std::to_string(v) + " (expected " + std::to_string(kSchemaVersion) + ")");
  }
  if (j.contains("theta") && j.at("theta").is_string()) {
    r.require(j.at("theta") == "golden", "/theta", "\"theta\" must be a number or \"golden\"");
    cfg.theta = DeformationAngle::golden().value();
  } else {
    r.number(j, "", "theta", cfg.theta);
  }
  r.require(cfg.theta > 0.0 && cfg.theta < 1.0, "/theta", "\"theta\" must lie in (0, 1)");

  if (j.contains("tau")) {
    const Json& t = j.at("tau");
    r.require(t.is_array() && t.size() == 2 && t[0].is_number() && t[1].is_number(), "/tau",
              "\"tau\" must be [re, im]");
    cfg.tau_re = t[0].get<double>();
    cfg.tau_im = t[1].get<double>();
  }
  r.require(cfg.tau_im > 0.0 && std::isfinite(cfg.tau_re) && std::isfinite(cfg.tau_im), "/tau",
            "\"tau\" must lie in the upper half plane");

  if (j.contains("h")) {
    const Json& h = j.at("h");
    r.require(h.is_array(), "/h", "\"h\" must be a list of [m, n, re, im]");
    std::vector<HCoefficient> raw;
    for (std::size_t i = 0; i < h.size(); ++i) {
      const Json& q = h[i];
      const std::string p = "/h/" + std::to_string(i);
      r.require(q.is_array() && q.size() == 4 && q[0].is_number_integer() && q[1].is_number_integer() &&
                    q[2].is_number() && q[3].is_number(),
                p, "h entry must be [m, n, re, im] with integer m, n");
      raw.push_back({q[0].get<int>(), q[1].get<int>(), q[2].get<double>(), q[3].get<double>()});
      r.require(!(raw.back().m == 0 && raw.back().n == 0 && std::abs(raw.back().im) > 1e-12), p,
                "the (0, 0) coefficient of h must be real");
      // check each entry against everything before it, so the error lands on the later line
      for (std::size_t k = 0; k < i; ++k) {
        const auto& a = raw[k];
        const auto& b = raw.back();
        const bool same = a.m == b.m && a.n == b.n;
        const bool partners = a.m == -b.m && a.n == -b.n;
        if (!same && !partners) continue;
        try {
          symmetrize_h({a, b}, cfg.theta);
        } catch (const Error& e) {
          r.fail(p, e.what());
        }
      }
    }
    cfg.h = symmetrize_h(raw, cfg.theta);
  }

  r.integer(j, "", "bandwidth", cfg.bandwidth);
  r.require(cfg.bandwidth >= 1, "/bandwidth", "\"bandwidth\" must be positive");
  r.integer(j, "", "pad", cfg.pad);
  r.require(cfg.pad >= 0, "/pad", "\"pad\" must be non-negative");
  r.string(j, "", "output_dir", cfg.output_dir);

  if (j.contains("contour")) {
    const Json& c = j.at("contour");
    r.check_keys(c, "/contour", {"half_nodes", "step", "scale"});
    r.integer(c, "/contour", "half_nodes", cfg.contour.half_nodes);
    r.number(c, "/contour", "step", cfg.contour.step);
    r.number(c, "/contour", "scale", cfg.contour.scale);
  }
  r.require(cfg.contour.half_nodes >= 4, "/contour/half_nodes", "\"half_nodes\" must be at least 4");
  r.require(cfg.contour.step >= 0.0, "/contour/step", "\"step\" must be non-negative (0 selects the default)");
  r.require(cfg.contour.scale >= 0.0, "/contour/scale", "\"scale\" must be non-negative (0 selects the default)");

  auto spectrum_kind = [&](const std::string& s, const std::string& p) {
    r.require(s == "perturbed" || s == "flat-analytic", p, "spectrum must be \"perturbed\" or \"flat-analytic\"");
  };
  auto fraction = [&](double f, const std::string& p) {
    r.require(f > 0.0 && f <= 1.0, p, "fraction must lie in (0, 1]");
  };
  auto positive = [&](double v, const std::string& p) { r.require(v > 0.0, p, "value must be positive"); };

  if (j.contains("weyl")) {
    const Json& w = j.at("weyl");
    r.check_keys(w, "/weyl",
                 {"spectrum", "analytic_bandwidth", "ceiling_fraction", "fit_window", "fit_points", "tolerance"});
    r.string(w, "/weyl", "spectrum", cfg.weyl.spectrum);
    r.integer(w, "/weyl", "analytic_bandwidth", cfg.weyl.analytic_bandwidth);
    r.number(w, "/weyl", "ceiling_fraction", cfg.weyl.ceiling_fraction);
    if (w.contains("fit_window")) {
      const Json& f = w.at("fit_window");
      r.require(f.is_array() && f.size() == 2 && f[0].is_number() && f[1].is_number(), "/weyl/fit_window",
                "\"fit_window\" must be [lo, hi] ([0, 0] selects the default)");
      cfg.weyl.fit_lo = f[0].get<double>();
      cfg.weyl.fit_hi = f[1].get<double>();
    }
    r.integer(w, "/weyl", "fit_points", cfg.weyl.fit_points);
    r.number(w, "/weyl", "tolerance", cfg.weyl.tolerance);
  }
  spectrum_kind(cfg.weyl.spectrum, "/weyl/spectrum");
  r.require(cfg.weyl.analytic_bandwidth >= 1, "/weyl/analytic_bandwidth", "\"analytic_bandwidth\" must be positive");
  fraction(cfg.weyl.ceiling_fraction, "/weyl/ceiling_fraction");
  r.require(cfg.weyl.fit_lo >= 0.0 && cfg.weyl.fit_hi >= 0.0 &&
                (cfg.weyl.fit_hi == 0.0 || cfg.weyl.fit_lo == 0.0 || cfg.weyl.fit_lo < cfg.weyl.fit_hi),
            "/weyl/fit_window", "\"fit_window\" needs 0 <= lo < hi");
  r.require(cfg.weyl.fit_points >= 3, "/weyl/fit_points", "\"fit_points\" must be at least 3");
  positive(cfg.weyl.tolerance, "/weyl/tolerance");

  if (j.contains("heat")) {
    const Json& h = j.at("heat");
    r.check_keys(h, "/heat",
                 {"spectrum", "analytic_bandwidth", "window", "radial_nodes", "angular_nodes", "tail_tolerance",
                  "t_min", "t_max", "t_points", "ceiling_fraction", "tolerance", "flat_tolerance",
                  "contour_tolerance"});
    r.string(h, "/heat", "spectrum", cfg.heat.spectrum);
    r.integer(h, "/heat", "analytic_bandwidth", cfg.heat.analytic_bandwidth);
    r.integer(h, "/heat", "window", cfg.heat.window);
    r.integer(h, "/heat", "radial_nodes", cfg.heat.radial_nodes);
    r.integer(h, "/heat", "angular_nodes", cfg.heat.angular_nodes);
    r.number(h, "/heat", "tail_tolerance", cfg.heat.tail_tolerance);
    r.number(h, "/heat", "t_min", cfg.heat.t_min);
    r.number(h, "/heat", "t_max", cfg.heat.t_max);
    r.integer(h, "/heat", "t_points", cfg.heat.t_points);
    r.number(h, "/heat", "ceiling_fraction", cfg.heat.ceiling_fraction);
    r.number(h, "/heat", "tolerance", cfg.heat.tolerance);
    r.number(h, "/heat", "flat_tolerance", cfg.heat.flat_tolerance);
    r.number(h, "/heat", "contour_tolerance", cfg.heat.contour_tolerance);
  }
  spectrum_kind(cfg.heat.spectrum, "/heat/spectrum");
  r.require(cfg.heat.analytic_bandwidth >= 1, "/heat/analytic_bandwidth", "\"analytic_bandwidth\" must be positive");
  r.require(cfg.heat.window >= 1, "/heat/window", "\"window\" must be positive");
  r.require(cfg.heat.radial_nodes >= 2 && cfg.heat.radial_nodes % 2 == 0, "/heat/radial_nodes",
            "\"radial_nodes\" must be even and at least 2");
  r.require(cfg.heat.angular_nodes >= 8, "/heat/angular_nodes", "\"angular_nodes\" must be at least 8");
  positive(cfg.heat.tail_tolerance, "/heat/tail_tolerance");
  r.require(cfg.heat.t_min > 0.0 && cfg.heat.t_min < cfg.heat.t_max, "/heat/t_min", "need 0 < t_min < t_max");
  r.require(cfg.heat.t_points >= 3, "/heat/t_points", "\"t_points\" must be at least 3");
  fraction(cfg.heat.ceiling_fraction, "/heat/ceiling_fraction");
  positive(cfg.heat.tolerance, "/heat/tolerance");
  positive(cfg.heat.flat_tolerance, "/heat/flat_tolerance");
  positive(cfg.heat.contour_tolerance, "/heat/contour_tolerance");

  if (j.contains("connes")) {
    const Json& c = j.at("connes");
    r.check_keys(c, "/connes", {"preset", "symbol_path", "trusted_fraction", "tolerance"});
    r.string(c, "/connes", "preset", cfg.connes.preset);
    r.string(c, "/connes", "symbol_path", cfg.connes.symbol_path);
    r.number(c, "/connes", "trusted_fraction", cfg.connes.trusted_fraction);
    r.number(c, "/connes", "tolerance", cfg.connes.tolerance);
  }
  const auto& pr = cfg.connes.preset;
  r.require(pr == "resolvent" || pr == "k-weighted" || pr == "order-3" || pr == "perturbed-resolvent" || pr == "file",
            "/connes/preset", "\"preset\" must be one of resolvent, k-weighted, order-3, perturbed-resolvent, file");
  r.require(pr != "file" || !cfg.connes.symbol_path.empty(), "/connes/symbol_path",
            "preset \"file\" needs \"symbol_path\"");
  fraction(cfg.connes.trusted_fraction, "/connes/trusted_fraction");
  positive(cfg.connes.tolerance, "/connes/tolerance");
}

}  // namespace

ExperimentConfig load_config(const std::string& text, const std::string& source) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    const auto upto = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    const int line = 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<long>(upto), '\n'));
    std::string what = e.what();
    if (const auto p = what.find("] "); p != std::string::npos) what = what.substr(p + 2);
    throw ConfigError(source, line, "invalid JSON: " + what);
  }
  std::string prefix;
  if (j.is_object() && j.contains("config")) {  // run manifest
    j = Json(j.at("config"));
    prefix = "/config";
  }
  const ConfigReader reader(text, source, prefix);
  ExperimentConfig cfg = default_config();
  read_config(j, reader, cfg);
  return cfg;
}

ExperimentConfig load_config_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return load_config(ss.str(), path.string());
}

Json emit_config(const ExperimentConfig& cfg) {
  Json h = Json::array();
  for (const auto& c : cfg.h) h.push_back({c.m, c.n, c.re, c.im});
  return {
      {"schema_version", kSchemaVersion},
      {"theta", cfg.theta},
      {"tau", {cfg.tau_re, cfg.tau_im}},
      {"h", h},
      {"bandwidth", cfg.bandwidth},
      {"pad", cfg.pad},
      {"contour", {{"half_nodes", cfg.contour.half_nodes}, {"step", cfg.contour.step}, {"scale", cfg.contour.scale}}},
      {"weyl",
       {{"spectrum", cfg.weyl.spectrum},
        {"analytic_bandwidth", cfg.weyl.analytic_bandwidth},
        {"ceiling_fraction", cfg.weyl.ceiling_fraction},
        {"fit_window", {cfg.weyl.fit_lo, cfg.weyl.fit_hi}},
        {"fit_points", cfg.weyl.fit_points},
        {"tolerance", cfg.weyl.tolerance}}},
      {"heat",
       {{"spectrum", cfg.heat.spectrum},
        {"analytic_bandwidth", cfg.heat.analytic_bandwidth},
        {"window", cfg.heat.window},
        {"radial_nodes", cfg.heat.radial_nodes},
        {"angular_nodes", cfg.heat.angular_nodes},
        {"tail_tolerance", cfg.heat.tail_tolerance},
        {"t_min", cfg.heat.t_min},
        {"t_max", cfg.heat.t_max},
        {"t_points", cfg.heat.t_points},
        {"ceiling_fraction", cfg.heat.ceiling_fraction},
        {"tolerance", cfg.heat.tolerance},
        {"flat_tolerance", cfg.heat.flat_tolerance},
        {"contour_tolerance", cfg.heat.contour_tolerance}}},
      {"connes",
       {{"preset", cfg.connes.preset},
        {"symbol_path", cfg.connes.symbol_path},
        {"trusted_fraction", cfg.connes.trusted_fraction},
        {"tolerance", cfg.connes.tolerance}}},
      {"output_dir", cfg.output_dir},
  };
}

namespace {

constexpr double kPi = std::numbers::pi;

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, static_cast<std::size_t>(res.ptr - buf));
}

// Writes a run directory: data files, report and manifest.
class RunWriter {
 public:
  RunWriter(const std::string& command, const ExperimentConfig& cfg, const RunOptions& opt)
      : command_(command), cfg_(cfg), opt_(opt) {
    dir_ = (opt.out_dir.empty() ? fs::path(cfg.output_dir) : opt.out_dir) / command;
    fs::create_directories(dir_);
  }

  template <class F>
  void write(const std::string& name, F&& body) {
    const fs::path p = dir_ / name;
    std::ofstream os(p, std::ios::binary);
    if (!os) throw Error("cannot write " + p.string());
    body(os);
    if (!os) throw Error("failed writing " + p.string());
    result_.files.push_back(p);
  }

  RunResult finish(Json report, bool pass) {
    report["schema_version"] = kSchemaVersion;
    report["command"] = command_;
    report["pass"] = pass;
    report["tolerance_scale"] = opt_.tolerance_scale;
    write("report.json", [&](std::ostream& os) { os << dump(report); });

    Json files = Json::array();
    for (const auto& f : result_.files) files.push_back(f.filename().string());
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    const Json manifest = {{"schema_version", kSchemaVersion},
                           {"tool", "nctorus"},
                           {"version", library_version()},
                           {"command", command_},
                           {"tolerance_scale", opt_.tolerance_scale},
                           {"config", emit_config(cfg_)},
                           {"outputs", files},
                           {"created", stamp}};
    write("manifest.json", [&](std::ostream& os) { os << dump(manifest); });
    result_.pass = pass;
    result_.report = std::move(report);
    return result_;
  }

 private:
  std::string command_;
  const ExperimentConfig& cfg_;
  const RunOptions& opt_;
  fs::path dir_;
  RunResult result_;
};

double k2_floor(const ConformalData& cd, int bandwidth) {
  const BasisWindow w(bandwidth);
  return hermitian_spectrum(FiniteSectionOperator(w, left_mult_matrix(cd.k2(), w).entries(), true), true)
      .eigenvalues.front();
}

std::vector<double> perturbed_spectrum(const ConformalData& cd, int bandwidth) {
  return hermitian_spectrum(perturbed_laplacian_matrix(cd, BasisWindow(bandwidth)).op, true).eigenvalues;
}

ContourSpec contour_of(const ExperimentConfig& cfg) {
  return ContourSpec{cfg.contour.half_nodes, cfg.contour.step, cfg.contour.scale};
}

Json slope_json(const SlopeFit& f) {
  return {{"slope", f.slope}, {"stderr", f.stderr_slope}, {"intercept", f.intercept},
          {"fit_window", {f.lo, f.hi}}, {"points", f.points}};
}

Json dixmier_json(const DixmierEstimate& e) {
  return {{"value", e.value},           {"drift", e.drift},          {"cesaro", e.cesaro},
          {"slope_early", e.slope_early}, {"slope_late", e.slope_late}, {"count", e.count}};
}

struct PresetSymbol {
  GradedSymbol symbol;
  std::string description;
  bool has_expected;
  double expected_residue;
};

PresetSymbol preset_symbol(const ExperimentConfig& cfg) {
  const auto& p = cfg.connes.preset;
  const DeformationAngle th = cfg.deformation();
  if (p == "resolvent")
    return {classicalize_resolvent(1.0, cfg.tau(), 2, th), "(1 + Lap_tau)^{-1}", true, 2.0 * kPi / cfg.tau_im};
  if (p == "k-weighted") {
    const ConformalData cd(cfg.tau(), cfg.h_element(), cfg.pad);
    const double t = inverse_vacuum_expectation(left_mult_matrix(cd.k2(), BasisWindow(40))).real();
    return {radial_power_symbol(-2, cd.k_inv2()), "|xi|^-2 k^-2", true, 2.0 * kPi * t};
  }
  if (p == "order-3") {
    GradedSymbol s(th, -2, 2, kDefaultWindingCutoff, true);
    s.add(-3, 0, NcElement::scalar(th, 1.0));
    return {s, "|xi|^-3 (empty order -2 layer)", true, 0.0};
  }
  if (p == "file") {
    std::ifstream in(cfg.connes.symbol_path, std::ios::binary);
    if (!in) throw Error("cannot open symbol file " + cfg.connes.symbol_path);
    Json j;
    try {
      j = Json::parse(in);
    } catch (const Json::parse_error& e) {
      throw Error(cfg.connes.symbol_path + ": invalid JSON: " + e.what());
    }
    return {graded_symbol_from_json(j), cfg.connes.symbol_path, false, 0.0};
  }
  throw Error("preset \"" + p + "\" has no symbol; run connes-trace for it");
}

}  // namespace

RunResult run_weyl(const ExperimentConfig& cfg, const RunOptions& opt) {
  RunWriter out("weyl", cfg, opt);
  std::vector<double> ev;
  int N = 0;
  double box = 0.0, target = 0.0;
  Json closed;
  if (cfg.weyl.spectrum == "flat-analytic") {
    N = cfg.weyl.analytic_bandwidth;
    ev = flat_spectrum(cfg.tau(), N);
    box = box_ceiling(cfg.tau(), N);
    target = kPi / cfg.tau_im;
    closed = {{"constant", target}, {"trace_k_inv2", 1.0}};
  } else {
    N = cfg.bandwidth;
    const ConformalData cd(cfg.tau(), cfg.h_element(), cfg.pad);
    ev = perturbed_spectrum(cd, N);
    box = box_ceiling(cfg.tau(), N, k2_floor(cd, N));
    const WeylClosedForm w = weyl_constant_closed_form(cd);
    target = w.constant;
    closed = {{"constant", w.constant}, {"trace_k_inv2", w.trace_k_inv2}, {"series_trace", w.series_trace},
              {"route_gap", w.route_gap}};
  }
  out.write("eigenvalues.csv", [&](std::ostream& os) { write_eigenvalues_csv(os, ev); });
  const CountingData cd(std::move(ev), N, cfg.weyl.ceiling_fraction, box);
  const double lo = cfg.weyl.fit_lo > 0.0 ? cfg.weyl.fit_lo : cd.ceiling() / 20.0;
  const double hi = cfg.weyl.fit_hi > 0.0 ? cfg.weyl.fit_hi : cd.ceiling();
  const SlopeFit fit = weyl_slope(cd, lo, hi, cfg.weyl.fit_points);
  std::vector<double> grid;
  for (int i = 1; i <= 200; ++i) grid.push_back(cd.ceiling() * i / 200.0);
  out.write("staircase.csv", [&](std::ostream& os) { write_staircase_csv(os, cd, grid); });

  const double ratio = fit.slope / target;
  const double tol = cfg.weyl.tolerance * opt.tolerance_scale;
  const bool pass = std::abs(ratio - 1.0) <= tol;
  Json report = {{"spectrum", cfg.weyl.spectrum},
                 {"bandwidth", N},
                 {"eigenvalues", cd.eigenvalues().size()},
                 {"ceiling", cd.ceiling()},
                 {"ceiling_source", cd.ceiling_source()},
                 {"ceiling_fraction", cd.ceiling_fraction()},
                 {"fit", slope_json(fit)},
                 {"closed_form", closed},
                 {"ratio", ratio},
                 {"tolerance", tol}};
  return out.finish(std::move(report), pass);
}

RunResult run_heat(const ExperimentConfig& cfg, const RunOptions& opt) {
  RunWriter out("heat", cfg, opt);
  const ConformalData cd(cfg.tau(), cfg.h_element(), cfg.pad);
  const Parametrix par = parametrix_terms(laplace_symbol(cd), 2);
  const ContourSpec contour = contour_of(cfg);
  const XiQuadrature quad{cfg.heat.window, cfg.heat.radial_nodes, cfg.heat.angular_nodes, cfg.heat.tail_tolerance};
  const HeatCoefficientResult q0 = heat_coefficient(0, par, contour, quad);
  const HeatCoefficientResult q2 = heat_coefficient(2, par, contour, quad);
  const double closed = heat_b0_closed_form(cd);

  const std::vector<double> ev = cfg.heat.spectrum == "flat-analytic"
                                     ? flat_spectrum(cfg.tau(), cfg.heat.analytic_bandwidth)
                                     : perturbed_spectrum(cd, cfg.bandwidth);
  const HeatTraceFit fit =
      heat_trace_fit(ev, log_grid(cfg.heat.t_min, cfg.heat.t_max, cfg.heat.t_points), cfg.heat.ceiling_fraction);
  out.write("heat_trace.csv", [&](std::ostream& os) {
    os << "t,t_trace\r\n";
    for (const auto& [t, v] : fit.samples) os << format_double(t) << ',' << format_double(v) << "\r\n";
  });

  // e^{-M} through the contour on a small dense section of the same operator
  const Eigen::MatrixXcd m = perturbed_laplacian_matrix(cd, BasisWindow(4)).op.dense();
  const double contour_err = contour_exponential_error(contour, m);

  const double s = opt.tolerance_scale;
  Json checks = Json::object();
  bool pass = contour_err <= cfg.heat.contour_tolerance * s;
  checks["contour_identity"] = {{"error", contour_err}, {"tolerance", cfg.heat.contour_tolerance * s}};
  if (cfg.flat()) {
    const double target = kPi / cfg.tau_im;
    const double worst = std::max({std::abs(q0.value - target), std::abs(fit.b0 - target), std::abs(closed - target)});
    pass = pass && worst <= cfg.heat.flat_tolerance * s;
    checks["flat_b0"] = {{"target", target}, {"max_abs_error", worst}, {"tolerance", cfg.heat.flat_tolerance * s}};
  } else {
    auto rel = [](double a, double b) { return std::abs(a - b) / std::abs(b); };
    const double gap = std::max({rel(q0.value, closed), rel(fit.b0, closed), rel(q0.value, fit.b0)});
    pass = pass && gap <= cfg.heat.tolerance * s;
    checks["route_agreement"] = {{"max_pairwise_relative_gap", gap}, {"tolerance", cfg.heat.tolerance * s}};
  }
  auto quad_json = [](const HeatCoefficientResult& r) {
    return Json{{"value", r.value},          {"imaginary_part", r.imaginary_part}, {"quadrature_error", r.quadrature_error},
                {"tail_bound", r.tail_bound}, {"radius", r.radius},                 {"words", r.words}};
  };
  Json report = {{"b0", {{"quadrature", quad_json(q0)}, {"heat_trace_fit", fit.b0}, {"closed_form", closed}}},
                 {"b2", {{"quadrature", quad_json(q2)}, {"heat_trace_fit", fit.b2}}},
                 {"fit",
                  {{"spectrum", cfg.heat.spectrum},
                   {"eigenvalues", ev.size()},
                   {"c2", fit.c2},
                   {"residual", fit.residual},
                   {"t_window", {fit.t_min, fit.t_max}},
                   {"samples", fit.samples.size()},
                   {"ceiling_fraction", fit.ceiling_fraction}}},
                 {"contour",
                  {{"half_nodes", contour.half_nodes},
                   {"step", contour.resolved_step()},
                   {"scale", contour.resolved_scale()}}},
                 {"checks", checks}};
  return out.finish(std::move(report), pass);
}

RunResult run_residue(const ExperimentConfig& cfg, const RunOptions& opt) {
  RunWriter out("residue", cfg, opt);
  const PresetSymbol ps = preset_symbol(cfg);
  const cplx r = residue(ps.symbol);
  bool pass = std::isfinite(r.real()) && std::isfinite(r.imag());
  Json report = {{"preset", cfg.connes.preset},
                 {"symbol", ps.description},
                 {"residue", {r.real(), r.imag()}},
                 {"half_residue", 0.5 * r.real()}};
  if (ps.has_expected) {
    const double err = std::abs(r - ps.expected_residue);
    const double tol = 1e-10 * opt.tolerance_scale;
    pass = pass && err <= tol;
    report["expected"] = ps.expected_residue;
    report["error"] = err;
    report["tolerance"] = tol;
  }
  return out.finish(std::move(report), pass);
}

RunResult run_connes_trace(const ExperimentConfig& cfg, const RunOptions& opt) {
  RunWriter out("connes-trace", cfg, opt);
  const double tol = cfg.connes.tolerance * opt.tolerance_scale;
  if (cfg.connes.preset == "perturbed-resolvent") {
    const ResolventTraceReport r =
        perturbed_resolvent_trace(ConformalData(cfg.tau(), cfg.h_element(), cfg.pad), cfg.bandwidth);
    const bool pass = std::abs(r.ratio - 1.0) <= tol;
    Json report = {{"preset", "perturbed-resolvent"},
                   {"operator", "(1 + Lap')^{-1}"},
                   {"bandwidth", r.bandwidth},
                   {"trusted", r.trusted},
                   {"dixmier", dixmier_json(r.dixmier)},
                   {"closed_form", r.closed_form},
                   {"ratio", r.ratio},
                   {"band", {1.0 - tol, 1.0 + tol}}};
    return out.finish(std::move(report), pass);
  }
  const PresetSymbol ps = preset_symbol(cfg);
  const ConnesTraceReport r = connes_trace_check(ps.symbol, BasisWindow(cfg.bandwidth), cfg.connes.trusted_fraction);
  const bool expect_vanishing = std::abs(r.residue) <= 1e-12;
  const bool pass = expect_vanishing ? r.vanishing
                                     : (!r.vanishing && r.ratio >= 0.5 * (1.0 - tol) && r.ratio <= 0.5 * (1.0 + tol));
  Json report = {{"preset", cfg.connes.preset},
                 {"symbol", ps.description},
                 {"bandwidth", r.bandwidth},
                 {"trusted", r.trusted},
                 {"total", r.total},
                 {"residue", {r.residue.real(), r.residue.imag()}},
                 {"half_residue", r.half_residue},
                 {"dixmier", dixmier_json(r.dixmier)},
                 {"ratio", std::isfinite(r.ratio) ? Json(r.ratio) : Json(nullptr)},
                 {"vanishing", r.vanishing},
                 {"expect_vanishing", expect_vanishing},
                 {"band", {0.5 * (1.0 - tol), 0.5 * (1.0 + tol)}}};
  return out.finish(std::move(report), pass);
}

RunResult run_verify(const ExperimentConfig& cfg, const RunOptions& opt, std::ostream& tap) {
  RunWriter out("verify", cfg, opt);
  tap << "1.." << kCriterionCount << std::endl;
  Json rows = Json::array();
  bool pass = true;
  run_acceptance(opt.tolerance_scale, [&](const CriterionResult& r) {
    tap << tap_line(r) << std::endl;
    pass = pass && r.pass;
    rows.push_back({{"id", r.id}, {"name", r.name}, {"pass", r.pass}, {"detail", r.detail}});
  });
  return out.finish({{"criteria", rows}}, pass);
}

RunResult run_compose(const fs::path& left, const fs::path& right, int order_cutoff, const ExperimentConfig& cfg,
                      const RunOptions& opt) {
  auto load = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error("cannot open symbol file " + p.string());
    try {
      return graded_symbol_from_json(Json::parse(in));
    } catch (const Json::parse_error& e) {
      throw Error(p.string() + ": invalid JSON: " + e.what());
    }
  };
  const GradedSymbol p = load(left), q = load(right);
  if (order_cutoff == kAutoOrderCutoff) order_cutoff = p.top_order() + q.top_order() - 2;
  RunWriter out("compose", cfg, opt);
  const GradedSymbol pq = compose(p, q, order_cutoff);
  out.write("symbol.json", [&](std::ostream& os) { os << dump(to_json(pq)); });
  Json report = {{"left", left.string()},
                 {"right", right.string()},
                 {"order_cutoff", order_cutoff},
                 {"top_order", pq.top_order()},
                 {"lowest_order", pq.lowest_order()},
                 {"complete", pq.complete()},
                 {"winding_overflow", pq.winding_overflow()},
                 {"result", to_json(pq)}};
  return out.finish(std::move(report), true);
}

}  // namespace nct

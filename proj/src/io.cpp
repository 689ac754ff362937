#include "nctorus/io.hpp"

#include <algorithm>
#include <climits>

namespace nct {

namespace {

const Json& require(const Json& j, const char* key, const char* what) {
  if (!j.is_object() || !j.contains(key)) throw Error(std::string(what) + ": missing \"" + key + "\"");
  return j.at(key);
}

int parse_int_key(const std::string& s, const char* what) {
  std::size_t used = 0;
  int v = 0;
  try {
    v = std::stoi(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty()) throw Error(std::string(what) + ": \"" + s + "\" is not an integer key");
  return v;
}

}  // namespace

Json to_json(const NcElement& a) {
  Json coeffs = Json::array();
  for (const auto& [md, c] : a.coeffs()) coeffs.push_back({md.m, md.n, c.real(), c.imag()});
  return {{"theta", a.theta().value()}, {"coeffs", coeffs}};
}

NcElement nc_element_from_json(const Json& j) {
  try {
    const DeformationAngle theta(require(j, "theta", "NcElement").get<double>());
    NcElement a(theta);
    for (const Json& q : require(j, "coeffs", "NcElement")) {
      if (!q.is_array() || q.size() != 4) throw Error("NcElement: each coefficient must be [m, n, re, im]");
      a.add(q[0].get<int>(), q[1].get<int>(), cplx(q[2].get<double>(), q[3].get<double>()));
    }
    return a;
  } catch (const Json::exception& e) {
    throw Error(std::string("NcElement: ") + e.what());
  }
}

Json to_json(const GradedSymbol& s) {
  Json layers = Json::object();
  for (const auto& [d, series] : s.layers()) {
    Json by_w = Json::object();
    for (const auto& [w, c] : series) by_w[std::to_string(w)] = to_json(c);
    layers[std::to_string(d)] = by_w;
  }
  return {{"theta", s.theta().value()},
          {"top_order", s.top_order()},
          {"depth", s.depth()},
          {"winding_cutoff", s.winding_cutoff()},
          {"complete", s.complete()},
          {"winding_overflow", s.winding_overflow()},
          {"layers", layers}};
}

GradedSymbol graded_symbol_from_json(const Json& j) {
  try {
    const int top = require(j, "top_order", "GradedSymbol").get<int>();
    const Json& layers = require(j, "layers", "GradedSymbol");
    if (!layers.is_object()) throw Error("GradedSymbol: \"layers\" must be an object");
    int lowest = top, max_w = 0;
    double theta = j.contains("theta") ? j.at("theta").get<double>() : -1.0;
    for (const auto& [dk, by_w] : layers.items()) {
      const int d = parse_int_key(dk, "GradedSymbol layer");
      if (d > top) throw Error("GradedSymbol: layer " + dk + " above top_order");
      lowest = std::min(lowest, d);
      for (const auto& [wk, c] : by_w.items()) {
        max_w = std::max(max_w, std::abs(parse_int_key(wk, "GradedSymbol winding")));
        if (theta < 0.0) theta = require(c, "theta", "NcElement").get<double>();
      }
    }
    if (theta < 0.0) throw Error("GradedSymbol: no \"theta\" and no coefficients to read it from");
    const int depth = j.contains("depth") ? j.at("depth").get<int>() : top - lowest + 1;
    const int cutoff = j.contains("winding_cutoff") ? j.at("winding_cutoff").get<int>()
                                                    : std::max(kDefaultWindingCutoff, max_w);
    const bool complete = j.contains("complete") && j.at("complete").get<bool>();
    GradedSymbol s(DeformationAngle(theta), top, depth, cutoff, complete);
    for (const auto& [dk, by_w] : layers.items())
      for (const auto& [wk, c] : by_w.items()) {
        const NcElement el = nc_element_from_json(c);
        if (!(el.theta() == s.theta())) throw Error("GradedSymbol: coefficients disagree on theta");
        s.add(parse_int_key(dk, "layer"), parse_int_key(wk, "winding"), el);
      }
    if (j.contains("winding_overflow")) s.add_overflow(j.at("winding_overflow").get<double>() - s.winding_overflow());
    return s;
  } catch (const Json::exception& e) {
    throw Error(std::string("GradedSymbol: ") + e.what());
  }
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

}  // namespace nct

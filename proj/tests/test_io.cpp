#include "doctest.h"
#include "random_elements.hpp"

#include "nctorus/io.hpp"

using namespace nct;
using nct::testing::golden;

namespace {

const DeformationAngle th = golden();

}  // namespace

TEST_CASE("element JSON is sorted on write") {
  NcElement a(th);
  a.add(2, -1, cplx(1.0, 0.5));
  a.add(-3, 4, cplx(-2.0, 0.0));
  a.add(0, 0, cplx(0.25, -1.0));
  const Json j = to_json(a);
  CHECK(j.at("theta").get<double>() == th.value());
  const auto& c = j.at("coeffs");
  REQUIRE(c.size() == 3);
  CHECK(c[0] == Json::array({-3, 4, -2.0, 0.0}));
  CHECK(c[1] == Json::array({0, 0, 0.25, -1.0}));
  CHECK(c[2] == Json::array({2, -1, 1.0, 0.5}));
}

TEST_CASE("element JSON accepts any order") {
  const Json j = Json::parse(R"({"theta": 0.25, "coeffs": [[1, 1, 2, 0], [-1, 0, 0, 1], [1, 1, 0.5, -1]]})");
  const NcElement a = nc_element_from_json(j);
  CHECK(a.theta().value() == 0.25);
  CHECK(a.size() == 2);
  CHECK(a.coeff(1, 1) == cplx(2.5, -1.0));
  CHECK(a.coeff(-1, 0) == cplx(0.0, 1.0));

  CHECK_THROWS_AS(nc_element_from_json(Json::parse(R"({"coeffs": []})")), Error);
  CHECK_THROWS_AS(nc_element_from_json(Json::parse(R"({"theta": 0.3, "coeffs": [[1, 2, 3]]})")), Error);
  CHECK_THROWS_AS(nc_element_from_json(Json::parse(R"({"theta": 1.5, "coeffs": []})")), Error);
}

TEST_CASE("element JSON round trip is exact") {
  std::mt19937_64 rng(8);
  for (int i = 0; i < 50; ++i) {
    const NcElement a = nct::testing::random_element(rng, 4, 10);
    const NcElement b = nc_element_from_json(Json::parse(dump(to_json(a))));
    CHECK(max_abs_difference(a, b) == 0.0);
    CHECK(b.theta() == a.theta());
  }
}

TEST_CASE("graded symbol JSON round trip") {
  std::mt19937_64 rng(4);
  GradedSymbol s(th, -2, 3, 12, false);
  for (int d = -2; d >= -4; --d)
    for (int w = -4; w <= 4; w += 2) s.add(d, w, nct::testing::random_element(rng, 2, 3));
  s.add_overflow(0.125);
  const GradedSymbol r = graded_symbol_from_json(Json::parse(dump(to_json(s))));
  CHECK(r.top_order() == -2);
  CHECK(r.depth() == 3);
  CHECK(r.winding_cutoff() == 12);
  CHECK_FALSE(r.complete());
  CHECK(r.winding_overflow() == 0.125);
  CHECK(to_json(r) == to_json(s));

  // minimal form: bookkeeping defaults to the span of the layers
  const Json minimal = Json::parse(
      R"({"top_order": 0, "layers": {"0": {"0": {"theta": 0.5, "coeffs": [[0, 0, 1, 0]]}},
                                      "-1": {"3": {"theta": 0.5, "coeffs": [[1, 0, 0, 2]]}}}})");
  const GradedSymbol m = graded_symbol_from_json(minimal);
  CHECK(m.depth() == 2);
  CHECK(m.theta().value() == 0.5);
  CHECK(m.coefficient(-1, 3).coeff(1, 0) == cplx(0.0, 2.0));

  CHECK_THROWS_AS(graded_symbol_from_json(Json::parse(R"({"top_order": 0, "layers": {"1": {}}})")), Error);
  CHECK_THROWS_AS(graded_symbol_from_json(Json::parse(R"({"top_order": 0, "layers": {"x": {}}})")), Error);
  CHECK_THROWS_AS(graded_symbol_from_json(Json::parse(R"({"layers": {}})")), Error);
}

#pragma once

// JSON forms of algebra elements and graded symbols.

#include "nctorus/algebra.hpp"
#include "nctorus/symbol.hpp"

#include <json.hpp>

#include <string>

namespace nct {

using Json = nlohmann::json;

/// {"theta": t, "coeffs": [[m, n, re, im], ...]}, sorted by (m, n).
Json to_json(const NcElement& a);
/// Accepts coefficients in any order; repeated indices accumulate.
NcElement nc_element_from_json(const Json& j);

/// {"top_order": d, "layers": {"d": {"w": NcElement}}} plus "depth",
/// "winding_cutoff", "complete" and "winding_overflow".
Json to_json(const GradedSymbol& s);
/// Missing bookkeeping fields default to the span of the stored layers.
GradedSymbol graded_symbol_from_json(const Json& j);

/// Two-space indented JSON text with a trailing newline.
std::string dump(const Json& j);

}  // namespace nct

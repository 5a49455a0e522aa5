#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "channel.hpp"
#include "config.hpp"
#include "json.hpp"

namespace mcrelay {

/// Rejects channel gains for which the adaptive release recursions are
/// unbounded: an own odd-gain sum >= 1, or a cross product of the two
/// uplink sums >= 1.
inline void check_stability(const ChannelSet& ch) {
  const double s1 = ch.t1r.odd_nu_sum();
  const double s2 = ch.t2r.odd_nu_sum();
  if (s1 >= 1.0) throw ConfigError("qT1R", "sum of odd normalized gains must be < 1 (increase ts)");
  if (s2 >= 1.0) throw ConfigError("qT2R", "sum of odd normalized gains must be < 1 (increase ts)");
  if (s1 * s2 >= 1.0) throw ConfigError("qT1R", "cross gain product must be < 1 (increase ts)");
}

/// Full validation: fields, timing (t0 <= ts), recursion stability.
inline void validate(const SystemConfig& cfg) {
  validate_fields(cfg);
  check_stability(make_channels(cfg));
}

/// Parses a JSON document, applies "key=value" overrides, and validates.
inline SystemConfig load_config(std::string_view text, const std::vector<std::string>& overrides = {}) {
  nlohmann::json doc = nlohmann::json::parse(text.begin(), text.end(), nullptr, false);
  if (doc.is_discarded()) throw ConfigError("<root>", "document is not valid JSON");
  for (const auto& o : overrides) apply_override(doc, o);
  SystemConfig cfg = config_from_json(doc);
  validate(cfg);
  return cfg;
}

}  // namespace mcrelay

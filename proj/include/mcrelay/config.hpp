#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "units.hpp"

namespace mcrelay {

/// Raised for any malformed or physically invalid configuration. `field()`
/// names the offending key (a flat field path such as "d1").
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::runtime_error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

enum class BlockingProfile { none, low, high, custom };

inline std::string_view to_string(BlockingProfile p) {
  switch (p) {
    case BlockingProfile::none: return "none";
    case BlockingProfile::low: return "low";
    case BlockingProfile::high: return "high";
    case BlockingProfile::custom: return "custom";
  }
  return "custom";
}

inline BlockingProfile parse_blocking_profile(std::string_view name) {
  if (name == "none" || name == "None") return BlockingProfile::none;
  if (name == "low" || name == "Low") return BlockingProfile::low;
  if (name == "high" || name == "High") return BlockingProfile::high;
  throw ConfigError("blocking", "unknown blocking profile '" + std::string(name) + "'");
}

/// Every physical and protocol parameter of the two-way relay.
///
/// Rates are stored per second; association rates in (mol/L)^-1 s^-1,
/// dissociation rates in s^-1. Index 0..2 of `gamma`/`eta` is molecule type
/// M1..M3. Blocking arrays are indexed by the blocked receptor group:
/// [0] is Omega_1 blocked by M2, [1] is Omega_2 blocked by M1.
struct SystemConfig {
  double D1 = 1e-9, D2 = 1e-9, D3 = 1e-9;  // m^2/s
  double d1 = 100e-6, d2 = 100e-6;         // m
  int n1R = 250, n2R = 250;                // relay receptor groups
  int n3T1 = 500, n3T2 = 500;              // M3 receptors on T1, T2

  std::array<double, 3> gamma{4e5 / seconds_per_minute, 4e5 / seconds_per_minute,
                              4e5 / seconds_per_minute};
  std::array<double, 3> eta{0.1 / seconds_per_minute, 0.1 / seconds_per_minute,
                            0.1 / seconds_per_minute};

  BlockingProfile blocking = BlockingProfile::low;
  std::array<double, 2> gamma_block{3e5 / seconds_per_minute, 3e5 / seconds_per_minute};
  std::array<double, 2> eta_block{0.1 / seconds_per_minute, 0.1 / seconds_per_minute};

  double zeta_T1 = 1e-17, zeta_T2 = 1e-17, zeta_R = 1e-17;  // mol
  std::optional<double> c_SNC;  // mol/L; derived from zeta when absent
  std::optional<double> c_PNC;

  int qT1R = 0, qT2R = 0, qRT1 = 0, qRT2 = 0;  // channel memory, slots

  std::optional<double> t0;  // s; chosen at the impulse-response peak when absent
  std::optional<double> ts;  // s; chosen from target_nu when absent
  double target_nu = 0.05;

  /// kappa_D,i = eta_i / gamma_i for i in {1,2,3}.
  double kappa_D(int i) const { return eta.at(i - 1) / gamma.at(i - 1); }

  /// kappa_D,i^{Block,j} for receptor group i in {1,2}; empty when the
  /// blocking profile is `none`.
  std::optional<double> kappa_block(int i) const {
    if (blocking == BlockingProfile::none) return std::nullopt;
    return eta_block.at(i - 1) / gamma_block.at(i - 1);
  }

  bool operator==(const SystemConfig&) const = default;
};

/// Fills the blocking rates of a named profile (rates per second).
inline void apply_blocking_profile(SystemConfig& cfg, BlockingProfile p) {
  cfg.blocking = p;
  switch (p) {
    case BlockingProfile::low:
      cfg.gamma_block = {3e5 / seconds_per_minute, 3e5 / seconds_per_minute};
      cfg.eta_block = {0.1 / seconds_per_minute, 0.1 / seconds_per_minute};
      break;
    case BlockingProfile::high:
      cfg.gamma_block = {5e5 / seconds_per_minute, 5e5 / seconds_per_minute};
      cfg.eta_block = {0.01 / seconds_per_minute, 0.01 / seconds_per_minute};
      break;
    case BlockingProfile::none:
      cfg.gamma_block = {0.0, 0.0};
      cfg.eta_block = {0.0, 0.0};
      break;
    case BlockingProfile::custom:
      break;
  }
}

/// The reference parameter set (diffusion, geometry, receptors, kinetics)
/// with the given blocking preset.
inline SystemConfig reference_config(BlockingProfile p = BlockingProfile::low) {
  SystemConfig cfg;
  apply_blocking_profile(cfg, p);
  return cfg;
}

namespace detail {

inline void require_positive(double v, const char* field) {
  if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(field, "must be strictly positive and finite");
}

inline void require_nonnegative(double v, const char* field) {
  if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError(field, "must be non-negative and finite");
}

}  // namespace detail

/// Field-level validation. Timing and channel stability are checked by
/// load_config once the channel gains are known.
inline void validate_fields(const SystemConfig& cfg) {
  using detail::require_nonnegative;
  using detail::require_positive;
  require_positive(cfg.D1, "D1");
  require_positive(cfg.D2, "D2");
  require_positive(cfg.D3, "D3");
  require_positive(cfg.d1, "d1");
  require_positive(cfg.d2, "d2");
  if (cfg.n1R < 1) throw ConfigError("n1R", "receptor count must be >= 1");
  if (cfg.n2R < 1) throw ConfigError("n2R", "receptor count must be >= 1");
  if (cfg.n3T1 < 1) throw ConfigError("n3T1", "receptor count must be >= 1");
  if (cfg.n3T2 < 1) throw ConfigError("n3T2", "receptor count must be >= 1");
  static constexpr const char* gamma_names[] = {"gamma1", "gamma2", "gamma3"};
  static constexpr const char* eta_names[] = {"eta1", "eta2", "eta3"};
  for (int i = 0; i < 3; ++i) {
    require_positive(cfg.gamma[i], gamma_names[i]);
    require_positive(cfg.eta[i], eta_names[i]);
  }
  if (cfg.blocking != BlockingProfile::none) {
    require_positive(cfg.gamma_block[0], "blocking.gamma12");
    require_positive(cfg.gamma_block[1], "blocking.gamma21");
    require_positive(cfg.eta_block[0], "blocking.eta12");
    require_positive(cfg.eta_block[1], "blocking.eta21");
  }
  require_nonnegative(cfg.zeta_T1, "zeta_T1");
  require_nonnegative(cfg.zeta_T2, "zeta_T2");
  require_nonnegative(cfg.zeta_R, "zeta_R");
  if (cfg.c_SNC) require_nonnegative(*cfg.c_SNC, "c_SNC");
  if (cfg.c_PNC) require_nonnegative(*cfg.c_PNC, "c_PNC");
  if (cfg.qT1R < 0) throw ConfigError("qT1R", "memory must be >= 0");
  if (cfg.qT2R < 0) throw ConfigError("qT2R", "memory must be >= 0");
  if (cfg.qRT1 < 0) throw ConfigError("qRT1", "memory must be >= 0");
  if (cfg.qRT2 < 0) throw ConfigError("qRT2", "memory must be >= 0");
  if (cfg.t0) require_positive(*cfg.t0, "t0");
  if (cfg.ts) require_positive(*cfg.ts, "ts");
  if (!(cfg.target_nu > 0.0 && cfg.target_nu < 1.0)) throw ConfigError("target_nu", "must lie in (0, 1)");
}

// ---------------------------------------------------------------------------
// JSON schema
//
// A flat object. Every key is optional; absent keys keep the reference
// values. Rates are read in units of `rate_time_unit` ("min" or "s",
// default "min"); `blocking` is a preset name or an object with keys
// gamma12, eta12 (Omega_1 blocked by M2) and gamma21, eta21.
// `t0`, `ts`, `c_SNC`, `c_PNC` accept null or "auto".

namespace detail {

inline const std::vector<std::string>& known_keys() {
  static const std::vector<std::string> keys = {
      "D1", "D2", "D3", "d1", "d2", "n1R", "n2R", "n3T1", "n3T2",
      "gamma1", "gamma2", "gamma3", "eta1", "eta2", "eta3", "rate_time_unit",
      "blocking", "zeta_T1", "zeta_T2", "zeta_R", "c_SNC", "c_PNC",
      "qT1R", "qT2R", "qRT1", "qRT2", "t0", "ts", "target_nu"};
  return keys;
}

inline double get_number(const nlohmann::json& j, const std::string& key) {
  const auto& v = j.at(key);
  if (!v.is_number()) throw ConfigError(key, "expected a number");
  return v.get<double>();
}

inline int get_int(const nlohmann::json& j, const std::string& key) {
  const auto& v = j.at(key);
  if (v.is_number_integer()) return v.get<int>();
  if (v.is_number_float()) {
    double d = v.get<double>();
    if (std::floor(d) == d) return static_cast<int>(d);
  }
  throw ConfigError(key, "expected an integer");
}

inline std::optional<double> get_optional_number(const nlohmann::json& j, const std::string& key) {
  const auto& v = j.at(key);
  if (v.is_null()) return std::nullopt;
  if (v.is_string() && v.get<std::string>() == "auto") return std::nullopt;
  if (!v.is_number()) throw ConfigError(key, "expected a number, null or \"auto\"");
  return v.get<double>();
}

}  // namespace detail

/// Parses a flat JSON object into a validated SystemConfig.
inline SystemConfig config_from_json(const nlohmann::json& j) {
  using namespace detail;
  if (!j.is_object()) throw ConfigError("<root>", "expected a JSON object");
  for (const auto& [key, _] : j.items()) {
    bool known = false;
    for (const auto& k : known_keys()) known = known || (k == key);
    if (!known) throw ConfigError(key, "unknown field");
  }

  SystemConfig cfg = reference_config();
  double rate_scale = 1.0 / seconds_per_minute;
  if (j.contains("rate_time_unit")) {
    const auto& u = j.at("rate_time_unit");
    if (!u.is_string()) throw ConfigError("rate_time_unit", "expected \"min\" or \"s\"");
    const auto unit = u.get<std::string>();
    if (unit == "min") rate_scale = 1.0 / seconds_per_minute;
    else if (unit == "s") rate_scale = 1.0;
    else throw ConfigError("rate_time_unit", "expected \"min\" or \"s\"");
  }

  auto num = [&](const char* key, double& dst) {
    if (j.contains(key)) dst = get_number(j, key);
  };
  auto integer = [&](const char* key, int& dst) {
    if (j.contains(key)) dst = get_int(j, key);
  };
  auto rate = [&](const char* key, double& dst) {
    if (j.contains(key)) dst = get_number(j, key) * rate_scale;
  };
  auto optional = [&](const char* key, std::optional<double>& dst) {
    if (j.contains(key)) dst = get_optional_number(j, key);
  };

  num("D1", cfg.D1);
  num("D2", cfg.D2);
  num("D3", cfg.D3);
  num("d1", cfg.d1);
  num("d2", cfg.d2);
  integer("n1R", cfg.n1R);
  integer("n2R", cfg.n2R);
  integer("n3T1", cfg.n3T1);
  integer("n3T2", cfg.n3T2);
  rate("gamma1", cfg.gamma[0]);
  rate("gamma2", cfg.gamma[1]);
  rate("gamma3", cfg.gamma[2]);
  rate("eta1", cfg.eta[0]);
  rate("eta2", cfg.eta[1]);
  rate("eta3", cfg.eta[2]);

  if (j.contains("blocking")) {
    const auto& b = j.at("blocking");
    if (b.is_string()) {
      apply_blocking_profile(cfg, parse_blocking_profile(b.get<std::string>()));
    } else if (b.is_object()) {
      cfg.blocking = BlockingProfile::custom;
      for (const auto& [key, _] : b.items()) {
        if (key != "gamma12" && key != "eta12" && key != "gamma21" && key != "eta21")
          throw ConfigError("blocking." + key, "unknown field");
      }
      for (const char* key : {"gamma12", "eta12", "gamma21", "eta21"}) {
        if (!b.contains(key)) throw ConfigError(std::string("blocking.") + key, "missing");
        if (!b.at(key).is_number()) throw ConfigError(std::string("blocking.") + key, "expected a number");
      }
      cfg.gamma_block = {b.at("gamma12").get<double>() * rate_scale, b.at("gamma21").get<double>() * rate_scale};
      cfg.eta_block = {b.at("eta12").get<double>() * rate_scale, b.at("eta21").get<double>() * rate_scale};
    } else {
      throw ConfigError("blocking", "expected a profile name or an object");
    }
  }

  num("zeta_T1", cfg.zeta_T1);
  num("zeta_T2", cfg.zeta_T2);
  num("zeta_R", cfg.zeta_R);
  optional("c_SNC", cfg.c_SNC);
  optional("c_PNC", cfg.c_PNC);
  integer("qT1R", cfg.qT1R);
  integer("qT2R", cfg.qT2R);
  integer("qRT1", cfg.qRT1);
  integer("qRT2", cfg.qRT2);
  optional("t0", cfg.t0);
  optional("ts", cfg.ts);
  num("target_nu", cfg.target_nu);

  validate_fields(cfg);
  return cfg;
}

/// Serializes with rates per second so that config_from_json reproduces
/// the same values.
inline nlohmann::json config_to_json(const SystemConfig& cfg) {
  nlohmann::json j;
  j["D1"] = cfg.D1;
  j["D2"] = cfg.D2;
  j["D3"] = cfg.D3;
  j["d1"] = cfg.d1;
  j["d2"] = cfg.d2;
  j["n1R"] = cfg.n1R;
  j["n2R"] = cfg.n2R;
  j["n3T1"] = cfg.n3T1;
  j["n3T2"] = cfg.n3T2;
  j["rate_time_unit"] = "s";
  j["gamma1"] = cfg.gamma[0];
  j["gamma2"] = cfg.gamma[1];
  j["gamma3"] = cfg.gamma[2];
  j["eta1"] = cfg.eta[0];
  j["eta2"] = cfg.eta[1];
  j["eta3"] = cfg.eta[2];
  if (cfg.blocking == BlockingProfile::custom) {
    j["blocking"] = {{"gamma12", cfg.gamma_block[0]}, {"eta12", cfg.eta_block[0]},
                     {"gamma21", cfg.gamma_block[1]}, {"eta21", cfg.eta_block[1]}};
  } else {
    j["blocking"] = std::string(to_string(cfg.blocking));
  }
  j["zeta_T1"] = cfg.zeta_T1;
  j["zeta_T2"] = cfg.zeta_T2;
  j["zeta_R"] = cfg.zeta_R;
  j["c_SNC"] = cfg.c_SNC ? nlohmann::json(*cfg.c_SNC) : nlohmann::json(nullptr);
  j["c_PNC"] = cfg.c_PNC ? nlohmann::json(*cfg.c_PNC) : nlohmann::json(nullptr);
  j["qT1R"] = cfg.qT1R;
  j["qT2R"] = cfg.qT2R;
  j["qRT1"] = cfg.qRT1;
  j["qRT2"] = cfg.qRT2;
  j["t0"] = cfg.t0 ? nlohmann::json(*cfg.t0) : nlohmann::json(nullptr);
  j["ts"] = cfg.ts ? nlohmann::json(*cfg.ts) : nlohmann::json(nullptr);
  j["target_nu"] = cfg.target_nu;
  return j;
}

/// Applies a "key=value" override to a config document. The value is read
/// as JSON when it parses as JSON and as a plain string otherwise.
inline void apply_override(nlohmann::json& doc, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0)
    throw ConfigError(std::string(assignment), "override must have the form key=value");
  const std::string key(assignment.substr(0, eq));
  const std::string raw(assignment.substr(eq + 1));
  nlohmann::json value = nlohmann::json::parse(raw, nullptr, /*allow_exceptions=*/false);
  if (value.is_discarded()) value = raw;
  doc[key] = value;
}

/// Sets all four memories to `q`.
inline void set_uniform_memory(SystemConfig& cfg, int q) {
  cfg.qT1R = cfg.qT2R = cfg.qRT1 = cfg.qRT2 = q;
}

}  // namespace mcrelay

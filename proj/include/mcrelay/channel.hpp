#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "config.hpp"

namespace mcrelay {

/// Fick's-law Green's function for an instantaneous point release in 3-D:
/// 1[t>0] (4 pi D t)^{-3/2} exp(-r^2 / (4 D t)), in m^-3.
inline double impulse_response(double r, double t, double D) {
  if (!(t > 0.0)) return 0.0;
  const double four_dt = 4.0 * D * t;
  return std::pow(std::numbers::pi * four_dt, -1.5) * std::exp(-r * r / four_dt);
}

/// Time at which impulse_response(r, ., D) peaks.
constexpr double peak_time(double r, double D) { return r * r / (6.0 * D); }

enum class Link { T1R, T2R, RT1, RT2 };

inline std::string_view to_string(Link l) {
  switch (l) {
    case Link::T1R: return "T1->R";
    case Link::T2R: return "T2->R";
    case Link::RT1: return "R->T1";
    case Link::RT2: return "R->T2";
  }
  return "?";
}

inline constexpr std::array<Link, 4> all_links{Link::T1R, Link::T2R, Link::RT1, Link::RT2};

struct LinkGeometry {
  double distance;
  double diffusion;
  int memory;
};

inline LinkGeometry link_geometry(const SystemConfig& cfg, Link link) {
  switch (link) {
    case Link::T1R: return {cfg.d1, cfg.D1, cfg.qT1R};
    case Link::T2R: return {cfg.d2, cfg.D2, cfg.qT2R};
    case Link::RT1: return {cfg.d1, cfg.D3, cfg.qRT1};
    case Link::RT2: return {cfg.d2, cfg.D3, cfg.qRT2};
  }
  throw std::logic_error("unknown link");
}

/// Largest peak time over the four links; sampling there keeps every
/// link's later samples below its first.
inline double choose_t0(const SystemConfig& cfg) {
  return std::max({peak_time(cfg.d1, cfg.D1), peak_time(cfg.d2, cfg.D2), peak_time(cfg.d1, cfg.D3),
                   peak_time(cfg.d2, cfg.D3)});
}

struct Timing {
  double t0;
  double ts;
};

namespace detail {

// Untruncated nu_l = h(t0 + (l-1) ts) / h(t0) for one link.
inline double raw_nu(const LinkGeometry& g, double t0, double ts, int l) {
  return impulse_response(g.distance, t0 + (l - 1) * ts, g.diffusion) / impulse_response(g.distance, t0, g.diffusion);
}

inline double worst_first_truncated_nu(const SystemConfig& cfg, int q, double t0, double ts) {
  double worst = 0.0;
  for (Link link : all_links) worst = std::max(worst, raw_nu(link_geometry(cfg, link), t0, ts, q + 2));
  return worst;
}

}  // namespace detail

/// Slot duration ts such that, sampling at t0 + (l-1) ts, the largest
/// first-truncated gain nu_{q+2} over the four links equals `target_nu`.
/// Uses t0 from the config when set, otherwise choose_t0.
inline double choose_ts_for_memory(const SystemConfig& cfg, int q, double target_nu) {
  if (!(target_nu > 0.0 && target_nu < 1.0)) throw std::invalid_argument("target_nu must lie in (0,1)");
  if (q < 0) throw std::invalid_argument("memory must be >= 0");
  const double t0 = cfg.t0.value_or(choose_t0(cfg));
  auto excess = [&](double ts) { return detail::worst_first_truncated_nu(cfg, q, t0, ts) - target_nu; };

  double lo = t0 * 1e-9;
  double hi = t0;
  int grow = 0;
  while (excess(hi) > 0.0) {
    lo = hi;
    hi *= 2.0;
    if (++grow > 200) throw std::runtime_error("choose_ts_for_memory: no bracketing interval found");
  }
  if (excess(lo) < 0.0) throw std::runtime_error("choose_ts_for_memory: no bracketing interval found");
  for (int it = 0; it < 400; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double e = excess(mid);
    if (std::abs(e) <= 1e-12 * target_nu || (hi - lo) <= 1e-15 * hi) return mid;
    (e > 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

inline int max_memory(const SystemConfig& cfg) { return std::max({cfg.qT1R, cfg.qT2R, cfg.qRT1, cfg.qRT2}); }

/// Resolves sampling offset and slot duration: explicit values win;
/// otherwise t0 sits at the latest impulse-response peak and ts equals t0
/// without memory, or is chosen from target_nu for the largest memory.
inline Timing resolve_timing(const SystemConfig& cfg) {
  const double t0 = cfg.t0.value_or(choose_t0(cfg));
  double ts;
  if (cfg.ts) ts = *cfg.ts;
  else if (max_memory(cfg) == 0) ts = t0;
  else ts = choose_ts_for_memory(cfg, max_memory(cfg), cfg.target_nu);
  if (t0 > ts) throw ConfigError("t0", "sampling offset t0 must not exceed slot duration ts");
  return {t0, ts};
}

/// Sampled channel gains of one directed link, truncated at its memory.
struct LinkGains {
  Link link = Link::T1R;
  int memory = 0;
  std::vector<double> pis;  // pi_1 .. pi_{q+1}, m^-3
  std::vector<double> nus;  // nu_2 .. nu_{q+1}

  /// pi_l for l >= 1; zero past the memory.
  double pi(int l) const { return (l >= 1 && l <= static_cast<int>(pis.size())) ? pis[l - 1] : 0.0; }
  /// nu_l = pi_l / pi_1 for l >= 2; zero past the memory.
  double nu(int l) const { return (l >= 2 && l - 2 < static_cast<int>(nus.size())) ? nus[l - 2] : 0.0; }

  /// Memory in super slots: floor(q / 2). Only odd samples matter because
  /// the two phases alternate slots.
  int super_slot_memory() const { return memory / 2; }

  /// Gain seen l super slots after a release: pi_{2l+1}.
  double super_slot_pi(int l) const { return pi(2 * l + 1); }
  double super_slot_nu(int l) const { return nu(2 * l + 1); }

  /// sum_{l=1}^{floor(q/2)} nu_{2l+1}.
  double odd_nu_sum() const {
    double s = 0.0;
    for (int l = 1; l <= super_slot_memory(); ++l) s += super_slot_nu(l);
    return s;
  }
};

inline LinkGains link_gains(const SystemConfig& cfg, Link link, const Timing& timing) {
  const LinkGeometry g = link_geometry(cfg, link);
  LinkGains out;
  out.link = link;
  out.memory = g.memory;
  out.pis.reserve(g.memory + 1);
  for (int l = 1; l <= g.memory + 1; ++l)
    out.pis.push_back(impulse_response(g.distance, timing.t0 + (l - 1) * timing.ts, g.diffusion));
  for (int l = 2; l <= g.memory + 1; ++l) out.nus.push_back(out.pis[l - 1] / out.pis[0]);
  return out;
}

inline LinkGains link_gains(const SystemConfig& cfg, Link link) { return link_gains(cfg, link, resolve_timing(cfg)); }

/// Gains of all four links under one timing.
struct ChannelSet {
  Timing timing{};
  LinkGains t1r, t2r, rt1, rt2;

  /// Transceiver-to-relay gains of transceiver i (0-based).
  const LinkGains& uplink(int i) const { return i == 0 ? t1r : t2r; }
  /// Relay-to-transceiver gains of transceiver i (0-based).
  const LinkGains& downlink(int i) const { return i == 0 ? rt1 : rt2; }
};

inline ChannelSet make_channels(const SystemConfig& cfg) {
  ChannelSet ch;
  ch.timing = resolve_timing(cfg);
  ch.t1r = link_gains(cfg, Link::T1R, ch.timing);
  ch.t2r = link_gains(cfg, Link::T2R, ch.timing);
  ch.rt1 = link_gains(cfg, Link::RT1, ch.timing);
  ch.rt2 = link_gains(cfg, Link::RT2, ch.timing);
  return ch;
}

}  // namespace mcrelay

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "channel.hpp"
#include "coding.hpp"
#include "config.hpp"
#include "reception.hpp"
#include "units.hpp"

namespace mcrelay {

/// Index of the (b1, b2) pair in phase-1 arrays.
constexpr int pair_index(int b1, int b2) noexcept { return 2 * b1 + b2; }

struct ErrorBreakdown {
  std::array<double, 4> phase1{};                 // P(E_R | b1, b2), pair_index
  std::array<std::array<double, 2>, 2> phase2{};  // [i][b_R] = P(E^{Ti} | B_R = b_R)
  double pe1 = 0.0;
  double pe2 = 0.0;
  double avg_bep = 0.0;

  std::optional<double> noe_pe1;
  std::optional<double> noe_pe2;
  std::optional<double> noe_avg_bep() const {
    if (!noe_pe1 || !noe_pe2) return std::nullopt;
    return 0.5 * (*noe_pe1 + *noe_pe2);
  }

  // Diagnostics.
  int iterations = 0;
  double residual = 0.0;
  std::array<double, 2> relay_thresholds{};
  std::array<std::array<double, 2>, 2> transceiver_thresholds{};  // [i][previous decoded relay bit]
  std::array<double, 9> group_weights{};                          // f_g, PNC with ISI
  std::array<std::array<double, 4>, 9> group_errors{};            // p_g(b1, b2)
  double truncated_mass = 0.0;
};

class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double residual) : std::runtime_error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

struct FixedPointOptions {
  double tol = 1e-12;
  int max_iter = 10000;
  int m_trunc = 30;
};

// ---------------------------------------------------------------------------
// Combining the two phases

struct TransceiverErrors {
  double pe1, pe2, avg_bep;
};

/// End-to-end error per transceiver from the phase-1 conditionals and the
/// phase-2 conditionals, averaged over four equiprobable bit pairs.
inline TransceiverErrors combine_phases(const std::array<double, 4>& phase1,
                                        const std::array<std::array<double, 2>, 2>& phase2) {
  std::array<double, 2> pe{};
  for (int i = 0; i < 2; ++i) {
    double s = 0.0;
    for (int b1 = 0; b1 < 2; ++b1)
      for (int b2 = 0; b2 < 2; ++b2) {
        const int x = b1 ^ b2;
        const double er = phase1[pair_index(b1, b2)];
        s += er * (1.0 - phase2[i][1 - x]) + (1.0 - er) * phase2[i][x];
      }
    pe[i] = 0.25 * s;
  }
  return {pe[0], pe[1], 0.5 * (pe[0] + pe[1])};
}

inline void finish(ErrorBreakdown& e) {
  const auto t = combine_phases(e.phase1, e.phase2);
  e.pe1 = t.pe1;
  e.pe2 = t.pe2;
  e.avg_bep = t.avg_bep;
}

/// Probability that the relay's transmitted bit is 0, given the phase-1
/// conditionals and equiprobable bits.
inline double relay_zero_probability(const std::array<double, 4>& p1) {
  return 0.25 * (2.0 - p1[0] - p1[3] + p1[1] + p1[2]);
}

// ---------------------------------------------------------------------------
// Phase 1 building blocks

inline int relay_receptors(const SystemConfig& cfg, int i) { return i == 0 ? cfg.n1R : cfg.n2R; }
inline int transceiver_receptors(const SystemConfig& cfg, int i) { return i == 0 ? cfg.n3T1 : cfg.n3T2; }

/// PNC relay error given post-reaction concentrations (at most one
/// positive) and the true relay bit, with zero thresholds.
inline double pnc_relay_error(const SystemConfig& cfg, double c1_post, double c2_post, int b_relay) {
  Tail t{1.0, 0.0};  // no receptor group can activate
  if (c1_post > 0.0) t = bound_count_tail(cfg.n1R, binding_probability(c1_post, cfg.kappa_D(1)), 0.0);
  else if (c2_post > 0.0) t = bound_count_tail(cfg.n2R, binding_probability(c2_post, cfg.kappa_D(2)), 0.0);
  return b_relay == 1 ? t.lower : t.upper;
}

/// SNC binding probability of receptor group i (0-based) at the relay
/// given its own ligand and the competing ligand concentration.
inline double snc_relay_binding(const SystemConfig& cfg, int i, double own, double other) {
  const auto kb = cfg.kappa_block(i + 1);
  const double load = (kb && other > 0.0) ? other / *kb : 0.0;
  return binding_probability(own, cfg.kappa_D(i + 1), load);
}

// ---------------------------------------------------------------------------
// Phase 2

/// Maximum-likelihood threshold between Binomial(n, p1) and
/// Binomial(n, p0); zero when p0 = 0.
inline double adaptive_threshold(double p0, double p1, int n) {
  if (!(p1 > p0)) throw std::domain_error("adaptive threshold requires p1 > p0");
  if (p0 <= 0.0) return 0.0;
  const double num = n * (std::log1p(-p0) - std::log1p(-p1));
  const double den = std::log(p1) + std::log1p(-p0) - std::log(p0) - std::log1p(-p1);
  return num / den;
}

/// p_b^{Ti,I}(b, b_prev) table with unit downlink memory.
struct Phase2Binding {
  std::array<std::array<double, 2>, 2> p{};  // [b][b_prev]
  int n = 1;
};

inline Phase2Binding phase2_binding(const SystemConfig& cfg, const ChannelSet& ch, int i) {
  const LinkGains& g = ch.downlink(i);
  Phase2Binding out;
  out.n = transceiver_receptors(cfg, i);
  for (int b = 0; b < 2; ++b)
    for (int bp = 0; bp < 2; ++bp) {
      const double c = unit_convert(b * cfg.zeta_R, g.pi(1)) + unit_convert(bp * cfg.zeta_R, g.super_slot_pi(1));
      out.p[b][bp] = binding_probability(c, cfg.kappa_D(3));
    }
  return out;
}

/// tau^{Ti,I}(b^) for the given previous decoded relay bit.
inline double adaptive_threshold_phase2(const Phase2Binding& pb, int prev_decoded) {
  return adaptive_threshold(pb.p[0][prev_decoded], pb.p[1][prev_decoded], pb.n);
}

/// wrong[b][b_prev][b^_prev]: probability of deciding the wrong relay bit
/// when B_R = b, the previous relay bit was b_prev and the receiver
/// thresholds with the previous decoded bit b^_prev.
struct Phase2Model {
  std::array<std::array<std::array<double, 2>, 2>, 2> wrong{};
  std::array<double, 2> tau{};
};

inline Phase2Model phase2_model(const SystemConfig& cfg, const ChannelSet& ch, int i) {
  const Phase2Binding pb = phase2_binding(cfg, ch, i);
  Phase2Model m;
  for (int bh = 0; bh < 2; ++bh) {
    // With a silent relay there is nothing to decide between.
    m.tau[bh] = pb.p[1][bh] > pb.p[0][bh] ? adaptive_threshold_phase2(pb, bh) : pb.n;
  }
  for (int b = 0; b < 2; ++b)
    for (int bp = 0; bp < 2; ++bp)
      for (int bh = 0; bh < 2; ++bh) {
        const Tail t = bound_count_tail(pb.n, pb.p[b][bp], m.tau[bh]);
        m.wrong[b][bp][bh] = b == 0 ? t.upper : t.lower;
      }
  return m;
}

/// One step of the phase-2 recursion for one transceiver.
inline std::array<double, 2> phase2_step(const Phase2Model& m, const std::array<double, 2>& e_prev,
                                         double p_relay_zero) {
  std::array<double, 2> out{};
  const std::array<double, 2> prior{p_relay_zero, 1.0 - p_relay_zero};
  for (int b = 0; b < 2; ++b) {
    double s = 0.0;
    for (int bp = 0; bp < 2; ++bp)
      for (int bh = 0; bh < 2; ++bh) {
        const double p_hat = bh != bp ? e_prev[bp] : 1.0 - e_prev[bp];
        s += prior[bp] * p_hat * m.wrong[b][bp][bh];
      }
    out[b] = s;
  }
  return out;
}

/// Phase-2 errors without downlink memory: a silent relay is never
/// misread, an active one is missed when no receptor binds.
inline std::array<double, 2> phase2_no_isi(const SystemConfig& cfg, const ChannelSet& ch, int i) {
  const double c = unit_convert(cfg.zeta_R, ch.downlink(i).pi(1));
  const double p = binding_probability(c, cfg.kappa_D(3));
  return {0.0, bound_count_tail(transceiver_receptors(cfg, i), p, 0.0).lower};
}

// ---------------------------------------------------------------------------
// No ISI

inline ErrorBreakdown pnc_no_isi(const SystemConfig& cfg, const ChannelSet& ch) {
  const auto c = resolve_targets(cfg, ch, Scheme::pnc);
  ErrorBreakdown e;
  for (int b1 = 0; b1 < 2; ++b1)
    for (int b2 = 0; b2 < 2; ++b2) {
      const auto [c1, c2] = react_perfect(b1 * c[0], b2 * c[1]);
      e.phase1[pair_index(b1, b2)] = pnc_relay_error(cfg, c1, c2, b1 ^ b2);
    }
  e.phase2[0] = phase2_no_isi(cfg, ch, 0);
  e.phase2[1] = phase2_no_isi(cfg, ch, 1);
  finish(e);
  return e;
}

/// Per-group decoding error of the SNC relay, both bits known.
inline std::array<double, 2> snc_group_errors(const SystemConfig& cfg, const std::array<double, 2>& own,
                                              const std::array<int, 2>& bits,
                                              const std::array<double, 2>& tau) {
  std::array<double, 2> e{};
  for (int i = 0; i < 2; ++i) {
    const double p = snc_relay_binding(cfg, i, own[i], own[1 - i]);
    const Tail t = bound_count_tail(relay_receptors(cfg, i), p, tau[i]);
    e[i] = bits[i] == 1 ? t.lower : t.upper;
  }
  return e;
}

constexpr double xor_error(double e1, double e2) noexcept { return e1 * (1.0 - e2) + (1.0 - e1) * e2; }

inline ErrorBreakdown snc_no_isi(const SystemConfig& cfg, const ChannelSet& ch) {
  const auto c = resolve_targets(cfg, ch, Scheme::snc);
  ErrorBreakdown e;
  for (int b1 = 0; b1 < 2; ++b1)
    for (int b2 = 0; b2 < 2; ++b2) {
      const auto g = snc_group_errors(cfg, {b1 * c[0], b2 * c[1]}, {b1, b2}, {0.0, 0.0});
      e.phase1[pair_index(b1, b2)] = xor_error(g[0], g[1]);
    }
  e.phase2[0] = phase2_no_isi(cfg, ch, 0);
  e.phase2[1] = phase2_no_isi(cfg, ch, 1);
  finish(e);
  return e;
}

/// MAP threshold for a binary hypothesis with pmfs over y = 0..n: the
/// smallest y favoring 1, minus one, clamped to be non-negative. When no y
/// favors 1 the decision is always 0 and 0 is returned.
inline int map_threshold_no_isi(double prior0, double prior1, const std::vector<double>& pmf0,
                                const std::vector<double>& pmf1) {
  for (std::size_t y = 0; y < pmf1.size(); ++y) {
    const double null = y < pmf0.size() ? pmf0[y] : 0.0;
    if (prior1 * pmf1[y] > prior0 * null) return std::max(0, static_cast<int>(y) - 1);
  }
  return 0;
}

// ---------------------------------------------------------------------------
// PNC with ISI: group decomposition of the previous-slot outcomes

/// Offset of (C1 - C2)/c after reaction for the previous bits (b1p, b2p)
/// and their decoded versions (bh1 at T2, bh2 at T1), for equal targets.
inline double pnc_group_offset(double nu1, double nu2, int b1p, int b2p, int bh1, int bh2) {
  return nu2 * (bh2 - b2p) - nu1 * (bh1 - b1p);
}

/// Group label 1..9 of a previous-slot outcome.
inline int pnc_group(int b1p, int b2p, int bh1, int bh2) {
  const int d1 = bh1 - b1p;
  const int d2 = bh2 - b2p;
  if (d1 == 0 && d2 == 0) return 1;
  if (d1 == 1 && d2 == 0) return 2;
  if (d1 == 0 && d2 == -1) return 3;
  if (d1 == 0 && d2 == 1) return 4;
  if (d1 == -1 && d2 == 0) return 5;
  if (d1 == 1 && d2 == 1) return 6;
  if (d1 == -1 && d2 == -1) return 7;
  if (d1 == 1 && d2 == -1) return 8;
  return 9;
}

/// Relay error for group g and current bits, from concentrations through
/// binding and binomial tails. Targets may differ per transceiver.
inline double pnc_group_error_first_principles(const SystemConfig& cfg, double nu1, double nu2, double c1,
                                               double c2, int g, int b1, int b2) {
  static constexpr int d[10][2] = {{0, 0}, {0, 0}, {1, 0}, {0, -1}, {0, 1}, {-1, 0}, {1, 1}, {-1, -1}, {1, -1}, {-1, 1}};
  const double diff = c1 * (b1 - nu1 * d[g][0]) - c2 * (b2 - nu2 * d[g][1]);
  return pnc_relay_error(cfg, std::max(diff, 0.0), std::max(-diff, 0.0), b1 ^ b2);
}

/// Closed-form group errors as tabulated for equal targets c and
/// nu1 >= nu2.
inline double pnc_group_error_table(const SystemConfig& cfg, double nu1, double nu2, double c, int g, int b1, int b2) {
  const double k1 = cfg.kappa_D(1), k2 = cfg.kappa_D(2);
  const int n1 = cfg.n1R, n2 = cfg.n2R;
  const double np = nu1 + nu2, nm = nu1 - nu2;
  // (k / (a c + k))^n and its complement, in log space: the base sits
  // very close to 1 at relay-side concentrations.
  auto log_miss1 = [&](double a) { return -n1 * std::log1p(a * c / k1); };
  auto log_miss2 = [&](double a) { return -n2 * std::log1p(a * c / k2); };
  auto miss1 = [&](double a) { return std::exp(log_miss1(a)); };
  auto miss2 = [&](double a) { return std::exp(log_miss2(a)); };
  auto hit1 = [&](double a) { return -std::expm1(log_miss1(a)); };
  auto hit2 = [&](double a) { return -std::expm1(log_miss2(a)); };
  const bool same = b1 == b2;
  const bool ten = b1 == 1 && b2 == 0;
  switch (g) {
    case 1: return same ? 0.0 : (ten ? miss1(1.0) : miss2(1.0));
    case 2: return same ? hit2(nu1) : (ten ? miss1(1.0 - nu1) : miss2(1.0 + nu1));
    case 3: return same ? hit2(nu2) : (ten ? miss1(1.0 - nu2) : miss2(1.0 + nu2));
    case 4: return same ? hit1(nu2) : (ten ? miss1(1.0 + nu2) : miss2(1.0 - nu2));
    case 5: return same ? hit1(nu1) : (ten ? miss1(1.0 + nu1) : miss2(1.0 - nu1));
    case 6: return same ? hit2(nm) : (ten ? miss1(1.0 - nm) : miss2(1.0 + nm));
    case 7: return same ? hit1(nm) : (ten ? miss1(1.0 + nm) : miss2(1.0 - nm));
    case 8:
      if (same) return hit2(np);
      if (ten) return np < 1.0 ? miss1(1.0 - np) : miss2(np - 1.0);
      return miss2(1.0 + np);
    case 9:
      if (same) return hit1(np);
      if (ten) return miss1(1.0 + np);
      return np < 1.0 ? miss2(1.0 - np) : miss1(np - 1.0);
  }
  throw std::out_of_range("group must be in 1..9");
}

namespace detail {

inline void require_unit_memory(const ChannelSet& ch) {
  for (const LinkGains* g : {&ch.t1r, &ch.t2r, &ch.rt1, &ch.rt2})
    if (g->super_slot_memory() > 1)
      throw std::invalid_argument("analysis supports at most one super slot of memory (q <= 3) on every link");
}

inline double sup_diff(const std::array<double, 4>& a, const std::array<double, 4>& b) {
  double m = 0.0;
  for (int k = 0; k < 4; ++k) m = std::max(m, std::abs(a[k] - b[k]));
  return m;
}

inline double sup_diff(const std::array<std::array<double, 2>, 2>& a, const std::array<std::array<double, 2>, 2>& b) {
  double m = 0.0;
  for (int i = 0; i < 2; ++i)
    for (int k = 0; k < 2; ++k) m = std::max(m, std::abs(a[i][k] - b[i][k]));
  return m;
}

// P{B^_{i,k-1} = bh | previous bits, relay correct or not} for the bit of
// transceiver `owner` decoded at the other transceiver.
inline double decoded_bit_probability(const std::array<std::array<double, 2>, 2>& phase2, int owner, int bit,
                                      int decoded, int relay_bit, bool relay_error) {
  const int receiver = 1 - owner;
  const double p_correct =
      relay_error ? phase2[receiver][1 - relay_bit] : 1.0 - phase2[receiver][relay_bit];
  return decoded == bit ? p_correct : 1.0 - p_correct;
}

}  // namespace detail

/// Joint probability of the two decoded previous bits given the previous
/// bits, mixing the relay-correct and relay-error branches.
inline double pnc_decode_joint(const std::array<double, 4>& phase1_prev,
                               const std::array<std::array<double, 2>, 2>& phase2_prev, int b1p, int b2p, int bh1,
                               int bh2) {
  const int x = b1p ^ b2p;
  const double er = phase1_prev[pair_index(b1p, b2p)];
  using detail::decoded_bit_probability;
  const double ok = decoded_bit_probability(phase2_prev, 0, b1p, bh1, x, false) *
                    decoded_bit_probability(phase2_prev, 1, b2p, bh2, x, false);
  const double bad = decoded_bit_probability(phase2_prev, 0, b1p, bh1, x, true) *
                     decoded_bit_probability(phase2_prev, 1, b2p, bh2, x, true);
  return (1.0 - er) * ok + er * bad;
}

inline ErrorBreakdown pnc_isi_fixed_point(const SystemConfig& cfg, const ChannelSet& ch,
                                          const FixedPointOptions& opt = {}) {
  detail::require_unit_memory(ch);
  const auto c = resolve_targets(cfg, ch, Scheme::pnc);
  const double nu1 = ch.t1r.super_slot_nu(1);
  const double nu2 = ch.t2r.super_slot_nu(1);

  // p_g(b1, b2) does not change across iterations.
  std::array<std::array<double, 4>, 10> pg{};
  for (int g = 1; g <= 9; ++g)
    for (int b1 = 0; b1 < 2; ++b1)
      for (int b2 = 0; b2 < 2; ++b2)
        pg[g][pair_index(b1, b2)] = pnc_group_error_first_principles(cfg, nu1, nu2, c[0], c[1], g, b1, b2);

  const std::array<Phase2Model, 2> m2{phase2_model(cfg, ch, 0), phase2_model(cfg, ch, 1)};

  ErrorBreakdown start = pnc_no_isi(cfg, ch);
  std::array<double, 4> p1 = start.phase1;
  std::array<std::array<double, 2>, 2> p2 = start.phase2;

  auto weights = [&](const std::array<double, 4>& p1v, const std::array<std::array<double, 2>, 2>& p2v) {
    std::array<double, 10> f{};
    for (int b1p = 0; b1p < 2; ++b1p)
      for (int b2p = 0; b2p < 2; ++b2p)
        for (int bh1 = 0; bh1 < 2; ++bh1)
          for (int bh2 = 0; bh2 < 2; ++bh2)
            f[pnc_group(b1p, b2p, bh1, bh2)] += pnc_decode_joint(p1v, p2v, b1p, b2p, bh1, bh2);
    return f;
  };

  ErrorBreakdown e;
  double residual = 0.0;
  int it = 0;
  for (; it < opt.max_iter; ++it) {
    const auto f = weights(p1, p2);
    std::array<double, 4> n1{};
    for (int k = 0; k < 4; ++k) {
      double s = 0.0;
      for (int g = 1; g <= 9; ++g) s += f[g] * pg[g][k];
      n1[k] = std::clamp(0.25 * s, 0.0, 1.0);
    }
    const double pr0 = relay_zero_probability(p1);
    std::array<std::array<double, 2>, 2> n2{phase2_step(m2[0], p2[0], pr0), phase2_step(m2[1], p2[1], pr0)};
    residual = std::max(detail::sup_diff(n1, p1), detail::sup_diff(n2, p2));
    p1 = n1;
    p2 = n2;
    if (residual < opt.tol) break;
  }
  if (residual >= opt.tol)
    throw ConvergenceError("PNC fixed point did not converge; residual " + std::to_string(residual), residual);

  e.phase1 = p1;
  e.phase2 = p2;
  e.iterations = it + 1;
  e.residual = residual;
  const auto f = weights(p1, p2);
  for (int g = 1; g <= 9; ++g) {
    e.group_weights[g - 1] = f[g];
    e.group_errors[g - 1] = pg[g];
  }
  for (int i = 0; i < 2; ++i) e.transceiver_thresholds[i] = m2[i].tau;
  finish(e);
  return e;
}

// ---------------------------------------------------------------------------
// SNC with ISI

struct Atom {
  double value;
  double weight;
};

struct ReleaseDistribution {
  std::vector<Atom> atoms;  // release in mol
  double tail_mass = 0.0;   // prior mass of m > m_trunc, folded into the last atom
};

/// Stationary law of the SNC release with unit super-slot memory:
/// x_m = (c/pi_1) sum_{l=0}^{m-2} (-nu_3)^l with weight 2^{-m}.
inline ReleaseDistribution snc_isi_release_distribution(const LinkGains& g, double c, int m_trunc) {
  if (m_trunc < 1) throw std::invalid_argument("m_trunc must be >= 1");
  const double x_max = release_for_concentration(c, g.pi(1));
  const double nu = g.super_slot_nu(1);
  ReleaseDistribution d;
  double partial = 0.0;
  double power = 1.0;
  double w = 0.5;
  for (int m = 1; m <= m_trunc; ++m) {
    d.atoms.push_back({x_max * partial, w});
    partial += power;
    power *= -nu;
    w *= 0.5;
  }
  d.tail_mass = std::ldexp(1.0, -m_trunc);
  d.atoms.back().weight += d.tail_mass;
  return d;
}

/// Law of the relay-side residual concentration (mol/L) of one SNC
/// transmitter, by enumerating its last `history_bits` bits from a silent
/// start. Handles any memory; collapses equal values.
inline std::vector<Atom> snc_interference_law_enumerated(const LinkGains& g, double c, int history_bits) {
  const int q = g.super_slot_memory();
  std::map<double, double> law;
  if (q == 0) return {{0.0, 1.0}};
  const double w = std::ldexp(1.0, -history_bits);
  const unsigned long long count = 1ull << history_bits;
  for (unsigned long long h = 0; h < count; ++h) {
    History<double> own(static_cast<std::size_t>(q));
    for (int k = history_bits - 1; k >= 0; --k) own.push(snc_release(static_cast<int>((h >> k) & 1u), own, g, c));
    law[interference_concentration(own, g)] += w;
  }
  std::vector<Atom> out;
  out.reserve(law.size());
  for (const auto& [v, p] : law) out.push_back({v, p});
  return out;
}

/// Merges a sorted law into at most `max_atoms` atoms of equal prior mass
/// (weighted means within each bucket).
inline std::vector<Atom> compress_law(const std::vector<Atom>& law, std::size_t max_atoms) {
  if (law.size() <= max_atoms) return law;
  double total = 0.0;
  for (const auto& a : law) total += a.weight;
  std::vector<Atom> out;
  const double bucket = total / static_cast<double>(max_atoms);
  double w = 0.0, wx = 0.0;
  for (const auto& a : law) {
    w += a.weight;
    wx += a.weight * a.value;
    if (w >= bucket * (1.0 - 1e-12)) {
      out.push_back({wx / w, w});
      w = wx = 0.0;
    }
  }
  if (w > 0.0) out.push_back({wx / w, w});
  return out;
}

/// Residual concentration law at the relay for transmitter i of an SNC
/// system: closed-form atoms for unit memory, enumeration beyond.
inline std::vector<Atom> snc_interference_law(const LinkGains& g, double c, int m_trunc) {
  const int q = g.super_slot_memory();
  if (q == 0) return {{0.0, 1.0}};
  if (q == 1) {
    std::vector<Atom> out;
    for (const auto& a : snc_isi_release_distribution(g, c, m_trunc).atoms)
      out.push_back({unit_convert(a.value, g.super_slot_pi(1)), a.weight});
    return out;
  }
  return compress_law(snc_interference_law_enumerated(g, c, 14), 64);
}

namespace detail {

inline std::vector<double> binomial_pmf_vector(int n, double p) {
  std::vector<double> v(static_cast<std::size_t>(n) + 1);
  for (int y = 0; y <= n; ++y) v[y] = bound_count_pmf(n, p, y);
  return v;
}

}  // namespace detail

/// Relay receptor-group binding probability in an SNC slot: own ligand is
/// the target c when the bit is 1 and the residual otherwise; the
/// competing ligand likewise.
struct SncIsiModel {
  const SystemConfig* cfg;
  std::array<double, 2> c;
  std::array<std::vector<Atom>, 2> law;  // residual at the relay per transmitter

  double binding(int i, int b_own, int b_other, double res_own, double res_other) const {
    const double own = b_own ? c[i] : res_own;
    const double other = b_other ? c[1 - i] : res_other;
    return snc_relay_binding(*cfg, i, own, other);
  }
};

inline SncIsiModel snc_isi_model(const SystemConfig& cfg, const ChannelSet& ch, int m_trunc) {
  SncIsiModel m{&cfg, resolve_targets(cfg, ch, Scheme::snc), {}};
  m.law[0] = snc_interference_law(ch.t1r, m.c[0], m_trunc);
  m.law[1] = snc_interference_law(ch.t2r, m.c[1], m_trunc);
  return m;
}

/// Signed MAP statistic of receptor group i over y = 0..n: mixture pmf
/// under B_i = 1 minus mixture pmf under B_i = 0.
inline std::vector<double> snc_decision_statistic(const SncIsiModel& m, int i) {
  const int n = relay_receptors(*m.cfg, i);
  std::vector<double> s(static_cast<std::size_t>(n) + 1, 0.0);
  for (int b_other = 0; b_other < 2; ++b_other)
    for (const auto& own : m.law[i])
      for (const auto& other : m.law[1 - i]) {
        const double w = 0.5 * own.weight * other.weight;
        const auto p1 = detail::binomial_pmf_vector(n, m.binding(i, 1, b_other, own.value, other.value));
        const auto p0 = detail::binomial_pmf_vector(n, m.binding(i, 0, b_other, own.value, other.value));
        for (int y = 0; y <= n; ++y) s[y] += w * (p1[y] - p0[y]);
      }
  return s;
}

/// Smallest count favoring 1, minus one; n when no count does.
inline int threshold_from_statistic(const std::vector<double>& s) {
  for (std::size_t y = 0; y < s.size(); ++y)
    if (s[y] > 0.0) return static_cast<int>(y) - 1;
  return static_cast<int>(s.size()) - 1;
}

inline std::array<int, 2> snc_isi_threshold(const SncIsiModel& m) {
  return {threshold_from_statistic(snc_decision_statistic(m, 0)),
          threshold_from_statistic(snc_decision_statistic(m, 1))};
}

inline std::array<int, 2> snc_isi_threshold(const SystemConfig& cfg, const ChannelSet& ch, int m_trunc = 30) {
  return snc_isi_threshold(snc_isi_model(cfg, ch, m_trunc));
}

/// Marginal error of receptor group i for bits (b_i, b_other) under
/// threshold tau, averaged over both residual laws.
inline double snc_group_error(const SncIsiModel& m, int i, int b_own, int b_other, double tau) {
  const int n = relay_receptors(*m.cfg, i);
  double s = 0.0;
  for (const auto& own : m.law[i])
    for (const auto& other : m.law[1 - i]) {
      const Tail t = bound_count_tail(n, m.binding(i, b_own, b_other, own.value, other.value), tau);
      s += own.weight * other.weight * (b_own ? t.lower : t.upper);
    }
  return s;
}

/// How the two receptor-group errors combine into the relay XOR error.
enum class SncCombine {
  independent,  // combine the marginal group errors
  joint         // combine per residual pair, then average
};

inline std::array<double, 4> snc_isi_phase1(const SncIsiModel& m, const std::array<int, 2>& tau, SncCombine how) {
  std::array<double, 4> p1{};
  for (int b1 = 0; b1 < 2; ++b1)
    for (int b2 = 0; b2 < 2; ++b2) {
      if (how == SncCombine::independent) {
        const double e1 = snc_group_error(m, 0, b1, b2, tau[0]);
        const double e2 = snc_group_error(m, 1, b2, b1, tau[1]);
        p1[pair_index(b1, b2)] = xor_error(e1, e2);
        continue;
      }
      double s = 0.0;
      for (const auto& a1 : m.law[0])
        for (const auto& a2 : m.law[1]) {
          const Tail t1 = bound_count_tail(m.cfg->n1R, m.binding(0, b1, b2, a1.value, a2.value), tau[0]);
          const Tail t2 = bound_count_tail(m.cfg->n2R, m.binding(1, b2, b1, a2.value, a1.value), tau[1]);
          s += a1.weight * a2.weight * xor_error(b1 ? t1.lower : t1.upper, b2 ? t2.lower : t2.upper);
        }
      p1[pair_index(b1, b2)] = s;
    }
  return p1;
}

/// Steady-state phase-2 errors for fixed phase-1 conditionals.
inline std::array<std::array<double, 2>, 2> phase2_fixed_point(const SystemConfig& cfg, const ChannelSet& ch,
                                                               const std::array<double, 4>& p1,
                                                               const FixedPointOptions& opt, int& iterations,
                                                               double& residual) {
  const std::array<Phase2Model, 2> m2{phase2_model(cfg, ch, 0), phase2_model(cfg, ch, 1)};
  std::array<std::array<double, 2>, 2> p2{phase2_no_isi(cfg, ch, 0), phase2_no_isi(cfg, ch, 1)};
  const double pr0 = relay_zero_probability(p1);
  residual = 0.0;
  int it = 0;
  for (; it < opt.max_iter; ++it) {
    std::array<std::array<double, 2>, 2> n2{phase2_step(m2[0], p2[0], pr0), phase2_step(m2[1], p2[1], pr0)};
    residual = detail::sup_diff(n2, p2);
    p2 = n2;
    if (residual < opt.tol) break;
  }
  if (residual >= opt.tol)
    throw ConvergenceError("phase-2 fixed point did not converge; residual " + std::to_string(residual), residual);
  iterations = it + 1;
  return p2;
}

inline ErrorBreakdown snc_isi_fixed_point(const SystemConfig& cfg, const ChannelSet& ch,
                                          const FixedPointOptions& opt = {},
                                          SncCombine how = SncCombine::independent) {
  detail::require_unit_memory(ch);
  const SncIsiModel m = snc_isi_model(cfg, ch, opt.m_trunc);
  const auto tau = snc_isi_threshold(m);
  ErrorBreakdown e;
  e.phase1 = snc_isi_phase1(m, tau, how);
  e.relay_thresholds = {static_cast<double>(tau[0]), static_cast<double>(tau[1])};
  e.phase2 = phase2_fixed_point(cfg, ch, e.phase1, opt, e.iterations, e.residual);
  for (int i = 0; i < 2; ++i) e.transceiver_thresholds[i] = phase2_model(cfg, ch, i).tau;
  e.truncated_mass = ch.t1r.super_slot_memory() + ch.t2r.super_slot_memory() > 0 ? 2.0 * std::ldexp(1.0, -opt.m_trunc) : 0.0;
  finish(e);
  return e;
}

// ---------------------------------------------------------------------------
// NoE approximations (previous relay bits decoded without error)

enum class NoeForm {
  derived,  // false-alarm term weighted by P(previous relay bit = 1)
  printed   // false-alarm term grouped with the miss term
};

inline std::string_view to_string(NoeForm f) { return f == NoeForm::derived ? "derived" : "printed"; }

struct NoeTerms {
  double miss_after_silence;  // P{Y <= tau(0) | p(1,0)}
  double false_alarm;         // P{Y > tau(1) | p(0,1)}
  double miss_after_active;   // P{Y <= tau(1) | p(1,1)}
};

inline NoeTerms noe_terms(const SystemConfig& cfg, const ChannelSet& ch, int i) {
  const Phase2Model m = phase2_model(cfg, ch, i);
  return {m.wrong[1][0][0], m.wrong[0][1][1], m.wrong[1][1][1]};
}

/// p_e,i from phase-1 sums u1 = P(E_R|00)+P(E_R|11), u2 = P(E_R|01)+P(E_R|10)
/// and the genie phase-2 terms.
inline double noe_combine(double u1, double u2, const NoeTerms& t, NoeForm form) {
  const double a = ((2.0 - u1) * (2.0 - u1) - u2 * u2) / 16.0;
  const double b = ((2.0 - u2) * (2.0 - u2) - u1 * u1) / 16.0;
  if (form == NoeForm::printed)
    return a * (t.miss_after_silence + t.false_alarm) + b * t.miss_after_active + 0.25 * (u1 + u2);
  return a * t.miss_after_silence + b * (t.false_alarm + t.miss_after_active) + 0.25 * (u1 + u2);
}

inline std::pair<double, double> noe_from_phase1(const SystemConfig& cfg, const ChannelSet& ch,
                                                 const std::array<double, 4>& p1, NoeForm form) {
  const double u1 = p1[0] + p1[3];
  const double u2 = p1[1] + p1[2];
  return {noe_combine(u1, u2, noe_terms(cfg, ch, 0), form), noe_combine(u1, u2, noe_terms(cfg, ch, 1), form)};
}

inline std::pair<double, double> pnc_noe(const SystemConfig& cfg, const ChannelSet& ch,
                                         NoeForm form = NoeForm::derived) {
  detail::require_unit_memory(ch);
  return noe_from_phase1(cfg, ch, pnc_no_isi(cfg, ch).phase1, form);
}

inline std::pair<double, double> snc_noe(const SystemConfig& cfg, const ChannelSet& ch,
                                         NoeForm form = NoeForm::derived,
                                         SncCombine how = SncCombine::independent, int m_trunc = 30) {
  detail::require_unit_memory(ch);
  const SncIsiModel m = snc_isi_model(cfg, ch, m_trunc);
  return noe_from_phase1(cfg, ch, snc_isi_phase1(m, snc_isi_threshold(m), how), form);
}

// ---------------------------------------------------------------------------
// Dispatch

enum class AnalysisMode { closed_form, noe };

/// Analytical breakdown for a scheme: the no-ISI closed form when no link
/// has memory, the steady-state recursion otherwise. NoE values are filled
/// when memory is present.
inline ErrorBreakdown analyze(const SystemConfig& cfg, const ChannelSet& ch, Scheme s,
                              const FixedPointOptions& opt = {}, NoeForm form = NoeForm::derived,
                              SncCombine how = SncCombine::independent) {
  const bool isi = max_memory(cfg) >= 2;
  ErrorBreakdown e;
  if (!isi) {
    e = s == Scheme::pnc ? pnc_no_isi(cfg, ch) : snc_no_isi(cfg, ch);
    e.noe_pe1 = e.pe1;
    e.noe_pe2 = e.pe2;
    return e;
  }
  e = s == Scheme::pnc ? pnc_isi_fixed_point(cfg, ch, opt) : snc_isi_fixed_point(cfg, ch, opt, how);
  const auto noe = s == Scheme::pnc ? pnc_noe(cfg, ch, form) : snc_noe(cfg, ch, form, how, opt.m_trunc);
  e.noe_pe1 = noe.first;
  e.noe_pe2 = noe.second;
  return e;
}

}  // namespace mcrelay

#pragma once

#include <array>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "channel.hpp"
#include "config.hpp"
#include "units.hpp"

namespace mcrelay {

enum class Scheme { snc, pnc };

inline std::string_view to_string(Scheme s) { return s == Scheme::snc ? "SNC" : "PNC"; }

inline Scheme parse_scheme(std::string_view s) {
  if (s == "snc" || s == "SNC") return Scheme::snc;
  if (s == "pnc" || s == "PNC") return Scheme::pnc;
  throw std::invalid_argument("unknown scheme '" + std::string(s) + "'");
}

/// A protocol invariant failed during evaluation. `detail` carries a
/// machine-readable description (JSON text when raised by the simulator).
class InvariantViolation : public std::runtime_error {
 public:
  explicit InvariantViolation(const std::string& what, std::string detail = {})
      : std::runtime_error(what), detail_(std::move(detail)) {}
  const std::string& detail() const noexcept { return detail_; }

 private:
  std::string detail_;
};

// ---------------------------------------------------------------------------
// Medium

/// Perfect reaction of two co-located reactive species: the lesser
/// concentration is annihilated entirely.
constexpr std::pair<double, double> react_perfect(double c1, double c2) noexcept {
  return {c1 > c2 ? c1 - c2 : 0.0, c2 > c1 ? c2 - c1 : 0.0};
}

/// Fixed-depth history; at(1) is the most recent entry. Entries past the
/// depth read as zero, so a depth-0 history is always empty.
template <class T>
class History {
 public:
  History() = default;
  explicit History(std::size_t depth) : buf_(depth, T{}) {}

  std::size_t depth() const noexcept { return buf_.size(); }

  void push(T v) {
    if (buf_.empty()) return;
    head_ = (head_ + buf_.size() - 1) % buf_.size();
    buf_[head_] = v;
  }

  T at(int l) const {
    if (l < 1 || static_cast<std::size_t>(l) > buf_.size()) return T{};
    return buf_[(head_ + static_cast<std::size_t>(l) - 1) % buf_.size()];
  }

  void clear() {
    for (auto& v : buf_) v = T{};
    head_ = 0;
  }

 private:
  std::vector<T> buf_;
  std::size_t head_ = 0;
};

/// Concentration (mol/L) at a receiver from the current release `x_now`
/// and past releases in `past`, using the odd-index gains of `g`.
inline double received_concentration(double x_now, const History<double>& past, const LinkGains& g) {
  double c = unit_convert(x_now, g.pi(1));
  for (int l = 1; l <= g.super_slot_memory(); ++l) c += unit_convert(past.at(l), g.super_slot_pi(l));
  return c;
}

/// Residual concentration from past releases only.
inline double interference_concentration(const History<double>& past, const LinkGains& g) {
  return received_concentration(0.0, past, g);
}

// ---------------------------------------------------------------------------
// Per-transceiver protocol memory

struct TransceiverState {
  History<double> releases;       // own X_{i,k-l}
  History<int> decoded_other;     // B^_{other,k-l} as recovered here
  History<int> decoded_relay;     // B^_{R,k-l} as decoded here
};

struct SchemeState {
  std::array<TransceiverState, 2> node;
  History<double> relay_releases;  // X3_{k-l}

  /// Cold-start state sized for the given channels.
  static SchemeState cold(const ChannelSet& ch) {
    SchemeState s;
    const int q1 = ch.t1r.super_slot_memory();
    const int q2 = ch.t2r.super_slot_memory();
    for (int i = 0; i < 2; ++i) {
      const int q_other = i == 0 ? q2 : q1;
      s.node[i].releases = History<double>(static_cast<std::size_t>(q1 + q2));
      s.node[i].decoded_other = History<int>(static_cast<std::size_t>(q_other));
      s.node[i].decoded_relay = History<int>(static_cast<std::size_t>(ch.downlink(i).super_slot_memory()));
    }
    const int qr = std::max(ch.rt1.super_slot_memory(), ch.rt2.super_slot_memory());
    s.relay_releases = History<double>(static_cast<std::size_t>(qr));
    return s;
  }
};

// ---------------------------------------------------------------------------
// Release rules. Concentrations are in mol/L, releases in mol.

/// SNC: when b = 1, release just enough to bring the relay-side
/// concentration to `c`; silent otherwise.
inline double snc_release(int b, const History<double>& own, const LinkGains& g, double c) {
  if (b == 0) return 0.0;
  double x = release_for_concentration(c, g.pi(1));
  for (int l = 1; l <= g.super_slot_memory(); ++l) x -= g.super_slot_nu(l) * own.at(l);
  if (x < 0.0) throw InvariantViolation("SNC release became negative");
  return x;
}

/// PNC: own signal plus extra molecules that cancel the other node's
/// residual at the relay, estimated from decoded bits and own releases.
inline double pnc_release(int b, const History<double>& own, const History<int>& decoded_other,
                          const LinkGains& self, const LinkGains& other, double c_self, double c_other) {
  double conc = c_self * b;
  for (int l = 1; l <= other.super_slot_memory(); ++l) conc += c_other * other.super_slot_nu(l) * decoded_other.at(l);
  double x = release_for_concentration(conc, self.pi(1));
  for (int l1 = 1; l1 <= self.super_slot_memory(); ++l1)
    for (int l2 = 1; l2 <= other.super_slot_memory(); ++l2)
      x += self.super_slot_nu(l1) * other.super_slot_nu(l2) * own.at(l1 + l2);
  return x;
}

/// sum over l1, l2 of nu^self_{2l1+1} nu^other_{2l2+1}.
inline double cross_gain(const LinkGains& self, const LinkGains& other) {
  return self.odd_nu_sum() * other.odd_nu_sum();
}

inline double x_max_snc(const LinkGains& g, double c) { return release_for_concentration(c, g.pi(1)); }

inline double x_max_pnc(const LinkGains& self, const LinkGains& other, double c_self, double c_other) {
  const double s = cross_gain(self, other);
  return release_for_concentration(c_self + c_other * other.odd_nu_sum(), self.pi(1)) / (1.0 - s);
}

/// Long-run mean SNC release with equiprobable bits.
inline double x_avg_snc(const LinkGains& g, double c) {
  return release_for_concentration(c, g.pi(1)) / (2.0 + g.odd_nu_sum());
}

/// Mean PNC release with equiprobable own and decoded bits.
inline double x_avg_pnc(const LinkGains& self, const LinkGains& other, double c_self, double c_other) {
  const double s = cross_gain(self, other);
  return release_for_concentration(c_self + c_other * other.odd_nu_sum(), self.pi(1)) / (2.0 * (1.0 - s));
}

struct Budgets {
  double c_SNC;  // mol/L
  double c_PNC;  // mol/L
};

/// Target concentrations giving both schemes the same mean release
/// (averaged over the two transceivers) equal to `x_avg` mol.
inline Budgets calibrate_budgets(const ChannelSet& ch, double x_avg) {
  const double snc_unit = 0.5 * (x_avg_snc(ch.t1r, 1.0) + x_avg_snc(ch.t2r, 1.0));
  const double pnc_unit = 0.5 * (x_avg_pnc(ch.t1r, ch.t2r, 1.0, 1.0) + x_avg_pnc(ch.t2r, ch.t1r, 1.0, 1.0));
  return {x_avg / snc_unit, x_avg / pnc_unit};
}

/// Per-transceiver relay-side target concentrations of a scheme: the
/// configured c when present, otherwise zeta^{Ti} through pi_1^{TiR}.
inline std::array<double, 2> resolve_targets(const SystemConfig& cfg, const ChannelSet& ch, Scheme s) {
  const auto& c = s == Scheme::snc ? cfg.c_SNC : cfg.c_PNC;
  if (c) return {*c, *c};
  return {unit_convert(cfg.zeta_T1, ch.t1r.pi(1)), unit_convert(cfg.zeta_T2, ch.t2r.pi(1))};
}

/// Sets c_SNC, c_PNC and zeta_R for a calibrated run at mean release
/// `x_avg`. The relay is active half the time on average, so its budget is
/// 2 x_avg to match the transceivers' mean release.
inline void apply_calibration(SystemConfig& cfg, double x_avg) {
  const Budgets b = calibrate_budgets(make_channels(cfg), x_avg);
  cfg.c_SNC = b.c_SNC;
  cfg.c_PNC = b.c_PNC;
  cfg.zeta_R = 2.0 * x_avg;
}

// ---------------------------------------------------------------------------
// Relay and transceiver decisions

struct RelayDecision {
  int b1;     // PNC: B^_{R1}; SNC: B^_1^R
  int b2;     // PNC: B^_{R2}; SNC: B^_2^R
  double x3;  // mol of M3 released
  int relay_bit() const { return x3 > 0.0 ? 1 : 0; }
};

inline RelayDecision relay_step_pnc(int y1, int y2, double tau1, double tau2, double zeta_R) {
  const int b1 = y1 > tau1 ? 1 : 0;
  const int b2 = y2 > tau2 ? 1 : 0;
  if (b1 && b2) throw InvariantViolation("both relay receptor groups decoded 1 under perfect reaction");
  return {b1, b2, (b1 + b2) * zeta_R};
}

inline RelayDecision relay_step_snc(int y1, int y2, double tau1, double tau2, double zeta_R) {
  const int b1 = y1 > tau1 ? 1 : 0;
  const int b2 = y2 > tau2 ? 1 : 0;
  return {b1, b2, (b1 ^ b2) * zeta_R};
}

constexpr int transceiver_recover(int b_own, int b_relay) noexcept { return b_own ^ b_relay; }

}  // namespace mcrelay

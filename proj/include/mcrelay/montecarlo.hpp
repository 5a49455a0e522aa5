#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "analysis.hpp"
#include "channel.hpp"
#include "coding.hpp"
#include "config.hpp"
#include "json.hpp"
#include "reception.hpp"
#include "units.hpp"

namespace mcrelay {

/// One super slot of the simulated system.
struct TrialTrace {
  std::uint64_t k = 0;
  std::array<int, 2> bits{};
  std::array<double, 3> releases{};       // X1, X2, X3 (mol)
  std::array<double, 2> relay_pre{};      // C1, C2 before reaction (mol/L)
  std::array<double, 2> relay_post{};     // after reaction (equal to pre for SNC)
  std::array<double, 2> transceiver_conc{};  // M3 at T1, T2 (mol/L)
  std::array<int, 2> relay_counts{};
  std::array<int, 2> transceiver_counts{};
  std::array<int, 2> relay_decoded{};     // B^_{R1}, B^_{R2} or B^_1^R, B^_2^R
  int relay_bit = 0;
  std::array<int, 2> decoded_relay{};     // B^_R at T1, T2
  std::array<int, 2> recovered{};         // other node's bit as recovered at T1, T2
  std::array<int, 2> error{};
};

inline nlohmann::json to_json(const TrialTrace& t) {
  return {{"k", t.k},
          {"bits", t.bits},
          {"releases", t.releases},
          {"relay_pre", t.relay_pre},
          {"relay_post", t.relay_post},
          {"transceiver_conc", t.transceiver_conc},
          {"relay_counts", t.relay_counts},
          {"transceiver_counts", t.transceiver_counts},
          {"relay_decoded", t.relay_decoded},
          {"relay_bit", t.relay_bit},
          {"decoded_relay", t.decoded_relay},
          {"recovered", t.recovered},
          {"error", t.error}};
}

struct SimOptions {
  Scheme scheme = Scheme::pnc;
  std::uint64_t n_superslots = 1'000'000;  // counted super slots
  std::uint64_t seed = 20240607;
  std::optional<int> warmup;               // per block; default max(10, 2 * depth)
  bool genie = false;                      // protocol memory fed with true bits
  bool release_histogram = false;          // SNC release atoms
  std::uint64_t block_size = 1u << 16;
  unsigned workers = 1;
  std::size_t trace_limit = 0;             // traces kept from block 0
  int m_trunc = 30;                        // SNC relay threshold search
};

struct SimReport {
  Scheme scheme = Scheme::pnc;
  std::uint64_t trials = 0;
  std::array<std::uint64_t, 2> errors{};
  std::uint64_t both_errors = 0;
  double pe1 = 0.0, pe2 = 0.0, avg_bep = 0.0;
  double stderr1 = 0.0, stderr2 = 0.0, stderr_avg = 0.0;
  std::array<double, 2> mean_release{};
  std::array<double, 2> max_release{};
  std::array<double, 2> x_max{};
  std::array<std::map<double, std::uint64_t>, 2> histogram;
  std::array<double, 2> relay_thresholds{};
  std::vector<TrialTrace> traces;
};

inline nlohmann::json to_json(const SimReport& r) {
  return {{"scheme", std::string(to_string(r.scheme))},
          {"trials", r.trials},
          {"errors", r.errors},
          {"pe1", r.pe1},
          {"pe2", r.pe2},
          {"avg_bep", r.avg_bep},
          {"stderr", {r.stderr1, r.stderr2, r.stderr_avg}},
          {"mean_release", r.mean_release},
          {"max_release", r.max_release},
          {"x_max", r.x_max},
          {"relay_thresholds", r.relay_thresholds}};
}

/// Runs fn(0..count-1) on up to `workers` threads. The first exception
/// thrown is rethrown after all workers stop.
inline void parallel_for(std::size_t count, unsigned workers, const std::function<void(std::size_t)>& fn) {
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        if (failed.load()) return;
        const std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
          failed.store(true);
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

namespace detail {

// Everything a block needs that does not change per slot.
struct SimPlan {
  const SystemConfig* cfg;
  ChannelSet ch;
  Scheme scheme;
  std::array<double, 2> c{};
  std::array<double, 2> x_max{};
  std::array<double, 2> relay_tau{};
  // Transceiver thresholds indexed by the decoded relay history bitmask
  // (bit l-1 is the decision l super slots ago).
  std::array<std::vector<double>, 2> rx_tau;
  bool genie = false;
  int warmup = 10;
};

inline double phase2_threshold(const SystemConfig& cfg, const LinkGains& g, int n, unsigned history) {
  double interference = 0.0;
  for (int l = 1; l <= g.super_slot_memory(); ++l)
    if ((history >> (l - 1)) & 1u) interference += unit_convert(cfg.zeta_R, g.super_slot_pi(l));
  const double p0 = binding_probability(interference, cfg.kappa_D(3));
  const double p1 = binding_probability(unit_convert(cfg.zeta_R, g.pi(1)) + interference, cfg.kappa_D(3));
  return p1 > p0 ? adaptive_threshold(p0, p1, n) : n;
}

inline SimPlan make_plan(const SystemConfig& cfg, const SimOptions& opt) {
  SimPlan p;
  p.cfg = &cfg;
  p.ch = make_channels(cfg);
  p.scheme = opt.scheme;
  p.genie = opt.genie;
  p.c = resolve_targets(cfg, p.ch, opt.scheme);
  for (int i = 0; i < 2; ++i) {
    const LinkGains& self = p.ch.uplink(i);
    const LinkGains& other = p.ch.uplink(1 - i);
    p.x_max[i] = opt.scheme == Scheme::snc ? x_max_snc(self, p.c[i]) : x_max_pnc(self, other, p.c[i], p.c[1 - i]);
  }
  if (opt.scheme == Scheme::snc && (p.ch.t1r.super_slot_memory() > 0 || p.ch.t2r.super_slot_memory() > 0)) {
    const auto tau = snc_isi_threshold(cfg, p.ch, opt.m_trunc);
    p.relay_tau = {static_cast<double>(tau[0]), static_cast<double>(tau[1])};
  }
  for (int i = 0; i < 2; ++i) {
    const LinkGains& g = p.ch.downlink(i);
    const unsigned count = 1u << g.super_slot_memory();
    for (unsigned h = 0; h < count; ++h)
      p.rx_tau[i].push_back(phase2_threshold(cfg, g, transceiver_receptors(cfg, i), h));
  }
  const int depth = p.ch.t1r.super_slot_memory() + p.ch.t2r.super_slot_memory() +
                    std::max(p.ch.rt1.super_slot_memory(), p.ch.rt2.super_slot_memory());
  p.warmup = opt.warmup.value_or(std::max(10, 2 * depth));
  return p;
}

inline unsigned history_mask(const History<int>& h) {
  unsigned m = 0;
  for (int l = 1; l <= static_cast<int>(h.depth()); ++l)
    if (h.at(l)) m |= 1u << (l - 1);
  return m;
}

inline std::string violation_detail(const TrialTrace& t, const std::string& what) {
  nlohmann::json j = to_json(t);
  j["violation"] = what;
  return j.dump();
}

struct BlockResult {
  std::uint64_t trials = 0;
  std::array<std::uint64_t, 2> errors{};
  std::uint64_t both = 0;
  std::array<double, 2> release_sum{};
  std::array<double, 2> release_max{};
  std::array<std::map<double, std::uint64_t>, 2> histogram;
  std::vector<TrialTrace> traces;
};

// Advances the system by one super slot. `true_relay` holds the relay
// bits actually transmitted, used by the genie receiver.
template <class Rng>
TrialTrace step(const SimPlan& p, SchemeState& s, std::array<History<int>, 2>& true_relay, Rng& rng,
                std::uint64_t k) {
  const SystemConfig& cfg = *p.cfg;
  TrialTrace t;
  t.k = k;
  const std::uint64_t r = rng();
  t.bits = {static_cast<int>(r >> 63), static_cast<int>((r >> 62) & 1u)};

  // Phase 1: releases and the medium at the relay.
  for (int i = 0; i < 2; ++i) {
    const LinkGains& self = p.ch.uplink(i);
    const LinkGains& other = p.ch.uplink(1 - i);
    auto& node = s.node[i];
    t.releases[i] = p.scheme == Scheme::snc
                        ? snc_release(t.bits[i], node.releases, self, p.c[i])
                        : pnc_release(t.bits[i], node.releases, node.decoded_other, self, other, p.c[i], p.c[1 - i]);
    if (t.releases[i] > p.x_max[i] * (1.0 + 1e-12))
      throw InvariantViolation("release exceeds its maximum", violation_detail(t, "release_bound"));
    t.relay_pre[i] = received_concentration(t.releases[i], node.releases, self);
  }

  RelayDecision d;
  if (p.scheme == Scheme::pnc) {
    const auto [c1, c2] = react_perfect(t.relay_pre[0], t.relay_pre[1]);
    t.relay_post = {c1, c2};
    t.relay_counts[0] = sample_bound_count(cfg.n1R, binding_probability(c1, cfg.kappa_D(1)), rng);
    t.relay_counts[1] = sample_bound_count(cfg.n2R, binding_probability(c2, cfg.kappa_D(2)), rng);
    try {
      d = relay_step_pnc(t.relay_counts[0], t.relay_counts[1], p.relay_tau[0], p.relay_tau[1], cfg.zeta_R);
    } catch (const InvariantViolation& e) {
      throw InvariantViolation(e.what(), violation_detail(t, "relay_exclusivity"));
    }
  } else {
    t.relay_post = t.relay_pre;
    for (int i = 0; i < 2; ++i)
      t.relay_counts[i] = sample_bound_count(relay_receptors(cfg, i),
                                             snc_relay_binding(cfg, i, t.relay_pre[i], t.relay_pre[1 - i]), rng);
    d = relay_step_snc(t.relay_counts[0], t.relay_counts[1], p.relay_tau[0], p.relay_tau[1], cfg.zeta_R);
  }
  t.relay_decoded = {d.b1, d.b2};
  t.releases[2] = d.x3;
  t.relay_bit = d.relay_bit();

  // Phase 2: relay broadcast and recovery at the transceivers.
  for (int i = 0; i < 2; ++i) {
    const LinkGains& g = p.ch.downlink(i);
    t.transceiver_conc[i] = received_concentration(d.x3, s.relay_releases, g);
    t.transceiver_counts[i] =
        sample_bound_count(transceiver_receptors(cfg, i), binding_probability(t.transceiver_conc[i], cfg.kappa_D(3)), rng);
    const History<int>& hist = p.genie ? true_relay[i] : s.node[i].decoded_relay;
    t.decoded_relay[i] = threshold_decode(t.transceiver_counts[i], p.rx_tau[i][history_mask(hist)]);
    t.recovered[i] = transceiver_recover(t.bits[i], t.decoded_relay[i]);
    t.error[i] = t.recovered[i] != t.bits[1 - i] ? 1 : 0;
  }

  for (int i = 0; i < 2; ++i) {
    auto& node = s.node[i];
    node.releases.push(t.releases[i]);
    node.decoded_other.push(p.genie ? t.bits[1 - i] : t.recovered[i]);
    node.decoded_relay.push(t.decoded_relay[i]);
    true_relay[i].push(t.relay_bit);
  }
  s.relay_releases.push(d.x3);
  return t;
}

template <class Rng>
BlockResult run_block(const SimPlan& p, std::uint64_t slots, Rng& rng, std::uint64_t first_k, bool histogram,
                      std::size_t trace_limit) {
  BlockResult out;
  SchemeState s = SchemeState::cold(p.ch);
  std::array<History<int>, 2> true_relay{History<int>(s.node[0].decoded_relay.depth()),
                                         History<int>(s.node[1].decoded_relay.depth())};
  for (int w = 0; w < p.warmup; ++w) step(p, s, true_relay, rng, first_k);
  for (std::uint64_t j = 0; j < slots; ++j) {
    const TrialTrace t = step(p, s, true_relay, rng, first_k + j);
    ++out.trials;
    out.errors[0] += t.error[0];
    out.errors[1] += t.error[1];
    out.both += t.error[0] & t.error[1];
    for (int i = 0; i < 2; ++i) {
      out.release_sum[i] += t.releases[i];
      out.release_max[i] = std::max(out.release_max[i], t.releases[i]);
      if (histogram) ++out.histogram[i][t.releases[i]];
    }
    if (out.traces.size() < trace_limit) out.traces.push_back(t);
  }
  return out;
}

inline std::mt19937_64 block_rng(std::uint64_t seed, std::uint64_t block) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(block), static_cast<std::uint32_t>(block >> 32), 0x6d63u};
  return std::mt19937_64(seq);
}

}  // namespace detail

/// Simulates `opt.n_superslots` counted super slots, split into fixed
/// blocks of `opt.block_size`. Each block is an independent cold-started
/// chain with its own warmup and RNG stream derived from (seed, block), and
/// blocks are merged in index order, so the report does not depend on the
/// number of workers.
inline SimReport simulate(const SystemConfig& cfg, const SimOptions& opt) {
  if (opt.n_superslots == 0) throw std::invalid_argument("n_superslots must be positive");
  if (opt.block_size == 0) throw std::invalid_argument("block_size must be positive");
  const detail::SimPlan plan = detail::make_plan(cfg, opt);
  const std::uint64_t blocks = (opt.n_superslots + opt.block_size - 1) / opt.block_size;
  std::vector<detail::BlockResult> results(blocks);
  parallel_for(blocks, opt.workers, [&](std::size_t b) {
    const std::uint64_t first = b * opt.block_size;
    const std::uint64_t slots = std::min(opt.block_size, opt.n_superslots - first);
    auto rng = detail::block_rng(opt.seed, b);
    results[b] = detail::run_block(plan, slots, rng, first, opt.release_histogram && opt.scheme == Scheme::snc,
                                   b == 0 ? opt.trace_limit : 0);
  });

  SimReport r;
  r.scheme = opt.scheme;
  r.x_max = plan.x_max;
  r.relay_thresholds = plan.relay_tau;
  std::array<double, 2> sum{};
  for (auto& b : results) {
    r.trials += b.trials;
    r.errors[0] += b.errors[0];
    r.errors[1] += b.errors[1];
    r.both_errors += b.both;
    for (int i = 0; i < 2; ++i) {
      sum[i] += b.release_sum[i];
      r.max_release[i] = std::max(r.max_release[i], b.release_max[i]);
      for (const auto& [x, n] : b.histogram[i]) r.histogram[i][x] += n;
    }
    for (auto& t : b.traces) r.traces.push_back(t);
  }
  const double n = static_cast<double>(r.trials);
  r.pe1 = r.errors[0] / n;
  r.pe2 = r.errors[1] / n;
  r.avg_bep = 0.5 * (r.pe1 + r.pe2);
  r.stderr1 = std::sqrt(r.pe1 * (1.0 - r.pe1) / n);
  r.stderr2 = std::sqrt(r.pe2 * (1.0 - r.pe2) / n);
  r.stderr_avg = std::sqrt(r.avg_bep * (1.0 - r.avg_bep) / n);
  for (int i = 0; i < 2; ++i) r.mean_release[i] = sum[i] / n;
  return r;
}

/// simulate() with an explicit worker count.
inline SimReport simulate_parallel(const SystemConfig& cfg, SimOptions opt, unsigned n_workers) {
  opt.workers = n_workers;
  return simulate(cfg, opt);
}

/// Writes the kept traces as one JSON object per line.
inline void write_traces_jsonl(const SimReport& r, std::ostream& os) {
  for (const auto& t : r.traces) os << to_json(t).dump() << '\n';
}

}  // namespace mcrelay

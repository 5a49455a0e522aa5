#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "analysis.hpp"
#include "channel.hpp"
#include "coding.hpp"
#include "config.hpp"
#include "json.hpp"
#include "loader.hpp"
#include "montecarlo.hpp"

namespace mcrelay {

enum class SweepVariable { zeta, x_avg, q };
enum class EvalMode { analysis, noe, simulation };

inline std::string_view to_string(SweepVariable v) {
  switch (v) {
    case SweepVariable::zeta: return "zeta";
    case SweepVariable::x_avg: return "x_avg";
    case SweepVariable::q: return "q";
  }
  return "?";
}

inline std::string_view to_string(EvalMode m) {
  switch (m) {
    case EvalMode::analysis: return "analysis";
    case EvalMode::noe: return "noe";
    case EvalMode::simulation: return "simulation";
  }
  return "?";
}

inline SweepVariable parse_sweep_variable(std::string_view s) {
  if (s == "zeta") return SweepVariable::zeta;
  if (s == "x_avg") return SweepVariable::x_avg;
  if (s == "q") return SweepVariable::q;
  throw std::invalid_argument("unknown sweep variable '" + std::string(s) + "'");
}

inline EvalMode parse_eval_mode(std::string_view s) {
  if (s == "analysis") return EvalMode::analysis;
  if (s == "noe") return EvalMode::noe;
  if (s == "simulation") return EvalMode::simulation;
  throw std::invalid_argument("unknown evaluation mode '" + std::string(s) + "'");
}

inline constexpr std::uint64_t default_seed = 20240607;

struct SweepSpec {
  SweepVariable variable = SweepVariable::zeta;
  std::vector<double> grid;
  std::vector<Scheme> schemes{Scheme::pnc, Scheme::snc};
  std::vector<BlockingProfile> blocking{BlockingProfile::low};
  std::vector<EvalMode> modes{EvalMode::analysis};
  std::uint64_t trials = 1'000'000;
  std::uint64_t seed = default_seed;
  unsigned workers = 1;
  int memory = 0;         // uniform memory for zeta / x_avg sweeps
  double x_avg = 1e-22;   // calibration point for q sweeps
};

inline void check(const SweepSpec& s) {
  if (s.grid.empty()) throw std::invalid_argument("sweep grid is empty");
  if (s.schemes.empty() || s.blocking.empty() || s.modes.empty())
    throw std::invalid_argument("sweep needs at least one scheme, blocking profile and mode");
  if (s.trials == 0) throw std::invalid_argument("trial count must be positive");
  if (s.memory < 0) throw std::invalid_argument("memory must be >= 0");
  for (double v : s.grid) {
    if (!std::isfinite(v) || v < 0.0) throw std::invalid_argument("grid values must be finite and >= 0");
    if (s.variable == SweepVariable::q && v != std::floor(v)) throw std::invalid_argument("q grid must be integral");
  }
}

/// `n` log-spaced points from lo to hi inclusive.
inline std::vector<double> geometric_grid(double lo, double hi, int n) {
  if (n < 1 || !(lo > 0.0) || !(hi >= lo)) throw std::invalid_argument("bad geometric grid");
  std::vector<double> g;
  for (int k = 0; k < n; ++k) g.push_back(n == 1 ? lo : lo * std::pow(hi / lo, static_cast<double>(k) / (n - 1)));
  return g;
}

// ---------------------------------------------------------------------------
// Presets

/// No memory, release budget swept over the no-ISI regime, every blocking
/// profile, analysis and simulation.
inline SweepSpec preset_fig3() {
  SweepSpec s;
  s.variable = SweepVariable::zeta;
  s.grid = geometric_grid(1e-17, 1e-16, 6);
  s.blocking = {BlockingProfile::none, BlockingProfile::low, BlockingProfile::high};
  s.modes = {EvalMode::analysis, EvalMode::simulation};
  s.memory = 0;
  return s;
}

/// Memory 3 on every hop, calibrated mean release swept.
inline SweepSpec preset_fig4() {
  SweepSpec s;
  s.variable = SweepVariable::x_avg;
  s.grid = geometric_grid(1e-17, 1e-16, 6);
  s.modes = {EvalMode::analysis, EvalMode::noe, EvalMode::simulation};
  s.memory = 3;
  return s;
}

/// Memory swept at a fixed calibrated mean release. Simulation only: the
/// recursion covers unit super-slot memory.
inline SweepSpec preset_fig5() {
  SweepSpec s;
  s.variable = SweepVariable::q;
  s.grid = {1, 3, 5};
  s.modes = {EvalMode::simulation};
  s.x_avg = 1e-22;
  return s;
}

inline SweepSpec preset(std::string_view name) {
  if (name == "fig3") return preset_fig3();
  if (name == "fig4") return preset_fig4();
  if (name == "fig5") return preset_fig5();
  throw std::invalid_argument("unknown preset '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// Evaluation

/// Config for one grid point. zeta sweeps use zeta-derived targets; x_avg
/// and q sweeps calibrate both schemes to the same mean release.
inline SystemConfig point_config(const SystemConfig& base, const SweepSpec& s, double value, BlockingProfile bp) {
  SystemConfig cfg = base;
  apply_blocking_profile(cfg, bp);
  switch (s.variable) {
    case SweepVariable::zeta:
      set_uniform_memory(cfg, s.memory);
      cfg.zeta_T1 = cfg.zeta_T2 = cfg.zeta_R = value;
      cfg.c_SNC.reset();
      cfg.c_PNC.reset();
      break;
    case SweepVariable::x_avg:
      set_uniform_memory(cfg, s.memory);
      apply_calibration(cfg, value);
      break;
    case SweepVariable::q:
      set_uniform_memory(cfg, static_cast<int>(value));
      cfg.ts.reset();
      apply_calibration(cfg, s.x_avg);
      break;
  }
  validate(cfg);
  return cfg;
}

struct SweepRow {
  double value = 0.0;
  Scheme scheme = Scheme::pnc;
  BlockingProfile blocking = BlockingProfile::low;
  EvalMode mode = EvalMode::analysis;
  double pe1 = 0.0, pe2 = 0.0, avg_bep = 0.0;
  std::optional<double> stderr_avg;  // simulation rows
  double c_SNC = 0.0, c_PNC = 0.0;   // mol/L, transceiver 1
  std::optional<std::uint64_t> seed;  // simulation rows
};

/// Thrown when a grid point fails; the message names the point.
class SweepError : public std::runtime_error {
 public:
  SweepError(const std::string& what, bool invariant) : std::runtime_error(what), invariant_(invariant) {}
  /// The underlying failure was an InvariantViolation.
  bool invariant() const noexcept { return invariant_; }

 private:
  bool invariant_;
};

inline SweepRow evaluate_point(const SystemConfig& base, const SweepSpec& s, double value, Scheme scheme,
                               BlockingProfile bp, EvalMode mode) {
  SweepRow row{value, scheme, bp, mode};
  const SystemConfig cfg = point_config(base, s, value, bp);
  const ChannelSet ch = make_channels(cfg);
  row.c_SNC = resolve_targets(cfg, ch, Scheme::snc)[0];
  row.c_PNC = resolve_targets(cfg, ch, Scheme::pnc)[0];
  switch (mode) {
    case EvalMode::analysis: {
      const ErrorBreakdown e = analyze(cfg, ch, scheme);
      row.pe1 = e.pe1;
      row.pe2 = e.pe2;
      row.avg_bep = e.avg_bep;
      break;
    }
    case EvalMode::noe: {
      const ErrorBreakdown e = analyze(cfg, ch, scheme);
      row.pe1 = *e.noe_pe1;
      row.pe2 = *e.noe_pe2;
      row.avg_bep = *e.noe_avg_bep();
      break;
    }
    case EvalMode::simulation: {
      SimOptions o;
      o.scheme = scheme;
      o.n_superslots = s.trials;
      o.seed = s.seed;
      const SimReport r = simulate(cfg, o);
      row.pe1 = r.pe1;
      row.pe2 = r.pe2;
      row.avg_bep = r.avg_bep;
      row.stderr_avg = r.stderr_avg;
      row.seed = s.seed;
      break;
    }
  }
  return row;
}

/// Evaluates every (value, scheme, blocking, mode) combination. Points run
/// on `spec.workers` threads; rows come back in grid order.
inline std::vector<SweepRow> run_sweep_rows(const SweepSpec& spec, const SystemConfig& base) {
  check(spec);
  struct Job {
    double value;
    Scheme scheme;
    BlockingProfile bp;
    EvalMode mode;
  };
  std::vector<Job> jobs;
  for (double v : spec.grid)
    for (Scheme sc : spec.schemes)
      for (BlockingProfile bp : spec.blocking)
        for (EvalMode m : spec.modes) jobs.push_back({v, sc, bp, m});

  std::vector<SweepRow> rows(jobs.size());
  parallel_for(jobs.size(), spec.workers, [&](std::size_t k) {
    const Job& j = jobs[k];
    try {
      rows[k] = evaluate_point(base, spec, j.value, j.scheme, j.bp, j.mode);
    } catch (const std::exception& e) {
      std::ostringstream os;
      os << to_string(spec.variable) << '=' << j.value << " scheme=" << to_string(j.scheme)
         << " blocking=" << to_string(j.bp) << " mode=" << to_string(j.mode) << ": " << e.what();
      throw SweepError(os.str(), dynamic_cast<const InvariantViolation*>(&e) != nullptr);
    }
  });
  return rows;
}

// ---------------------------------------------------------------------------
// CSV

inline constexpr std::string_view csv_header =
    "value,scheme,blocking,mode,pe1,pe2,avg_bep,stderr,c_SNC,c_PNC,seed";

/// Shortest round-trip decimal form.
inline std::string format_double(double v) {
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

inline std::string to_csv(const std::vector<SweepRow>& rows) {
  std::string out(csv_header);
  out += '\n';
  for (const auto& r : rows) {
    out += format_double(r.value);
    out += ',';
    out += to_string(r.scheme);
    out += ',';
    out += to_string(r.blocking);
    out += ',';
    out += to_string(r.mode);
    for (double v : {r.pe1, r.pe2, r.avg_bep}) {
      out += ',';
      out += format_double(v);
    }
    out += ',';
    if (r.stderr_avg) out += format_double(*r.stderr_avg);
    out += ',';
    out += format_double(r.c_SNC);
    out += ',';
    out += format_double(r.c_PNC);
    out += ',';
    if (r.seed) out += std::to_string(*r.seed);
    out += '\n';
  }
  return out;
}

inline std::string run_sweep(const SweepSpec& spec, const SystemConfig& base) { return to_csv(run_sweep_rows(spec, base)); }

namespace detail {

inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> f;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    f.emplace_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return f;
}

inline double parse_double(const std::string& s, std::size_t line) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw std::invalid_argument("line " + std::to_string(line) + ": bad number '" + s + "'");
  return v;
}

}  // namespace detail

inline std::vector<SweepRow> parse_csv(std::string_view text) {
  std::vector<SweepRow> rows;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (n == 1) {
      if (line != csv_header) throw std::invalid_argument("unexpected CSV header");
      continue;
    }
    const auto f = detail::split_csv_line(line);
    if (f.size() != 11) throw std::invalid_argument("line " + std::to_string(n) + ": expected 11 fields");
    SweepRow r;
    r.value = detail::parse_double(f[0], n);
    r.scheme = parse_scheme(f[1]);
    r.blocking = parse_blocking_profile(f[2]);
    r.mode = parse_eval_mode(f[3]);
    r.pe1 = detail::parse_double(f[4], n);
    r.pe2 = detail::parse_double(f[5], n);
    r.avg_bep = detail::parse_double(f[6], n);
    if (!f[7].empty()) r.stderr_avg = detail::parse_double(f[7], n);
    r.c_SNC = detail::parse_double(f[8], n);
    r.c_PNC = detail::parse_double(f[9], n);
    if (!f[10].empty()) r.seed = std::stoull(f[10]);
    rows.push_back(r);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Analysis vs simulation comparison

struct PointComparison {
  double value;
  Scheme scheme;
  BlockingProfile blocking;
  double analysis;
  double simulation;
  double stderr_sim;
  double z;  // (analysis - simulation) / stderr
};

struct DominanceCheck {
  double value;
  BlockingProfile blocking;
  EvalMode mode;
  double pnc;
  double snc;
  bool holds;  // pnc <= snc
};

struct NoeViolation {
  double value;
  Scheme scheme;
  BlockingProfile blocking;
  double noe;
  double simulation;
};

struct CompareThresholds {
  double max_abs_z = 3.0;
  bool require_dominance = true;
  bool require_noe_bound = false;
};

struct CompareSummary {
  std::vector<PointComparison> points;
  double max_abs_z = 0.0;
  std::vector<DominanceCheck> dominance;
  std::vector<NoeViolation> noe_violations;
  bool passed = true;
  std::vector<std::string> failures;
};

/// Pairs analysis and simulation rows of identical points and computes
/// z-scores, PNC-vs-SNC dominance and NoE bound checks.
inline CompareSummary compare_report(const std::vector<SweepRow>& rows, const CompareThresholds& th = {}) {
  using Key = std::tuple<double, int, int>;  // value, scheme, blocking
  std::map<Key, const SweepRow*> an, sim, noe;
  for (const auto& r : rows) {
    const Key k{r.value, static_cast<int>(r.scheme), static_cast<int>(r.blocking)};
    auto& m = r.mode == EvalMode::analysis ? an : r.mode == EvalMode::noe ? noe : sim;
    if (!m.emplace(k, &r).second) throw std::invalid_argument("duplicate row in comparison input");
  }
  if (an.empty() || sim.empty()) throw std::invalid_argument("comparison needs analysis and simulation rows");
  for (const auto& [k, r] : an)
    if (!sim.count(k)) throw std::invalid_argument("mismatched grids: analysis point without simulation");
  for (const auto& [k, r] : sim)
    if (!an.count(k)) throw std::invalid_argument("mismatched grids: simulation point without analysis");

  CompareSummary out;
  for (const auto& [k, a] : an) {
    const SweepRow* s = sim.at(k);
    const double se = s->stderr_avg.value_or(0.0);
    const double diff = a->avg_bep - s->avg_bep;
    double z = 0.0;
    if (diff != 0.0) z = se > 0.0 ? diff / se : std::copysign(std::numeric_limits<double>::infinity(), diff);
    out.points.push_back({a->value, a->scheme, a->blocking, a->avg_bep, s->avg_bep, se, z});
    out.max_abs_z = std::max(out.max_abs_z, std::abs(z));
  }
  for (const auto& [k, n] : noe) {
    auto it = sim.find(k);
    if (it != sim.end() && n->avg_bep > it->second->avg_bep)
      out.noe_violations.push_back({n->value, n->scheme, n->blocking, n->avg_bep, it->second->avg_bep});
  }
  for (const auto* table : {&an, &sim}) {
    for (const auto& [k, r] : *table) {
      if (r->scheme != Scheme::pnc) continue;
      auto other = table->find({std::get<0>(k), static_cast<int>(Scheme::snc), std::get<2>(k)});
      if (other == table->end()) continue;
      out.dominance.push_back(
          {r->value, r->blocking, r->mode, r->avg_bep, other->second->avg_bep, r->avg_bep <= other->second->avg_bep});
    }
  }

  if (out.max_abs_z > th.max_abs_z) {
    out.passed = false;
    out.failures.push_back("max |z| " + format_double(out.max_abs_z) + " exceeds " + format_double(th.max_abs_z));
  }
  if (th.require_dominance)
    for (const auto& d : out.dominance)
      if (!d.holds && d.mode == EvalMode::analysis) {
        out.passed = false;
        out.failures.push_back("PNC above SNC at " + format_double(d.value) + " (" + std::string(to_string(d.blocking)) + ")");
      }
  if (th.require_noe_bound && !out.noe_violations.empty()) {
    out.passed = false;
    out.failures.push_back(std::to_string(out.noe_violations.size()) + " NoE bound violation(s)");
  }
  return out;
}

inline CompareSummary compare_report(std::string_view csv, const CompareThresholds& th = {}) {
  return compare_report(parse_csv(csv), th);
}

inline nlohmann::json to_json(const CompareSummary& s) {
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& p : s.points)
    pts.push_back({{"value", p.value},
                   {"scheme", std::string(to_string(p.scheme))},
                   {"blocking", std::string(to_string(p.blocking))},
                   {"analysis", p.analysis},
                   {"simulation", p.simulation},
                   {"stderr", p.stderr_sim},
                   {"z", std::isfinite(p.z) ? nlohmann::json(p.z) : nlohmann::json(p.z > 0 ? "inf" : "-inf")}});
  nlohmann::json dom = nlohmann::json::array();
  for (const auto& d : s.dominance)
    dom.push_back({{"value", d.value},
                   {"blocking", std::string(to_string(d.blocking))},
                   {"mode", std::string(to_string(d.mode))},
                   {"pnc", d.pnc},
                   {"snc", d.snc},
                   {"holds", d.holds}});
  nlohmann::json noe = nlohmann::json::array();
  for (const auto& v : s.noe_violations)
    noe.push_back({{"value", v.value},
                   {"scheme", std::string(to_string(v.scheme))},
                   {"blocking", std::string(to_string(v.blocking))},
                   {"noe", v.noe},
                   {"simulation", v.simulation}});
  return {{"passed", s.passed},
          {"max_abs_z", std::isfinite(s.max_abs_z) ? nlohmann::json(s.max_abs_z) : nlohmann::json("inf")},
          {"points", pts},
          {"dominance", dom},
          {"noe_violations", noe},
          {"failures", s.failures}};
}

/// Fixed-width text table of the per-point comparison.
inline std::string format_table(const CompareSummary& s) {
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof line, "%-12s %-4s %-8s %-12s %-12s %-10s %8s\n", "value", "sch", "blocking", "analysis",
                "simulation", "stderr", "z");
  os << line;
  for (const auto& p : s.points) {
    std::snprintf(line, sizeof line, "%-12.4g %-4s %-8s %-12.5g %-12.5g %-10.3g %8.3f\n", p.value,
                  std::string(to_string(p.scheme)).c_str(), std::string(to_string(p.blocking)).c_str(), p.analysis,
                  p.simulation, p.stderr_sim, p.z);
    os << line;
  }
  int bad = 0;
  for (const auto& d : s.dominance) bad += d.holds ? 0 : 1;
  os << "max |z| = " << s.max_abs_z << "; dominance violations: " << bad
     << "; NoE violations: " << s.noe_violations.size() << '\n';
  os << (s.passed ? "PASS" : "FAIL") << '\n';
  for (const auto& f : s.failures) os << "  " << f << '\n';
  return os.str();
}

}  // namespace mcrelay

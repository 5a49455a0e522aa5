#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "mcrelay/mcrelay.hpp"

namespace {

using namespace mcrelay;

constexpr int exit_config = 1;
constexpr int exit_compare = 2;
constexpr int exit_invariant = 3;

struct ConfigArgs {
  std::string path;
  std::vector<std::string> overrides;
};

void add_config_flags(CLI::App* cmd, ConfigArgs& a) {
  cmd->add_option("-c,--config", a.path, "JSON config file (reference parameters when omitted)");
  cmd->add_option("-s,--set", a.overrides, "override a config field, key=value (repeatable)");
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

SystemConfig load(const ConfigArgs& a) {
  const std::string text = a.path.empty() ? config_to_json(reference_config()).dump() : read_file(a.path);
  return load_config(text, a.overrides);
}

void emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty() || out_path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + out_path + "'");
  out << text;
}

std::vector<Scheme> schemes_from(const std::string& s) {
  if (s == "both") return {Scheme::pnc, Scheme::snc};
  return {parse_scheme(s)};
}

std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) if (!item.empty()) out.push_back(item);
  return out;
}

nlohmann::json breakdown_json(const ErrorBreakdown& e, Scheme s) {
  nlohmann::json j{{"scheme", std::string(to_string(s))},
                   {"pe1", e.pe1},
                   {"pe2", e.pe2},
                   {"avg_bep", e.avg_bep},
                   {"phase1", e.phase1},
                   {"phase2", e.phase2},
                   {"relay_thresholds", e.relay_thresholds},
                   {"transceiver_thresholds", e.transceiver_thresholds},
                   {"iterations", e.iterations},
                   {"residual", e.residual}};
  if (e.noe_pe1) j["noe"] = {{"pe1", *e.noe_pe1}, {"pe2", *e.noe_pe2}, {"avg_bep", *e.noe_avg_bep()}};
  if (s == Scheme::pnc && e.iterations > 0) {
    j["group_weights"] = e.group_weights;
    j["group_errors"] = e.group_errors;
  }
  if (e.truncated_mass > 0.0) j["truncated_mass"] = e.truncated_mass;
  return j;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-way molecular relay: error analysis and Monte Carlo simulation"};
  app.require_subcommand(1);

  // analyze
  ConfigArgs an_cfg;
  std::string an_scheme = "both", an_form = "derived", an_out;
  double x_avg_an = 0.0;
  auto* analyze_cmd = app.add_subcommand("analyze", "Analytical error probabilities");
  add_config_flags(analyze_cmd, an_cfg);
  analyze_cmd->add_option("--scheme", an_scheme, "pnc, snc or both")->capture_default_str();
  analyze_cmd->add_option("--noe-form", an_form, "derived or printed")->capture_default_str();
  analyze_cmd->add_option("--x-avg", x_avg_an, "calibrate both schemes to this mean release (mol)");
  analyze_cmd->add_option("-o,--output", an_out, "output path (stdout by default)");

  // simulate
  ConfigArgs sim_cfg;
  std::string sim_scheme = "both", sim_out, trace_out;
  std::uint64_t sim_trials = 1'000'000, sim_seed = default_seed;
  unsigned sim_workers = 1;
  std::size_t trace_limit = 0;
  bool genie = false;
  double x_avg_sim = 0.0;
  auto* simulate_cmd = app.add_subcommand("simulate", "Monte Carlo estimate");
  add_config_flags(simulate_cmd, sim_cfg);
  simulate_cmd->add_option("--scheme", sim_scheme, "pnc, snc or both")->capture_default_str();
  simulate_cmd->add_option("-n,--trials", sim_trials, "counted super slots")->capture_default_str();
  simulate_cmd->add_option("--seed", sim_seed, "base RNG seed")->capture_default_str();
  simulate_cmd->add_option("-j,--workers", sim_workers, "worker threads; results do not depend on this")->capture_default_str();
  simulate_cmd->add_option("--x-avg", x_avg_sim, "calibrate both schemes to this mean release (mol)");
  simulate_cmd->add_flag("--genie", genie, "feed protocol memory with the true bits");
  simulate_cmd->add_option("--traces", trace_limit, "number of super slots to dump");
  simulate_cmd->add_option("--trace-output", trace_out, "JSON-lines trace file");
  simulate_cmd->add_option("-o,--output", sim_out, "output path (stdout by default)");

  // sweep
  ConfigArgs sw_cfg;
  SweepSpec sw;
  std::string sw_variable = "zeta", sw_grid, sw_geom, sw_schemes = "both", sw_blocking = "low",
              sw_modes = "analysis", sw_out;
  auto* sweep_cmd = app.add_subcommand("sweep", "Parameter sweep to CSV");
  add_config_flags(sweep_cmd, sw_cfg);
  sweep_cmd->add_option("--variable", sw_variable, "zeta, x_avg or q")->capture_default_str();
  sweep_cmd->add_option("--grid", sw_grid, "comma-separated grid values");
  sweep_cmd->add_option("--geom", sw_geom, "lo,hi,n log-spaced grid");
  sweep_cmd->add_option("--schemes", sw_schemes, "pnc, snc or both")->capture_default_str();
  sweep_cmd->add_option("--blocking", sw_blocking, "comma-separated profiles")->capture_default_str();
  sweep_cmd->add_option("--modes", sw_modes, "comma-separated: analysis, noe, simulation")->capture_default_str();
  sweep_cmd->add_option("--memory", sw.memory, "uniform memory for zeta/x_avg sweeps")->capture_default_str();
  sweep_cmd->add_option("--x-avg", sw.x_avg, "mean release for q sweeps (mol)")->capture_default_str();
  sweep_cmd->add_option("-n,--trials", sw.trials, "simulated super slots per point")->capture_default_str();
  sweep_cmd->add_option("--seed", sw.seed, "base RNG seed")->capture_default_str();
  sweep_cmd->add_option("-j,--workers", sw.workers, "worker threads; results do not depend on this")->capture_default_str();
  sweep_cmd->add_option("-o,--output", sw_out, "CSV path (stdout by default)");

  // preset
  ConfigArgs pr_cfg;
  std::string pr_name, pr_out;
  std::uint64_t pr_trials = 1'000'000, pr_seed = default_seed;
  unsigned pr_workers = 1;
  auto* preset_cmd = app.add_subcommand("preset", "Predefined sweeps (fig3, fig4, fig5)");
  add_config_flags(preset_cmd, pr_cfg);
  preset_cmd->add_option("name", pr_name)->required()->check(CLI::IsMember({"fig3", "fig4", "fig5"}));
  preset_cmd->add_option("-n,--trials", pr_trials, "simulated super slots per point")->capture_default_str();
  preset_cmd->add_option("--seed", pr_seed, "base RNG seed")->capture_default_str();
  preset_cmd->add_option("-j,--workers", pr_workers, "worker threads; results do not depend on this")->capture_default_str();
  preset_cmd->add_option("-o,--output", pr_out, "CSV path (stdout by default)");

  // compare
  std::string cmp_in, cmp_json;
  CompareThresholds th;
  bool no_dominance = false;
  auto* compare_cmd = app.add_subcommand("compare", "Analysis vs simulation report from a sweep CSV");
  compare_cmd->add_option("csv", cmp_in, "sweep CSV")->required();
  compare_cmd->add_option("--max-z", th.max_abs_z, "largest acceptable |z|")->capture_default_str();
  compare_cmd->add_flag("--noe-bound", th.require_noe_bound, "fail when a NoE value exceeds the simulation");
  compare_cmd->add_flag("--no-dominance", no_dominance, "do not fail when PNC is above SNC");
  compare_cmd->add_option("--json", cmp_json, "write the machine-readable summary here");

  // show-config
  ConfigArgs show_cfg;
  auto* show_cmd = app.add_subcommand("show-config", "Print the resolved config, timing and gains");
  add_config_flags(show_cmd, show_cfg);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*analyze_cmd) {
      SystemConfig cfg = load(an_cfg);
      if (x_avg_an > 0.0) apply_calibration(cfg, x_avg_an);
      const ChannelSet ch = make_channels(cfg);
      const NoeForm form = an_form == "printed" ? NoeForm::printed : NoeForm::derived;
      if (an_form != "printed" && an_form != "derived") throw std::invalid_argument("unknown NoE form " + an_form);
      nlohmann::json out = nlohmann::json::array();
      for (Scheme s : schemes_from(an_scheme)) out.push_back(breakdown_json(analyze(cfg, ch, s, {}, form), s));
      emit(out.dump(2) + "\n", an_out);
    } else if (*simulate_cmd) {
      SystemConfig cfg = load(sim_cfg);
      if (x_avg_sim > 0.0) apply_calibration(cfg, x_avg_sim);
      nlohmann::json out = nlohmann::json::array();
      std::ofstream traces;
      if (!trace_out.empty()) traces.open(trace_out, std::ios::binary);
      for (Scheme s : schemes_from(sim_scheme)) {
        SimOptions o;
        o.scheme = s;
        o.n_superslots = sim_trials;
        o.seed = sim_seed;
        o.workers = sim_workers;
        o.genie = genie;
        o.trace_limit = trace_limit;
        const SimReport r = simulate(cfg, o);
        auto j = to_json(r);
        j["seed"] = sim_seed;
        j["genie"] = genie;
        out.push_back(j);
        if (traces) write_traces_jsonl(r, traces);
      }
      emit(out.dump(2) + "\n", sim_out);
    } else if (*sweep_cmd) {
      const SystemConfig cfg = load(sw_cfg);
      sw.variable = parse_sweep_variable(sw_variable);
      if (!sw_geom.empty()) {
        const auto parts = split(sw_geom);
        if (parts.size() != 3) throw std::invalid_argument("--geom expects lo,hi,n");
        sw.grid = geometric_grid(std::stod(parts[0]), std::stod(parts[1]), std::stoi(parts[2]));
      }
      for (const auto& v : split(sw_grid)) sw.grid.push_back(std::stod(v));
      sw.schemes = schemes_from(sw_schemes);
      sw.blocking.clear();
      for (const auto& b : split(sw_blocking)) sw.blocking.push_back(parse_blocking_profile(b));
      sw.modes.clear();
      for (const auto& m : split(sw_modes)) sw.modes.push_back(parse_eval_mode(m));
      emit(run_sweep(sw, cfg), sw_out);
    } else if (*preset_cmd) {
      const SystemConfig cfg = load(pr_cfg);
      SweepSpec spec = preset(pr_name);
      spec.trials = pr_trials;
      spec.seed = pr_seed;
      spec.workers = pr_workers;
      emit(run_sweep(spec, cfg), pr_out);
    } else if (*compare_cmd) {
      th.require_dominance = !no_dominance;
      const CompareSummary s = compare_report(read_file(cmp_in), th);
      std::cout << format_table(s);
      if (!cmp_json.empty()) emit(to_json(s).dump(2) + "\n", cmp_json);
      return s.passed ? 0 : exit_compare;
    } else if (*show_cmd) {
      const SystemConfig cfg = load(show_cfg);
      const ChannelSet ch = make_channels(cfg);
      nlohmann::json gains;
      for (const LinkGains* g : {&ch.t1r, &ch.t2r, &ch.rt1, &ch.rt2})
        gains[std::string(to_string(g->link))] = {{"memory", g->memory}, {"pi", g->pis}, {"nu", g->nus}};
      nlohmann::json out{{"config", config_to_json(cfg)},
                         {"timing", {{"t0", ch.timing.t0}, {"ts", ch.timing.ts}}},
                         {"gains", gains}};
      std::cout << out.dump(2) << '\n';
    }
  } catch (const InvariantViolation& e) {
    std::cerr << "invariant violation: " << e.what() << '\n';
    if (!e.detail().empty()) std::cerr << e.detail() << '\n';
    return exit_invariant;
  } catch (const SweepError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.invariant() ? exit_invariant : exit_config;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return exit_config;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_config;
  }
  return 0;
}

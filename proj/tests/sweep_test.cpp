#include <gtest/gtest.h>

#include "test_util.hpp"

namespace mcrelay {
namespace {

SweepSpec small_spec() {
  SweepSpec s;
  s.variable = SweepVariable::x_avg;
  s.grid = {2e-17, 5e-17};
  s.memory = 3;
  s.modes = {EvalMode::analysis, EvalMode::noe, EvalMode::simulation};
  s.trials = 20'000;
  s.seed = 42;
  return s;
}

TEST(Sweep, CsvIsDeterministicAcrossWorkers) {
  SweepSpec s = small_spec();
  const std::string one = run_sweep(s, reference_config());
  s.workers = 4;
  EXPECT_EQ(run_sweep(s, reference_config()), one);
  EXPECT_EQ(run_sweep(s, reference_config()), one);
}

TEST(Sweep, RowsAndColumns) {
  const SweepSpec s = small_spec();
  const auto rows = run_sweep_rows(s, reference_config());
  ASSERT_EQ(rows.size(), 2u * 2u * 3u);
  EXPECT_EQ(rows[0].value, 2e-17);
  EXPECT_EQ(rows[0].scheme, Scheme::pnc);
  EXPECT_EQ(rows[0].mode, EvalMode::analysis);
  EXPECT_FALSE(rows[0].stderr_avg.has_value());
  EXPECT_TRUE(rows[2].stderr_avg.has_value());
  EXPECT_EQ(*rows[2].seed, 42u);
  const std::string csv = to_csv(rows);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), csv_header);
  const auto back = parse_csv(csv);
  ASSERT_EQ(back.size(), rows.size());
  EXPECT_EQ(to_csv(back), csv);
}

TEST(Sweep, RejectsBadSpecs) {
  SweepSpec s = small_spec();
  s.grid.clear();
  EXPECT_THROW(run_sweep(s, reference_config()), std::invalid_argument);
  s = small_spec();
  s.trials = 0;
  EXPECT_THROW(run_sweep(s, reference_config()), std::invalid_argument);
  s = small_spec();
  s.variable = SweepVariable::q;
  s.grid = {1.5};
  EXPECT_THROW(run_sweep(s, reference_config()), std::invalid_argument);
}

TEST(Sweep, ErrorsNameTheGridPoint) {
  SweepSpec s;
  s.variable = SweepVariable::q;
  s.grid = {1, 5};
  s.modes = {EvalMode::analysis};
  try {
    run_sweep(s, reference_config());
    FAIL();
  } catch (const SweepError& e) {
    EXPECT_NE(std::string(e.what()).find("q=5"), std::string::npos) << e.what();
    EXPECT_FALSE(e.invariant());
  }
}

TEST(Presets, EncodeReferenceSetup) {
  const SweepSpec f3 = preset("fig3");
  EXPECT_EQ(f3.variable, SweepVariable::zeta);
  EXPECT_EQ(f3.memory, 0);
  ASSERT_EQ(f3.grid.size(), 6u);
  EXPECT_DOUBLE_EQ(f3.grid.front(), 1e-17);
  EXPECT_NEAR(f3.grid.back(), 1e-16, 1e-30);
  EXPECT_EQ(f3.blocking.size(), 3u);
  const SystemConfig cfg = point_config(reference_config(), f3, f3.grid[0], BlockingProfile::high);
  const Timing t = resolve_timing(cfg);
  EXPECT_NEAR(t.t0, 1.6667, 1e-4);
  EXPECT_DOUBLE_EQ(t.ts, t.t0);
  EXPECT_EQ(cfg.D1, 1e-9);
  EXPECT_EQ(cfg.d2, 100e-6);
  EXPECT_EQ(cfg.n1R, 250);
  EXPECT_EQ(cfg.n3T2, 500);
  EXPECT_NEAR(cfg.kappa_D(3), 2.5e-7, 1e-20);
  EXPECT_NEAR(*cfg.kappa_block(1), 2e-8, 1e-22);

  const SweepSpec f4 = preset("fig4");
  EXPECT_EQ(f4.memory, 3);
  const SystemConfig c4 = point_config(reference_config(), f4, 3e-17, BlockingProfile::low);
  EXPECT_EQ(c4.qT1R, 3);
  EXPECT_EQ(c4.qRT2, 3);
  const ChannelSet ch = make_channels(c4);
  // The first gain past the memory is truncated; the untruncated value
  // is what pins ts.
  EXPECT_EQ(ch.t1r.nu(5), 0.0);
  const Timing t4 = resolve_timing(c4);
  EXPECT_NEAR(detail::worst_first_truncated_nu(c4, 3, t4.t0, t4.ts), 0.05, 1e-9);

  const SweepSpec f5 = preset("fig5");
  EXPECT_EQ(f5.variable, SweepVariable::q);
  EXPECT_EQ(f5.grid, (std::vector<double>{1, 3, 5}));
  EXPECT_EQ(f5.x_avg, 1e-22);
  EXPECT_THROW(preset("fig6"), std::invalid_argument);
}

SweepRow row(double v, Scheme s, EvalMode m, double p, std::optional<double> se = std::nullopt) {
  SweepRow r;
  r.value = v;
  r.scheme = s;
  r.mode = m;
  r.pe1 = r.pe2 = r.avg_bep = p;
  r.stderr_avg = se;
  return r;
}

TEST(Compare, IdenticalColumnsGiveZeroZ) {
  std::vector<SweepRow> rows{row(1, Scheme::pnc, EvalMode::analysis, 0.1), row(1, Scheme::pnc, EvalMode::simulation, 0.1, 0.01),
                             row(1, Scheme::snc, EvalMode::analysis, 0.2), row(1, Scheme::snc, EvalMode::simulation, 0.2, 0.01)};
  const CompareSummary s = compare_report(rows);
  EXPECT_EQ(s.max_abs_z, 0.0);
  for (const auto& p : s.points) EXPECT_EQ(p.z, 0.0);
  EXPECT_TRUE(s.passed);
  ASSERT_EQ(s.dominance.size(), 2u);
  EXPECT_TRUE(s.dominance[0].holds);
}

TEST(Compare, FlagsLargeDeviationsAndDominance) {
  std::vector<SweepRow> rows{row(1, Scheme::pnc, EvalMode::analysis, 0.3), row(1, Scheme::pnc, EvalMode::simulation, 0.1, 0.01),
                             row(1, Scheme::snc, EvalMode::analysis, 0.2), row(1, Scheme::snc, EvalMode::simulation, 0.2, 0.01),
                             row(1, Scheme::snc, EvalMode::noe, 0.25)};
  CompareThresholds th;
  th.require_noe_bound = true;
  const CompareSummary s = compare_report(rows, th);
  EXPECT_NEAR(s.max_abs_z, 20.0, 1e-9);
  EXPECT_FALSE(s.passed);
  EXPECT_EQ(s.noe_violations.size(), 1u);
  EXPECT_EQ(s.failures.size(), 3u);
  EXPECT_NE(format_table(s).find("FAIL"), std::string::npos);
  EXPECT_FALSE(to_json(s).at("passed").get<bool>());
}

TEST(Compare, MismatchedGridsRejected) {
  std::vector<SweepRow> rows{row(1, Scheme::pnc, EvalMode::analysis, 0.1), row(2, Scheme::pnc, EvalMode::simulation, 0.1, 0.01)};
  EXPECT_THROW(compare_report(rows), std::invalid_argument);
}

}  // namespace
}  // namespace mcrelay

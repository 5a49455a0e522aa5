#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "test_util.hpp"

namespace mcrelay {
namespace {

// Binomial pmf by repeated convolution with a Bernoulli(p) step, in long
// double. Independent of the log-gamma route.
std::vector<long double> pascal_pmf(int n, long double p) {
  std::vector<long double> v{1.0L};
  for (int k = 0; k < n; ++k) {
    std::vector<long double> next(v.size() + 1, 0.0L);
    for (std::size_t y = 0; y < v.size(); ++y) {
      next[y] += v[y] * (1.0L - p);
      next[y + 1] += v[y] * p;
    }
    v.swap(next);
  }
  return v;
}

TEST(Binding, Examples) {
  const double k = 2.5e-7;
  EXPECT_EQ(binding_probability(0.0, k), 0.0);
  EXPECT_DOUBLE_EQ(binding_probability(k, k), 0.5);
  BindingContext ctx{k, {{3e-7, 3e-7}}, k, 250};
  EXPECT_NEAR(binding_probability(ctx), 1.0 / 3.0, 1e-15);
}

TEST(Binding, MonotoneInOwnAndBlockers) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 1000; ++t) {
    const double k = testing::log_uniform(rng, 1e-9, 1e-5);
    const double kb = testing::log_uniform(rng, 1e-9, 1e-5);
    const double c = testing::log_uniform(rng, 1e-12, 1e-4);
    const double b = testing::log_uniform(rng, 1e-12, 1e-4);
    const double base = binding_probability(BindingContext{c, {{b, kb}}, k, 1});
    EXPECT_GE(binding_probability(BindingContext{c * 1.5, {{b, kb}}, k, 1}), base);
    EXPECT_LE(binding_probability(BindingContext{c, {{b * 1.5, kb}}, k, 1}), base);
    EXPECT_GE(base, 0.0);
    EXPECT_LT(base, 1.0);
  }
}

TEST(BoundCount, PmfExamples) {
  EXPECT_EQ(bound_count_pmf(250, 0.0, 0), 1.0);
  EXPECT_EQ(bound_count_pmf(250, 0.0, 3), 0.0);
  EXPECT_EQ(bound_count_pmf(10, 1.0, 10), 1.0);
  EXPECT_NEAR(bound_count_pmf(2, 0.5, 1), 0.5, 1e-15);
  EXPECT_THROW(bound_count_pmf(5, 0.2, 6), std::out_of_range);
  EXPECT_THROW(bound_count_pmf(5, 0.2, -1), std::out_of_range);
}

TEST(BoundCount, PmfMatchesProductForm) {
  const SystemConfig cfg = reference_config();
  const ChannelSet ch = make_channels(cfg);
  const double c = resolve_targets(cfg, ch, Scheme::pnc)[0];
  const double p = binding_probability(c, cfg.kappa_D(1));
  const auto oracle = pascal_pmf(250, p);
  for (int y = 0; y <= 250; ++y) {
    const long double want = oracle[y];
    if (want < 1e-280L) continue;
    EXPECT_NEAR(bound_count_pmf(250, p, y) / static_cast<double>(want), 1.0, 1e-10) << "y = " << y;
  }
}

TEST(BoundCount, PmfSumsToOne) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> ns(1, 1000);
  std::uniform_real_distribution<double> ps(0.0, 1.0);
  for (int t = 0; t < 100; ++t) {
    const int n = ns(rng);
    const double p = ps(rng);
    double s = 0.0;
    for (int y = 0; y <= n; ++y) s += bound_count_pmf(n, p, y);
    EXPECT_NEAR(s, 1.0, 1e-9) << n << ' ' << p;
  }
}

TEST(BoundCount, TailExamples) {
  const double p = 0.013;
  EXPECT_NEAR(bound_count_tail(250, p, 0).lower, std::pow(1.0 - p, 250), 1e-15);
  EXPECT_EQ(bound_count_tail(250, p, 250).lower, 1.0);
  EXPECT_EQ(bound_count_tail(250, p, -0.5).upper, 1.0);
  long double lower = 0.0L;
  const auto oracle = pascal_pmf(10, 0.3L);
  for (int y = 0; y <= 3; ++y) lower += oracle[y];
  const Tail t = bound_count_tail(10, 0.3, 3);
  EXPECT_NEAR(t.lower, static_cast<double>(lower), 1e-14);
  EXPECT_NEAR(t.upper, static_cast<double>(1.0L - lower), 1e-14);
  // Real thresholds act through their floor.
  EXPECT_DOUBLE_EQ(bound_count_tail(10, 0.3, 3.7).lower, t.lower);
}

TEST(BoundCount, TailMatchesBruteForce) {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> ns(1, 500);
  std::uniform_real_distribution<double> ps(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = ns(rng);
    const double p = trial % 4 == 0 ? ps(rng) * 1e-3 : ps(rng);
    std::uniform_int_distribution<int> taus(0, n);
    const int tau = taus(rng);
    const auto oracle = pascal_pmf(n, p);
    long double lo = 0.0L, hi = 0.0L;
    for (int y = 0; y <= n; ++y) (y <= tau ? lo : hi) += oracle[y];
    const Tail t = bound_count_tail(n, p, tau);
    // The smaller side is summed directly and keeps relative accuracy
    // until it drops out of double range.
    const long double small = std::min(lo, hi);
    const double got = lo < hi ? t.lower : t.upper;
    if (small > 1e-280L) EXPECT_NEAR(got / static_cast<double>(small), 1.0, 1e-9) << n << ' ' << p << ' ' << tau;
    else EXPECT_LE(got, 1e-279) << n << ' ' << p << ' ' << tau;
    EXPECT_NEAR(t.lower + t.upper, 1.0, 1e-15);
  }
}

TEST(BoundCount, SamplingDegenerateAndMean) {
  std::mt19937_64 rng(99);
  for (int k = 0; k < 100; ++k) {
    EXPECT_EQ(sample_bound_count(250, 0.0, rng), 0);
    EXPECT_EQ(sample_bound_count(250, 1.0, rng), 250);
  }
  const int n = 250;
  const double p = 0.013;
  const int draws = 1'000'000;
  double sum = 0.0;
  for (int k = 0; k < draws; ++k) sum += sample_bound_count(n, p, rng);
  const double se = std::sqrt(n * p * (1.0 - p) / draws);
  EXPECT_NEAR(sum / draws, n * p, 4.0 * se);
}

TEST(BoundCount, SamplingIsDeterministic) {
  std::mt19937_64 a(1234), b(1234);
  for (int k = 0; k < 1000; ++k) ASSERT_EQ(sample_bound_count(500, 0.2, a), sample_bound_count(500, 0.2, b));
}

TEST(ThresholdDecode, StrictExceedance) {
  EXPECT_EQ(threshold_decode(0, 0), 0);
  EXPECT_EQ(threshold_decode(1, 0), 1);
  EXPECT_EQ(threshold_decode(5, 5), 0);
  EXPECT_EQ(threshold_decode(6, 5.5), 1);
  for (int y = 0; y < 50; ++y) EXPECT_EQ(threshold_decode(y, 0), y > 0 ? 1 : 0);
}

}  // namespace
}  // namespace mcrelay

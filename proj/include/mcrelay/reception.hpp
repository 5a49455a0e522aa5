#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <vector>

namespace mcrelay {

// ---------------------------------------------------------------------------
// Binding

struct Blocker {
  double concentration;  // mol/L
  double kappa_block;    // mol/L
};

struct BindingContext {
  double own_concentration = 0.0;  // mol/L
  std::vector<Blocker> blockers;
  double kappa_D = 1.0;  // mol/L
  int n_receptors = 1;
};

/// Steady-state probability that one receptor is bound by its own ligand:
/// c / (c + sum_j kappa_D c_j / kappa_block_j + kappa_D).
inline double binding_probability(double own, double kappa_D, double blocking_load = 0.0) {
  if (own <= 0.0) return 0.0;
  return own / (own + kappa_D * blocking_load + kappa_D);
}

inline double binding_probability(const BindingContext& ctx) {
  double load = 0.0;
  for (const auto& b : ctx.blockers) {
    if (b.concentration > 0.0) load += b.concentration / b.kappa_block;
  }
  return binding_probability(ctx.own_concentration, ctx.kappa_D, load);
}

// ---------------------------------------------------------------------------
// Binomial observation model

namespace detail {

inline double log_choose(int n, int y) {
  return std::lgamma(n + 1.0) - std::lgamma(y + 1.0) - std::lgamma(n - y + 1.0);
}

// Neumaier compensated accumulator.
struct CompensatedSum {
  double sum = 0.0;
  double comp = 0.0;
  void add(double v) {
    const double t = sum + v;
    if (std::abs(sum) >= std::abs(v)) comp += (sum - t) + v;
    else comp += (v - t) + sum;
    sum = t;
  }
  double value() const { return sum + comp; }
};

}  // namespace detail

/// log P{Y = y} for Y ~ Binomial(n, p).
inline double bound_count_log_pmf(int n, double p, int y) {
  if (n < 0 || y < 0 || y > n) throw std::out_of_range("bound_count_pmf: y outside [0, n]");
  if (p <= 0.0) return y == 0 ? 0.0 : -std::numeric_limits<double>::infinity();
  if (p >= 1.0) return y == n ? 0.0 : -std::numeric_limits<double>::infinity();
  return detail::log_choose(n, y) + y * std::log(p) + (n - y) * std::log1p(-p);
}

inline double bound_count_pmf(int n, double p, int y) { return std::exp(bound_count_log_pmf(n, p, y)); }

struct Tail {
  double lower;  // P{Y <= tau}
  double upper;  // P{Y > tau}
};

/// Both tails of Binomial(n, p) split at a (possibly real) threshold tau.
/// The smaller tail is summed directly and the other is its complement.
inline Tail bound_count_tail(int n, double p, double tau) {
  if (n < 0) throw std::out_of_range("bound_count_tail: n < 0");
  if (tau < 0.0) return {0.0, 1.0};
  if (tau >= n) return {1.0, 0.0};
  const int t = static_cast<int>(std::floor(tau));
  if (p <= 0.0) return {1.0, 0.0};
  if (p >= 1.0) return {0.0, 1.0};
  if (t == 0) {
    const double lower = std::exp(n * std::log1p(-p));
    return {lower, -std::expm1(n * std::log1p(-p))};
  }
  const double mean = n * p;
  detail::CompensatedSum s;
  if (t < mean) {
    for (int y = 0; y <= t; ++y) s.add(bound_count_pmf(n, p, y));
    const double lower = std::min(1.0, s.value());
    return {lower, 1.0 - lower};
  }
  for (int y = t + 1; y <= n; ++y) s.add(bound_count_pmf(n, p, y));
  const double upper = std::min(1.0, s.value());
  return {1.0 - upper, upper};
}

/// Binomial(n, p) variate drawn from `rng`.
template <class Rng>
int sample_bound_count(int n, double p, Rng& rng) {
  if (p <= 0.0 || n == 0) return 0;
  if (p >= 1.0) return n;
  std::binomial_distribution<int> dist(n, p);
  return dist(rng);
}

/// Strict-exceedance decision: 1 iff y > tau.
constexpr int threshold_decode(int y, double tau) noexcept { return y > tau ? 1 : 0; }

}  // namespace mcrelay

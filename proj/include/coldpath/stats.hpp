/*
 * Copyright 2026 The coldpath Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Nonparametric tests for small samples.
//
// Exact p-values are computed from the permutation distribution of the rank
// statistic, built by dynamic programming over doubled mid-ranks so that tied
// observations stay in integer arithmetic. Larger samples fall back to the
// normal approximation with tie and continuity correction.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "coldpath/error.hpp"

namespace coldpath::stats {

enum class Method { exact, normal_approx };

inline std::string_view to_string(Method m) {
  return m == Method::exact ? "exact" : "normal_approx";
}

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
  Method method = Method::exact;
  std::size_t n = 0;
  std::size_t m = 0;
};

struct EffectSize {
  double delta = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t bootstrap_reps = 0;
  std::uint64_t seed = 0;
};

// Exact-method cutoffs.
inline constexpr std::size_t kMannWhitneyExactMaxProduct = 100;
inline constexpr std::size_t kWilcoxonExactMaxN = 12;

namespace detail {

/// Twice the mid-rank of each value (1-based ranks), so ties stay integral.
inline std::vector<std::int64_t> doubled_midranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<std::int64_t> ranks(values.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    // Positions i..j (0-based) share mid-rank ((i+1)+(j+1))/2.
    auto twice = static_cast<std::int64_t>(i + j + 2);
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = twice;
    i = j + 1;
  }
  return ranks;
}

/// Σ (t³ − t) over tie groups.
inline double tie_term(std::span<const double> values) {
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  double sum = 0.0;
  std::size_t i = 0;
  while (i < v.size()) {
    std::size_t j = i;
    while (j + 1 < v.size() && v[j + 1] == v[i]) ++j;
    double t = static_cast<double>(j - i + 1);
    sum += t * t * t - t;
    i = j + 1;
  }
  return sum;
}

inline double normal_two_sided(double z) { return std::erfc(std::abs(z) / std::sqrt(2.0)); }

}  // namespace detail

/// Two-sided Mann–Whitney U test. The statistic is U for sample `a`:
/// #{(x, y) : x > y} + ½ #{x = y}.
inline TestResult mann_whitney_u(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw EmptySample("mann_whitney_u needs two non-empty samples");
  const std::size_t n = a.size();
  const std::size_t m = b.size();
  const std::size_t total = n + m;

  std::vector<double> pooled(a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  auto ranks = detail::doubled_midranks(pooled);

  std::int64_t rank_sum_a = 0;
  for (std::size_t i = 0; i < n; ++i) rank_sum_a += ranks[i];
  const auto ni = static_cast<std::int64_t>(n);
  const auto mi = static_cast<std::int64_t>(m);
  // 2U = 2R_a − n(n+1) with R_a the ordinary rank sum.
  const std::int64_t twice_u = rank_sum_a - ni * (ni + 1);

  TestResult res;
  res.statistic = static_cast<double>(twice_u) / 2.0;
  res.n = n;
  res.m = m;

  if (n * m <= kMannWhitneyExactMaxProduct) {
    res.method = Method::exact;
    // ways[k][s]: number of k-subsets of the pooled ranks with doubled sum s.
    std::int64_t max_sum = std::accumulate(ranks.begin(), ranks.end(), std::int64_t{0});
    std::vector<std::vector<double>> ways(n + 1, std::vector<double>(max_sum + 1, 0.0));
    ways[0][0] = 1.0;
    for (std::size_t idx = 0; idx < total; ++idx) {
      const std::int64_t r = ranks[idx];
      for (std::size_t k = std::min(n, idx + 1); k >= 1; --k) {
        auto& dst = ways[k];
        const auto& src = ways[k - 1];
        for (std::int64_t s = max_sum; s >= r; --s) dst[s] += src[s - r];
      }
    }
    const std::int64_t observed_dev = std::abs(twice_u - ni * mi);
    double hits = 0.0;
    double all = 0.0;
    for (std::int64_t s = 0; s <= max_sum; ++s) {
      double w = ways[n][s];
      if (w == 0.0) continue;
      all += w;
      std::int64_t u2 = s - ni * (ni + 1);
      if (std::abs(u2 - ni * mi) >= observed_dev) hits += w;
    }
    res.p_value = std::min(1.0, hits / all);
    return res;
  }

  res.method = Method::normal_approx;
  const double nd = static_cast<double>(n);
  const double md = static_cast<double>(m);
  const double big_n = nd + md;
  const double mu = nd * md / 2.0;
  double var = nd * md / 12.0 * ((big_n + 1.0) - detail::tie_term(pooled) / (big_n * (big_n - 1.0)));
  if (var <= 0.0) {
    res.p_value = 1.0;
    return res;
  }
  double z = std::max(0.0, std::abs(res.statistic - mu) - 0.5) / std::sqrt(var);
  res.p_value = std::min(1.0, detail::normal_two_sided(z));
  return res;
}

/// Two-sided Wilcoxon signed-rank test on paired differences. Zero
/// differences are dropped; the statistic is W = min(W+, W−).
inline TestResult wilcoxon_signed_rank(std::span<const double> diffs) {
  std::vector<double> nonzero;
  for (double d : diffs) {
    if (d != 0.0) nonzero.push_back(d);
  }
  if (nonzero.empty()) throw AllZeroDiffs("wilcoxon_signed_rank: every difference is zero");
  const std::size_t n = nonzero.size();

  std::vector<double> magnitudes(n);
  for (std::size_t i = 0; i < n; ++i) magnitudes[i] = std::abs(nonzero[i]);
  auto ranks = detail::doubled_midranks(magnitudes);

  std::int64_t plus2 = 0;
  std::int64_t total2 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    total2 += ranks[i];
    if (nonzero[i] > 0) plus2 += ranks[i];
  }
  const std::int64_t w2 = std::min(plus2, total2 - plus2);

  TestResult res;
  res.statistic = static_cast<double>(w2) / 2.0;
  res.n = n;
  res.m = n;

  if (n <= kWilcoxonExactMaxN) {
    res.method = Method::exact;
    // ways[s]: sign patterns whose positive doubled-rank sum is s.
    std::vector<double> ways(total2 + 1, 0.0);
    ways[0] = 1.0;
    for (std::int64_t r : ranks) {
      for (std::int64_t s = total2; s >= r; --s) ways[s] += ways[s - r];
    }
    double hits = 0.0;
    for (std::int64_t s = 0; s <= total2; ++s) {
      if (std::min(s, total2 - s) <= w2) hits += ways[s];
    }
    res.p_value = std::min(1.0, hits / std::ldexp(1.0, static_cast<int>(n)));
    return res;
  }

  res.method = Method::normal_approx;
  const double nd = static_cast<double>(n);
  const double mean = nd * (nd + 1.0) / 4.0;
  const double var = nd * (nd + 1.0) * (2.0 * nd + 1.0) / 24.0 - detail::tie_term(magnitudes) / 48.0;
  if (var <= 0.0) {
    res.p_value = 1.0;
    return res;
  }
  double z = std::max(0.0, std::abs(res.statistic - mean) - 0.5) / std::sqrt(var);
  res.p_value = std::min(1.0, detail::normal_two_sided(z));
  return res;
}

/// Holm step-down procedure. Flags are returned in input order.
inline std::vector<bool> holm_bonferroni(std::span<const double> p_values, double alpha = 0.05) {
  const std::size_t m = p_values.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return p_values[a] < p_values[b]; });
  std::vector<bool> reject(m, false);
  for (std::size_t i = 0; i < m; ++i) {
    double threshold = alpha / static_cast<double>(m - i);
    if (p_values[order[i]] > threshold) break;
    reject[order[i]] = true;
  }
  return reject;
}

inline std::vector<bool> bonferroni(std::span<const double> p_values, double alpha = 0.05) {
  std::vector<bool> reject(p_values.size());
  const double threshold = alpha / static_cast<double>(std::max<std::size_t>(1, p_values.size()));
  for (std::size_t i = 0; i < p_values.size(); ++i) reject[i] = p_values[i] <= threshold;
  return reject;
}

namespace detail {

// Sorted-merge dominance count; b_sorted must be ascending.
inline double cliffs_delta_sorted(std::span<const double> a, std::span<const double> b_sorted) {
  std::int64_t balance = 0;
  for (double x : a) {
    auto below = std::lower_bound(b_sorted.begin(), b_sorted.end(), x) - b_sorted.begin();
    auto above = b_sorted.end() - std::upper_bound(b_sorted.begin(), b_sorted.end(), x);
    balance += below - above;
  }
  return static_cast<double>(balance) /
         (static_cast<double>(a.size()) * static_cast<double>(b_sorted.size()));
}

// Type-7 (linear interpolation) sample quantile of sorted data.
inline double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.size() == 1) return sorted[0];
  double h = q * static_cast<double>(sorted.size() - 1);
  auto lo = static_cast<std::size_t>(std::floor(h));
  std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace detail

/// Cliff's δ with a percentile-bootstrap 95% interval. Each replicate draws
/// from its own generator seeded by (seed, replicate index), so results do not
/// depend on evaluation order.
inline EffectSize cliffs_delta(std::span<const double> a, std::span<const double> b,
                               std::size_t bootstrap_reps = 2000, std::uint64_t seed = 0) {
  if (a.empty() || b.empty()) throw EmptySample("cliffs_delta needs two non-empty samples");

  std::vector<double> b_sorted(b.begin(), b.end());
  std::sort(b_sorted.begin(), b_sorted.end());

  EffectSize out;
  out.delta = detail::cliffs_delta_sorted(a, b_sorted);
  out.bootstrap_reps = bootstrap_reps;
  out.seed = seed;
  out.ci_low = out.ci_high = out.delta;
  if (bootstrap_reps == 0) return out;

  std::vector<double> reps(bootstrap_reps);
  std::vector<double> ra(a.size());
  std::vector<double> rb(b.size());
  for (std::size_t r = 0; r < bootstrap_reps; ++r) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(r), static_cast<std::uint32_t>(r >> 32)};
    std::mt19937_64 rng(seq);
    std::uniform_int_distribution<std::size_t> pick_a(0, a.size() - 1);
    std::uniform_int_distribution<std::size_t> pick_b(0, b.size() - 1);
    for (auto& x : ra) x = a[pick_a(rng)];
    for (auto& y : rb) y = b[pick_b(rng)];
    std::sort(rb.begin(), rb.end());
    reps[r] = detail::cliffs_delta_sorted(ra, rb);
  }
  std::sort(reps.begin(), reps.end());
  // The point estimate is kept inside the reported interval.
  out.ci_low = std::min(out.delta, detail::quantile_sorted(reps, 0.025));
  out.ci_high = std::max(out.delta, detail::quantile_sorted(reps, 0.975));
  return out;
}

}  // namespace coldpath::stats

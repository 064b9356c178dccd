#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace ragcomp::analysis {

struct RetentionPoint {
  size_t h = 0;            // hard-negative count
  double value = 0.0;      // metric value M(H)
  double retention = 0.0;  // M(H) / M(0)
};

struct RetentionCurve {
  std::string metric;
  double baseline = 0.0;  // M(0), > 0
  std::vector<RetentionPoint> points;  // sorted by h, distinct h
};

// Divides every point by the baseline. Baseline <= 0 or duplicate H values
// are rejected.
RetentionCurve retention(std::string metric,
                         std::vector<std::pair<size_t, double>> values,
                         double baseline);

struct HalfLife {
  std::string metric;
  size_t value = 0;       // first tested H with retention <= 0.5, or H_max
  bool censored = false;  // true iff no tested H crossed half retention

  std::string value_string() const;  // "10" or ">79"
  std::string render() const;        // "K_{1/2}=10" or "K_{1/2}>79"
};

// Smallest tested H with R <= 0.5; right-censored at h_max when no tested
// point crosses. No interpolation between tested values.
HalfLife half_life(const RetentionCurve& curve, size_t h_max);

// Percentile bootstrap CI for the mean of `deltas`: resample indices with
// replacement `resamples` times, take 2.5th/97.5th percentiles of the
// resampled means with linear interpolation between order statistics.
// Resample b draws its indices from a generator seeded with
// derive_seed(seed, b), so results are independent of evaluation order.
std::pair<double, double> paired_bootstrap(const std::vector<double>& deltas,
                                           size_t resamples, uint64_t seed);

struct SignFlipOptions {
  size_t exact_n_max = 20;  // exact enumeration whenever n <= this
  size_t mc_draws = 10000;  // Monte Carlo draws otherwise
  uint64_t seed = 0;
};

// Two-sided sign-flip randomization p-value for the mean of `deltas`.
// Exact mode enumerates all 2^n sign assignments (used when n <= exact_n_max
// or 2^n <= mc_draws) and returns the plain proportion with |mean*| >=
// |mean|. Monte Carlo mode makes mc_draws random assignments and applies the
// add-one correction p = (1 + hits) / (1 + mc_draws), which also counts the
// identity assignment.
double sign_flip_p(const std::vector<double>& deltas,
                   const SignFlipOptions& options);

struct PairedDelta {
  std::string metric;
  double delta = 0.0;  // mean of per-question (far - hard)
  double ci_low = 0.0;
  double ci_high = 0.0;
  double p = 1.0;
  size_t n = 0;
  size_t resamples = 0;
  uint64_t seed = 0;
};

// Bootstrap CI plus sign-flip p for one metric's per-question deltas.
PairedDelta paired_delta(std::string metric, const std::vector<double>& deltas,
                         size_t resamples, uint64_t seed,
                         const SignFlipOptions& sign_flip);

}  // namespace ragcomp::analysis

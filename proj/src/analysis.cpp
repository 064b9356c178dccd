#include "ragcomp/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "ragcomp/error.hpp"
#include "ragcomp/rng.hpp"

namespace ragcomp::analysis {

RetentionCurve retention(std::string metric,
                         std::vector<std::pair<size_t, double>> values,
                         double baseline) {
  if (!(baseline > 0.0)) {
    fail(ErrorKind::Contract, "retention: degenerate baseline " +
                                  std::to_string(baseline) + " for metric " +
                                  metric);
  }
  std::sort(values.begin(), values.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  RetentionCurve curve;
  curve.metric = std::move(metric);
  curve.baseline = baseline;
  curve.points.reserve(values.size());
  for (const auto& [h, value] : values) {
    if (!curve.points.empty() && curve.points.back().h == h) {
      fail(ErrorKind::Contract, "retention: duplicate load H=" +
                                    std::to_string(h) + " for metric " +
                                    curve.metric);
    }
    curve.points.push_back({h, value, value / baseline});
  }
  return curve;
}

std::string HalfLife::value_string() const {
  std::string out = censored ? ">" : "";
  return out + std::to_string(value);
}

std::string HalfLife::render() const {
  return censored ? "K_{1/2}>" + std::to_string(value)
                  : "K_{1/2}=" + std::to_string(value);
}

HalfLife half_life(const RetentionCurve& curve, size_t h_max) {
  if (curve.points.empty()) {
    fail(ErrorKind::Contract, "half_life: empty curve for metric " + curve.metric);
  }
  for (const auto& point : curve.points) {
    if (point.h > h_max) {
      fail(ErrorKind::Contract,
           "half_life: tested H=" + std::to_string(point.h) +
               " exceeds h_max=" + std::to_string(h_max));
    }
  }
  HalfLife result;
  result.metric = curve.metric;
  for (const auto& point : curve.points) {  // points are sorted by h
    if (point.retention <= 0.5) {
      result.value = point.h;
      result.censored = false;
      return result;
    }
  }
  result.value = h_max;
  result.censored = true;
  return result;
}

namespace {

// q in [0, 100]; values must be sorted ascending.
double percentile(const std::vector<double>& values, double q) {
  const double pos = q / 100.0 * static_cast<double>(values.size() - 1);
  const size_t lo = static_cast<size_t>(pos);
  const size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + (values[hi] - values[lo]) * frac;
}

}  // namespace

std::pair<double, double> paired_bootstrap(const std::vector<double>& deltas,
                                           size_t resamples, uint64_t seed) {
  const size_t n = deltas.size();
  if (n < 2) {
    fail(ErrorKind::Contract,
         "paired_bootstrap: need at least 2 paired deltas, got " +
             std::to_string(n));
  }
  if (resamples < 1000) {
    fail(ErrorKind::Contract, "paired_bootstrap: resamples must be >= 1000, got " +
                                  std::to_string(resamples));
  }
  std::vector<double> means(resamples);
  for (size_t b = 0; b < resamples; ++b) {
    Rng rng(derive_seed(seed, b));
    double sum = 0.0;
    for (size_t i = 0; i < n; ++i) sum += deltas[rng.below(n)];
    means[b] = sum / static_cast<double>(n);
  }
  std::sort(means.begin(), means.end());
  return {percentile(means, 2.5), percentile(means, 97.5)};
}

double sign_flip_p(const std::vector<double>& deltas,
                   const SignFlipOptions& options) {
  const size_t n = deltas.size();
  if (n == 0) fail(ErrorKind::Contract, "sign_flip_p: no paired deltas");

  const auto signed_mean_abs = [&](auto sign_of) {
    double sum = 0.0;
    for (size_t i = 0; i < n; ++i) {
      sum += sign_of(i) ? -deltas[i] : deltas[i];
    }
    return std::fabs(sum / static_cast<double>(n));
  };
  const double observed = signed_mean_abs([](size_t) { return false; });

  const bool exact =
      n <= options.exact_n_max ||
      (n < 64 && (uint64_t{1} << n) <= static_cast<uint64_t>(options.mc_draws));
  if (exact) {
    const uint64_t total = uint64_t{1} << n;
    uint64_t hits = 0;
    for (uint64_t mask = 0; mask < total; ++mask) {
      const double stat =
          signed_mean_abs([&](size_t i) { return ((mask >> i) & 1u) != 0; });
      if (stat >= observed) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(total);
  }

  uint64_t hits = 0;
  for (size_t t = 0; t < options.mc_draws; ++t) {
    Rng rng(derive_seed(options.seed, t));
    const double stat = signed_mean_abs([&](size_t) { return rng.below(2) == 1; });
    if (stat >= observed) ++hits;
  }
  return static_cast<double>(1 + hits) /
         static_cast<double>(1 + options.mc_draws);
}

PairedDelta paired_delta(std::string metric, const std::vector<double>& deltas,
                         size_t resamples, uint64_t seed,
                         const SignFlipOptions& sign_flip) {
  PairedDelta result;
  result.metric = std::move(metric);
  result.n = deltas.size();
  result.resamples = resamples;
  result.seed = seed;
  double sum = 0.0;
  for (double d : deltas) sum += d;
  result.delta = sum / static_cast<double>(deltas.size());
  std::tie(result.ci_low, result.ci_high) =
      paired_bootstrap(deltas, resamples, seed);
  result.p = sign_flip_p(deltas, sign_flip);
  return result;
}

}  // namespace ragcomp::analysis

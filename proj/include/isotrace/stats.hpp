// Copyright 2026 The isotrace Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef ISOTRACE_STATS_HPP_
#define ISOTRACE_STATS_HPP_

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "json.hpp"

namespace isotrace {

// Standard normal CDF and upper tail. The tail is evaluated as
// erfc(z / sqrt 2) / 2, so it keeps full relative precision for large z
// instead of cancelling against 1.
double normal_cdf(double z);
double normal_sf(double z);

// Natural log of the upper tail; uses the asymptotic expansion where the
// tail underflows.
double log_normal_sf(double z);

// z statistic of an observed recovery rate against the non-training rate:
// (p_hat - p_n) * sqrt(N / (p_n (1 - p_n))).
double activity_z(double p_hat, double p_n, std::size_t n);

// One-sided p-value 1 - Phi(z) for the activity z statistic. Throws
// StatsError unless 0 < p_n < 1, N >= 1 and 0 <= p_hat <= 1. Results that
// underflow are clamped to the smallest positive normal double; use
// log10_significance for their magnitude.
double significance(double p_hat, double p_n, std::size_t n);
double log10_significance(double p_hat, double p_n, std::size_t n);

// Upper bound on the detection error after N fragments:
//   1 / (2 (p_t - p_n) sqrt(pi N)) * exp(-(p_t - p_n)^2 N).
// Throws StatsError when p_t <= p_n or N == 0.
double error_bound(double p_t, double p_n, std::size_t n);

// Observations needed under a replacement attack of intensity alpha to keep
// the unattacked significance: ceil(N / (1 - alpha)^2), plus the first-order
// estimate ceil(N (1 + 2 alpha)).
struct AttackPlan {
  double alpha = 0.0;
  std::size_t base_n = 0;
  std::size_t n_required = 0;
  std::size_t taylor_estimate = 0;
};

// Throws StatsError unless 0 <= alpha < 1.
AttackPlan compensate(std::size_t n, double alpha);

struct WelchResult {
  double t = 0.0;
  double df = 0.0;
  double p_two_sided = 1.0;
  // Both samples constant: t is 0 (equal means, p = 1) or +-inf (p = 0).
  bool degenerate = false;
};

// Welch's unequal-variance t test with Welch-Satterthwaite degrees of
// freedom; two-sided p from the Student t distribution. Throws StatsError
// when a sample has fewer than two values.
WelchResult welch_t_test(std::span<const double> a, std::span<const double> b);

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
};

// Wilson score interval for a binomial proportion.
Interval wilson_interval(std::size_t successes, std::size_t n, double confidence = 0.95);

// ---------------------------------------------------------------------------
// Activity.

// One probe result as the statistics see it.
struct Indicator {
  bool recovered = false;  // o
  bool excluded = false;   // transport failure, not part of N
  std::string category;    // "NN", "VB", ...
};

struct CategoryRate {
  std::size_t n = 0;
  std::size_t recovered = 0;
  double rsr = 0.0;
};

struct ActivityScore {
  double p_hat = 0.0;
  std::size_t n = 0;
  std::size_t recovered = 0;
  std::size_t excluded = 0;
  std::map<std::string, CategoryRate> per_category;
};

// p_hat = (sum of o) / N over non-excluded indicators, with per-category
// recovery success rates. Throws StatsError when N would be zero.
ActivityScore activity_score(std::span<const Indicator> indicators);

enum class PriorProvenance { kCalibrated, kConfigured };

std::string_view to_string(PriorProvenance p);

struct TraceabilityPriors {
  double p_n = 0.5;
  // Optional expected training-data rate, used for the error bound.
  std::optional<double> p_t;
  PriorProvenance provenance = PriorProvenance::kConfigured;
  std::optional<Interval> p_n_interval;
  bool clamped = false;

  // Throws StatsError unless 0 < p_n < 1 and, when present, p_n < p_t < 1.
  void validate() const;
};

struct Calibration {
  TraceabilityPriors priors;
  std::size_t n = 0;
  std::size_t recovered = 0;
  double raw_mean = 0.0;
};

inline constexpr std::size_t kMinControlObservations = 200;
inline constexpr double kCalibrationEpsilon = 1e-3;

// p_n from known non-training control probes: the control mean clamped to
// [1 / group_size, 1 - epsilon], with a Wilson 95% interval. Throws
// StatsError when fewer than `min_observations` valid observations exist.
Calibration calibrate_pn(std::span<const Indicator> control, std::size_t group_size,
                         std::size_t min_observations = kMinControlObservations);

inline constexpr double kDefaultSignificanceLevel = 0.05;
inline constexpr double kExclusionFlagRate = 0.10;

struct ActivityReport {
  ActivityScore activity;
  TraceabilityPriors priors;
  std::size_t planned = 0;  // K * M before exclusions
  double z = 0.0;
  double p_value = 1.0;
  double log10_p_value = 0.0;
  // Evaluated at priors.p_t when given, else at p_hat when p_hat > p_n.
  std::optional<double> error_bound;
  std::optional<double> error_bound_p_t;
  double significance_level = kDefaultSignificanceLevel;
  bool detected = false;
  bool exclusions_flagged = false;
};

ActivityReport assess(const ActivityScore& activity, const TraceabilityPriors& priors,
                      std::size_t planned, double significance_level = kDefaultSignificanceLevel);

nlohmann::json to_json(const ActivityScore& a);
nlohmann::json to_json(const TraceabilityPriors& p);
nlohmann::json to_json(const ActivityReport& r);

}  // namespace isotrace

#endif  // ISOTRACE_STATS_HPP_

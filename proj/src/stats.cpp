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

#include "isotrace/stats.hpp"

#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "isotrace/error.hpp"

namespace isotrace {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double normal_sf(double z) { return 0.5 * std::erfc(z / std::numbers::sqrt2); }

double log_normal_sf(double z) {
  if (z < 30.0) return std::log(normal_sf(z));
  // Q(z) = phi(z) / z * (1 - 1/z^2 + 3/z^4 - 15/z^6 + 105/z^8 - ...)
  const double inv2 = 1.0 / (z * z);
  const double series = 1.0 - inv2 * (1.0 - 3.0 * inv2 * (1.0 - 5.0 * inv2 * (1.0 - 7.0 * inv2)));
  return -0.5 * z * z - std::log(z) - 0.5 * std::log(2.0 * std::numbers::pi) + std::log(series);
}

namespace {

void check_activity_args(double p_hat, double p_n, std::size_t n) {
  if (!(p_n > 0.0 && p_n < 1.0)) throw StatsError("p_n must lie strictly between 0 and 1");
  if (n == 0) throw StatsError("N must be at least 1");
  if (!(p_hat >= 0.0 && p_hat <= 1.0)) throw StatsError("p_hat must lie in [0, 1]");
}

}  // namespace

double activity_z(double p_hat, double p_n, std::size_t n) {
  check_activity_args(p_hat, p_n, n);
  return (p_hat - p_n) * std::sqrt(static_cast<double>(n) / (p_n * (1.0 - p_n)));
}

double significance(double p_hat, double p_n, std::size_t n) {
  const double p = normal_sf(activity_z(p_hat, p_n, n));
  return std::max(p, std::numeric_limits<double>::min());
}

double log10_significance(double p_hat, double p_n, std::size_t n) {
  return log_normal_sf(activity_z(p_hat, p_n, n)) / std::numbers::ln10;
}

double error_bound(double p_t, double p_n, std::size_t n) {
  if (!(p_t > p_n)) throw StatsError("error bound needs p_t > p_n");
  if (n == 0) throw StatsError("N must be at least 1");
  const double gap = p_t - p_n;
  const double count = static_cast<double>(n);
  return std::exp(-gap * gap * count) / (2.0 * gap * std::sqrt(std::numbers::pi * count));
}

AttackPlan compensate(std::size_t n, double alpha) {
  if (!(alpha >= 0.0 && alpha < 1.0)) throw StatsError("attack intensity alpha must lie in [0, 1)");
  // Guard against representation error pushing an exact integer up by one.
  constexpr double kSlack = 1e-9;
  const double count = static_cast<double>(n);
  AttackPlan plan;
  plan.alpha = alpha;
  plan.base_n = n;
  plan.n_required = static_cast<std::size_t>(std::ceil(count / ((1.0 - alpha) * (1.0 - alpha)) - kSlack));
  plan.taylor_estimate = static_cast<std::size_t>(std::ceil(count * (1.0 + 2.0 * alpha) - kSlack));
  plan.n_required = std::max(plan.n_required, n);
  return plan;
}

WelchResult welch_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw StatsError("Welch t test needs at least two values per sample");
  auto moments = [](std::span<const double> x) {
    const double n = static_cast<double>(x.size());
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : x) ss += (v - mean) * (v - mean);
    return std::pair{mean, ss / (n - 1.0)};
  };
  const auto [mean_a, var_a] = moments(a);
  const auto [mean_b, var_b] = moments(b);
  const double se_a = var_a / static_cast<double>(a.size());
  const double se_b = var_b / static_cast<double>(b.size());
  const double se2 = se_a + se_b;

  WelchResult r;
  if (se2 == 0.0) {
    r.degenerate = true;
    if (mean_a == mean_b) {
      r.t = 0.0;
      r.p_two_sided = 1.0;
    } else {
      r.t = mean_a > mean_b ? std::numeric_limits<double>::infinity()
                            : -std::numeric_limits<double>::infinity();
      r.p_two_sided = 0.0;
    }
    return r;
  }
  r.t = (mean_a - mean_b) / std::sqrt(se2);
  r.df = se2 * se2 /
         (se_a * se_a / static_cast<double>(a.size() - 1) + se_b * se_b / static_cast<double>(b.size() - 1));
  const boost::math::students_t_distribution<double> student(r.df);
  r.p_two_sided = std::min(1.0, 2.0 * boost::math::cdf(student, -std::abs(r.t)));
  return r;
}

Interval wilson_interval(std::size_t successes, std::size_t n, double confidence) {
  if (n == 0) throw StatsError("Wilson interval needs at least one observation");
  if (successes > n) throw StatsError("more successes than observations");
  const boost::math::normal_distribution<double> standard;
  const double z = boost::math::quantile(standard, 0.5 + confidence / 2.0);
  const double count = static_cast<double>(n);
  const double p = static_cast<double>(successes) / count;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / count;
  const double center = (p + z2 / (2.0 * count)) / denom;
  const double half = z / denom * std::sqrt(p * (1.0 - p) / count + z2 / (4.0 * count * count));
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

// ---------------------------------------------------------------------------

ActivityScore activity_score(std::span<const Indicator> indicators) {
  ActivityScore s;
  for (const Indicator& ind : indicators) {
    if (ind.excluded) {
      ++s.excluded;
      continue;
    }
    ++s.n;
    CategoryRate& cat = s.per_category[ind.category];
    ++cat.n;
    if (ind.recovered) {
      ++s.recovered;
      ++cat.recovered;
    }
  }
  if (s.n == 0) throw StatsError("no valid observations to score");
  s.p_hat = static_cast<double>(s.recovered) / static_cast<double>(s.n);
  for (auto& [name, cat] : s.per_category) {
    cat.rsr = static_cast<double>(cat.recovered) / static_cast<double>(cat.n);
  }
  return s;
}

std::string_view to_string(PriorProvenance p) {
  return p == PriorProvenance::kCalibrated ? "calibrated" : "configured";
}

void TraceabilityPriors::validate() const {
  if (!(p_n > 0.0 && p_n < 1.0)) throw StatsError("p_n must lie strictly between 0 and 1");
  if (p_t && !(*p_t > p_n && *p_t < 1.0)) throw StatsError("priors must satisfy 0 < p_n < p_t < 1");
}

Calibration calibrate_pn(std::span<const Indicator> control, std::size_t group_size,
                         std::size_t min_observations) {
  std::size_t n = 0;
  std::size_t recovered = 0;
  for (const Indicator& ind : control) {
    if (ind.excluded) continue;
    ++n;
    if (ind.recovered) ++recovered;
  }
  if (n < min_observations) {
    throw StatsError("control set too small: " + std::to_string(n) + " valid observations, need " +
                     std::to_string(min_observations));
  }
  if (group_size < 2) throw StatsError("calibration needs a group size of at least 2");
  Calibration c;
  c.n = n;
  c.recovered = recovered;
  c.raw_mean = static_cast<double>(recovered) / static_cast<double>(n);
  const double floor = 1.0 / static_cast<double>(group_size);
  const double ceiling = 1.0 - kCalibrationEpsilon;
  c.priors.p_n = std::clamp(c.raw_mean, floor, ceiling);
  c.priors.clamped = c.priors.p_n != c.raw_mean;
  c.priors.provenance = PriorProvenance::kCalibrated;
  c.priors.p_n_interval = wilson_interval(recovered, n);
  return c;
}

ActivityReport assess(const ActivityScore& activity, const TraceabilityPriors& priors,
                      std::size_t planned, double significance_level) {
  priors.validate();
  ActivityReport r;
  r.activity = activity;
  r.priors = priors;
  r.planned = planned;
  r.significance_level = significance_level;
  r.z = activity_z(activity.p_hat, priors.p_n, activity.n);
  r.p_value = significance(activity.p_hat, priors.p_n, activity.n);
  r.log10_p_value = log10_significance(activity.p_hat, priors.p_n, activity.n);
  if (priors.p_t) {
    r.error_bound_p_t = priors.p_t;
  } else if (activity.p_hat > priors.p_n) {
    r.error_bound_p_t = activity.p_hat;
  }
  if (r.error_bound_p_t) r.error_bound = error_bound(*r.error_bound_p_t, priors.p_n, activity.n);
  r.detected = r.p_value < significance_level;
  r.exclusions_flagged = planned > 0 && static_cast<double>(activity.excluded) >
                                            kExclusionFlagRate * static_cast<double>(planned);
  return r;
}

nlohmann::json to_json(const ActivityScore& a) {
  nlohmann::json categories = nlohmann::json::object();
  for (const auto& [name, cat] : a.per_category) {
    categories[name] = {{"n", cat.n}, {"recovered", cat.recovered}, {"rsr", cat.rsr}};
  }
  return {{"p_hat", a.p_hat},
          {"n", a.n},
          {"recovered", a.recovered},
          {"excluded", a.excluded},
          {"per_category_rsr", categories}};
}

nlohmann::json to_json(const TraceabilityPriors& p) {
  nlohmann::json j = {{"p_n", p.p_n},
                      {"p_t", p.p_t ? nlohmann::json(*p.p_t) : nlohmann::json(nullptr)},
                      {"provenance", to_string(p.provenance)},
                      {"clamped", p.clamped}};
  if (p.p_n_interval) {
    j["p_n_wilson95"] = {p.p_n_interval->lower, p.p_n_interval->upper};
  } else {
    j["p_n_wilson95"] = nullptr;
  }
  return j;
}

nlohmann::json to_json(const ActivityReport& r) {
  return {{"activity", to_json(r.activity)},
          {"priors", to_json(r.priors)},
          {"planned_observations", r.planned},
          {"z", r.z},
          {"p_value", r.p_value},
          {"log10_p_value", r.log10_p_value},
          {"error_bound", r.error_bound ? nlohmann::json(*r.error_bound) : nlohmann::json(nullptr)},
          {"error_bound_p_t",
           r.error_bound_p_t ? nlohmann::json(*r.error_bound_p_t) : nlohmann::json(nullptr)},
          {"significance_level", r.significance_level},
          {"verdict", r.detected ? "training-data-detected" : "not-detected"},
          {"exclusions_flagged", r.exclusions_flagged}};
}

}  // namespace isotrace

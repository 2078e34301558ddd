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


#include "isotrace/validation.hpp"

#include <algorithm>
#include <cmath>

#include "isotrace/error.hpp"
#include "isotrace/random.hpp"

namespace isotrace {

std::vector<std::size_t> simulate_success_counts(double rate, std::size_t n, std::size_t trials,
                                                 std::uint64_t seed) {
  if (!(rate >= 0.0 && rate <= 1.0)) throw StatsError("recovery rate must lie in [0, 1]");
  std::vector<std::size_t> counts(trials, 0);
  for (std::size_t t = 0; t < trials; ++t) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(t)));
    std::size_t k = 0;
    for (std::size_t i = 0; i < n; ++i) k += bernoulli(rng, rate) ? 1 : 0;
    counts[t] = k;
  }
  return counts;
}

double pairwise_error(std::span<const std::size_t> member_counts, std::size_t member_n,
                      std::span<const std::size_t> nonmember_counts, std::size_t nonmember_n) {
  if (member_counts.empty() || nonmember_counts.empty() || member_n == 0 || nonmember_n == 0) {
    throw StatsError("pairwise error needs non-empty samples with N >= 1");
  }
  // Compare k_m / N_m with k_n / N_n exactly as k_m * N_n versus k_n * N_m.
  std::vector<std::size_t> scaled;
  scaled.reserve(nonmember_counts.size());
  for (std::size_t k : nonmember_counts) scaled.push_back(k * member_n);
  std::sort(scaled.begin(), scaled.end());
  double errors = 0.0;
  for (std::size_t k : member_counts) {
    const std::size_t x = k * nonmember_n;
    const auto lo = std::lower_bound(scaled.begin(), scaled.end(), x);
    const auto hi = std::upper_bound(lo, scaled.end(), x);
    errors += static_cast<double>(scaled.end() - hi) + 0.5 * static_cast<double>(hi - lo);
  }
  return errors / (static_cast<double>(member_counts.size()) *
                   static_cast<double>(nonmember_counts.size()));
}

double attacked_rate(double p_t, double p_n, double alpha, AttackModel model,
                     std::size_t group_size) {
  if (!(alpha >= 0.0 && alpha < 1.0)) throw StatsError("attack intensity alpha must lie in [0, 1)");
  if (model == AttackModel::kChance && group_size == 0) {
    throw StatsError("chance attack needs a positive group size");
  }
  const double replaced =
      model == AttackModel::kChance ? 1.0 / static_cast<double>(group_size) : p_n;
  return (1.0 - alpha) * p_t + alpha * replaced;
}

double median(std::vector<double> values) {
  if (values.empty()) throw StatsError("median of an empty sample");
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
  const double upper = values[mid];
  if (values.size() % 2 == 1) return upper;
  const double lower =
      *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

namespace {

struct Audits {
  std::vector<std::size_t> counts;
  std::vector<double> log10_p;
  std::size_t detected = 0;
};

Audits run_audits(double rate, double p_n, std::size_t n, std::size_t trials, std::uint64_t seed,
                  double level) {
  Audits a;
  a.counts = simulate_success_counts(rate, n, trials, seed);
  a.log10_p.reserve(trials);
  for (std::size_t k : a.counts) {
    const double p_hat = static_cast<double>(k) / static_cast<double>(n);
    a.log10_p.push_back(log10_significance(p_hat, p_n, n));
    if (significance(p_hat, p_n, n) < level) ++a.detected;
  }
  return a;
}

std::uint64_t stream(std::uint64_t seed, std::string_view role, double rate, std::size_t n) {
  return derive_seed(derive_seed(seed, role),
                     derive_seed(static_cast<std::uint64_t>(std::llround(rate * 1e9)),
                                 static_cast<std::uint64_t>(n)));
}

void check_priors(double p_t, double p_n, std::size_t trials) {
  TraceabilityPriors priors;
  priors.p_n = p_n;
  priors.p_t = p_t;
  priors.validate();
  if (trials == 0) throw StatsError("Monte Carlo validation needs at least one trial");
}

}  // namespace

LemmaCell validate_lemma_cell(double p_t, double p_n, std::size_t n, std::size_t trials,
                              std::uint64_t seed, double level) {
  check_priors(p_t, p_n, trials);
  const Audits members = run_audits(p_t, p_n, n, trials, stream(seed, "member", p_t, n), level);
  const Audits controls = run_audits(p_n, p_n, n, trials, stream(seed, "nonmember", p_n, n), level);
  LemmaCell cell;
  cell.p_t = p_t;
  cell.p_n = p_n;
  cell.n = n;
  cell.trials = trials;
  cell.empirical_error = pairwise_error(members.counts, n, controls.counts, n);
  cell.bound = error_bound(p_t, p_n, n);
  cell.tpr = static_cast<double>(members.detected) / static_cast<double>(trials);
  cell.fpr = static_cast<double>(controls.detected) / static_cast<double>(trials);
  cell.median_log10_p_member = median(members.log10_p);
  cell.median_log10_p_nonmember = median(controls.log10_p);
  return cell;
}

AttackCell validate_attack_cell(double p_t, double p_n, double alpha, std::size_t n,
                                std::size_t trials, std::uint64_t seed, AttackModel model,
                                std::size_t group_size) {
  check_priors(p_t, p_n, trials);
  const AttackPlan plan = compensate(n, alpha);
  AttackCell cell;
  cell.alpha = alpha;
  cell.n = n;
  cell.n_compensated = plan.n_required;
  cell.taylor_estimate = plan.taylor_estimate;
  cell.attacked_rate = attacked_rate(p_t, p_n, alpha, model, group_size);

  const double level = kDefaultSignificanceLevel;
  const std::size_t n2 = plan.n_required;
  const Audits clean = run_audits(p_t, p_n, n, trials, stream(seed, "member", p_t, n), level);
  const Audits attacked =
      run_audits(cell.attacked_rate, p_n, n, trials, stream(seed, "attacked", cell.attacked_rate, n), level);
  const Audits compensated = run_audits(cell.attacked_rate, p_n, n2, trials,
                                        stream(seed, "attacked", cell.attacked_rate, n2), level);
  const Audits controls = run_audits(p_n, p_n, n, trials, stream(seed, "nonmember", p_n, n), level);
  const Audits controls2 = run_audits(p_n, p_n, n2, trials, stream(seed, "nonmember", p_n, n2), level);

  cell.accuracy_unattacked = 1.0 - pairwise_error(clean.counts, n, controls.counts, n);
  cell.accuracy_attacked = 1.0 - pairwise_error(attacked.counts, n, controls.counts, n);
  cell.accuracy_compensated = 1.0 - pairwise_error(compensated.counts, n2, controls2.counts, n2);
  cell.median_log10_p_unattacked = median(clean.log10_p);
  cell.median_log10_p_attacked = median(attacked.log10_p);
  cell.median_log10_p_compensated = median(compensated.log10_p);
  return cell;
}

ValidationReport monte_carlo_validate(const ValidationConfig& config) {
  check_priors(config.p_t, config.p_n, config.trials);
  if (config.n_grid.empty()) throw StatsError("Monte Carlo validation needs a non-empty N grid");
  ValidationReport report;
  report.config = config;
  for (std::size_t n : config.n_grid) {
    if (n == 0) throw StatsError("N grid entries must be positive");
    report.lemma.push_back(
        validate_lemma_cell(config.p_t, config.p_n, n, config.trials, config.seed, config.level));
  }
  for (double alpha : config.alpha_grid) {
    report.attack.push_back(validate_attack_cell(config.p_t, config.p_n, alpha, config.attack_n,
                                                 config.trials, config.seed, config.attack_model,
                                                 config.group_size));
  }
  return report;
}

nlohmann::json to_json(const LemmaCell& c) {
  return {{"p_t", c.p_t},
          {"p_n", c.p_n},
          {"n", c.n},
          {"trials", c.trials},
          {"empirical_error", c.empirical_error},
          {"bound", c.bound},
          {"dominated", c.dominated()},
          {"tpr", c.tpr},
          {"fpr", c.fpr},
          {"median_log10_p_member", c.median_log10_p_member},
          {"median_log10_p_nonmember", c.median_log10_p_nonmember}};
}

nlohmann::json to_json(const AttackCell& c) {
  return {{"alpha", c.alpha},
          {"n", c.n},
          {"n_compensated", c.n_compensated},
          {"taylor_estimate", c.taylor_estimate},
          {"attacked_rate", c.attacked_rate},
          {"accuracy_unattacked", c.accuracy_unattacked},
          {"accuracy_attacked", c.accuracy_attacked},
          {"accuracy_compensated", c.accuracy_compensated},
          {"median_log10_p_unattacked", c.median_log10_p_unattacked},
          {"median_log10_p_attacked", c.median_log10_p_attacked},
          {"median_log10_p_compensated", c.median_log10_p_compensated}};
}

nlohmann::json to_json(const ValidationReport& r) {
  nlohmann::json lemma = nlohmann::json::array();
  for (const LemmaCell& c : r.lemma) lemma.push_back(to_json(c));
  nlohmann::json attack = nlohmann::json::array();
  for (const AttackCell& c : r.attack) attack.push_back(to_json(c));
  return {{"p_t", r.config.p_t},
          {"p_n", r.config.p_n},
          {"trials", r.config.trials},
          {"low_confidence", r.config.trials < kMinConfidentTrials},
          {"seed", r.config.seed},
          {"significance_level", r.config.level},
          {"attack_model", r.config.attack_model == AttackModel::kChance ? "chance" : "replaced-as-nonmember"},
          {"group_size", r.config.group_size},
          {"lemma", lemma},
          {"attack", attack}};
}

}  // namespace isotrace

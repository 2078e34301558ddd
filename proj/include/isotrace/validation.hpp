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

#ifndef ISOTRACE_VALIDATION_HPP_
#define ISOTRACE_VALIDATION_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "isotrace/stats.hpp"
#include "json.hpp"

namespace isotrace {

// Monte Carlo checks of the closed-form audit statistics against simulated
// Bernoulli audits.

// Number of recovered probes in each of `trials` audits of `n` probes, each
// recovered with probability `rate`. Trial t draws from its own stream
// derive_seed(seed, t), so results do not depend on the trial count.
std::vector<std::size_t> simulate_success_counts(double rate, std::size_t n, std::size_t trials,
                                                 std::uint64_t seed);

// Probability that a training audit scores below a non-training audit, with
// ties counting one half, over all pairs. Counts are divided by the matching
// N before comparison.
double pairwise_error(std::span<const std::size_t> member_counts, std::size_t member_n,
                      std::span<const std::size_t> nonmember_counts, std::size_t nonmember_n);

enum class AttackModel {
  // Replaced fragments behave like non-training text: rate p_n.
  kReplacedAsNonMember,
  // Replaced fragments are answered at chance: rate 1 / group size.
  kChance,
};

// (1 - alpha) p_t + alpha r, where r is p_n or 1 / group_size.
double attacked_rate(double p_t, double p_n, double alpha, AttackModel model,
                     std::size_t group_size);

double median(std::vector<double> values);

struct LemmaCell {
  double p_t = 0.0;
  double p_n = 0.0;
  std::size_t n = 0;
  std::size_t trials = 0;
  double empirical_error = 0.0;
  double bound = 0.0;
  // Rates of the significance verdict at the configured level.
  double tpr = 0.0;
  double fpr = 0.0;
  double median_log10_p_member = 0.0;
  double median_log10_p_nonmember = 0.0;

  bool dominated() const { return empirical_error <= bound; }
};

LemmaCell validate_lemma_cell(double p_t, double p_n, std::size_t n, std::size_t trials,
                              std::uint64_t seed, double level = kDefaultSignificanceLevel);

struct AttackCell {
  double alpha = 0.0;
  std::size_t n = 0;
  std::size_t n_compensated = 0;
  std::size_t taylor_estimate = 0;
  double attacked_rate = 0.0;
  double accuracy_unattacked = 0.0;
  double accuracy_attacked = 0.0;
  double accuracy_compensated = 0.0;
  double median_log10_p_unattacked = 0.0;
  double median_log10_p_attacked = 0.0;
  double median_log10_p_compensated = 0.0;
};

AttackCell validate_attack_cell(double p_t, double p_n, double alpha, std::size_t n,
                                std::size_t trials, std::uint64_t seed, AttackModel model,
                                std::size_t group_size);

struct ValidationConfig {
  double p_t = 0.76;
  double p_n = 0.545;
  std::vector<std::size_t> n_grid = {100, 200, 300, 400, 500, 600, 700, 800, 900, 1000};
  std::vector<double> alpha_grid = {0.0, 0.1, 0.2, 0.3, 0.4};
  std::size_t attack_n = 280;
  std::size_t trials = 10000;
  std::uint64_t seed = 0;
  double level = kDefaultSignificanceLevel;
  AttackModel attack_model = AttackModel::kChance;
  std::size_t group_size = 6;
};

struct ValidationReport {
  ValidationConfig config;
  std::vector<LemmaCell> lemma;
  std::vector<AttackCell> attack;
};

// Below this many trials the report marks its estimates as low-confidence.
inline constexpr std::size_t kMinConfidentTrials = 1000;

// Throws StatsError for invalid priors, an empty grid or zero trials.
ValidationReport monte_carlo_validate(const ValidationConfig& config);

nlohmann::json to_json(const LemmaCell& cell);
nlohmann::json to_json(const AttackCell& cell);
nlohmann::json to_json(const ValidationReport& report);

}  // namespace isotrace

#endif  // ISOTRACE_VALIDATION_HPP_

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


#ifndef ISOTRACE_BASELINE_HPP_
#define ISOTRACE_BASELINE_HPP_

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "isotrace/backend.hpp"
#include "isotrace/corpus.hpp"
#include "isotrace/stats.hpp"
#include "json.hpp"

namespace isotrace {

// Continuation-similarity detectors: prompt the model with the first part of
// an entry and score its continuation against the held-back remainder.

// LCS-based F1 over case-folded word tokens (punctuation dropped). Both
// empty gives 1, exactly one empty gives 0.
double rouge_l_f1(std::string_view reference, std::string_view candidate);

// 1 - Levenshtein(a, b) / max(|a|, |b|) over Unicode code points; both
// empty gives 1.
double edit_similarity(std::string_view a, std::string_view b);

inline constexpr std::string_view kRougeL = "rouge_l";
inline constexpr std::string_view kEditSimilarity = "edit_similarity";

// Known metric names are kRougeL and kEditSimilarity.
bool is_builtin_metric(std::string_view name);
double score_metric(std::string_view name, std::string_view reference, std::string_view generated);

inline constexpr double kDefaultPrefixFraction = 0.5;

struct EntrySplit {
  std::string prefix;
  std::string reference;
};

// The first floor(rho * T) tokens form the prefix, the rest the reference.
// Returns nullopt when either half would be empty.
std::optional<EntrySplit> split_entry(const DataEntry& entry, double rho = kDefaultPrefixFraction);

std::string continuation_prompt(std::string_view prefix);

struct ContinuationRecord {
  std::string entry_id;
  std::optional<Membership> label;
  std::string prefix;
  std::string reference;
  std::string generated;
  std::map<std::string, double> scores;
};

struct SkippedEntry {
  std::string entry_id;
  std::string reason;
};

struct BaselineConfig {
  std::vector<std::string> metrics = {std::string(kRougeL), std::string(kEditSimilarity)};
  double rho = kDefaultPrefixFraction;
  int max_tokens = 256;
  std::size_t max_in_flight = 4;

  // Throws ConfigError on an empty or unknown metric list or rho outside (0, 1).
  void validate() const;
};

struct BaselineRun {
  std::vector<ContinuationRecord> records;  // dataset order
  std::vector<SkippedEntry> skipped;
};

// One continuation query per entry. Entries too short to split, or whose
// query fails in transport, are skipped and listed.
BaselineRun run_baseline(const SuspectedDataset& dataset, Backend& backend,
                         const BaselineConfig& config);

// Adds metric `name` from a JSONL file of {"entry_id": ..., "score": ...}
// lines. Throws DatasetError on unknown ids, missing fields or scores
// outside [0, 1].
void merge_external_scores(std::vector<ContinuationRecord>& records, std::string_view name,
                           const std::filesystem::path& path);

struct SweepPoint {
  double threshold = 0.0;
  double accuracy = 0.0;
};

struct MetricSummary {
  std::string metric;
  std::size_t members = 0;
  std::size_t nonmembers = 0;
  double mean_all = 0.0;
  double mean_member = 0.0;
  double mean_nonmember = 0.0;
  std::optional<WelchResult> welch;
  // "score >= threshold means member" at every observed score plus +inf.
  std::vector<SweepPoint> sweep;
  double best_accuracy = 0.0;
  double best_threshold = 0.0;
  double worst_accuracy = 0.0;
  std::optional<double> accuracy_at_099;
};

// Per-metric means and, when both classes have labeled records, the Welch
// comparison and threshold sweep.
std::vector<MetricSummary> summarize(const std::vector<ContinuationRecord>& records);

double accuracy_at(const std::vector<ContinuationRecord>& records, std::string_view metric,
                   double threshold);

nlohmann::json to_json(const ContinuationRecord& record);
nlohmann::json to_json(const MetricSummary& summary);

}  // namespace isotrace

#endif  // ISOTRACE_BASELINE_HPP_

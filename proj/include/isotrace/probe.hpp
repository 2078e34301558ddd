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

#ifndef ISOTRACE_PROBE_HPP_
#define ISOTRACE_PROBE_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "isotrace/backend.hpp"
#include "isotrace/corpus.hpp"
#include "isotrace/error.hpp"
#include "isotrace/isotope.hpp"
#include "isotrace/selector.hpp"
#include "json.hpp"

namespace isotrace {

inline constexpr std::string_view kMaskMarker = "___";

// UTF-8 prompt text with {left}, {mask}, {right} and {candidates}
// placeholders. Substitution is single-pass: placeholder-like text inside
// the substituted values is left alone.
class PromptTemplate {
 public:
  // Throws TemplateError when a placeholder is missing.
  explicit PromptTemplate(std::string text);
  static PromptTemplate load(const std::filesystem::path& path);
  static PromptTemplate default_cloze();

  const std::string& text() const { return text_; }
  std::string render(std::string_view left, std::string_view right,
                     std::span<const std::string> candidates) const;

 private:
  std::string text_;
};

// One forced-choice cloze query.
struct Probe {
  std::string probe_id;  // "<entry_id>#<span start>"
  std::string entry_id;
  TokenSpan span;
  PosCategory pos = PosCategory::kNoun;
  std::uint64_t seed = 0;
  std::string prompt;
  std::vector<std::string> candidates;  // seeded shuffle of the group
  std::size_t target_index = 0;
};

std::string probe_id_for(const FragmentRef& ref);

// Candidates are the group members in a Fisher-Yates order drawn from `seed`.
Probe build_probe(const IsotopeGroup& group, const PromptTemplate& prompt_template,
                  std::uint64_t seed);

// Index of the candidate whose normalized form occurs earliest in the
// normalized response as a whole-word match; at equal positions the longer
// candidate wins. Normalization case-folds and turns punctuation and quotes
// into spaces.
std::optional<std::size_t> parse_response(std::string_view response,
                                          std::span<const std::string> candidates);

struct ProbeOutcome {
  std::string probe_id;
  std::string raw_response;
  std::optional<std::size_t> matched;
  int o = 0;
  bool valid = false;
  int attempts = 0;
  bool transport_failed = false;
  std::string error;
};

// Asks the backend, re-asking up to `retries` times with a clarifying suffix
// while the answer names no candidate. Transport failures (after the
// backend's own retry budget) mark the outcome transport_failed.
ProbeOutcome run_probe(const Probe& probe, Backend& backend, int retries,
                       const SamplingParams& params = {});

struct Observation {
  Probe probe;
  ProbeOutcome outcome;
  std::string timestamp;  // UTC, ISO 8601
};

nlohmann::json to_json(const Observation& observation);
Observation observation_from_json(const nlohmann::json& j);

void write_observations(const std::filesystem::path& path,
                        std::span<const Observation> observations);
std::vector<Observation> read_observations(const std::filesystem::path& path);

struct CampaignConfig {
  PromptTemplate prompt_template = PromptTemplate::default_cloze();
  std::uint64_t seed = 0;
  int retries = 1;
  std::size_t max_in_flight = 4;
  double max_transport_failure_rate = 0.10;
  SamplingParams params;
  // When set, the observation log is written here (also on abort).
  std::optional<std::filesystem::path> log_path;
};

// Thrown when more than max_transport_failure_rate of the probes failed in
// transport. Carries every observation collected, in canonical order.
class CampaignAborted : public Error {
 public:
  CampaignAborted(const std::string& message, std::vector<Observation> partial)
      : Error("probe", message, "check backend connectivity; partial results were saved"),
        partial_(std::move(partial)) {}
  const std::vector<Observation>& partial() const { return partial_; }

 private:
  std::vector<Observation> partial_;
};

// Canonical (dataset entry order, selection rank) list of probes. Fragments
// without a group are skipped. Probe seeds derive from (seed, probe id).
std::vector<Probe> plan_probes(const SuspectedDataset& dataset,
                               const std::map<std::string, EntrySelection>& selections,
                               const std::map<FragmentRef, IsotopeGroup>& groups,
                               const CampaignConfig& config);

// Dispatches probes on at most max_in_flight workers; output order matches
// input order regardless of completion order.
std::vector<Observation> run_probes(std::span<const Probe> probes, Backend& backend,
                                    const CampaignConfig& config);

std::vector<Observation> run_campaign(const SuspectedDataset& dataset,
                                      const std::map<std::string, EntrySelection>& selections,
                                      const std::map<FragmentRef, IsotopeGroup>& groups,
                                      Backend& backend, const CampaignConfig& config);

}  // namespace isotrace

#endif  // ISOTRACE_PROBE_HPP_

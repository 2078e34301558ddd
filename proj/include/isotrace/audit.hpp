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


#ifndef ISOTRACE_AUDIT_HPP_
#define ISOTRACE_AUDIT_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "isotrace/backend.hpp"
#include "isotrace/baseline.hpp"
#include "isotrace/corpus.hpp"
#include "isotrace/stats.hpp"
#include "isotrace/validation.hpp"
#include "json.hpp"

namespace isotrace {

// Process exit codes; no others are emitted.
inline constexpr int kExitNotDetected = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitDetected = 2;

inline constexpr int kReportSchemaVersion = 1;

struct DatasetRef {
  std::string path;  // as written in the config
  DatasetFormat format = DatasetFormat::kJsonl;
};

enum class Command { kDetect, kSimulate, kBaseline, kReport, kCalibrate };

// One JSON document. Relative paths resolve against the directory holding
// the config file. Omitted fields take the defaults below; the effective
// config (every field) is echoed into each report.
struct AuditConfig {
  std::filesystem::path base_dir = ".";

  std::optional<DatasetRef> dataset;
  std::optional<DatasetRef> background;
  std::string lexicon;
  std::optional<std::string> prompt_template;
  BackendSpec backend;

  std::size_t fragments_per_entry = 8;  // M
  std::size_t context_window = 24;      // W
  std::size_t max_group_size = 6;       // G_max
  int proxy_order = 3;
  double proxy_delta = 0.1;

  std::uint64_t seed = 0;
  double significance_level = kDefaultSignificanceLevel;
  // Exactly one p_n source for detect and calibrate.
  std::optional<double> p_n;
  std::optional<DatasetRef> control_dataset;
  std::optional<double> p_t;

  int retries = 1;
  std::size_t max_in_flight = 4;
  double max_transport_failure_rate = 0.10;
  SamplingParams sampling;

  std::optional<std::string> cache_dir;
  std::string output_dir = "isotrace-out";

  ValidationConfig simulate;
  BaselineConfig baseline;
  std::map<std::string, std::string> external_scores;  // metric -> JSONL path

  // Throws ConfigError naming the offending field; unknown keys are errors.
  static AuditConfig from_json(const nlohmann::json& j, std::filesystem::path base_dir);
  static AuditConfig load(const std::filesystem::path& path);

  nlohmann::json to_json() const;
  // SHA-256 of the canonical effective config without output_dir,
  // cache_dir and max_in_flight, which do not affect results.
  std::string hash() const;
  std::filesystem::path resolve(const std::string& path) const;

  // Checks that the files `command` reads exist and the p_n source rule.
  void validate(Command command) const;
};

// Per-command results; every artifact is also written under output_dir.
struct DetectResult {
  ActivityReport report;
  nlohmann::json report_json;
  std::string summary;
  int exit_code = kExitNotDetected;
};

DetectResult cmd_detect(const AuditConfig& config);
Calibration cmd_calibrate(const AuditConfig& config);
ValidationReport cmd_simulate(const AuditConfig& config);
std::vector<MetricSummary> cmd_baseline(const AuditConfig& config);
// Reads a completed detect run directory and writes the consolidated report
// and plot series next to it. Throws ConfigError listing missing artifacts.
nlohmann::json cmd_report(const std::filesystem::path& run_dir);

}  // namespace isotrace

#endif  // ISOTRACE_AUDIT_HPP_

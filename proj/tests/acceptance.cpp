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


// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <sstream>
#include <string>
#include <vector>

#include "fakes.hpp"
#include "isotrace/audit.hpp"
#include "isotrace/backend.hpp"
#include "isotrace/baseline.hpp"
#include "isotrace/lexicon.hpp"
#include "isotrace/probe.hpp"
#include "isotrace/stats.hpp"
#include "isotrace/synthetic.hpp"
#include "isotrace/validation.hpp"
#include "mock_server.hpp"

namespace {

namespace fs = std::filesystem;
using namespace isotrace;
using Seconds = std::chrono::duration<double>;

constexpr std::size_t kTrials = 10000;
constexpr std::uint64_t kSeed = 20260101;
constexpr double kPt = 0.76;
constexpr double kPn = 0.545;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* format, auto... args) {
  char buffer[512];
  std::snprintf(buffer, sizeof(buffer), format, args...);
  return buffer;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome golden_values() {
  const double p = significance(0.6, 0.5, 25);
  const double bound = error_bound(0.5 + 0.215, 0.5, 100);
  const std::size_t n = compensate(100, 0.2).n_required;
  const bool ok = std::abs(p - 0.15866) <= 1e-4 && std::abs(bound / 1.29e-3 - 1.0) <= 0.02 && n == 157;
  return {ok, fmt("significance=%.5f error_bound=%.4e compensate=%zu", p, bound, n)};
}

Outcome bound_dominance() {
  std::size_t cells = 0;
  std::size_t dominated = 0;
  std::string worst;
  double worst_ratio = 0.0;
  for (double p_t : {0.6, 0.7, 0.76}) {
    for (double p_n : {0.5, 0.545}) {
      for (std::size_t n : {50, 100, 200, 400}) {
        const LemmaCell c = validate_lemma_cell(p_t, p_n, n, kTrials, kSeed);
        ++cells;
        if (c.dominated()) ++dominated;
        const double ratio = c.empirical_error / c.bound;
        if (ratio >= worst_ratio) {
          worst_ratio = ratio;
          worst = fmt("p_t=%.2f p_n=%.3f N=%zu error=%.3e bound=%.3e", p_t, p_n, n,
                      c.empirical_error, c.bound);
        }
      }
    }
  }
  return {dominated == cells, fmt("%zu/%zu cells dominated; tightest ", dominated, cells) + worst};
}

Outcome detection_accuracy() {
  const LemmaCell c = validate_lemma_cell(kPt, kPn, 280, kTrials, kSeed);
  const double accuracy = 1.0 - c.empirical_error;
  return {accuracy >= 0.99,
          fmt("N=280 accuracy=%.5f (verdict tpr=%.4f fpr=%.4f)", accuracy, c.tpr, c.fpr)};
}

Outcome significance_decay() {
  std::vector<double> medians;
  for (std::size_t n = 100; n <= 1000; n += 100) {
    medians.push_back(validate_lemma_cell(kPt, kPn, n, kTrials, kSeed).median_log10_p_member);
  }
  bool decreasing = true;
  for (std::size_t i = 1; i < medians.size(); ++i) decreasing = decreasing && medians[i] < medians[i - 1];
  // Smallest N on a step-10 grid whose median member p-value is below 0.05.
  std::size_t first = 0;
  for (std::size_t n = 10; n <= 280 && first == 0; n += 10) {
    if (validate_lemma_cell(kPt, kPn, n, kTrials, kSeed).median_log10_p_member < std::log10(0.05)) {
      first = n;
    }
  }
  return {decreasing && first != 0,
          fmt("median log10 p: N=100 %.2f, N=1000 %.2f, strictly decreasing=%s; p<0.05 from N=%zu",
              medians.front(), medians.back(), decreasing ? "yes" : "no", first)};
}

Outcome attack_robustness() {
  const AttackCell c =
      validate_attack_cell(kPt, kPn, 0.2, 280, kTrials, kSeed, AttackModel::kChance, 6);
  const double drop = c.accuracy_unattacked - c.accuracy_attacked;
  const double gap = std::abs(c.accuracy_compensated - c.accuracy_unattacked);
  return {drop > 0.0 && gap <= 0.01,
          fmt("unattacked=%.5f attacked=%.5f (drop %.5f) N'=%zu compensated=%.5f (gap %.5f)",
              c.accuracy_unattacked, c.accuracy_attacked, drop, c.n_compensated,
              c.accuracy_compensated, gap)};
}

Outcome baseline_negative() {
  const Lexicon lexicon = Lexicon::load(fs::path(ISOTRACE_DATA_DIR) / "lexicon.jsonl");
  SyntheticCorpusOptions options;
  options.entries = 500;
  options.seed = kSeed;
  options.id_prefix = "member";
  std::vector<DataEntry> entries = synthetic_entries(lexicon, options, Membership::kMember);
  options.seed = kSeed + 1;
  options.id_prefix = "other";
  for (DataEntry& e : synthetic_entries(lexicon, options, Membership::kNonMember)) {
    entries.push_back(std::move(e));
  }
  const SuspectedDataset dataset(std::move(entries), "synthetic");

  SimulatorConfig sim;
  for (const DataEntry& e : dataset.entries()) {
    if (e.label == Membership::kMember) sim.member_ids.insert(e.id);
  }
  sim.noise_vocabulary = lexicon.surfaces();
  sim.seed = kSeed;
  SimulatedMemorizer backend(sim);
  const BaselineRun run = run_baseline(dataset, backend, BaselineConfig{});

  bool ok = run.records.size() == 1000;
  std::string detail = fmt("%zu entries scored", run.records.size());
  for (const MetricSummary& s : summarize(run.records)) {
    const double p = s.welch ? s.welch->p_two_sided : 0.0;
    ok = ok && s.best_accuracy >= 0.45 && s.best_accuracy <= 0.55 && p > 0.05;
    detail += fmt("; %s best=%.4f welch_p=%.3f", s.metric.c_str(), s.best_accuracy, p);
  }
  return {ok, detail};
}

Outcome type_one_error() {
  bool ok = true;
  std::string detail = "fpr";
  for (std::size_t n : {200, 280, 400, 600, 800, 1000}) {
    const LemmaCell c = validate_lemma_cell(kPt, kPn, n, kTrials, kSeed);
    ok = ok && c.fpr >= 0.03 && c.fpr <= 0.07;
    detail += fmt(" N=%zu:%.4f", n, c.fpr);
  }
  return {ok, detail};
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(ISOTRACE_CLI) + " " + args + " >" + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome pipeline_determinism() {
  const fs::path root = fs::path(ISOTRACE_DATA_DIR).parent_path();
  const fs::path scratch = fs::temp_directory_path() / "isotrace-acceptance-detect";
  fs::remove_all(scratch);
  fs::create_directories(scratch);
  const nlohmann::json config = {
      {"dataset", {{"path", (root / "data/demo/mixed.jsonl").string()}, {"format", "jsonl"}}},
      {"background", {{"path", (root / "data/demo/background.jsonl").string()}, {"format", "jsonl"}}},
      {"lexicon", (root / "data/lexicon.jsonl").string()},
      {"backend", {{"kind", "simulator"}, {"p_t", kPt}, {"p_n", kPn}, {"seed", 7}}},
      {"seed", 42},
      {"p_n", kPn},
      {"p_t", kPt},
      {"output_dir", (scratch / "run").string()}};
  std::ofstream(scratch / "config.json") << config.dump(2);

  std::vector<std::string> reports;
  for (int i = 0; i < 2; ++i) {
    fs::remove_all(scratch / "run");
    const int status = run_cli("detect --config " + (scratch / "config.json").string(), scratch / "log.txt");
    // Exit status 2 is a positive verdict, not an error.
    if ((status != kExitDetected && status != kExitNotDetected) || !fs::exists(scratch / "run" / "report.json")) {
      return {false, fmt("detect run %d exited with %d: ", i + 1, status) + slurp(scratch / "log.txt")};
    }
    reports.push_back(slurp(scratch / "run" / "report.json"));
  }
  fs::remove_all(scratch);
  const bool same = reports[0] == reports[1] && !reports[0].empty();
  return {same, fmt("report.json %zu bytes, identical=%s", reports[0].size(), same ? "yes" : "no")};
}

Outcome parser_fixtures() {
  const auto cases = testing::load_parser_cases(std::string(ISOTRACE_FIXTURE_DIR) + "/parser_cases.jsonl");
  std::size_t agree = 0;
  std::string misses;
  for (const auto& c : cases) {
    if (parse_response(c.response, c.candidates) == c.expected) {
      ++agree;
    } else {
      misses += " " + c.name;
    }
  }
  return {cases.size() >= 30 && agree == cases.size(),
          fmt("%zu/%zu fixtures agree", agree, cases.size()) + misses};
}

Outcome cache_and_rate() {
  // Cache: the same probe twice through an HTTP backend costs one call.
  const fs::path dir = fs::temp_directory_path() / "isotrace-acceptance-cache";
  fs::remove_all(dir);
  testing::MockChatServer server([](const nlohmann::json&, const httplib::Request&, std::size_t) {
    return testing::MockReply{200, testing::chat_body("The answer is **vessel**.")};
  });
  HttpChatConfig http_config;
  http_config.endpoint = server.endpoint();
  http_config.model = "mock-1";
  http_config.timeout = Seconds(5.0);
  HttpChatBackend http(http_config);
  ResponseCache cache(dir);
  CachingBackend cached(http, cache);
  Probe probe;
  probe.probe_id = "doc#3";
  probe.entry_id = "doc";
  probe.candidates = {"ship", "vessel", "boat"};
  probe.target_index = 1;
  probe.prompt = "The ___ left the harbor. Options: ship, vessel, boat";
  const ProbeOutcome first = run_probe(probe, cached, 1);
  const ProbeOutcome second = run_probe(probe, cached, 1);
  fs::remove_all(dir);
  const bool cache_ok = server.calls() == 1 && first.o == 1 && second.o == 1;

  // Rate: 120 probes from four workers through a 5 per second limiter on a
  // manual clock; every one-second window must hold at most five calls.
  ManualClock clock;
  RateLimiter limiter(5.0, clock);
  std::mutex mutex;
  std::vector<Clock::TimePoint> times;
  testing::ScriptedBackend inner([&](const Request& r, std::size_t) {
    std::lock_guard lock(mutex);
    times.push_back(clock.now());
    return r.hint ? r.hint->candidates.front() : std::string();
  });
  RateLimitedBackend limited(inner, limiter);
  std::vector<Probe> probes;
  for (int i = 0; i < 120; ++i) {
    Probe p = probe;
    p.probe_id = "doc#" + std::to_string(i);
    p.prompt = probe.prompt + " #" + std::to_string(i);
    probes.push_back(p);
  }
  CampaignConfig campaign;
  campaign.max_in_flight = 4;
  run_probes(probes, limited, campaign);
  std::sort(times.begin(), times.end());
  std::size_t busiest = 0;
  for (std::size_t i = 0; i < times.size(); ++i) {
    std::size_t in_window = 0;
    for (std::size_t j = i; j < times.size() && times[j] < times[i] + std::chrono::seconds(1); ++j) {
      ++in_window;
    }
    busiest = std::max(busiest, in_window);
  }
  const bool rate_ok = times.size() == 120 && busiest <= 5;
  return {cache_ok && rate_ok,
          fmt("mock server calls=%zu for 2 identical probes; %zu limited calls, busiest 1 s window=%zu (limit 5)",
              server.calls(), times.size(), busiest)};
}

struct Criterion {
  int id;
  const char* name;
  double budget_seconds;  // 0 means no runtime budget
  std::function<Outcome()> check;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "golden values", 1.0, golden_values},
      {2, "error bound dominates Monte Carlo error", 120.0, bound_dominance},
      {3, "detection accuracy at N=280", 120.0, detection_accuracy},
      {4, "significance decays with N", 120.0, significance_decay},
      {5, "replacement attack and compensation", 120.0, attack_robustness},
      {6, "continuation baselines at chance", 60.0, baseline_negative},
      {7, "type-I error calibration", 0.0, type_one_error},
      {8, "detect is deterministic", 0.0, pipeline_determinism},
      {9, "parser fixtures", 0.0, parser_fixtures},
      {10, "cache and rate-limit contracts", 0.0, cache_and_rate},
  };
  int failures = 0;
  for (const Criterion& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = c.check();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    const double elapsed = Seconds(std::chrono::steady_clock::now() - start).count();
    if (c.budget_seconds > 0.0 && elapsed > c.budget_seconds) {
      outcome.pass = false;
      outcome.detail += fmt("; over the %.0f s budget", c.budget_seconds);
    }
    if (!outcome.pass) ++failures;
    std::printf("%s %2d %s [%.2f s]: %s\n", outcome.pass ? "PASS" : "FAIL", c.id, c.name, elapsed,
                outcome.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}

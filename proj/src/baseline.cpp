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


#include "isotrace/baseline.hpp"

#include <unicode/utf8.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <thread>

#include "isotrace/error.hpp"
#include "isotrace/text.hpp"

namespace isotrace {
namespace {

std::vector<std::string> rouge_tokens(std::string_view text) {
  std::vector<std::string> out;
  for (std::string& token : tokenize(normalize_member(text))) {
    if (!is_punctuation(token)) out.push_back(std::move(token));
  }
  return out;
}

std::vector<UChar32> code_points(std::string_view s) {
  std::vector<UChar32> out;
  const auto* bytes = reinterpret_cast<const uint8_t*>(s.data());
  const auto length = static_cast<int32_t>(s.size());
  int32_t i = 0;
  while (i < length) {
    UChar32 c;
    U8_NEXT(bytes, i, length, c);
    out.push_back(c);
  }
  return out;
}

}  // namespace

double rouge_l_f1(std::string_view reference, std::string_view candidate) {
  const std::vector<std::string> r = rouge_tokens(reference);
  const std::vector<std::string> c = rouge_tokens(candidate);
  if (r.empty() && c.empty()) return 1.0;
  if (r.empty() || c.empty()) return 0.0;
  std::vector<std::size_t> prev(c.size() + 1, 0);
  std::vector<std::size_t> row(c.size() + 1, 0);
  for (std::size_t i = 1; i <= r.size(); ++i) {
    for (std::size_t j = 1; j <= c.size(); ++j) {
      row[j] = r[i - 1] == c[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], row[j - 1]);
    }
    std::swap(prev, row);
  }
  const double lcs = static_cast<double>(prev[c.size()]);
  if (lcs == 0.0) return 0.0;
  const double precision = lcs / static_cast<double>(c.size());
  const double recall = lcs / static_cast<double>(r.size());
  return 2.0 * precision * recall / (precision + recall);
}

double edit_similarity(std::string_view a, std::string_view b) {
  const std::vector<UChar32> x = code_points(a);
  const std::vector<UChar32> y = code_points(b);
  if (x.empty() && y.empty()) return 1.0;
  std::vector<std::size_t> prev(y.size() + 1);
  std::vector<std::size_t> row(y.size() + 1);
  for (std::size_t j = 0; j <= y.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= x.size(); ++i) {
    row[0] = i;
    for (std::size_t j = 1; j <= y.size(); ++j) {
      const std::size_t substitute = prev[j - 1] + (x[i - 1] == y[j - 1] ? 0 : 1);
      row[j] = std::min({prev[j] + 1, row[j - 1] + 1, substitute});
    }
    std::swap(prev, row);
  }
  const double distance = static_cast<double>(prev[y.size()]);
  return 1.0 - distance / static_cast<double>(std::max(x.size(), y.size()));
}

bool is_builtin_metric(std::string_view name) { return name == kRougeL || name == kEditSimilarity; }

double score_metric(std::string_view name, std::string_view reference, std::string_view generated) {
  if (name == kRougeL) return rouge_l_f1(reference, generated);
  if (name == kEditSimilarity) return edit_similarity(reference, generated);
  throw ConfigError("unknown baseline metric '" + std::string(name) + "'",
                    "use rouge_l or edit_similarity");
}

std::optional<EntrySplit> split_entry(const DataEntry& entry, double rho) {
  const std::size_t total = entry.tokens.size();
  const auto cut = static_cast<std::size_t>(std::floor(rho * static_cast<double>(total)));
  if (cut == 0 || cut >= total) return std::nullopt;
  const std::span<const std::string> tokens(entry.tokens);
  return EntrySplit{detokenize(tokens.first(cut)), detokenize(tokens.subspan(cut))};
}

std::string continuation_prompt(std::string_view prefix) {
  return "Continue the following text. Reply with the continuation only.\n\n" + std::string(prefix);
}

void BaselineConfig::validate() const {
  if (metrics.empty()) throw ConfigError("baseline.metrics is empty", "list rouge_l and/or edit_similarity");
  for (const std::string& m : metrics) {
    if (!is_builtin_metric(m)) {
      throw ConfigError("unknown baseline metric '" + m + "'", "use rouge_l or edit_similarity");
    }
  }
  if (!(rho > 0.0 && rho < 1.0)) throw ConfigError("baseline.rho must lie in (0, 1)");
  if (max_tokens <= 0) throw ConfigError("baseline.max_tokens must be positive");
}

BaselineRun run_baseline(const SuspectedDataset& dataset, Backend& backend,
                         const BaselineConfig& config) {
  config.validate();
  const std::vector<DataEntry>& entries = dataset.entries();
  std::vector<std::optional<ContinuationRecord>> slots(entries.size());
  std::vector<std::string> failures(entries.size());

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < entries.size(); i = next++) {
      const DataEntry& entry = entries[i];
      const std::optional<EntrySplit> split = split_entry(entry, config.rho);
      if (!split) {
        failures[i] = "too short to split";
        continue;
      }
      Request request;
      request.prompt = continuation_prompt(split->prefix);
      request.params.max_tokens = config.max_tokens;
      request.hint = GroundTruthHint{RequestKind::kContinuation, entry.id, {}, 0, split->reference};
      ContinuationRecord record{entry.id, entry.label, split->prefix, split->reference, {}, {}};
      try {
        record.generated = backend.complete(request).text;
      } catch (const TransportError& e) {
        failures[i] = std::string("transport failure: ") + e.what();
        continue;
      }
      for (const std::string& metric : config.metrics) {
        record.scores[metric] = score_metric(metric, record.reference, record.generated);
      }
      slots[i] = std::move(record);
    }
  };
  {
    std::vector<std::jthread> pool;
    const std::size_t workers = std::max<std::size_t>(1, std::min(config.max_in_flight, entries.size()));
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }

  BaselineRun run;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (slots[i]) {
      run.records.push_back(std::move(*slots[i]));
    } else {
      run.skipped.push_back({entries[i].id, failures[i]});
    }
  }
  return run;
}

void merge_external_scores(std::vector<ContinuationRecord>& records, std::string_view name,
                           const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DatasetError("cannot open score file " + path.string());
  std::map<std::string, double> scores;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw DatasetError(where + ": invalid JSON: " + e.what());
    }
    if (!j.contains("entry_id") || !j["entry_id"].is_string() || !j.contains("score") ||
        !j["score"].is_number()) {
      throw DatasetError(where + ": expected {\"entry_id\": string, \"score\": number}");
    }
    const double score = j["score"].get<double>();
    if (!(score >= 0.0 && score <= 1.0)) throw DatasetError(where + ": score outside [0, 1]");
    scores[j["entry_id"].get<std::string>()] = score;
  }
  std::set<std::string> known;
  for (const ContinuationRecord& r : records) known.insert(r.entry_id);
  for (const auto& [id, score] : scores) {
    if (!known.contains(id)) throw DatasetError(path.string() + ": unknown entry id '" + id + "'");
  }
  for (ContinuationRecord& r : records) {
    if (auto it = scores.find(r.entry_id); it != scores.end()) r.scores[std::string(name)] = it->second;
  }
}

double accuracy_at(const std::vector<ContinuationRecord>& records, std::string_view metric,
                   double threshold) {
  std::size_t correct = 0;
  std::size_t total = 0;
  for (const ContinuationRecord& r : records) {
    const auto it = r.scores.find(std::string(metric));
    if (!r.label || it == r.scores.end()) continue;
    ++total;
    const bool predicted_member = it->second >= threshold;
    if (predicted_member == (*r.label == Membership::kMember)) ++correct;
  }
  if (total == 0) throw StatsError("no labeled records scored by " + std::string(metric));
  return static_cast<double>(correct) / static_cast<double>(total);
}

std::vector<MetricSummary> summarize(const std::vector<ContinuationRecord>& records) {
  std::set<std::string> names;
  for (const ContinuationRecord& r : records) {
    for (const auto& [name, score] : r.scores) names.insert(name);
  }
  std::vector<MetricSummary> out;
  for (const std::string& name : names) {
    MetricSummary s;
    s.metric = name;
    std::vector<double> all;
    std::vector<double> member;
    std::vector<double> nonmember;
    // (score, is member) for labeled records.
    std::vector<std::pair<double, bool>> labeled;
    for (const ContinuationRecord& r : records) {
      const auto it = r.scores.find(name);
      if (it == r.scores.end()) continue;
      all.push_back(it->second);
      if (!r.label) continue;
      const bool is_member = *r.label == Membership::kMember;
      (is_member ? member : nonmember).push_back(it->second);
      labeled.emplace_back(it->second, is_member);
    }
    auto mean = [](const std::vector<double>& v) {
      double sum = 0.0;
      for (double x : v) sum += x;
      return v.empty() ? 0.0 : sum / static_cast<double>(v.size());
    };
    s.members = member.size();
    s.nonmembers = nonmember.size();
    s.mean_all = mean(all);
    s.mean_member = mean(member);
    s.mean_nonmember = mean(nonmember);
    if (member.size() >= 2 && nonmember.size() >= 2) s.welch = welch_t_test(member, nonmember);

    if (!member.empty() && !nonmember.empty()) {
      // Walk thresholds from high to low; at threshold t every record with
      // score >= t is called a member.
      std::sort(labeled.begin(), labeled.end(),
                [](const auto& a, const auto& b) { return a.first > b.first; });
      const double total = static_cast<double>(labeled.size());
      std::size_t true_pos = 0;
      std::size_t false_pos = 0;
      auto record = [&](double threshold) {
        const double correct =
            static_cast<double>(true_pos) + static_cast<double>(nonmember.size() - false_pos);
        s.sweep.push_back({threshold, correct / total});
      };
      record(std::numeric_limits<double>::infinity());
      for (std::size_t i = 0; i < labeled.size();) {
        const double t = labeled[i].first;
        for (; i < labeled.size() && labeled[i].first == t; ++i) {
          ++(labeled[i].second ? true_pos : false_pos);
        }
        record(t);
      }
      s.best_accuracy = -1.0;
      s.worst_accuracy = 2.0;
      for (const SweepPoint& p : s.sweep) {
        if (p.accuracy > s.best_accuracy) {
          s.best_accuracy = p.accuracy;
          s.best_threshold = p.threshold;
        }
        s.worst_accuracy = std::min(s.worst_accuracy, p.accuracy);
      }
      s.accuracy_at_099 = accuracy_at(records, name, 0.99);
    }
    out.push_back(std::move(s));
  }
  return out;
}

nlohmann::json to_json(const ContinuationRecord& r) {
  return {{"entry_id", r.entry_id},
          {"label", r.label ? nlohmann::json(std::string(to_string(*r.label))) : nlohmann::json(nullptr)},
          {"prefix", r.prefix},
          {"reference", r.reference},
          {"generated", r.generated},
          {"scores", r.scores}};
}

nlohmann::json to_json(const MetricSummary& s) {
  nlohmann::json j = {{"metric", s.metric},
                      {"members", s.members},
                      {"nonmembers", s.nonmembers},
                      {"mean_all", s.mean_all},
                      {"mean_member", s.mean_member},
                      {"mean_nonmember", s.mean_nonmember}};
  if (s.welch) {
    j["welch"] = {{"t", s.welch->t},
                  {"df", s.welch->df},
                  {"p_two_sided", s.welch->p_two_sided},
                  {"degenerate", s.welch->degenerate}};
  } else {
    j["welch"] = nullptr;
  }
  if (!s.sweep.empty()) {
    j["best_accuracy"] = s.best_accuracy;
    j["best_threshold"] = std::isinf(s.best_threshold) ? nlohmann::json("inf") : nlohmann::json(s.best_threshold);
    j["worst_accuracy"] = s.worst_accuracy;
    j["accuracy_at_0.99"] = *s.accuracy_at_099;
  }
  return j;
}

}  // namespace isotrace

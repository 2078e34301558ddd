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

#include "isotrace/probe.hpp"

#include <algorithm>
#include <atomic>
#include <ctime>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "isotrace/random.hpp"
#include "isotrace/text.hpp"

namespace isotrace {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kPlaceholders[] = {"{left}", "{mask}", "{right}", "{candidates}"};

constexpr std::string_view kDefaultTemplate =
    "Fill in the blank (___) in the passage below. Choose exactly one option.\n"
    "\n"
    "Passage: {left} {mask} {right}\n"
    "\n"
    "Options: {candidates}\n"
    "\n"
    "Reply with the chosen option only.";

std::string join(std::span<const std::string> items, std::string_view separator) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i > 0) out += separator;
    out += items[i];
  }
  return out;
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buffer[32];
  std::strftime(buffer, sizeof(buffer), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buffer;
}

std::string normalize_answer(std::string_view s) { return punctuation_to_spaces(normalize_member(s)); }

bool whole_word_at(const std::string& haystack, std::size_t pos, std::size_t length) {
  const bool left_ok = pos == 0 || haystack[pos - 1] == ' ';
  const bool right_ok = pos + length == haystack.size() || haystack[pos + length] == ' ';
  return left_ok && right_ok;
}

}  // namespace

PromptTemplate::PromptTemplate(std::string text) : text_(std::move(text)) {
  for (std::string_view placeholder : kPlaceholders) {
    if (text_.find(placeholder) == std::string::npos) {
      throw TemplateError("prompt template is missing the " + std::string(placeholder) +
                          " placeholder");
    }
  }
}

PromptTemplate PromptTemplate::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw TemplateError("cannot open prompt template " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return PromptTemplate(buffer.str());
}

PromptTemplate PromptTemplate::default_cloze() { return PromptTemplate(std::string(kDefaultTemplate)); }

std::string PromptTemplate::render(std::string_view left, std::string_view right,
                                   std::span<const std::string> candidates) const {
  const std::string options = join(candidates, ", ");
  std::string out;
  std::size_t i = 0;
  while (i < text_.size()) {
    bool replaced = false;
    if (text_[i] == '{') {
      for (std::string_view placeholder : kPlaceholders) {
        if (text_.compare(i, placeholder.size(), placeholder) != 0) continue;
        if (placeholder == "{left}") out += left;
        if (placeholder == "{mask}") out += kMaskMarker;
        if (placeholder == "{right}") out += right;
        if (placeholder == "{candidates}") out += options;
        i += placeholder.size();
        replaced = true;
        break;
      }
    }
    if (!replaced) out.push_back(text_[i++]);
  }
  return out;
}

std::string probe_id_for(const FragmentRef& ref) {
  return ref.entry_id + "#" + std::to_string(ref.span.start);
}

Probe build_probe(const IsotopeGroup& group, const PromptTemplate& prompt_template,
                  std::uint64_t seed) {
  Probe probe;
  probe.probe_id = probe_id_for({group.fragment.entry_id, group.fragment.span});
  probe.entry_id = group.fragment.entry_id;
  probe.span = group.fragment.span;
  probe.pos = group.fragment.pos;
  probe.seed = seed;

  std::vector<std::size_t> order(group.group_size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  shuffle(order, rng);
  const std::vector<std::string> members = group.members();
  for (std::size_t slot = 0; slot < order.size(); ++slot) {
    probe.candidates.push_back(members[order[slot]]);
    if (order[slot] == 0) probe.target_index = slot;
  }
  probe.prompt = prompt_template.render(group.fragment.left_context, group.fragment.right_context,
                                        probe.candidates);
  return probe;
}

std::optional<std::size_t> parse_response(std::string_view response,
                                          std::span<const std::string> candidates) {
  const std::string haystack = normalize_answer(response);
  std::optional<std::size_t> best;
  std::size_t best_pos = std::string::npos;
  std::size_t best_length = 0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const std::string needle = normalize_answer(candidates[i]);
    if (needle.empty()) continue;
    for (std::size_t pos = haystack.find(needle); pos != std::string::npos;
         pos = haystack.find(needle, pos + 1)) {
      if (pos > best_pos) break;
      if (!whole_word_at(haystack, pos, needle.size())) continue;
      if (pos < best_pos || needle.size() > best_length) {
        best = i;
        best_pos = pos;
        best_length = needle.size();
      }
      break;
    }
  }
  return best;
}

ProbeOutcome run_probe(const Probe& probe, Backend& backend, int retries,
                       const SamplingParams& params) {
  ProbeOutcome outcome;
  outcome.probe_id = probe.probe_id;
  Request request;
  request.prompt = probe.prompt;
  request.params = params;
  request.hint = GroundTruthHint{RequestKind::kCloze, probe.entry_id, probe.candidates,
                                 probe.target_index, {}};
  const std::string clarification =
      "\n\nYour previous reply did not name one of the options. Reply with exactly one of: " +
      join(probe.candidates, ", ") + ".";
  for (int attempt = 0; attempt <= std::max(0, retries); ++attempt) {
    if (attempt > 0) request.prompt = probe.prompt + clarification;
    ++outcome.attempts;
    try {
      outcome.raw_response = backend.complete(request).text;
    } catch (const TransportError& e) {
      outcome.transport_failed = true;
      outcome.error = e.what();
      outcome.valid = false;
      outcome.o = 0;
      return outcome;
    }
    outcome.matched = parse_response(outcome.raw_response, probe.candidates);
    if (outcome.matched) {
      outcome.valid = true;
      outcome.o = *outcome.matched == probe.target_index ? 1 : 0;
      return outcome;
    }
  }
  outcome.valid = false;
  outcome.o = 0;
  return outcome;
}

nlohmann::json to_json(const Observation& observation) {
  const Probe& p = observation.probe;
  const ProbeOutcome& o = observation.outcome;
  return {{"probe_id", p.probe_id},
          {"entry_id", p.entry_id},
          {"span", {p.span.start, p.span.end}},
          {"pos", to_string(p.pos)},
          {"seed", p.seed},
          {"prompt", p.prompt},
          {"candidates", p.candidates},
          {"target_index", p.target_index},
          {"raw_response", o.raw_response},
          {"matched", o.matched ? nlohmann::json(*o.matched) : nlohmann::json(nullptr)},
          {"o", o.o},
          {"valid", o.valid},
          {"attempts", o.attempts},
          {"transport_failed", o.transport_failed},
          {"error", o.error},
          {"timestamp", observation.timestamp}};
}

Observation observation_from_json(const nlohmann::json& j) {
  Observation obs;
  Probe& p = obs.probe;
  ProbeOutcome& o = obs.outcome;
  p.probe_id = j.at("probe_id").get<std::string>();
  p.entry_id = j.at("entry_id").get<std::string>();
  p.span = {j.at("span").at(0).get<std::size_t>(), j.at("span").at(1).get<std::size_t>()};
  const auto pos = parse_pos(j.at("pos").get<std::string>());
  if (!pos) throw std::runtime_error("unknown pos in observation " + p.probe_id);
  p.pos = *pos;
  p.seed = j.at("seed").get<std::uint64_t>();
  p.prompt = j.at("prompt").get<std::string>();
  p.candidates = j.at("candidates").get<std::vector<std::string>>();
  p.target_index = j.at("target_index").get<std::size_t>();
  o.probe_id = p.probe_id;
  o.raw_response = j.at("raw_response").get<std::string>();
  if (!j.at("matched").is_null()) o.matched = j.at("matched").get<std::size_t>();
  o.o = j.at("o").get<int>();
  o.valid = j.at("valid").get<bool>();
  o.attempts = j.at("attempts").get<int>();
  o.transport_failed = j.at("transport_failed").get<bool>();
  o.error = j.value("error", "");
  obs.timestamp = j.value("timestamp", "");
  return obs;
}

void write_observations(const fs::path& path, std::span<const Observation> observations) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  for (const Observation& obs : observations) out << to_json(obs).dump() << '\n';
  if (!out) throw Error("probe", "cannot write observation log " + path.string());
}

std::vector<Observation> read_observations(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("probe", "cannot open observation log " + path.string());
  std::vector<Observation> out;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    try {
      out.push_back(observation_from_json(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw Error("probe", "malformed observation at " + path.string() + ":" +
                               std::to_string(line_number) + ": " + e.what());
    }
  }
  return out;
}

std::vector<Probe> plan_probes(const SuspectedDataset& dataset,
                               const std::map<std::string, EntrySelection>& selections,
                               const std::map<FragmentRef, IsotopeGroup>& groups,
                               const CampaignConfig& config) {
  std::vector<Probe> probes;
  for (const DataEntry& entry : dataset.entries()) {
    auto selection = selections.find(entry.id);
    if (selection == selections.end()) continue;
    for (const FragmentRef& ref : selection->second.fragments) {
      auto group = groups.find(ref);
      if (group == groups.end()) continue;
      probes.push_back(build_probe(group->second, config.prompt_template,
                                   derive_seed(config.seed, probe_id_for(ref))));
    }
  }
  return probes;
}

std::vector<Observation> run_probes(std::span<const Probe> probes, Backend& backend,
                                    const CampaignConfig& config) {
  const std::size_t total = probes.size();
  std::vector<std::optional<Observation>> slots(total);
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> failures{0};
  std::atomic<bool> stop{false};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  const auto failure_budget =
      static_cast<std::size_t>(config.max_transport_failure_rate * static_cast<double>(total));

  auto worker = [&] {
    while (!stop.load()) {
      const std::size_t i = next.fetch_add(1);
      if (i >= total) return;
      try {
        Observation obs;
        obs.probe = probes[i];
        obs.outcome = run_probe(probes[i], backend, config.retries, config.params);
        obs.timestamp = utc_timestamp();
        if (obs.outcome.transport_failed && failures.fetch_add(1) + 1 > failure_budget) {
          stop.store(true);
        }
        slots[i] = std::move(obs);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        stop.store(true);
      }
    }
  };
  {
    const std::size_t workers = std::clamp<std::size_t>(config.max_in_flight, 1, std::max<std::size_t>(total, 1));
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  if (first_error) std::rethrow_exception(first_error);

  std::vector<Observation> observations;
  for (auto& slot : slots) {
    if (slot) observations.push_back(std::move(*slot));
  }
  if (config.log_path) write_observations(*config.log_path, observations);
  const double failure_rate =
      total == 0 ? 0.0 : static_cast<double>(failures.load()) / static_cast<double>(total);
  if (failure_rate > config.max_transport_failure_rate) {
    throw CampaignAborted("transport failures exceeded " +
                              std::to_string(config.max_transport_failure_rate * 100.0) +
                              "% of " + std::to_string(total) + " probes",
                          std::move(observations));
  }
  return observations;
}

std::vector<Observation> run_campaign(const SuspectedDataset& dataset,
                                      const std::map<std::string, EntrySelection>& selections,
                                      const std::map<FragmentRef, IsotopeGroup>& groups,
                                      Backend& backend, const CampaignConfig& config) {
  const std::vector<Probe> probes = plan_probes(dataset, selections, groups, config);
  return run_probes(probes, backend, config);
}

}  // namespace isotrace

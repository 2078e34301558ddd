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


#include "isotrace/audit.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "isotrace/digest.hpp"
#include "isotrace/error.hpp"
#include "isotrace/isotope.hpp"
#include "isotrace/lexicon.hpp"
#include "isotrace/probe.hpp"
#include "isotrace/random.hpp"
#include "isotrace/selector.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace isotrace {
namespace {

// ---------------------------------------------------------------------------
// Config parsing.

// True for integral JSON numbers >= 0, whether parsed from text (unsigned)
// or built in code (signed).
bool is_non_negative_integer(const json& v) {
  return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
}

// Reads fields of one JSON object and rejects keys nobody asked for.
class Fields {
 public:
  Fields(const json& j, std::string prefix) : j_(j), prefix_(std::move(prefix)) {
    if (!j.is_object()) throw ConfigError(where("") + " must be a JSON object");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) && !j_.at(key).is_null();
  }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  std::string string(const std::string& key, std::string fallback) {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_string()) throw ConfigError(where(key) + " must be a string");
    return v.get<std::string>();
  }

  double number(const std::string& key, double fallback) {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_number()) throw ConfigError(where(key) + " must be a number");
    return v.get<double>();
  }

  std::uint64_t count(const std::string& key, std::uint64_t fallback) {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!is_non_negative_integer(v)) throw ConfigError(where(key) + " must be a non-negative integer");
    return v.get<std::uint64_t>();
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.contains(key)) {
        throw ConfigError("unknown config field " + where(key),
                          "remove it or check the spelling against the documented schema");
      }
    }
  }

  std::string where(const std::string& key) const {
    if (prefix_.empty()) return key.empty() ? "config" : key;
    return key.empty() ? prefix_ : prefix_ + "." + key;
  }

 private:
  const json& j_;
  std::string prefix_;
  std::set<std::string> seen_;
};

DatasetRef parse_dataset_ref(const json& j, const std::string& name) {
  Fields f(j, name);
  DatasetRef ref;
  ref.path = f.string("path", "");
  if (ref.path.empty()) throw ConfigError(name + ".path is required");
  const std::string format = f.string("format", "jsonl");
  const auto parsed = parse_dataset_format(format);
  if (!parsed) throw ConfigError(name + ".format must be \"jsonl\" or \"plain-dir\"");
  ref.format = *parsed;
  f.finish();
  return ref;
}

json dataset_ref_json(const std::optional<DatasetRef>& ref) {
  if (!ref) return nullptr;
  return {{"path", ref->path}, {"format", ref->format == DatasetFormat::kJsonl ? "jsonl" : "plain-dir"}};
}

template <typename T>
json optional_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

// ---------------------------------------------------------------------------
// Output helpers.

std::string fmt(const char* format, double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, value);
  return buf;
}

std::string num(double value) { return fmt("%.10g", value); }

void write_file(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + path.string(), "check output_dir permissions");
    out << content;
    if (!out) throw ConfigError("failed writing " + path.string());
  }
  fs::rename(tmp, path);
}

void write_json(const fs::path& path, const json& j) { write_file(path, j.dump(2) + "\n"); }

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + " is not valid JSON: " + e.what());
  }
}

fs::path output_dir(const AuditConfig& config) {
  const fs::path dir = config.resolve(config.output_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output_dir " + dir.string() + ": " + ec.message());
  return dir;
}

json provenance(const AuditConfig& config, std::string_view command) {
  return {{"schema_version", kReportSchemaVersion},
          {"tool", "isotrace"},
          {"command", command},
          {"config_hash", config.hash()},
          {"seed", config.seed}};
}

// ---------------------------------------------------------------------------
// Pipeline pieces.

SuspectedDataset load(const AuditConfig& config, const DatasetRef& ref) {
  return load_dataset(config.resolve(ref.path), ref.format);
}

std::set<std::string> labeled_members(std::initializer_list<const SuspectedDataset*> datasets) {
  std::set<std::string> ids;
  for (const SuspectedDataset* d : datasets) {
    if (d == nullptr) continue;
    for (const DataEntry& e : d->entries()) {
      if (e.label == Membership::kMember) ids.insert(e.id);
    }
  }
  return ids;
}

// Innermost backend plus optional cache.
class BackendStack {
 public:
  BackendStack(const AuditConfig& config, std::set<std::string> members,
               std::vector<std::string> noise)
      : limiter_(config.backend.rate_limit, clock_) {
    if (!config.backend.members_from_labels) {
      members = {config.backend.member_ids.begin(), config.backend.member_ids.end()};
    }
    inner_ = make_backend(config.backend, std::move(members), std::move(noise),
                          config.backend.rate_limit > 0.0 ? &limiter_ : nullptr);
    if (config.cache_dir) {
      cache_.emplace(config.resolve(*config.cache_dir));
      caching_ = std::make_unique<CachingBackend>(*inner_, *cache_);
    }
  }

  Backend& top() { return caching_ ? static_cast<Backend&>(*caching_) : *inner_; }

 private:
  SteadyClock clock_;
  RateLimiter limiter_;
  std::unique_ptr<Backend> inner_;
  std::optional<ResponseCache> cache_;
  std::unique_ptr<CachingBackend> caching_;
};

std::vector<TokenSequence> token_sequences(const SuspectedDataset& dataset) {
  std::vector<TokenSequence> out;
  out.reserve(dataset.size());
  for (const DataEntry& e : dataset.entries()) out.push_back(proxy_tokens(e.text));
  return out;
}

struct CampaignRun {
  std::vector<SensitivityScore> scores;
  std::map<FragmentRef, IsotopeGroup> groups;
  std::map<std::string, EntrySelection> selections;
  std::vector<Observation> observations;
};

CampaignRun probe_dataset(const AuditConfig& config, const SuspectedDataset& dataset,
                          const Lexicon& lexicon, const std::vector<TokenSequence>& background,
                          Backend& backend, const fs::path& log_path) {
  CampaignRun run;
  const std::vector<TokenSequence> suspected = token_sequences(dataset);
  const std::vector<std::string> extra = lexicon.surfaces();
  const ProxyPair proxies =
      ProxyPair::fit(background, suspected, config.proxy_order, config.proxy_delta, extra);
  const NGramContextScorer scorer(proxies.unexposed());

  for (const DataEntry& entry : dataset.entries()) {
    for (const Fragment& fragment : extract_fragments(entry, lexicon, config.context_window)) {
      IsotopeGroup group;
      try {
        group = generate_group(fragment, lexicon, scorer, config.max_group_size);
      } catch (const NoIsotopesError&) {
        continue;
      }
      run.scores.push_back(score_fragment(proxies, group));
      run.groups.emplace(FragmentRef{entry.id, fragment.span}, std::move(group));
    }
  }
  run.selections = select_top(run.scores, config.fragments_per_entry);
  spdlog::info("{}: {} isotope groups scored, {} entries selected", dataset.source_tag(),
               run.groups.size(), run.selections.size());

  CampaignConfig campaign;
  if (config.prompt_template) {
    campaign.prompt_template = PromptTemplate::load(config.resolve(*config.prompt_template));
  }
  campaign.seed = config.seed;
  campaign.retries = config.retries;
  campaign.max_in_flight = config.max_in_flight;
  campaign.max_transport_failure_rate = config.max_transport_failure_rate;
  campaign.params = config.sampling;
  campaign.log_path = log_path;
  run.observations = run_campaign(dataset, run.selections, run.groups, backend, campaign);
  return run;
}

std::vector<Indicator> indicators(const std::vector<Observation>& observations) {
  std::vector<Indicator> out;
  out.reserve(observations.size());
  for (const Observation& obs : observations) {
    out.push_back({obs.outcome.o == 1, obs.outcome.transport_failed,
                   std::string(to_string(obs.probe.pos))});
  }
  return out;
}

json calibration_json(const Calibration& c) {
  json j = to_json(c.priors);
  j["control_observations"] = c.n;
  j["control_recovered"] = c.recovered;
  j["raw_mean"] = c.raw_mean;
  return j;
}

Calibration calibrate(const AuditConfig& config, const Lexicon& lexicon,
                      const std::vector<TokenSequence>& background, Backend& backend,
                      const SuspectedDataset& control, const fs::path& out) {
  const CampaignRun run =
      probe_dataset(config, control, lexicon, background, backend, out / "control_observations.jsonl");
  const std::vector<Indicator> ind = indicators(run.observations);
  Calibration c = calibrate_pn(ind, config.max_group_size);
  c.priors.p_t = config.p_t;
  c.priors.validate();
  json j = provenance(config, "calibrate");
  j["calibration"] = calibration_json(c);
  write_json(out / "calibration.json", j);
  return c;
}

json selections_json(const CampaignRun& run) {
  std::map<FragmentRef, double> delta;
  for (const SensitivityScore& s : run.scores) delta[s.fragment] = s.delta;
  json out = json::object();
  for (const auto& [entry_id, selection] : run.selections) {
    json fragments = json::array();
    for (const FragmentRef& ref : selection.fragments) {
      const IsotopeGroup& g = run.groups.at(ref);
      fragments.push_back({{"span", {ref.span.start, ref.span.end}},
                           {"surface", g.fragment.surface},
                           {"pos", to_string(g.fragment.pos)},
                           {"delta", delta.at(ref)},
                           {"group", g.members()}});
    }
    out[entry_id] = {{"shortfall", selection.shortfall}, {"fragments", fragments}};
  }
  return out;
}

std::string groups_jsonl(const CampaignRun& run) {
  std::map<FragmentRef, double> delta;
  for (const SensitivityScore& s : run.scores) delta[s.fragment] = s.delta;
  std::string out;
  for (const auto& [ref, g] : run.groups) {
    out += json{{"entry_id", ref.entry_id},
                {"span", {ref.span.start, ref.span.end}},
                {"pos", to_string(g.fragment.pos)},
                {"members", g.members()},
                {"left_context", g.fragment.left_context},
                {"right_context", g.fragment.right_context},
                {"delta", delta.at(ref)}}
               .dump();
    out += "\n";
  }
  return out;
}

std::string rsr_csv(const ActivityScore& activity) {
  std::string out = "category,n,recovered,rsr\n";
  for (const auto& [name, cat] : activity.per_category) {
    out += name + "," + std::to_string(cat.n) + "," + std::to_string(cat.recovered) + "," +
           num(cat.rsr) + "\n";
  }
  return out;
}

std::string summary_text(const ActivityReport& r, std::size_t entries_probed) {
  std::ostringstream s;
  s << "isotrace detect: " << (r.detected ? "TRAINING DATA DETECTED" : "not detected") << "\n";
  s << "  entries probed: " << entries_probed << "   observations: " << r.activity.n
    << " (excluded " << r.activity.excluded << ")\n";
  s << "  activity p_hat = " << fmt("%.4f", r.activity.p_hat) << "   p_n = "
    << fmt("%.4f", r.priors.p_n) << " (" << to_string(r.priors.provenance) << ")\n";
  s << "  z = " << fmt("%.3f", r.z) << "   p-value = " << fmt("%.3e", r.p_value) << " (log10 "
    << fmt("%.2f", r.log10_p_value) << ")   level " << num(r.significance_level) << "\n";
  if (r.error_bound) {
    s << "  detection error bound at p_t = " << fmt("%.4f", *r.error_bound_p_t) << ": "
      << fmt("%.3e", *r.error_bound) << "\n";
  }
  s << "  recovery by category:";
  for (const auto& [name, cat] : r.activity.per_category) {
    s << "  " << name << " " << fmt("%.3f", cat.rsr) << " (n=" << cat.n << ")";
  }
  s << "\n";
  if (r.exclusions_flagged) s << "  warning: more than 10% of planned probes were excluded\n";
  return s.str();
}

void check_file(const AuditConfig& config, const std::string& field, const std::string& path) {
  const fs::path p = config.resolve(path);
  if (!fs::exists(p)) {
    throw ConfigError(field + ": path not found: " + p.string(),
                      "fix \"" + field + "\" in the config (relative paths resolve against the "
                      "config file's directory)");
  }
}

std::vector<std::string> noise_vocabulary(const Lexicon& lexicon) { return lexicon.surfaces(); }

}  // namespace

// ---------------------------------------------------------------------------
// AuditConfig.

AuditConfig AuditConfig::from_json(const json& j, fs::path base_dir) {
  Fields f(j, "");
  AuditConfig c;
  c.base_dir = std::move(base_dir);
  if (f.has("dataset")) c.dataset = parse_dataset_ref(f.raw("dataset"), "dataset");
  if (f.has("background")) c.background = parse_dataset_ref(f.raw("background"), "background");
  c.lexicon = f.string("lexicon", "");
  if (f.has("prompt_template")) c.prompt_template = f.string("prompt_template", "");
  if (f.has("backend")) c.backend = BackendSpec::from_json(f.raw("backend"));

  c.fragments_per_entry = f.count("fragments_per_entry", c.fragments_per_entry);
  c.context_window = f.count("context_window", c.context_window);
  c.max_group_size = f.count("max_group_size", c.max_group_size);
  if (f.has("proxy")) {
    Fields p(f.raw("proxy"), "proxy");
    c.proxy_order = static_cast<int>(p.count("order", static_cast<std::uint64_t>(c.proxy_order)));
    c.proxy_delta = p.number("delta", c.proxy_delta);
    p.finish();
  }
  c.seed = f.count("seed", c.seed);
  c.significance_level = f.number("significance_level", c.significance_level);
  if (f.has("p_n")) c.p_n = f.number("p_n", 0.0);
  if (f.has("p_t")) c.p_t = f.number("p_t", 0.0);
  if (f.has("control_dataset")) {
    c.control_dataset = parse_dataset_ref(f.raw("control_dataset"), "control_dataset");
  }
  c.retries = static_cast<int>(f.count("retries", static_cast<std::uint64_t>(c.retries)));
  c.max_in_flight = f.count("max_in_flight", c.max_in_flight);
  c.max_transport_failure_rate = f.number("max_transport_failure_rate", c.max_transport_failure_rate);
  if (f.has("sampling")) {
    Fields s(f.raw("sampling"), "sampling");
    c.sampling.temperature = s.number("temperature", c.sampling.temperature);
    c.sampling.max_tokens = static_cast<int>(s.count("max_tokens", static_cast<std::uint64_t>(c.sampling.max_tokens)));
    s.finish();
  }
  if (f.has("cache_dir")) c.cache_dir = f.string("cache_dir", "");
  c.output_dir = f.string("output_dir", c.output_dir);

  c.simulate.p_t = 0.76;
  c.simulate.p_n = 0.545;
  if (f.has("simulate")) {
    Fields s(f.raw("simulate"), "simulate");
    c.simulate.p_t = s.number("p_t", c.simulate.p_t);
    c.simulate.p_n = s.number("p_n", c.simulate.p_n);
    if (s.has("n_grid")) {
      const json& grid = s.raw("n_grid");
      if (!grid.is_array()) throw ConfigError("simulate.n_grid must be a list of positive integers");
      c.simulate.n_grid.clear();
      for (const json& v : grid) {
        if (!is_non_negative_integer(v) || v.get<std::uint64_t>() == 0) {
          throw ConfigError("simulate.n_grid must be a list of positive integers");
        }
        c.simulate.n_grid.push_back(v.get<std::size_t>());
      }
    }
    if (s.has("alpha_grid")) {
      const json& grid = s.raw("alpha_grid");
      if (!grid.is_array()) throw ConfigError("simulate.alpha_grid must be a list of numbers in [0, 1)");
      c.simulate.alpha_grid.clear();
      for (const json& v : grid) {
        if (!v.is_number() || !(v.get<double>() >= 0.0 && v.get<double>() < 1.0)) {
          throw ConfigError("simulate.alpha_grid must be a list of numbers in [0, 1)");
        }
        c.simulate.alpha_grid.push_back(v.get<double>());
      }
    }
    c.simulate.attack_n = s.count("attack_n", c.simulate.attack_n);
    c.simulate.trials = s.count("trials", c.simulate.trials);
    const std::string model = s.string("attack_model", "chance");
    if (model == "chance") {
      c.simulate.attack_model = AttackModel::kChance;
    } else if (model == "replaced-as-nonmember") {
      c.simulate.attack_model = AttackModel::kReplacedAsNonMember;
    } else {
      throw ConfigError("simulate.attack_model must be \"chance\" or \"replaced-as-nonmember\"");
    }
    c.simulate.group_size = s.count("group_size", c.simulate.group_size);
    s.finish();
  }
  if (f.has("baseline")) {
    Fields b(f.raw("baseline"), "baseline");
    if (b.has("metrics")) {
      const json& m = b.raw("metrics");
      if (!m.is_array()) throw ConfigError("baseline.metrics must be a list of metric names");
      c.baseline.metrics.clear();
      for (const json& v : m) {
        if (!v.is_string()) throw ConfigError("baseline.metrics must be a list of metric names");
        c.baseline.metrics.push_back(v.get<std::string>());
      }
    }
    c.baseline.rho = b.number("rho", c.baseline.rho);
    c.baseline.max_tokens = static_cast<int>(b.count("max_tokens", static_cast<std::uint64_t>(c.baseline.max_tokens)));
    if (b.has("external_scores")) {
      const json& ext = b.raw("external_scores");
      if (!ext.is_object()) throw ConfigError("baseline.external_scores must map metric names to paths");
      for (const auto& [name, path] : ext.items()) {
        if (!path.is_string()) throw ConfigError("baseline.external_scores." + name + " must be a path");
        c.external_scores[name] = path.get<std::string>();
      }
    }
    b.finish();
  }
  f.finish();

  require(c.fragments_per_entry >= 1, "fragments_per_entry must be at least 1");
  require(c.context_window >= 1, "context_window must be at least 1");
  require(c.max_group_size >= 2, "max_group_size must be at least 2");
  require(c.proxy_order >= 1, "proxy.order must be at least 1");
  require(c.proxy_delta > 0.0, "proxy.delta must be positive");
  require(c.significance_level > 0.0 && c.significance_level < 1.0,
          "significance_level must lie in (0, 1)");
  if (c.p_n) require(*c.p_n > 0.0 && *c.p_n < 1.0, "p_n must lie in (0, 1)");
  if (c.p_t) require(*c.p_t > 0.0 && *c.p_t < 1.0, "p_t must lie in (0, 1)");
  if (c.p_n && c.p_t) require(*c.p_n < *c.p_t, "p_t must exceed p_n");
  require(c.max_in_flight >= 1, "max_in_flight must be at least 1");
  require(c.max_transport_failure_rate >= 0.0 && c.max_transport_failure_rate <= 1.0,
          "max_transport_failure_rate must lie in [0, 1]");
  require(c.sampling.max_tokens >= 1, "sampling.max_tokens must be at least 1");
  require(c.simulate.p_n > 0.0 && c.simulate.p_n < c.simulate.p_t && c.simulate.p_t < 1.0,
          "simulate priors must satisfy 0 < p_n < p_t < 1");
  require(!c.simulate.n_grid.empty(), "simulate.n_grid must not be empty");
  require(c.simulate.attack_n >= 1, "simulate.attack_n must be at least 1");
  require(c.simulate.trials >= 1, "simulate.trials must be at least 1");
  require(c.simulate.group_size >= 2, "simulate.group_size must be at least 2");
  c.baseline.validate();
  for (const auto& [name, path] : c.external_scores) {
    require(!is_builtin_metric(name), "baseline.external_scores cannot override built-in metric " + name);
  }
  return c;
}

AuditConfig AuditConfig::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string(), "pass --config <path>");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  return from_json(j, fs::absolute(path).parent_path());
}

json AuditConfig::to_json() const {
  json sim_grid = simulate.n_grid;
  json alpha_grid = simulate.alpha_grid;
  return {
      {"dataset", dataset_ref_json(dataset)},
      {"background", dataset_ref_json(background)},
      {"lexicon", lexicon},
      {"prompt_template", optional_json(prompt_template)},
      {"backend", backend.to_json()},
      {"fragments_per_entry", fragments_per_entry},
      {"context_window", context_window},
      {"max_group_size", max_group_size},
      {"proxy", {{"order", proxy_order}, {"delta", proxy_delta}}},
      {"seed", seed},
      {"significance_level", significance_level},
      {"p_n", optional_json(p_n)},
      {"p_t", optional_json(p_t)},
      {"control_dataset", dataset_ref_json(control_dataset)},
      {"retries", retries},
      {"max_in_flight", max_in_flight},
      {"max_transport_failure_rate", max_transport_failure_rate},
      {"sampling", sampling.to_json()},
      {"cache_dir", optional_json(cache_dir)},
      {"output_dir", output_dir},
      {"simulate",
       {{"p_t", simulate.p_t},
        {"p_n", simulate.p_n},
        {"n_grid", sim_grid},
        {"alpha_grid", alpha_grid},
        {"attack_n", simulate.attack_n},
        {"trials", simulate.trials},
        {"attack_model",
         simulate.attack_model == AttackModel::kChance ? "chance" : "replaced-as-nonmember"},
        {"group_size", simulate.group_size}}},
      {"baseline",
       {{"metrics", baseline.metrics},
        {"rho", baseline.rho},
        {"max_tokens", baseline.max_tokens},
        {"external_scores", external_scores}}},
  };
}

std::string AuditConfig::hash() const {
  json j = to_json();
  j.erase("output_dir");
  j.erase("cache_dir");
  j.erase("max_in_flight");
  return sha256_hex(j.dump());
}

fs::path AuditConfig::resolve(const std::string& path) const {
  const fs::path p(path);
  return (p.is_absolute() ? p : base_dir / p).lexically_normal();
}

void AuditConfig::validate(Command command) const {
  auto need_dataset = [&](const std::optional<DatasetRef>& ref, const std::string& field) {
    if (!ref) throw ConfigError(field + " is required", "add \"" + field + "\": {\"path\": ..., \"format\": \"jsonl\"}");
    check_file(*this, field + ".path", ref->path);
  };
  auto need_lexicon = [&] {
    if (lexicon.empty()) throw ConfigError("lexicon is required", "set \"lexicon\" to a JSONL synonym lexicon");
    check_file(*this, "lexicon", lexicon);
  };
  switch (command) {
    case Command::kDetect:
      need_dataset(dataset, "dataset");
      need_dataset(background, "background");
      need_lexicon();
      if (prompt_template) check_file(*this, "prompt_template", *prompt_template);
      if (p_n.has_value() == control_dataset.has_value()) {
        throw ConfigError("exactly one of p_n and control_dataset must be set",
                          "give a configured p_n or a control dataset of known non-training entries");
      }
      if (control_dataset) need_dataset(control_dataset, "control_dataset");
      break;
    case Command::kCalibrate:
      need_dataset(control_dataset, "control_dataset");
      need_dataset(background, "background");
      need_lexicon();
      if (prompt_template) check_file(*this, "prompt_template", *prompt_template);
      break;
    case Command::kBaseline:
      need_dataset(dataset, "dataset");
      need_lexicon();
      for (const auto& [name, path] : external_scores) check_file(*this, "baseline.external_scores." + name, path);
      break;
    case Command::kSimulate:
    case Command::kReport:
      break;
  }
}

// ---------------------------------------------------------------------------
// Commands.

DetectResult cmd_detect(const AuditConfig& config) {
  config.validate(Command::kDetect);
  const fs::path out = output_dir(config);
  write_json(out / "config.json", config.to_json());

  const Lexicon lexicon = Lexicon::load(config.resolve(config.lexicon));
  const SuspectedDataset dataset = load(config, *config.dataset);
  const SuspectedDataset background = load(config, *config.background);
  std::optional<SuspectedDataset> control;
  if (config.control_dataset) control = load(config, *config.control_dataset);
  spdlog::info("loaded {} suspected entries, {} background entries, {} lexicon entries",
               dataset.size(), background.size(), lexicon.entry_count());

  BackendStack stack(config, labeled_members({&dataset, control ? &*control : nullptr}),
                     noise_vocabulary(lexicon));
  const std::vector<TokenSequence> background_tokens = token_sequences(background);

  TraceabilityPriors priors;
  std::optional<Calibration> calibration;
  if (control) {
    calibration = calibrate(config, lexicon, background_tokens, stack.top(), *control, out);
    priors = calibration->priors;
  } else {
    priors.p_n = *config.p_n;
    priors.p_t = config.p_t;
    priors.provenance = PriorProvenance::kConfigured;
    priors.validate();
  }

  const CampaignRun run = probe_dataset(config, dataset, lexicon, background_tokens, stack.top(),
                                        out / "observations.jsonl");
  write_json(out / "selections.json", selections_json(run));
  write_file(out / "isotope_groups.jsonl", groups_jsonl(run));

  const std::vector<Indicator> ind = indicators(run.observations);
  const ActivityScore activity = activity_score(ind);
  DetectResult result;
  result.report = assess(activity, priors, run.observations.size(), config.significance_level);

  std::size_t invalid = 0;
  std::size_t transport = 0;
  std::size_t retried = 0;
  std::set<std::string> probed;
  for (const Observation& o : run.observations) {
    if (o.outcome.transport_failed) {
      ++transport;
    } else if (!o.outcome.valid) {
      ++invalid;
    }
    if (o.outcome.attempts > 1) ++retried;
    probed.insert(o.probe.entry_id);
  }
  std::size_t members = 0;
  std::size_t nonmembers = 0;
  for (const DataEntry& e : dataset.entries()) {
    if (e.label == Membership::kMember) ++members;
    if (e.label == Membership::kNonMember) ++nonmembers;
  }
  json shortfall = json::array();
  for (const auto& [id, sel] : run.selections) {
    if (sel.shortfall) shortfall.push_back(id);
  }
  const BackendIdentity identity = stack.top().identity();

  json report = provenance(config, "detect");
  report["p_n_provenance"] = to_string(priors.provenance);
  report["verdict"] = result.report.detected ? "training-data-detected" : "not-detected";
  report["config"] = config.to_json();
  report["dataset"] = {{"path", config.dataset->path},
                       {"entries", dataset.size()},
                       {"entries_probed", probed.size()},
                       {"labels",
                        {{"member", members},
                         {"nonmember", nonmembers},
                         {"unlabeled", dataset.size() - members - nonmembers}}}};
  report["selection"] = {
      {"fragments_per_entry", config.fragments_per_entry},
      {"context_window", config.context_window},
      {"max_group_size", config.max_group_size},
      {"proxy",
       {{"kind", "additive-smoothing n-gram proxy pair (stand-in for neural reference models)"},
        {"order", config.proxy_order},
        {"delta", config.proxy_delta}}},
      {"groups_scored", run.groups.size()},
      {"probes_planned", run.observations.size()},
      {"shortfall_entries", shortfall}};
  report["backend"] = {{"kind", identity.kind}, {"endpoint", identity.endpoint}, {"model", identity.model}};
  report["campaign"] = {{"observations", run.observations.size()},
                        {"invalid_responses", invalid},
                        {"transport_failures", transport},
                        {"retried_probes", retried}};
  report["calibration"] = calibration ? calibration_json(*calibration) : json(nullptr);
  report["result"] = to_json(result.report);
  result.report_json = report;
  write_json(out / "report.json", report);

  result.summary = summary_text(result.report, probed.size());
  write_file(out / "summary.txt", result.summary);
  write_file(out / "rsr_by_category.csv", rsr_csv(activity));
  result.exit_code = result.report.detected ? kExitDetected : kExitNotDetected;
  return result;
}

Calibration cmd_calibrate(const AuditConfig& config) {
  config.validate(Command::kCalibrate);
  const fs::path out = output_dir(config);
  const Lexicon lexicon = Lexicon::load(config.resolve(config.lexicon));
  const SuspectedDataset control = load(config, *config.control_dataset);
  const SuspectedDataset background = load(config, *config.background);
  BackendStack stack(config, labeled_members({&control}), noise_vocabulary(lexicon));
  return calibrate(config, lexicon, token_sequences(background), stack.top(), control, out);
}

ValidationReport cmd_simulate(const AuditConfig& config) {
  ValidationConfig vc = config.simulate;
  vc.seed = config.seed;
  vc.level = config.significance_level;
  const ValidationReport report = monte_carlo_validate(vc);
  const fs::path out = output_dir(config);

  const double trials = static_cast<double>(vc.trials);
  auto se = [&](double p) { return std::sqrt(p * (1.0 - p) / trials); };
  std::string pvalue = "n,median_log10_p_member,median_p_member,median_log10_p_nonmember,tpr,fpr\n";
  std::string error = "n,empirical_error,error_se_binomial_approx,bound,dominated\n";
  for (const LemmaCell& c : report.lemma) {
    pvalue += std::to_string(c.n) + "," + num(c.median_log10_p_member) + "," +
              num(std::pow(10.0, c.median_log10_p_member)) + "," + num(c.median_log10_p_nonmember) +
              "," + num(c.tpr) + "," + num(c.fpr) + "\n";
    error += std::to_string(c.n) + "," + num(c.empirical_error) + "," + num(se(c.empirical_error)) +
             "," + num(c.bound) + "," + (c.dominated() ? "true" : "false") + "\n";
  }
  std::string comp =
      "alpha,n,n_compensated,taylor_estimate,attacked_rate,accuracy_unattacked,accuracy_attacked,"
      "accuracy_compensated\n";
  for (const AttackCell& c : report.attack) {
    comp += num(c.alpha) + "," + std::to_string(c.n) + "," + std::to_string(c.n_compensated) + "," +
            std::to_string(c.taylor_estimate) + "," + num(c.attacked_rate) + "," +
            num(c.accuracy_unattacked) + "," + num(c.accuracy_attacked) + "," +
            num(c.accuracy_compensated) + "\n";
  }
  write_file(out / "sim_pvalue_vs_n.csv", pvalue);
  write_file(out / "sim_error_vs_n.csv", error);
  write_file(out / "sim_compensation.csv", comp);

  json j = provenance(config, "simulate");
  json body = to_json(report);
  for (json& cell : body["lemma"]) {
    cell["confidence"] = {{"trials", vc.trials},
                          {"empirical_error_se", se(cell["empirical_error"].get<double>())},
                          {"tpr_se", se(cell["tpr"].get<double>())},
                          {"fpr_se", se(cell["fpr"].get<double>())}};
  }
  j["validation"] = body;
  write_json(out / "validation.json", j);
  return report;
}

std::vector<MetricSummary> cmd_baseline(const AuditConfig& config) {
  config.validate(Command::kBaseline);
  const fs::path out = output_dir(config);
  const Lexicon lexicon = Lexicon::load(config.resolve(config.lexicon));
  const SuspectedDataset dataset = load(config, *config.dataset);
  BackendStack stack(config, labeled_members({&dataset}), noise_vocabulary(lexicon));

  BaselineConfig bc = config.baseline;
  bc.max_in_flight = config.max_in_flight;
  BaselineRun run = run_baseline(dataset, stack.top(), bc);
  for (const auto& [name, path] : config.external_scores) {
    merge_external_scores(run.records, name, config.resolve(path));
  }
  const std::vector<MetricSummary> summaries = summarize(run.records);

  std::string records;
  for (const ContinuationRecord& r : run.records) records += to_json(r).dump() + "\n";
  write_file(out / "baseline_records.jsonl", records);

  std::string sweep = "metric,threshold,accuracy\n";
  json metrics = json::array();
  for (const MetricSummary& s : summaries) {
    metrics.push_back(to_json(s));
    for (const SweepPoint& p : s.sweep) {
      sweep += s.metric + "," + (std::isinf(p.threshold) ? std::string("inf") : num(p.threshold)) +
               "," + num(p.accuracy) + "\n";
    }
  }
  write_file(out / "baseline_sweep.csv", sweep);

  json skipped = json::array();
  for (const SkippedEntry& s : run.skipped) skipped.push_back({{"entry_id", s.entry_id}, {"reason", s.reason}});
  json j = provenance(config, "baseline");
  j["rho"] = bc.rho;
  j["records"] = run.records.size();
  j["skipped"] = skipped;
  j["metrics"] = metrics;
  write_json(out / "baseline.json", j);
  if (!run.skipped.empty()) spdlog::warn("{} entries skipped by the baseline", run.skipped.size());
  return summaries;
}

json cmd_report(const fs::path& run_dir) {
  std::vector<std::string> missing;
  for (const char* name : {"report.json", "observations.jsonl"}) {
    if (!fs::exists(run_dir / name)) missing.push_back(name);
  }
  if (!missing.empty()) {
    std::string list;
    for (const std::string& m : missing) list += (list.empty() ? "" : ", ") + m;
    throw ConfigError("incomplete run directory " + run_dir.string() + ": missing " + list,
                      "run `isotrace detect` with --out pointing at this directory first");
  }
  const json report = read_json(run_dir / "report.json");
  const std::vector<Observation> observations = read_observations(run_dir / "observations.jsonl");
  std::optional<json> baseline;
  std::optional<json> validation;
  if (fs::exists(run_dir / "baseline.json")) baseline = read_json(run_dir / "baseline.json");
  if (fs::exists(run_dir / "validation.json")) validation = read_json(run_dir / "validation.json");

  const json& result = report.at("result");
  const double p_n = result.at("priors").at("p_n").get<double>();
  const double level = result.at("significance_level").get<double>();
  const std::uint64_t seed = report.at("seed").get<std::uint64_t>();

  // Recovery by category.
  std::string rsr = "category,n,recovered,rsr\n";
  for (const auto& [name, cat] : result.at("activity").at("per_category_rsr").items()) {
    rsr += name + "," + std::to_string(cat.at("n").get<std::size_t>()) + "," +
           std::to_string(cat.at("recovered").get<std::size_t>()) + "," +
           num(cat.at("rsr").get<double>()) + "\n";
  }

  // Significance against N over prefixes of the observation log.
  std::vector<int> outcomes;
  std::map<std::string, std::vector<int>> by_entry;
  std::vector<std::string> entry_order;
  for (const Observation& o : observations) {
    if (o.outcome.transport_failed) continue;
    outcomes.push_back(o.outcome.o);
    auto [it, inserted] = by_entry.try_emplace(o.probe.entry_id);
    if (inserted) entry_order.push_back(o.probe.entry_id);
    it->second.push_back(o.outcome.o);
  }
  std::string pvalue = "source,n,p_hat,log10_p\n";
  const std::size_t step = std::max<std::size_t>(1, outcomes.size() / 50);
  std::size_t recovered = 0;
  for (std::size_t n = 1; n <= outcomes.size(); ++n) {
    recovered += static_cast<std::size_t>(outcomes[n - 1]);
    if (n % step != 0 && n != outcomes.size()) continue;
    const double p_hat = static_cast<double>(recovered) / static_cast<double>(n);
    pvalue += "observed," + std::to_string(n) + "," + num(p_hat) + "," +
              num(log10_significance(p_hat, p_n, n)) + "\n";
  }
  if (validation) {
    for (const json& cell : validation->at("validation").at("lemma")) {
      pvalue += "simulated," + std::to_string(cell.at("n").get<std::size_t>()) + ",," +
                num(cell.at("median_log10_p_member").get<double>()) + "\n";
    }
  }

  // Detection rate over random subsets of K entries.
  const json& labels = report.at("dataset").at("labels");
  const std::size_t members = labels.at("member").get<std::size_t>();
  const std::size_t nonmembers = labels.at("nonmember").get<std::size_t>();
  const std::size_t unlabeled = labels.at("unlabeled").get<std::size_t>();
  const bool all_members = members > 0 && nonmembers == 0 && unlabeled == 0;
  const bool all_nonmembers = nonmembers > 0 && members == 0 && unlabeled == 0;
  constexpr std::size_t kSubsamples = 200;
  std::string accuracy = "k,n_mean,detection_rate,accuracy\n";
  Rng rng(derive_seed(seed, "accuracy-vs-k"));
  std::vector<std::string> pool = entry_order;
  for (std::size_t k = 1; k <= pool.size(); ++k) {
    std::size_t detected = 0;
    std::size_t total_n = 0;
    for (std::size_t b = 0; b < kSubsamples; ++b) {
      shuffle(pool, rng);
      std::size_t n = 0;
      std::size_t hits = 0;
      for (std::size_t i = 0; i < k; ++i) {
        for (int o : by_entry.at(pool[i])) {
          ++n;
          hits += static_cast<std::size_t>(o);
        }
      }
      total_n += n;
      if (n > 0 && significance(static_cast<double>(hits) / static_cast<double>(n), p_n, n) < level) {
        ++detected;
      }
    }
    const double rate = static_cast<double>(detected) / kSubsamples;
    std::string acc;
    if (all_members) acc = num(rate);
    if (all_nonmembers) acc = num(1.0 - rate);
    accuracy += std::to_string(k) + "," + num(static_cast<double>(total_n) / kSubsamples) + "," +
                num(rate) + "," + acc + "\n";
  }

  write_file(run_dir / "plot_rsr_by_category.csv", rsr);
  write_file(run_dir / "plot_pvalue_vs_n.csv", pvalue);
  write_file(run_dir / "plot_accuracy_vs_k.csv", accuracy);

  json consolidated = {{"schema_version", kReportSchemaVersion},
                       {"tool", "isotrace"},
                       {"command", "report"},
                       {"config_hash", report.at("config_hash")},
                       {"seed", seed},
                       {"p_n_provenance", report.at("p_n_provenance")},
                       {"verdict", report.at("verdict")},
                       {"activity", result},
                       {"dataset", report.at("dataset")},
                       {"backend", report.at("backend")},
                       {"baseline", baseline ? baseline->at("metrics") : json(nullptr)},
                       {"validation", validation ? validation->at("validation") : json(nullptr)},
                       {"plots",
                        {{"rsr_by_category", "plot_rsr_by_category.csv"},
                         {"pvalue_vs_n", "plot_pvalue_vs_n.csv"},
                         {"accuracy_vs_k", "plot_accuracy_vs_k.csv"}}}};
  write_json(run_dir / "consolidated_report.json", consolidated);
  return consolidated;
}

}  // namespace isotrace

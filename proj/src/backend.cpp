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

#include "isotrace/backend.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include "httplib.h"
#include "isotrace/digest.hpp"
#include "isotrace/error.hpp"
#include "isotrace/random.hpp"
#include "isotrace/text.hpp"

namespace isotrace {

namespace fs = std::filesystem;

nlohmann::json SamplingParams::to_json() const {
  return {{"temperature", temperature}, {"max_tokens", max_tokens}};
}

// ---------------------------------------------------------------------------
// Clocks, limiter, retry.

Clock::TimePoint SteadyClock::now() {
  return std::chrono::time_point_cast<Duration>(std::chrono::steady_clock::now());
}

void SteadyClock::sleep_until(TimePoint t) { std::this_thread::sleep_until(t); }

Clock::TimePoint ManualClock::now() {
  std::lock_guard lock(mutex_);
  return now_;
}

void ManualClock::sleep_until(TimePoint t) {
  std::lock_guard lock(mutex_);
  if (t > now_) now_ = t;
}

void ManualClock::advance(Duration d) {
  std::lock_guard lock(mutex_);
  now_ += d;
}

RateLimiter::RateLimiter(double requests_per_second, Clock& clock)
    : capacity_(requests_per_second <= 0.0
                    ? 0
                    : std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(requests_per_second)))),
      clock_(clock) {}

void RateLimiter::acquire() {
  if (capacity_ == 0) return;
  constexpr auto kWindow = std::chrono::seconds(1);
  std::lock_guard lock(mutex_);
  for (;;) {
    const Clock::TimePoint now = clock_.now();
    while (!recent_.empty() && recent_.front() + kWindow <= now) recent_.pop_front();
    if (recent_.size() < capacity_) {
      recent_.push_back(now);
      return;
    }
    clock_.sleep_until(recent_.front() + kWindow);
  }
}

std::chrono::duration<double> RetryPolicy::delay_before_retry(int retry) const {
  return base_delay * std::pow(factor, retry - 1);
}

// ---------------------------------------------------------------------------
// HTTP chat backend.

namespace {

void split_endpoint(const std::string& endpoint, std::string& scheme_host_port,
                    std::string& path_prefix) {
  const auto scheme_end = endpoint.find("://");
  if (scheme_end == std::string::npos) {
    throw ConfigError("backend endpoint '" + endpoint + "' needs an http:// or https:// scheme");
  }
  const auto path_start = endpoint.find('/', scheme_end + 3);
  if (path_start == std::string::npos) {
    scheme_host_port = endpoint;
    path_prefix.clear();
  } else {
    scheme_host_port = endpoint.substr(0, path_start);
    path_prefix = endpoint.substr(path_start);
  }
  while (!path_prefix.empty() && path_prefix.back() == '/') path_prefix.pop_back();
}

bool retryable_status(int status) { return status == 429 || (status >= 500 && status <= 599); }

}  // namespace

HttpChatBackend::HttpChatBackend(HttpChatConfig config, Clock* clock, RateLimiter* limiter)
    : config_(std::move(config)), clock_(clock ? clock : &steady_), limiter_(limiter) {
  if (config_.endpoint.empty()) throw ConfigError("http-chat backend needs an endpoint");
  if (config_.model.empty()) throw ConfigError("http-chat backend needs a model name");
  split_endpoint(config_.endpoint, scheme_host_port_, path_prefix_);
}

BackendIdentity HttpChatBackend::identity() const {
  return {"http-chat", config_.endpoint, config_.model};
}

nlohmann::json HttpChatBackend::build_request_body(const std::string& model,
                                                   const Request& request) {
  return {{"model", model},
          {"messages", nlohmann::json::array({{{"role", "user"}, {"content", request.prompt}}})},
          {"temperature", request.params.temperature},
          {"max_tokens", request.params.max_tokens}};
}

std::string HttpChatBackend::extract_content(const std::string& body) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::parse_error&) {
    throw TransportError("malformed response body: not JSON");
  }
  const nlohmann::json::json_pointer pointer("/choices/0/message/content");
  if (!j.is_object() || !j.contains(pointer) || !j.at(pointer).is_string()) {
    throw TransportError("malformed response body: missing choices[0].message.content");
  }
  return j.at(pointer).get<std::string>();
}

Completion HttpChatBackend::attempt(const Request& request) {
  if (limiter_ != nullptr) limiter_->acquire();
  httplib::Client client(scheme_host_port_);
  const auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  httplib::Headers headers;
  if (!config_.token.empty()) headers.emplace("Authorization", "Bearer " + config_.token);
  const std::string body = build_request_body(config_.model, request).dump();
  auto result = client.Post(path_prefix_ + "/chat/completions", headers, body, "application/json");
  if (!result) {
    throw TransportError("request failed: " + httplib::to_string(result.error()), 0, true);
  }
  if (result->status < 200 || result->status > 299) {
    throw TransportError("HTTP status " + std::to_string(result->status), result->status,
                         retryable_status(result->status));
  }
  Completion c;
  c.raw = result->body;
  c.text = extract_content(result->body);
  return c;
}

Completion HttpChatBackend::complete(const Request& request) {
  for (int attempt_index = 1;; ++attempt_index) {
    try {
      Completion c = attempt(request);
      c.retries = attempt_index - 1;
      return c;
    } catch (const TransportError& e) {
      if (!e.retryable() || attempt_index >= config_.retry.max_attempts) throw;
      const auto delay = config_.retry.delay_before_retry(attempt_index);
      spdlog::debug("retrying after {} ({:.2f}s backoff)", e.what(), delay.count());
      clock_->sleep_for(std::chrono::duration_cast<Clock::Duration>(delay));
    }
  }
}

// ---------------------------------------------------------------------------
// Simulator.

namespace {

constexpr const char* kAnswerFrames[] = {
    "The missing word is \"{}\".", "{}", "Answer: **{}**", "I would fill the blank with '{}'.",
    "{}.", "Most likely: {}",
};

std::string frame_answer(std::string_view frame, const std::string& word) {
  std::string out(frame);
  out.replace(out.find("{}"), 2, word);
  return out;
}

}  // namespace

SimulatedMemorizer::SimulatedMemorizer(SimulatorConfig config) : config_(std::move(config)) {
  auto in_unit = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!in_unit(config_.p_t) || !in_unit(config_.p_n) || !in_unit(config_.attack_alpha) ||
      !in_unit(config_.paraphrase_keep_rate)) {
    throw ConfigError("simulator probabilities must lie in [0, 1]");
  }
}

BackendIdentity SimulatedMemorizer::identity() const {
  std::string members;
  for (const std::string& id : config_.member_ids) members += id + "\n";
  nlohmann::json settings = {{"p_t", config_.p_t},
                             {"p_n", config_.p_n},
                             {"seed", config_.seed},
                             {"attack_alpha", config_.attack_alpha},
                             {"continuation", config_.continuation == ContinuationMode::kParaphrase
                                                  ? "paraphrase"
                                                  : "verbatim-members"},
                             {"keep_rate", config_.paraphrase_keep_rate},
                             {"members", sha256_hex(members)}};
  return {"simulator", "", settings.dump()};
}

Completion SimulatedMemorizer::complete(const Request& request) {
  ++calls_;
  Completion c;
  if (!request.hint) {
    c.text = "I am not sure which option is intended.";
  } else if (request.hint->kind == RequestKind::kCloze) {
    c.text = answer_cloze(request, *request.hint);
  } else {
    c.text = answer_continuation(request, *request.hint);
  }
  c.raw = nlohmann::json{{"simulated", true}, {"content", c.text}}.dump();
  return c;
}

std::string SimulatedMemorizer::answer_cloze(const Request& request,
                                             const GroundTruthHint& hint) const {
  const std::size_t n = hint.candidates.size();
  if (n == 0 || hint.target_index >= n) return "There are no options to choose from.";
  Rng rng(derive_seed(config_.seed, request.prompt));
  const bool member = config_.member_ids.contains(hint.entry_id);
  std::size_t choice;
  if (member && bernoulli(rng, config_.attack_alpha)) {
    choice = uniform_index(rng, n);
  } else if (bernoulli(rng, member ? config_.p_t : config_.p_n) || n == 1) {
    choice = hint.target_index;
  } else {
    choice = uniform_index(rng, n - 1);
    if (choice >= hint.target_index) ++choice;
  }
  std::string word = hint.candidates[choice];
  if (!word.empty() && word[0] >= 'a' && word[0] <= 'z' && bernoulli(rng, 0.3)) {
    word[0] = static_cast<char>(word[0] - 'a' + 'A');
  }
  const std::size_t frame = uniform_index(rng, std::size(kAnswerFrames));
  return frame_answer(kAnswerFrames[frame], word);
}

std::string SimulatedMemorizer::answer_continuation(const Request& request,
                                                    const GroundTruthHint& hint) const {
  const bool member = config_.member_ids.contains(hint.entry_id);
  if (member && config_.continuation == ContinuationMode::kVerbatimMembers) return hint.reference;
  Rng rng(derive_seed(config_.seed, request.prompt));
  std::vector<std::string> tokens = tokenize(hint.reference);
  for (std::string& token : tokens) {
    if (bernoulli(rng, config_.paraphrase_keep_rate) || config_.noise_vocabulary.empty()) continue;
    token = config_.noise_vocabulary[uniform_index(rng, config_.noise_vocabulary.size())];
  }
  return detokenize(tokens);
}

// ---------------------------------------------------------------------------
// Cache and decorators.

ResponseCache::ResponseCache(fs::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec) throw ConfigError("cannot create cache directory " + dir_.string() + ": " + ec.message());
}

std::string ResponseCache::key(const BackendIdentity& identity, const Request& request) {
  const nlohmann::json canonical = {{"kind", identity.kind},
                                    {"endpoint", identity.endpoint},
                                    {"model", identity.model},
                                    {"prompt", request.prompt},
                                    {"params", request.params.to_json()}};
  return sha256_hex(canonical.dump());
}

fs::path ResponseCache::path_for(const std::string& key) const { return dir_ / (key + ".json"); }

std::optional<Completion> ResponseCache::get(const std::string& key) const {
  std::lock_guard lock(mutex_);
  const fs::path path = path_for(key);
  std::ifstream in(path);
  if (!in) return std::nullopt;
  try {
    const nlohmann::json j = nlohmann::json::parse(in);
    if (j.at("key").get<std::string>() != key) throw std::runtime_error("key mismatch");
    Completion c;
    c.raw = j.at("raw").get<std::string>();
    c.text = j.at("text").get<std::string>();
    c.cached = true;
    return c;
  } catch (const std::exception& e) {
    spdlog::warn("skipping corrupt cache entry {}: {}", path.string(), e.what());
    return std::nullopt;
  }
}

void ResponseCache::put(const std::string& key, const Completion& completion) {
  std::lock_guard lock(mutex_);
  const fs::path path = path_for(key);
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    out << nlohmann::json{{"key", key}, {"raw", completion.raw}, {"text", completion.text}}.dump();
    if (!out) throw ConfigError("cannot write cache entry " + tmp.string());
  }
  fs::rename(tmp, path);
}

Completion CachingBackend::complete(const Request& request) {
  const std::string key = ResponseCache::key(inner_.identity(), request);
  if (auto hit = cache_.get(key)) return *hit;
  ++misses_;
  Completion c = inner_.complete(request);
  cache_.put(key, c);
  return c;
}

Completion RateLimitedBackend::complete(const Request& request) {
  limiter_.acquire();
  return inner_.complete(request);
}

// ---------------------------------------------------------------------------
// Spec.

namespace {

template <typename T>
T field(const nlohmann::json& j, const char* name, T fallback) {
  if (!j.contains(name)) return fallback;
  try {
    return j.at(name).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string("backend.") + name + " has the wrong type");
  }
}

}  // namespace

BackendSpec BackendSpec::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("backend must be an object");
  BackendSpec spec;
  const std::string kind = field<std::string>(j, "kind", "");
  if (kind == "http-chat") {
    spec.kind = BackendKind::kHttpChat;
  } else if (kind == "simulator") {
    spec.kind = BackendKind::kSimulator;
  } else {
    throw ConfigError("backend.kind must be \"http-chat\" or \"simulator\"");
  }
  spec.endpoint = field<std::string>(j, "endpoint", "");
  spec.model = field<std::string>(j, "model", "");
  spec.token_env = field<std::string>(j, "token_env", "");
  spec.p_t = field<double>(j, "p_t", spec.p_t);
  spec.p_n = field<double>(j, "p_n", spec.p_n);
  spec.seed = field<std::uint64_t>(j, "seed", spec.seed);
  spec.attack_alpha = field<double>(j, "attack_alpha", spec.attack_alpha);
  const std::string continuation = field<std::string>(j, "continuation", "paraphrase");
  if (continuation == "paraphrase") {
    spec.continuation = ContinuationMode::kParaphrase;
  } else if (continuation == "verbatim-members") {
    spec.continuation = ContinuationMode::kVerbatimMembers;
  } else {
    throw ConfigError("backend.continuation must be \"paraphrase\" or \"verbatim-members\"");
  }
  if (j.contains("members")) {
    const auto& m = j.at("members");
    if (m.is_string() && m == "labels") {
      spec.members_from_labels = true;
    } else if (m.is_array()) {
      spec.members_from_labels = false;
      for (const auto& id : m) {
        if (!id.is_string()) throw ConfigError("backend.members must list string ids");
        spec.member_ids.push_back(id.get<std::string>());
      }
    } else {
      throw ConfigError("backend.members must be \"labels\" or a list of ids");
    }
  }
  spec.rate_limit = field<double>(j, "rate_limit", spec.rate_limit);
  spec.timeout_seconds = field<double>(j, "timeout", spec.timeout_seconds);
  spec.validate();
  return spec;
}

nlohmann::json BackendSpec::to_json() const {
  nlohmann::json j = {{"rate_limit", rate_limit}, {"timeout", timeout_seconds}};
  if (kind == BackendKind::kHttpChat) {
    j["kind"] = "http-chat";
    j["endpoint"] = endpoint;
    j["model"] = model;
    j["token_env"] = token_env;
  } else {
    j["kind"] = "simulator";
    j["p_t"] = p_t;
    j["p_n"] = p_n;
    j["seed"] = seed;
    j["attack_alpha"] = attack_alpha;
    j["continuation"] =
        continuation == ContinuationMode::kParaphrase ? "paraphrase" : "verbatim-members";
    if (members_from_labels) {
      j["members"] = "labels";
    } else {
      j["members"] = member_ids;
    }
  }
  return j;
}

void BackendSpec::validate() const {
  if (kind == BackendKind::kHttpChat) {
    if (endpoint.empty()) throw ConfigError("backend.endpoint is required for http-chat");
    if (model.empty()) throw ConfigError("backend.model is required for http-chat");
  } else {
    if (!(0.0 < p_n && p_n < p_t && p_t < 1.0)) {
      throw ConfigError("backend priors must satisfy 0 < p_n < p_t < 1");
    }
    if (!(attack_alpha >= 0.0 && attack_alpha < 1.0)) {
      throw ConfigError("backend.attack_alpha must lie in [0, 1)");
    }
  }
  if (rate_limit < 0.0) throw ConfigError("backend.rate_limit must be non-negative");
  if (!(timeout_seconds > 0.0)) throw ConfigError("backend.timeout must be positive");
}

std::unique_ptr<Backend> make_backend(const BackendSpec& spec, std::set<std::string> member_ids,
                                      std::vector<std::string> noise_vocabulary,
                                      RateLimiter* limiter) {
  if (spec.kind == BackendKind::kHttpChat) {
    HttpChatConfig config;
    config.endpoint = spec.endpoint;
    config.model = spec.model;
    if (!spec.token_env.empty()) {
      const char* token = std::getenv(spec.token_env.c_str());
      if (token == nullptr) {
        throw ConfigError("environment variable " + spec.token_env + " is not set",
                          "export the API token under the name given in backend.token_env");
      }
      config.token = token;
    }
    config.timeout = std::chrono::duration<double>(spec.timeout_seconds);
    return std::make_unique<HttpChatBackend>(std::move(config), nullptr, limiter);
  }
  SimulatorConfig config;
  config.member_ids = std::move(member_ids);
  config.p_t = spec.p_t;
  config.p_n = spec.p_n;
  config.seed = spec.seed;
  config.attack_alpha = spec.attack_alpha;
  config.continuation = spec.continuation;
  config.noise_vocabulary = std::move(noise_vocabulary);
  return std::make_unique<SimulatedMemorizer>(std::move(config));
}

}  // namespace isotrace

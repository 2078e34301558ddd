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

#ifndef ISOTRACE_BACKEND_HPP_
#define ISOTRACE_BACKEND_HPP_

#include <atomic>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

namespace isotrace {

struct SamplingParams {
  double temperature = 0.0;
  int max_tokens = 32;

  nlohmann::json to_json() const;
  friend bool operator==(const SamplingParams&, const SamplingParams&) = default;
};

enum class RequestKind { kCloze, kContinuation };

// Ground truth attached to a request for simulated backends only. Real
// backends never see it and it is not part of the cache key.
struct GroundTruthHint {
  RequestKind kind = RequestKind::kCloze;
  std::string entry_id;
  std::vector<std::string> candidates;
  std::size_t target_index = 0;
  std::string reference;
};

struct Request {
  std::string prompt;
  SamplingParams params;
  std::optional<GroundTruthHint> hint;
};

struct Completion {
  std::string text;
  // Raw response body as received (for http-chat) or produced.
  std::string raw;
  int retries = 0;
  bool cached = false;
};

// Identifies a backend for cache keying and report provenance.
struct BackendIdentity {
  std::string kind;
  std::string endpoint;
  std::string model;
};

// y = M(x): the only access to the audited model. Implementations are
// thread-safe. Failures surface as TransportError.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual Completion complete(const Request& request) = 0;
  virtual BackendIdentity identity() const = 0;
};

// ---------------------------------------------------------------------------
// Time, retry and rate limiting.

class Clock {
 public:
  using Duration = std::chrono::nanoseconds;
  using TimePoint = std::chrono::time_point<std::chrono::steady_clock, Duration>;

  virtual ~Clock() = default;
  virtual TimePoint now() = 0;
  virtual void sleep_until(TimePoint t) = 0;
  void sleep_for(Duration d) { sleep_until(now() + d); }
};

class SteadyClock final : public Clock {
 public:
  TimePoint now() override;
  void sleep_until(TimePoint t) override;
};

// Test clock: sleeping advances time instantly.
class ManualClock final : public Clock {
 public:
  TimePoint now() override;
  void sleep_until(TimePoint t) override;
  void advance(Duration d);

 private:
  std::mutex mutex_;
  TimePoint now_{};
};

// Sliding-window limiter: no half-open 1 s window holds more than
// max(1, floor(requests_per_second)) acquisitions. A rate of 0 disables it.
class RateLimiter {
 public:
  RateLimiter(double requests_per_second, Clock& clock);
  void acquire();
  std::size_t capacity() const { return capacity_; }

 private:
  std::size_t capacity_;
  Clock& clock_;
  std::mutex mutex_;
  std::deque<Clock::TimePoint> recent_;
};

// Exponential backoff on retryable transport errors (timeouts, 429, 5xx).
struct RetryPolicy {
  int max_attempts = 5;
  std::chrono::duration<double> base_delay{0.5};
  double factor = 2.0;

  std::chrono::duration<double> delay_before_retry(int retry) const;
};

// ---------------------------------------------------------------------------
// Backends.

struct HttpChatConfig {
  std::string endpoint;  // e.g. "https://api.example.com/v1"
  std::string model;
  std::string token;     // resolved secret, may be empty
  std::chrono::duration<double> timeout{60.0};
  RetryPolicy retry;
};

// Chat-completions client: POST {endpoint}/chat/completions with
// {"model", "messages": [{"role": "user", "content"}], "temperature",
// "max_tokens"}; the answer is read from choices[0].message.content.
class HttpChatBackend final : public Backend {
 public:
  // `clock` drives backoff sleeps (steady clock when null); `limiter`, when
  // set, is acquired before every attempt including retries.
  explicit HttpChatBackend(HttpChatConfig config, Clock* clock = nullptr,
                           RateLimiter* limiter = nullptr);
  Completion complete(const Request& request) override;
  BackendIdentity identity() const override;

  static nlohmann::json build_request_body(const std::string& model, const Request& request);
  // Throws TransportError when the body does not carry a message content.
  static std::string extract_content(const std::string& body);

 private:
  Completion attempt(const Request& request);

  HttpChatConfig config_;
  std::string scheme_host_port_;
  std::string path_prefix_;
  SteadyClock steady_;
  Clock* clock_;
  RateLimiter* limiter_;
};

enum class ContinuationMode { kParaphrase, kVerbatimMembers };

struct SimulatorConfig {
  std::set<std::string> member_ids;
  double p_t = 0.76;
  double p_n = 0.545;
  std::uint64_t seed = 0;
  // Fraction of member knowledge destroyed by a replacement attack; attacked
  // probes are answered uniformly at random among the candidates.
  double attack_alpha = 0.0;
  ContinuationMode continuation = ContinuationMode::kParaphrase;
  // Probability a reference token survives paraphrasing.
  double paraphrase_keep_rate = 0.3;
  // Replacement words for paraphrase noise.
  std::vector<std::string> noise_vocabulary;
};

// Answers cloze probes for member entries with the target at rate p_t (p_n
// otherwise), a uniformly random other candidate on a miss, wrapped in one of
// several sentence frames. Every draw comes from a generator seeded by
// (seed, prompt), so responses do not depend on call order.
class SimulatedMemorizer final : public Backend {
 public:
  explicit SimulatedMemorizer(SimulatorConfig config);
  Completion complete(const Request& request) override;
  BackendIdentity identity() const override;

  std::size_t calls() const { return calls_.load(); }

 private:
  std::string answer_cloze(const Request& request, const GroundTruthHint& hint) const;
  std::string answer_continuation(const Request& request, const GroundTruthHint& hint) const;

  SimulatorConfig config_;
  std::atomic<std::size_t> calls_{0};
};

// ---------------------------------------------------------------------------
// Decorators.

// Content-addressed response store: one JSON file per key under `dir`.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir);

  // Lowercase hex SHA-256 of the canonical JSON of identity, prompt and params.
  static std::string key(const BackendIdentity& identity, const Request& request);

  // nullopt on a miss. Corrupt files are logged and treated as misses.
  std::optional<Completion> get(const std::string& key) const;
  void put(const std::string& key, const Completion& completion);
  std::filesystem::path path_for(const std::string& key) const;

 private:
  std::filesystem::path dir_;
  mutable std::mutex mutex_;
};

class CachingBackend final : public Backend {
 public:
  CachingBackend(Backend& inner, ResponseCache& cache) : inner_(inner), cache_(cache) {}
  Completion complete(const Request& request) override;
  BackendIdentity identity() const override { return inner_.identity(); }

  std::size_t misses() const { return misses_.load(); }

 private:
  Backend& inner_;
  ResponseCache& cache_;
  std::atomic<std::size_t> misses_{0};
};

class RateLimitedBackend final : public Backend {
 public:
  RateLimitedBackend(Backend& inner, RateLimiter& limiter) : inner_(inner), limiter_(limiter) {}
  Completion complete(const Request& request) override;
  BackendIdentity identity() const override { return inner_.identity(); }

 private:
  Backend& inner_;
  RateLimiter& limiter_;
};

// ---------------------------------------------------------------------------
// Configuration.

enum class BackendKind { kHttpChat, kSimulator };

struct BackendSpec {
  BackendKind kind = BackendKind::kSimulator;
  // http-chat
  std::string endpoint;
  std::string model;
  std::string token_env;
  // simulator
  double p_t = 0.76;
  double p_n = 0.545;
  std::uint64_t seed = 0;
  double attack_alpha = 0.0;
  ContinuationMode continuation = ContinuationMode::kParaphrase;
  // "labels" takes members from dataset labels; otherwise the listed ids.
  bool members_from_labels = true;
  std::vector<std::string> member_ids;
  // shared
  double rate_limit = 0.0;
  double timeout_seconds = 60.0;

  // Throws ConfigError naming the offending field.
  static BackendSpec from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  void validate() const;
};

// Builds the innermost backend; callers add caching. `limiter` throttles
// http-chat attempts and is ignored by the local simulator.
std::unique_ptr<Backend> make_backend(const BackendSpec& spec, std::set<std::string> member_ids,
                                      std::vector<std::string> noise_vocabulary,
                                      RateLimiter* limiter = nullptr);

}  // namespace isotrace

#endif  // ISOTRACE_BACKEND_HPP_

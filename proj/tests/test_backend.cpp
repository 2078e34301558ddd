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

#include <gtest/gtest.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "fakes.hpp"
#include "isotrace/backend.hpp"
#include "isotrace/error.hpp"
#include "isotrace/probe.hpp"
#include "isotrace/random.hpp"
#include "isotrace/text.hpp"
#include "mock_server.hpp"
#include "property.hpp"

namespace isotrace {
namespace {

namespace fs = std::filesystem;
using namespace std::chrono_literals;
using testing::MockChatServer;
using testing::MockReply;

Request prompt(const std::string& text, double temperature = 0.0) {
  Request r;
  r.prompt = text;
  r.params.temperature = temperature;
  return r;
}

HttpChatConfig chat_config(const std::string& endpoint) {
  HttpChatConfig c;
  c.endpoint = endpoint;
  c.model = "mock-1";
  c.timeout = 5s;
  return c;
}

class ScratchDir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           (std::string("isotrace-backend-") +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path dir_;
};

TEST(Wire, RequestBodyShape) {
  Request r = prompt("Fill ___", 0.7);
  r.params.max_tokens = 12;
  const auto body = HttpChatBackend::build_request_body("m", r);
  EXPECT_EQ(body.at("model"), "m");
  EXPECT_EQ(body.at("messages").size(), 1u);
  EXPECT_EQ(body.at("messages").at(0).at("role"), "user");
  EXPECT_EQ(body.at("messages").at(0).at("content"), "Fill ___");
  EXPECT_DOUBLE_EQ(body.at("temperature").get<double>(), 0.7);
  EXPECT_EQ(body.at("max_tokens"), 12);
}

TEST(Wire, ExtractContent) {
  EXPECT_EQ(HttpChatBackend::extract_content(testing::chat_body("vessel")), "vessel");
  EXPECT_THROW(HttpChatBackend::extract_content("not json"), TransportError);
  EXPECT_THROW(HttpChatBackend::extract_content("{\"choices\": []}"), TransportError);
  EXPECT_THROW(HttpChatBackend::extract_content("{\"choices\": [{\"message\": {\"content\": 3}}]}"),
               TransportError);
}

TEST(HttpChat, EchoRoundTrip) {
  MockChatServer server(MockChatServer::echo);
  HttpChatBackend backend(chat_config(server.endpoint()));
  Rng rng(51);
  for (std::size_t i = 0; i < 25; ++i) {
    const std::string text = testing::messy_text(rng) + " \"quoted\" \\ ünïcode";
    const Completion c = backend.complete(prompt(text, testing::uniform(rng, 0.0, 1.0)));
    EXPECT_EQ(c.text, text);
    EXPECT_EQ(c.retries, 0);
    EXPECT_FALSE(c.cached);
  }
  EXPECT_EQ(server.calls(), 25u);
  const BackendIdentity id = backend.identity();
  EXPECT_EQ(id.kind, "http-chat");
  EXPECT_EQ(id.model, "mock-1");
}

TEST(HttpChat, SendsBearerToken) {
  std::string auth;
  MockChatServer server([&](const nlohmann::json&, const httplib::Request& req, std::size_t) {
    auth = req.get_header_value("Authorization");
    return MockReply{200, testing::chat_body("ok")};
  });
  HttpChatConfig config = chat_config(server.endpoint());
  config.token = "sekrit";
  HttpChatBackend(config).complete(prompt("x"));
  EXPECT_EQ(auth, "Bearer sekrit");
}

TEST(HttpChat, RetriesTooManyRequestsWithBackoff) {
  MockChatServer server([](const nlohmann::json&, const httplib::Request&, std::size_t call) {
    return call < 2 ? MockReply{429, "{}"} : MockReply{200, testing::chat_body("boat")};
  });
  ManualClock clock;
  const auto start = clock.now();
  HttpChatBackend backend(chat_config(server.endpoint()), &clock);
  const Completion c = backend.complete(prompt("x"));
  EXPECT_EQ(c.text, "boat");
  EXPECT_EQ(c.retries, 2);
  EXPECT_EQ(server.calls(), 3u);
  // 0.5 s then 1.0 s of backoff.
  EXPECT_EQ(clock.now() - start, std::chrono::milliseconds(1500));
}

TEST(HttpChat, GivesUpAfterMaxAttempts) {
  MockChatServer server([](const nlohmann::json&, const httplib::Request&, std::size_t) {
    return MockReply{503, "{}"};
  });
  ManualClock clock;
  HttpChatBackend backend(chat_config(server.endpoint()), &clock);
  try {
    backend.complete(prompt("x"));
    FAIL() << "expected TransportError";
  } catch (const TransportError& e) {
    EXPECT_EQ(e.status(), 503);
  }
  EXPECT_EQ(server.calls(), 5u);
}

TEST(HttpChat, DoesNotRetryClientErrorsOrBadBodies) {
  MockChatServer server([](const nlohmann::json&, const httplib::Request&, std::size_t call) {
    return call == 0 ? MockReply{400, "{}"} : MockReply{200, "{\"oops\": true}"};
  });
  ManualClock clock;
  HttpChatBackend backend(chat_config(server.endpoint()), &clock);
  EXPECT_THROW(backend.complete(prompt("x")), TransportError);
  EXPECT_THROW(backend.complete(prompt("x")), TransportError);
  EXPECT_EQ(server.calls(), 2u);
}

TEST(HttpChat, ConnectionFailureIsRetryable) {
  std::string endpoint;
  {
    MockChatServer closed(MockChatServer::echo);
    endpoint = closed.endpoint();
  }
  HttpChatConfig config = chat_config(endpoint);
  config.retry.max_attempts = 2;
  config.timeout = 1s;
  ManualClock clock;
  try {
    HttpChatBackend(config, &clock).complete(prompt("x"));
    FAIL() << "expected TransportError";
  } catch (const TransportError& e) {
    EXPECT_EQ(e.status(), 0);
    EXPECT_TRUE(e.retryable());
  }
}

TEST(HttpChat, RejectsBadConfig) {
  EXPECT_THROW(HttpChatBackend(chat_config("")), ConfigError);
  EXPECT_THROW(HttpChatBackend(chat_config("localhost:80")), ConfigError);
  HttpChatConfig no_model = chat_config("http://localhost");
  no_model.model.clear();
  EXPECT_THROW(HttpChatBackend{no_model}, ConfigError);
}

TEST(Retry, ExponentialDelays) {
  const RetryPolicy p;
  EXPECT_DOUBLE_EQ(p.delay_before_retry(1).count(), 0.5);
  EXPECT_DOUBLE_EQ(p.delay_before_retry(2).count(), 1.0);
  EXPECT_DOUBLE_EQ(p.delay_before_retry(4).count(), 4.0);
  EXPECT_EQ(p.max_attempts, 5);
}

TEST_F(ScratchDir, CacheContract) {
  MockChatServer server(MockChatServer::echo);
  HttpChatBackend http(chat_config(server.endpoint()));
  ResponseCache cache(dir_);
  CachingBackend cached(http, cache);

  const Completion first = cached.complete(prompt("same"));
  const Completion second = cached.complete(prompt("same"));
  EXPECT_EQ(server.calls(), 1u);
  EXPECT_FALSE(first.cached);
  EXPECT_TRUE(second.cached);
  EXPECT_EQ(second.text, first.text);
  EXPECT_EQ(second.raw, first.raw);

  cached.complete(prompt("same", 0.5));
  EXPECT_EQ(server.calls(), 2u);

  fs::remove(cache.path_for(ResponseCache::key(http.identity(), prompt("same"))));
  cached.complete(prompt("same"));
  EXPECT_EQ(server.calls(), 3u);
  EXPECT_EQ(cached.misses(), 3u);
}

TEST_F(ScratchDir, CorruptCacheEntryIsAMiss) {
  testing::ScriptedBackend inner([](const Request&, std::size_t) { return "v"; });
  ResponseCache cache(dir_);
  CachingBackend cached(inner, cache);
  cached.complete(prompt("p"));
  const fs::path file = cache.path_for(ResponseCache::key(inner.identity(), prompt("p")));
  std::ofstream(file, std::ios::trunc) << "{broken";
  EXPECT_EQ(cached.complete(prompt("p")).text, "v");
  EXPECT_EQ(inner.calls(), 2u);
  EXPECT_TRUE(cached.complete(prompt("p")).cached);
}

TEST(CacheKey, IgnoresHintAndTracksIdentity) {
  Request a = prompt("p");
  Request b = a;
  b.hint = GroundTruthHint{RequestKind::kCloze, "entry", {"x", "y"}, 1, {}};
  const BackendIdentity id{"k", "e", "m"};
  EXPECT_EQ(ResponseCache::key(id, a), ResponseCache::key(id, b));
  EXPECT_NE(ResponseCache::key(id, a), ResponseCache::key({"k", "e", "m2"}, a));
  Request c = a;
  c.params.max_tokens = 99;
  EXPECT_NE(ResponseCache::key(id, a), ResponseCache::key(id, c));
  EXPECT_EQ(ResponseCache::key(id, a).size(), 64u);
}

// Every half-open one-second window over the recorded times holds at most
// `capacity` entries.
std::size_t busiest_window(const std::vector<Clock::TimePoint>& times) {
  std::size_t worst = 0;
  for (std::size_t i = 0; i < times.size(); ++i) {
    std::size_t in_window = 0;
    for (std::size_t j = i; j < times.size() && times[j] < times[i] + 1s; ++j) ++in_window;
    worst = std::max(worst, in_window);
  }
  return worst;
}

TEST(RateLimiter, NeverExceedsWindow) {
  for (double rate : {0.5, 1.0, 3.0, 7.9, 20.0}) {
    ManualClock clock;
    RateLimiter limiter(rate, clock);
    const std::size_t capacity = std::max<std::size_t>(1, static_cast<std::size_t>(rate));
    EXPECT_EQ(limiter.capacity(), capacity);
    std::vector<Clock::TimePoint> times;
    Rng rng(61);
    for (int i = 0; i < 200; ++i) {
      if (bernoulli(rng, 0.3)) clock.advance(std::chrono::milliseconds(uniform_index(rng, 400)));
      limiter.acquire();
      times.push_back(clock.now());
    }
    EXPECT_LE(busiest_window(times), capacity) << "rate " << rate;
    // Saturated: 200 acquisitions need at least (200 / capacity - 1) seconds.
    EXPECT_GE(times.back() - times.front(),
              std::chrono::seconds(200 / capacity - 1) - std::chrono::seconds(1));
  }
}

TEST(RateLimiter, ConcurrentAcquirers) {
  ManualClock clock;
  RateLimiter limiter(4.0, clock);
  std::mutex mutex;
  std::vector<Clock::TimePoint> times;
  {
    std::vector<std::jthread> pool;
    for (int t = 0; t < 4; ++t) {
      pool.emplace_back([&] {
        for (int i = 0; i < 25; ++i) {
          limiter.acquire();
          std::lock_guard lock(mutex);
          times.push_back(clock.now());
        }
      });
    }
  }
  std::sort(times.begin(), times.end());
  ASSERT_EQ(times.size(), 100u);
  EXPECT_LE(busiest_window(times), 4u);
}

TEST(RateLimiter, ZeroDisables) {
  ManualClock clock;
  RateLimiter limiter(0.0, clock);
  for (int i = 0; i < 100; ++i) limiter.acquire();
  EXPECT_EQ(clock.now(), Clock::TimePoint{});
}

TEST(RateLimiter, AppliesToEveryHttpAttempt) {
  MockChatServer server([](const nlohmann::json&, const httplib::Request&, std::size_t call) {
    return call % 2 == 0 ? MockReply{500, "{}"} : MockReply{200, testing::chat_body("ok")};
  });
  ManualClock clock;
  RateLimiter limiter(1.0, clock);
  HttpChatConfig config = chat_config(server.endpoint());
  config.retry.base_delay = std::chrono::duration<double>(0.0);
  HttpChatBackend backend(config, &clock, &limiter);
  for (int i = 0; i < 3; ++i) EXPECT_EQ(backend.complete(prompt("x")).retries, 1);
  EXPECT_EQ(server.calls(), 6u);
  // Six attempts at one per second.
  EXPECT_GE(clock.now() - Clock::TimePoint{}, 5s);
}

Request cloze(const std::string& entry, const std::string& text) {
  Request r = prompt(text);
  r.hint = GroundTruthHint{RequestKind::kCloze, entry, {"boat", "vessel", "ship", "craft"}, 2, {}};
  return r;
}

TEST(Simulator, SeededAndOrderIndependent) {
  SimulatorConfig cfg;
  cfg.member_ids = {"m"};
  cfg.seed = 9;
  SimulatedMemorizer a(cfg);
  SimulatedMemorizer b(cfg);
  std::vector<std::string> forward;
  for (int i = 0; i < 20; ++i) forward.push_back(a.complete(cloze("m", "p" + std::to_string(i))).text);
  for (int i = 19; i >= 0; --i) {
    EXPECT_EQ(b.complete(cloze("m", "p" + std::to_string(i))).text, forward[i]);
  }
  EXPECT_EQ(a.calls(), 20u);
  cfg.seed = 10;
  SimulatedMemorizer c(cfg);
  std::size_t differ = 0;
  for (int i = 0; i < 20; ++i) differ += c.complete(cloze("m", "p" + std::to_string(i))).text != forward[i];
  EXPECT_GT(differ, 0u);
}

double recovery_rate(SimulatedMemorizer& sim, const std::string& entry, std::uint64_t trial,
                     int n) {
  const std::vector<std::string> candidates = {"boat", "vessel", "ship", "craft"};
  int hits = 0;
  for (int i = 0; i < n; ++i) {
    const std::string text = "t" + std::to_string(trial) + "/" + std::to_string(i);
    const auto parsed = parse_response(sim.complete(cloze(entry, text)).text, candidates);
    hits += parsed == 2;
  }
  return static_cast<double>(hits) / n;
}

TEST(Simulator, MemberRateConvergesToPt) {
  SimulatorConfig cfg;
  cfg.member_ids = {"m"};
  cfg.p_t = 0.76;
  SimulatedMemorizer sim(cfg);
  constexpr int kTrials = 200;
  constexpr int kProbes = 400;
  const double band = 3.0 * std::sqrt(0.76 * 0.24 / kProbes);
  int inside = 0;
  for (int t = 0; t < kTrials; ++t) inside += std::abs(recovery_rate(sim, "m", t, kProbes) - 0.76) <= band;
  EXPECT_GE(inside, kTrials * 99 / 100);
}

TEST(Simulator, NonMembersAnswerAtPn) {
  SimulatorConfig cfg;
  cfg.member_ids = {"m"};
  cfg.p_n = 0.545;
  SimulatedMemorizer sim(cfg);
  const double rate = recovery_rate(sim, "other", 0, 10000);
  EXPECT_NEAR(rate, 0.545, 3.0 * std::sqrt(0.545 * 0.455 / 10000));
}

TEST(Simulator, FullAttackIsChance) {
  SimulatorConfig cfg;
  cfg.member_ids = {"m"};
  cfg.p_t = 0.95;
  cfg.attack_alpha = 1.0;
  SimulatedMemorizer sim(cfg);
  EXPECT_NEAR(recovery_rate(sim, "m", 0, 10000), 0.25, 3.0 * std::sqrt(0.25 * 0.75 / 10000));
}

TEST(Simulator, Continuations) {
  SimulatorConfig cfg;
  cfg.member_ids = {"m"};
  cfg.continuation = ContinuationMode::kVerbatimMembers;
  cfg.noise_vocabulary = {"zzz"};
  SimulatedMemorizer sim(cfg);
  Request r = prompt("continue");
  const std::string reference = "the old ship sailed at dawn , quietly";
  r.hint = GroundTruthHint{RequestKind::kContinuation, "m", {}, 0, reference};
  EXPECT_EQ(sim.complete(r).text, reference);
  r.hint->entry_id = "n";
  const std::string paraphrase = sim.complete(r).text;
  EXPECT_NE(paraphrase, reference);
  EXPECT_EQ(tokenize(paraphrase).size(), tokenize(reference).size());
  EXPECT_EQ(sim.complete(prompt("no hint")).text, "I am not sure which option is intended.");
}

TEST(Simulator, RejectsBadProbabilities) {
  SimulatorConfig cfg;
  cfg.p_t = 1.5;
  EXPECT_THROW(SimulatedMemorizer{cfg}, ConfigError);
}

TEST(Spec, JsonRoundTripAndErrors) {
  const auto sim = BackendSpec::from_json(
      {{"kind", "simulator"}, {"p_t", 0.8}, {"p_n", 0.4}, {"seed", 3}, {"members", {"a", "b"}}});
  EXPECT_EQ(sim.kind, BackendKind::kSimulator);
  EXPECT_FALSE(sim.members_from_labels);
  EXPECT_EQ(sim.member_ids, (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(BackendSpec::from_json(sim.to_json()).to_json(), sim.to_json());

  const auto http = BackendSpec::from_json(
      {{"kind", "http-chat"}, {"endpoint", "http://x/v1"}, {"model", "m"}, {"rate_limit", 2}});
  EXPECT_EQ(BackendSpec::from_json(http.to_json()).to_json(), http.to_json());

  EXPECT_THROW(BackendSpec::from_json({{"kind", "magic"}}), ConfigError);
  EXPECT_THROW(BackendSpec::from_json({{"kind", "http-chat"}, {"model", "m"}}), ConfigError);
  EXPECT_THROW(BackendSpec::from_json({{"kind", "simulator"}, {"p_t", 0.3}, {"p_n", 0.5}}),
               ConfigError);
  EXPECT_THROW(BackendSpec::from_json({{"kind", "simulator"}, {"p_t", "high"}}), ConfigError);
  EXPECT_THROW(BackendSpec::from_json({{"kind", "simulator"}, {"members", 3}}), ConfigError);
  EXPECT_THROW(BackendSpec::from_json({{"kind", "simulator"}, {"rate_limit", -1}}), ConfigError);
}

TEST(Spec, MissingTokenEnvironmentVariable) {
  BackendSpec spec;
  spec.kind = BackendKind::kHttpChat;
  spec.endpoint = "http://localhost/v1";
  spec.model = "m";
  spec.token_env = "ISOTRACE_TEST_SURELY_UNSET_TOKEN";
  ::unsetenv(spec.token_env.c_str());
  EXPECT_THROW(make_backend(spec, {}, {}), ConfigError);
  spec.kind = BackendKind::kSimulator;
  EXPECT_EQ(make_backend(spec, {}, {})->identity().kind, "simulator");
}

}  // namespace
}  // namespace isotrace

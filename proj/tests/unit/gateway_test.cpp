#include <gtest/gtest.h>

#include <atomic>
#include <thread>

#include "fixtures.hpp"
#include "histolens/errors.hpp"
#include "histolens/gateway.hpp"
#include "histolens/hashing.hpp"
#include "histolens/structured.hpp"
#include "histolens/text.hpp"

using namespace histolens;

namespace {

const Prompt kPrompt{"persona", "### Task\nquestion"};

ProviderConfig remote_provider() {
  ProviderConfig p;
  p.name = "remote";
  p.api = "openai";
  p.model_id = "m";
  p.credential_env_var = "HISTOLENS_TEST_KEY";
  return p;
}

struct Scripted {
  std::vector<BackendReply> replies;
  std::atomic<std::size_t> calls{0};
  std::shared_ptr<CallbackBackend> backend() {
    return std::make_shared<CallbackBackend>([this](const ProviderConfig&, const Prompt&) {
      const std::size_t i = calls++;
      return replies[std::min(i, replies.size() - 1)];
    });
  }
};

std::shared_ptr<Gateway> gateway_with(const ProviderConfig& p, const std::filesystem::path& cache = {},
                                      std::vector<std::chrono::milliseconds>* sleeps = nullptr) {
  GatewayOptions o;
  o.sleep = [sleeps](std::chrono::milliseconds d) {
    if (sleeps) sleeps->push_back(d);
  };
  o.now = [] { return std::string("2024-01-01T00:00:00Z"); };
  o.read_credential = [](const std::string& var) -> std::optional<std::string> {
    if (var == "HISTOLENS_TEST_KEY") return std::string("secret");
    return std::nullopt;
  };
  return std::make_shared<Gateway>(std::vector<ProviderConfig>{p}, cache, o);
}

BackendReply ok(const std::string& text) { return BackendReply{200, false, text, text, ""}; }
BackendReply status(int s) { return BackendReply{s, false, "", "err", ""}; }

}  // namespace

TEST(ProviderConfig, SecretsInConfigAreRejected) {
  for (const char* field : {"api_key", "token", "secret"}) {
    nlohmann::json j = {{"name", "x"}, {"api", "openai"}, {"credential_env_var", "K"}, {field, "sk-123"}};
    try {
      ProviderConfig::from_json(j);
      FAIL() << field;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::ConfigInvalid);
    }
  }
}

TEST(ProviderConfig, RemoteProviderNeedsEnvVarName) {
  EXPECT_THROW(ProviderConfig::from_json({{"name", "x"}, {"api", "anthropic"}}), Error);
  EXPECT_THROW(ProviderConfig::from_json({{"name", "x"}, {"api", "bogus"}}), Error);
  const auto c = ProviderConfig::from_json({{"name", "x"}, {"api", "anthropic"}, {"credential_env_var", "K"}});
  EXPECT_EQ(c.endpoint, "https://api.anthropic.com/v1/messages");
}

TEST(ProviderConfig, ShippedProvidersLoad) {
  const auto ps = load_provider_configs(fixtures::data_dir() / "providers.json");
  ASSERT_FALSE(ps.empty());
  for (const auto& p : ps) {
    if (p.api == "mock") EXPECT_TRUE(std::filesystem::exists(p.fixture_dir)) << p.fixture_dir;
    else EXPECT_FALSE(p.credential_env_var.empty());
  }
}

TEST(CacheKey, DependsOnEveryComponent) {
  const auto base = remote_provider();
  const auto k = cache_key(base, kPrompt);
  EXPECT_EQ(k.size(), 64u);
  auto other = base;
  other.model_id = "m2";
  EXPECT_NE(cache_key(other, kPrompt), k);
  other = base;
  other.temperature = 0.5;
  EXPECT_NE(cache_key(other, kPrompt), k);
  other = base;
  other.name = "n";
  EXPECT_NE(cache_key(other, kPrompt), k);
  EXPECT_NE(cache_key(base, Prompt{"persona2", kPrompt.user}), k);
  EXPECT_NE(cache_key(base, Prompt{kPrompt.system, kPrompt.user + " "}), k);
  EXPECT_EQ(cache_key(base, kPrompt), k);
}

TEST(Gateway, SecondIdenticalCallIsServedFromCache) {
  fixtures::TempDir dir;
  Scripted s{{ok("answer")}};
  auto gw = gateway_with(remote_provider(), dir.path());
  gw->set_backend("openai", s.backend());
  EXPECT_EQ(gw->complete(kPrompt), "answer");
  EXPECT_EQ(gw->complete(kPrompt), "answer");
  EXPECT_EQ(s.calls.load(), 1u);
  EXPECT_EQ(gw->network_calls(), 1u);
  const auto entry = gw->cache().get(cache_key(remote_provider(), kPrompt));
  ASSERT_TRUE(entry);
  EXPECT_EQ(entry->created_at, "2024-01-01T00:00:00Z");
}

TEST(Gateway, CachePersistsAcrossInstances) {
  fixtures::TempDir dir;
  {
    Scripted s{{ok("persisted")}};
    auto gw = gateway_with(remote_provider(), dir.path());
    gw->set_backend("openai", s.backend());
    gw->complete(kPrompt);
  }
  Scripted never{{status(500)}};
  auto gw = gateway_with(remote_provider(), dir.path());
  gw->set_backend("openai", never.backend());
  EXPECT_EQ(gw->complete(kPrompt), "persisted");
  EXPECT_EQ(never.calls.load(), 0u);
}

TEST(Gateway, CorruptCacheEntryIsRefetched) {
  fixtures::TempDir dir;
  text::write_file(dir.path() / cache_key(remote_provider(), kPrompt), "{not json");
  Scripted s{{ok("fresh")}};
  auto gw = gateway_with(remote_provider(), dir.path());
  gw->set_backend("openai", s.backend());
  fixtures::LogCounter logs;
  EXPECT_EQ(gw->complete(kPrompt), "fresh");
  EXPECT_GE(logs.warnings(), 1u);
}

TEST(Gateway, ConcurrentIdenticalCallsHitBackendOnce) {
  Scripted s{{ok("once")}};
  auto gw = gateway_with(remote_provider());
  gw->set_backend("openai", s.backend());
  std::vector<std::thread> ts;
  for (int i = 0; i < 8; ++i) ts.emplace_back([&] { EXPECT_EQ(gw->complete(kPrompt), "once"); });
  for (auto& t : ts) t.join();
  EXPECT_EQ(s.calls.load(), 1u);
}

TEST(Gateway, TransientFailuresRetryWithExponentialBackoff) {
  std::vector<std::chrono::milliseconds> sleeps;
  Scripted s{{status(503), status(429), ok("third")}};
  auto gw = gateway_with(remote_provider(), {}, &sleeps);
  gw->set_backend("openai", s.backend());
  EXPECT_EQ(gw->complete(kPrompt), "third");
  EXPECT_EQ(s.calls.load(), 3u);
  ASSERT_EQ(sleeps.size(), 2u);
  EXPECT_EQ(sleeps[1], 2 * sleeps[0]);
}

TEST(Gateway, PersistentRateLimitSurfacesAfterRetries) {
  Scripted s{{status(429)}};
  auto gw = gateway_with(remote_provider());
  gw->set_backend("openai", s.backend());
  try {
    gw->complete(kPrompt);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::RateLimitedAfterRetries);
  }
  EXPECT_EQ(s.calls.load(), 3u);
}

TEST(Gateway, TimeoutSurfacesAfterRetries) {
  Scripted s{{BackendReply{0, true, "", "timeout", ""}}};
  auto gw = gateway_with(remote_provider());
  gw->set_backend("openai", s.backend());
  try {
    gw->complete(kPrompt);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Timeout);
  }
}

TEST(Gateway, AuthFailureIsNotRetried) {
  Scripted s{{status(401)}};
  auto gw = gateway_with(remote_provider());
  gw->set_backend("openai", s.backend());
  try {
    gw->complete(kPrompt);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::AuthFailure);
  }
  EXPECT_EQ(s.calls.load(), 1u);
}

TEST(Gateway, ClientErrorIsNotRetried) {
  Scripted s{{status(400)}};
  auto gw = gateway_with(remote_provider());
  gw->set_backend("openai", s.backend());
  try {
    gw->complete(kPrompt);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ProviderError);
  }
  EXPECT_EQ(s.calls.load(), 1u);
}

TEST(Gateway, MissingCredentialFailsBeforeAnyCall) {
  auto p = remote_provider();
  p.credential_env_var = "HISTOLENS_UNSET_VARIABLE";
  Scripted s{{ok("x")}};
  auto gw = gateway_with(p);
  gw->set_backend("openai", s.backend());
  try {
    gw->complete(kPrompt);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::AuthFailure);
  }
  EXPECT_EQ(s.calls.load(), 0u);
}

TEST(Gateway, FailuresAreNotCached) {
  Scripted s{{status(400), ok("later")}};
  auto gw = gateway_with(remote_provider());
  gw->set_backend("openai", s.backend());
  EXPECT_THROW(gw->complete(kPrompt), Error);
  EXPECT_EQ(gw->complete(kPrompt), "later");
}

TEST(Gateway, StructuredRepairRoundsThenSuccess) {
  std::vector<std::string> seen;
  auto gw = gateway_with(remote_provider());
  std::size_t n = 0;
  gw->set_backend("openai", std::make_shared<CallbackBackend>([&](const ProviderConfig&, const Prompt& p) {
                    seen.push_back(p.user);
                    return ++n < 3 ? ok("no json here") : ok(fixtures::classification_reply(Label::Confucian));
                  }));
  const auto j = gw->complete_structured(kPrompt, std::string(structured::kClassification));
  EXPECT_EQ(j.at("label"), "confucian");
  ASSERT_EQ(seen.size(), 3u);
  EXPECT_NE(seen[1].find("Correction required"), std::string::npos);
}

TEST(Gateway, StructuredGivesUpAfterRepairBudget) {
  Scripted s{{ok("still nothing")}};
  auto gw = gateway_with(remote_provider());
  gw->set_backend("openai", s.backend());
  try {
    gw->complete_structured(kPrompt, std::string(structured::kClassification));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnparseableAfterRepairs);
  }
  EXPECT_EQ(s.calls.load(), 1u + structured::kMaxRepairRounds);
}

TEST(RateLimiter, NeverAdmitsMoreThanLimitPerWindow) {
  using Clock = RateLimiter::Clock;
  RateLimiter limiter(3, std::chrono::milliseconds(150));
  std::mutex mu;
  std::vector<Clock::time_point> starts;
  std::vector<std::thread> ts;
  for (int i = 0; i < 8; ++i)
    ts.emplace_back([&] {
      limiter.acquire();
      std::lock_guard lock(mu);
      starts.push_back(Clock::now());
    });
  for (auto& t : ts) t.join();
  std::sort(starts.begin(), starts.end());
  for (std::size_t i = 3; i < starts.size(); ++i)
    EXPECT_GE(starts[i] - starts[i - 3], std::chrono::milliseconds(150));
  EXPECT_THROW(RateLimiter(0, std::chrono::seconds(1)), Error);
}

TEST(MockBackend, KeyedFixtureWinsOverRules) {
  fixtures::TempDir dir;
  auto p = fixtures::mock_provider("mock", dir.path().string());
  text::write_file(dir.path() / "rules.json",
                   R"({"rules": [{"match": ["question"], "scope": "task", "response": "from rule"}]})");
  auto gw = gateway_with(p);
  EXPECT_EQ(gw->complete(kPrompt), "from rule");
  const Prompt other{"persona", "### Task\nquestion two"};
  const CacheEntry keyed{cache_key(p, other), "from key", "", ""};
  text::write_file(dir.path() / keyed.key, keyed.to_json().dump());
  EXPECT_EQ(gw->complete(other), "from key");
}

TEST(MockBackend, TaskScopeIgnoresExemplars) {
  fixtures::TempDir dir;
  auto p = fixtures::mock_provider("mock", dir.path().string());
  text::write_file(dir.path() / "rules.json",
                   R"({"rules": [{"match": ["needle"], "scope": "task", "response": "task hit"},
                                 {"match": ["needle"], "response": "anywhere hit"}]})");
  auto gw = gateway_with(p);
  EXPECT_EQ(gw->complete(Prompt{"", "### Example 1\nneedle\n### Task\nhay"}), "anywhere hit");
  EXPECT_EQ(gw->complete(Prompt{"", "### Example 1\nx\n### Task\nneedle"}), "task hit");
}

TEST(MockBackend, UnknownRequestIsProviderError) {
  fixtures::TempDir dir;
  auto gw = gateway_with(fixtures::mock_provider("mock", dir.path().string()));
  try {
    gw->complete(kPrompt);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ProviderError);
  }
}

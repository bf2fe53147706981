#include <gtest/gtest.h>

#include "histolens/errors.hpp"
#include "histolens/providers.hpp"

using namespace histolens;
namespace pv = histolens::providers;

namespace {

ProviderConfig config(const std::string& api) {
  ProviderConfig c;
  c.name = api;
  c.api = api;
  c.model_id = "model-x";
  c.temperature = 0.0;
  c.max_tokens = 256;
  c.credential_env_var = "K";
  return c;
}

const Prompt kPrompt{"persona", "question"};

}  // namespace

TEST(BuildRequest, Anthropic) {
  const auto r = pv::build_request(config("anthropic"), kPrompt, "k1");
  EXPECT_EQ(r.scheme_host_port, "https://api.anthropic.com");
  EXPECT_EQ(r.path, "/v1/messages");
  EXPECT_EQ(r.headers.at("x-api-key"), "k1");
  const auto body = nlohmann::json::parse(r.body);
  EXPECT_EQ(body.at("system"), "persona");
  EXPECT_EQ(body.at("model"), "model-x");
  EXPECT_EQ(body.at("messages").size(), 1u);
  EXPECT_EQ(body.at("temperature"), 0.0);
}

TEST(BuildRequest, OpenAiCompatibleCarriesSystemMessage) {
  auto c = config("openai");
  c.endpoint = "https://api.moonshot.cn/v1/chat/completions";
  const auto r = pv::build_request(c, kPrompt, "k2");
  EXPECT_EQ(r.scheme_host_port, "https://api.moonshot.cn");
  EXPECT_EQ(r.headers.at("Authorization"), "Bearer k2");
  const auto body = nlohmann::json::parse(r.body);
  ASSERT_EQ(body.at("messages").size(), 2u);
  EXPECT_EQ(body.at("messages")[0].at("role"), "system");
  EXPECT_EQ(body.at("messages")[1].at("content"), "question");
}

TEST(BuildRequest, ErnieTokenInQueryAndTemperatureClamped) {
  const auto r = pv::build_request(config("ernie"), kPrompt, "tok");
  EXPECT_NE(r.path.find("access_token=tok"), std::string::npos);
  const auto body = nlohmann::json::parse(r.body);
  EXPECT_GT(body.at("temperature").get<double>(), 0.0);
  EXPECT_EQ(body.at("system"), "persona");
}

TEST(BuildRequest, CredentialNeverInBodyForHeaderApis) {
  for (const char* api : {"anthropic", "openai"})
    EXPECT_EQ(pv::build_request(config(api), kPrompt, "SECRET-VALUE").body.find("SECRET-VALUE"), std::string::npos);
}

TEST(BuildRequest, MockHasNoHttpAdapter) { EXPECT_THROW(pv::build_request(config("mock"), kPrompt, ""), Error); }

TEST(ParseResponse, Anthropic) {
  const auto r = pv::parse_response(
      "anthropic", 200, R"({"id":"m1","content":[{"type":"text","text":"hel"},{"type":"text","text":"lo"}]})");
  EXPECT_EQ(r.status, 200);
  EXPECT_EQ(r.text, "hello");
}

TEST(ParseResponse, OpenAi) {
  const auto r = pv::parse_response("openai", 200, R"({"choices":[{"message":{"content":"hi"}}]})");
  EXPECT_EQ(r.text, "hi");
}

TEST(ParseResponse, ErnieEmbeddedErrorsMapToStatus) {
  EXPECT_EQ(pv::parse_response("ernie", 200, R"({"result":"ok"})").text, "ok");
  EXPECT_EQ(pv::parse_response("ernie", 200, R"({"error_code":110,"error_msg":"x"})").status, 401);
  EXPECT_EQ(pv::parse_response("ernie", 200, R"({"error_code":18,"error_msg":"x"})").status, 429);
  EXPECT_EQ(pv::parse_response("ernie", 200, R"({"error_code":336000,"error_msg":"x"})").status, 500);
}

TEST(ParseResponse, MalformedBodyIsBadGateway) {
  EXPECT_EQ(pv::parse_response("openai", 200, "not json").status, 502);
  EXPECT_EQ(pv::parse_response("openai", 200, R"({"choices":[]})").status, 502);
}

TEST(ParseResponse, ErrorStatusPassesThrough) {
  const auto r = pv::parse_response("anthropic", 529, "overloaded");
  EXPECT_EQ(r.status, 529);
  EXPECT_EQ(r.body, "overloaded");
}

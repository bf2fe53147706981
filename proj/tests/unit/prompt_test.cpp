#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "histolens/errors.hpp"
#include "histolens/prompt.hpp"
#include "histolens/structured.hpp"

using namespace histolens;
namespace st = histolens::structured;

namespace {

PromptTemplate simple_template(std::size_t slots = 0) {
  PromptTemplate t;
  t.id = "t";
  t.system_role = "You are a historian of the Han dynasty.";
  t.instruction = "Classify {{statement}} from chapter {{chapter}}; again {{statement}}.";
  t.few_shot_slots = slots;
  return t;
}

}  // namespace

TEST(Placeholders, OrderOfFirstAppearance) {
  EXPECT_EQ(placeholders("{{b}} {{a}} {{b}} {{ not }} {{}}"), (std::vector<std::string>{"b", "a"}));
}

TEST(RenderPrompt, BindsEveryPlaceholder) {
  const auto p = render_prompt(simple_template(), {{"statement", "仁義"}, {"chapter", "1"}}, {});
  EXPECT_EQ(p.system, "You are a historian of the Han dynasty.");
  EXPECT_NE(p.user.find("Classify 仁義 from chapter 1; again 仁義."), std::string::npos);
  EXPECT_EQ(p.user.find("{{"), std::string::npos);
  EXPECT_EQ(p.user.rfind(kTaskMarker), 0u);
}

TEST(RenderPrompt, UnboundPlaceholderThrows) {
  try {
    render_prompt(simple_template(), {{"statement", "x"}}, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnboundPlaceholder);
  }
}

TEST(RenderPrompt, ExemplarCountMustMatchSlots) {
  const Bindings b = {{"statement", "x"}, {"chapter", "1"}};
  try {
    render_prompt(simple_template(2), b, {{"a", "b"}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ExemplarCountMismatch);
  }
}

TEST(RenderPrompt, ExemplarsPrecedeTaskInOrder) {
  const auto p =
      render_prompt(simple_template(2), {{"statement", "x"}, {"chapter", "1"}}, {{"in1", "out1"}, {"in2", "out2"}});
  const auto e1 = p.user.find("in1");
  const auto e2 = p.user.find("in2");
  const auto task = p.user.find(kTaskMarker);
  EXPECT_LT(e1, e2);
  EXPECT_LT(e2, task);
}

TEST(RenderPrompt, SchemaHintAndCotFollowTask) {
  auto t = simple_template();
  t.output_schema_id = std::string(st::kClassification);
  t.cot_directive = "Think step by step.";
  const auto p = render_prompt(t, {{"statement", "x"}, {"chapter", "1"}}, {});
  const auto task = p.user.find(kTaskMarker);
  const auto hint = p.user.find(st::format_hint(st::kClassification));
  const auto cot = p.user.find("Think step by step.");
  ASSERT_NE(hint, std::string::npos);
  EXPECT_LT(task, hint);
  EXPECT_LT(hint, cot);
}

TEST(TemplateRegistry, ShippedTemplatesLoad) {
  TemplateRegistry reg;
  reg.load_directory(fixtures::data_dir() / "templates");
  for (const char* id : {"entity-extraction", "relation-extraction", "classify"}) EXPECT_TRUE(reg.contains(id)) << id;
  EXPECT_EQ(reg.get("classify").few_shot_slots, 4u);
  EXPECT_THROW(reg.get("nope"), Error);
}

TEST(PromptTemplate, JsonRoundTrip) {
  auto t = simple_template(3);
  t.cot_directive = "c";
  t.output_schema_id = "entity-list";
  const auto back = PromptTemplate::from_json(t.to_json());
  EXPECT_EQ(back.to_json(), t.to_json());
}

TEST(CandidateBlocks, FencedBlocksThenBareValue) {
  const auto blocks = st::candidate_blocks("pre {\"a\":1} ```json\n{\"b\":2}\n``` mid ```\n[3]\n```");
  ASSERT_EQ(blocks.size(), 3u);
  EXPECT_EQ(blocks[0], "{\"b\":2}\n");
  EXPECT_EQ(blocks[1], "[3]\n");
  EXPECT_EQ(blocks[2], "{\"a\":1}");
}

TEST(ParseStructured, AcceptsValidClassification) {
  const auto r = st::parse_structured(fixtures::classification_reply(Label::Legalist, "法", "law"), st::kClassification);
  ASSERT_TRUE(std::holds_alternative<nlohmann::json>(r));
  EXPECT_EQ(std::get<nlohmann::json>(r).at("label"), "legalist");
}

TEST(ParseStructured, SkipsMalformedBlockForLaterValidOne) {
  const std::string reply =
      "```json\n{broken\n```\n```json\n{\"entities\": [{\"name\": \"孔子\", \"kind\": \"person\"}]}\n```";
  EXPECT_TRUE(std::holds_alternative<nlohmann::json>(st::parse_structured(reply, st::kEntityList)));
}

TEST(ParseStructured, ReportsFieldOfFirstViolation) {
  const auto r = st::parse_structured("```json\n{\"entities\": [{\"name\": \"孔子\", \"kind\": \"god\"}]}\n```",
                                      st::kEntityList);
  ASSERT_TRUE(std::holds_alternative<st::RepairDirective>(r));
  EXPECT_EQ(std::get<st::RepairDirective>(r).field, "entities[0].kind");
}

TEST(ParseStructured, NoBlockYieldsDirective) {
  const auto r = st::parse_structured("I cannot answer that.", st::kRelationList);
  ASSERT_TRUE(std::holds_alternative<st::RepairDirective>(r));
  EXPECT_EQ(std::get<st::RepairDirective>(r).schema_id, st::kRelationList);
}

TEST(ParseStructured, UnknownSchemaThrows) {
  try {
    st::parse_structured("{}", "nope");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnknownSchema);
  }
}

TEST(ParseStructured, RegisteredSchemaIsUsed) {
  st::register_schema({"flag", [](const nlohmann::json& j) -> std::optional<st::RepairDirective> {
                         if (j.is_object() && j.contains("ok")) return std::nullopt;
                         return st::RepairDirective{"flag", "ok", "missing ok"};
                       }, "hint"});
  EXPECT_TRUE(st::has_schema("flag"));
  EXPECT_TRUE(std::holds_alternative<nlohmann::json>(st::parse_structured("{\"ok\":1}", "flag")));
  EXPECT_TRUE(std::holds_alternative<st::RepairDirective>(st::parse_structured("{}", "flag")));
}

TEST(RepairPrompt, CarriesReplyAndError) {
  const Prompt original{"sys", "### Task\nq"};
  const auto p = st::make_repair_prompt(original, "bad reply", {"entity-list", "entities", "missing entities"});
  EXPECT_EQ(p.system, "sys");
  EXPECT_EQ(p.user.rfind(original.user, 0), 0u);
  EXPECT_NE(p.user.find("bad reply"), std::string::npos);
  EXPECT_NE(p.user.find("missing entities"), std::string::npos);
}

#pragma once

// Structured-output contract: the model answers with a fenced ```json block;
// the first well-formed block is validated against a registered schema.

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "histolens/prompt.hpp"

namespace histolens::structured {

inline constexpr std::string_view kEntityList = "entity-list";
inline constexpr std::string_view kRelationList = "relation-list";
inline constexpr std::string_view kClassification = "classification-with-explanation";

/// A validation failure: what is wrong and, when known, which field.
struct RepairDirective {
  std::string schema_id;
  std::string field;
  std::string error;
};

using ParseResult = std::variant<nlohmann::json, RepairDirective>;

/// Returns a description of the first violation, or nullopt when valid.
using Validator = std::function<std::optional<RepairDirective>(const nlohmann::json&)>;

struct Schema {
  std::string id;
  Validator validate;
  /// Appended to prompts whose template names this schema.
  std::string format_hint;
};

void register_schema(Schema schema);
bool has_schema(std::string_view id);
const std::string& format_hint(std::string_view id);

/// Every fenced block (```json or bare ```), then the first balanced {...} or
/// [...] outside fences, in order of appearance.
std::vector<std::string> candidate_blocks(std::string_view response);

ParseResult parse_structured(std::string_view response, std::string_view schema_id);

/// Original prompt plus the rejected reply and the error, asking for a corrected
/// block. `attempt` (1-based) keeps successive repair prompts distinct.
Prompt make_repair_prompt(const Prompt& original, std::string_view rejected_reply, const RepairDirective& directive,
                          int attempt = 1);

inline constexpr int kMaxRepairRounds = 2;

}  // namespace histolens::structured

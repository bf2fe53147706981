#include "histolens/structured.hpp"

#include <map>
#include <mutex>

#include "histolens/errors.hpp"

namespace histolens::structured {

using nlohmann::json;

namespace {

std::optional<RepairDirective> fail(std::string_view schema, std::string field, std::string error) {
  return RepairDirective{std::string(schema), std::move(field), std::move(error)};
}

const char* type_name(const json& v) { return v.type_name(); }

// Checks `obj[key]` is a string (optionally non-empty and one of `allowed`).
std::optional<RepairDirective> require_string(std::string_view schema, const json& obj, const std::string& path,
                                              const char* key, bool required, bool non_empty = true,
                                              std::initializer_list<std::string_view> allowed = {}) {
  const std::string field = path.empty() ? key : path + "." + key;
  if (!obj.contains(key)) {
    if (required) return fail(schema, field, "missing required field '" + field + "'");
    return std::nullopt;
  }
  const auto& v = obj.at(key);
  if (!v.is_string())
    return fail(schema, field, "field '" + field + "' must be a string, got " + type_name(v));
  const auto s = v.get<std::string>();
  if (non_empty && s.empty()) return fail(schema, field, "field '" + field + "' must not be empty");
  if (allowed.size() > 0) {
    for (auto a : allowed)
      if (s == a) return std::nullopt;
    std::string list;
    for (auto a : allowed) list += (list.empty() ? "" : ", ") + std::string(a);
    return fail(schema, field, "field '" + field + "' must be one of: " + list);
  }
  return std::nullopt;
}

std::optional<RepairDirective> require_array_of_objects(std::string_view schema, const json& root, const char* key) {
  if (!root.is_object()) return fail(schema, "", std::string("top-level value must be an object with '") + key + "'");
  if (!root.contains(key)) return fail(schema, key, std::string("missing required field '") + key + "'");
  if (!root.at(key).is_array())
    return fail(schema, key, std::string("field '") + key + "' must be an array");
  std::size_t i = 0;
  for (const auto& item : root.at(key)) {
    if (!item.is_object())
      return fail(schema, std::string(key) + "[" + std::to_string(i) + "]", "array items must be objects");
    ++i;
  }
  return std::nullopt;
}

std::optional<RepairDirective> validate_entities(const json& root) {
  if (auto e = require_array_of_objects(kEntityList, root, "entities")) return e;
  std::size_t i = 0;
  for (const auto& item : root.at("entities")) {
    const std::string path = "entities[" + std::to_string(i++) + "]";
    if (auto e = require_string(kEntityList, item, path, "name", true)) return e;
    if (auto e = require_string(kEntityList, item, path, "kind", true, true, {"person", "place"})) return e;
    if (auto e = require_string(kEntityList, item, path, "utterance_id", false, false)) return e;
    if (item.contains("offset") && !item.at("offset").is_number_integer())
      return fail(kEntityList, path + ".offset", "field '" + path + ".offset' must be an integer");
  }
  return std::nullopt;
}

std::optional<RepairDirective> validate_relations(const json& root) {
  if (auto e = require_array_of_objects(kRelationList, root, "relations")) return e;
  std::size_t i = 0;
  for (const auto& item : root.at("relations")) {
    const std::string path = "relations[" + std::to_string(i++) + "]";
    for (const char* key : {"source", "target", "label"})
      if (auto e = require_string(kRelationList, item, path, key, true)) return e;
    if (auto e = require_string(kRelationList, item, path, "evidence", false, false)) return e;
  }
  return std::nullopt;
}

std::optional<RepairDirective> validate_classification(const json& root) {
  if (!root.is_object()) return fail(kClassification, "", "top-level value must be an object");
  if (auto e = require_string(kClassification, root, "", "label", true)) return e;
  if (auto e = require_string(kClassification, root, "", "confidence", true, true, {"high", "medium", "low"}))
    return e;
  if (auto e = require_string(kClassification, root, "", "explanation", true)) return e;
  if (!root.contains("features")) return fail(kClassification, "features", "missing required field 'features'");
  if (!root.at("features").is_array())
    return fail(kClassification, "features", "field 'features' must be an array");
  std::size_t i = 0;
  for (const auto& f : root.at("features")) {
    const std::string path = "features[" + std::to_string(i++) + "]";
    if (!f.is_object()) return fail(kClassification, path, "feature entries must be objects");
    if (auto e = require_string(kClassification, f, path, "span", true)) return e;
    if (auto e = require_string(kClassification, f, path, "gloss", true, false)) return e;
  }
  if (auto e = require_string(kClassification, root, "", "reasoning", false, false)) return e;
  return std::nullopt;
}

struct Registry {
  std::mutex mu;
  std::map<std::string, Schema, std::less<>> schemas;

  Registry() {
    schemas.emplace(std::string(kEntityList),
                    Schema{std::string(kEntityList), validate_entities,
                           "Answer with exactly one ```json fenced block of the form "
                           "{\"entities\": [{\"name\": string, \"kind\": \"person\" | \"place\", "
                           "\"utterance_id\": string, \"offset\": integer (optional)}]}."});
    schemas.emplace(std::string(kRelationList),
                    Schema{std::string(kRelationList), validate_relations,
                           "Answer with exactly one ```json fenced block of the form "
                           "{\"relations\": [{\"source\": string, \"target\": string, \"label\": string, "
                           "\"evidence\": utterance id}]}."});
    schemas.emplace(std::string(kClassification),
                    Schema{std::string(kClassification), validate_classification,
                           "Answer with exactly one ```json fenced block of the form "
                           "{\"label\": \"confucian\" | \"legalist\", \"confidence\": \"high\" | \"medium\" | "
                           "\"low\", \"explanation\": string, \"features\": [{\"span\": exact substring of the "
                           "passage, \"gloss\": string}], \"reasoning\": string}."});
  }
};

Registry& registry() {
  static Registry r;
  return r;
}

const Schema& lookup(std::string_view id) {
  auto& r = registry();
  std::lock_guard lock(r.mu);
  auto it = r.schemas.find(id);
  if (it == r.schemas.end()) throw Error(ErrorCode::UnknownSchema, "schema '" + std::string(id) + "' is not registered");
  return it->second;
}

// Index one past the balanced value starting at `open`, or npos.
std::size_t balanced_end(std::string_view s, std::size_t open) {
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = open; i < s.size(); ++i) {
    const char c = s[i];
    if (in_string) {
      if (escaped) {
        escaped = false;
      } else if (c == '\\') {
        escaped = true;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '{' || c == '[') {
      ++depth;
    } else if (c == '}' || c == ']') {
      if (--depth == 0) return i + 1;
    }
  }
  return std::string_view::npos;
}

}  // namespace

void register_schema(Schema schema) {
  auto& r = registry();
  std::lock_guard lock(r.mu);
  auto id = schema.id;
  r.schemas.insert_or_assign(std::move(id), std::move(schema));
}

bool has_schema(std::string_view id) {
  auto& r = registry();
  std::lock_guard lock(r.mu);
  return r.schemas.find(id) != r.schemas.end();
}

const std::string& format_hint(std::string_view id) { return lookup(id).format_hint; }

std::vector<std::string> candidate_blocks(std::string_view response) {
  std::vector<std::string> out;
  std::string outside;  // text with fenced regions removed
  std::size_t pos = 0;
  while (pos < response.size()) {
    const auto open = response.find("```", pos);
    if (open == std::string_view::npos) break;
    auto body_start = response.find('\n', open + 3);
    if (body_start == std::string_view::npos) break;
    const auto close = response.find("```", body_start + 1);
    if (close == std::string_view::npos) break;
    outside.append(response.substr(pos, open - pos));
    out.emplace_back(response.substr(body_start + 1, close - body_start - 1));
    pos = close + 3;
  }
  outside.append(response.substr(std::min(pos, response.size())));

  for (std::size_t i = 0; i < outside.size(); ++i) {
    if (outside[i] != '{' && outside[i] != '[') continue;
    const auto end = balanced_end(outside, i);
    if (end == std::string_view::npos) continue;
    out.push_back(outside.substr(i, end - i));
    break;
  }
  return out;
}

ParseResult parse_structured(std::string_view response, std::string_view schema_id) {
  const Schema& schema = lookup(schema_id);
  for (const auto& block : candidate_blocks(response)) {
    json value = json::parse(block, nullptr, false);
    if (value.is_discarded()) continue;
    if (auto problem = schema.validate(value)) return *problem;
    return value;
  }
  return RepairDirective{std::string(schema_id), "", "no well-formed ```json block found in the reply"};
}

Prompt make_repair_prompt(const Prompt& original, std::string_view rejected_reply, const RepairDirective& d,
                          int attempt) {
  Prompt p = original;
  p.user += "\n\n### Your previous reply (correction " + std::to_string(attempt) + " of " +
            std::to_string(kMaxRepairRounds) + ")\n";
  p.user.append(rejected_reply);
  p.user += "\n\n### Correction required\nThe previous reply did not satisfy the '" + d.schema_id + "' format: " +
            d.error + ". Reply again with one corrected ```json block and nothing else.";
  return p;
}

}  // namespace histolens::structured

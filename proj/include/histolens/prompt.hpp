#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace histolens {

/// Role-play persona + instruction with `{{name}}` placeholders, optional
/// chain-of-thought directive and a fixed number of few-shot slots.
struct PromptTemplate {
  std::string id;
  std::string system_role;
  std::string instruction;
  std::optional<std::string> cot_directive;
  std::size_t few_shot_slots = 0;
  std::optional<std::string> output_schema_id;

  static PromptTemplate from_json(const nlohmann::json& j);
  static PromptTemplate load(const std::filesystem::path& path);
  nlohmann::ordered_json to_json() const;
};

struct Exemplar {
  std::string input;
  std::string output;
};

/// A rendered chat request: system persona plus one user message.
struct Prompt {
  std::string system;
  std::string user;

  /// Single-string form used for hashing, fixtures and logs.
  std::string canonical() const;

  bool operator==(const Prompt&) const = default;
};

/// Marker that opens the query section of every rendered user message.
inline constexpr std::string_view kTaskMarker = "### Task\n";

using Bindings = std::map<std::string, std::string>;

/// Placeholder names in order of first appearance.
std::vector<std::string> placeholders(std::string_view instruction);

/// Exemplars come first (in order), then the task with placeholders bound,
/// then the output-format hint for the template's schema, then the CoT directive.
Prompt render_prompt(const PromptTemplate& tmpl, const Bindings& bindings, const std::vector<Exemplar>& exemplars);

class TemplateRegistry {
 public:
  void add(PromptTemplate tmpl);
  /// Loads every *.json file in the directory.
  void load_directory(const std::filesystem::path& dir);
  const PromptTemplate& get(const std::string& id) const;
  bool contains(const std::string& id) const { return templates_.count(id) > 0; }

 private:
  std::map<std::string, PromptTemplate> templates_;
};

}  // namespace histolens

#include "histolens/prompt.hpp"

#include <algorithm>
#include <set>

#include "histolens/errors.hpp"
#include "histolens/structured.hpp"
#include "histolens/text.hpp"

namespace histolens {

using nlohmann::json;
using nlohmann::ordered_json;

PromptTemplate PromptTemplate::from_json(const json& j) {
  PromptTemplate t;
  t.id = j.at("id").get<std::string>();
  t.system_role = j.value("system_role", std::string());
  t.instruction = j.at("instruction").get<std::string>();
  if (j.contains("cot_directive") && !j.at("cot_directive").is_null())
    t.cot_directive = j.at("cot_directive").get<std::string>();
  t.few_shot_slots = j.value("few_shot_slots", std::size_t{0});
  if (j.contains("output_schema_id") && !j.at("output_schema_id").is_null())
    t.output_schema_id = j.at("output_schema_id").get<std::string>();
  return t;
}

PromptTemplate PromptTemplate::load(const std::filesystem::path& path) {
  try {
    return from_json(json::parse(text::read_file(path)));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedStructure, path.string() + ": " + e.what());
  }
}

ordered_json PromptTemplate::to_json() const {
  ordered_json j;
  j["id"] = id;
  j["system_role"] = system_role;
  j["instruction"] = instruction;
  j["cot_directive"] = cot_directive ? ordered_json(*cot_directive) : ordered_json(nullptr);
  j["few_shot_slots"] = few_shot_slots;
  j["output_schema_id"] = output_schema_id ? ordered_json(*output_schema_id) : ordered_json(nullptr);
  return j;
}

std::string Prompt::canonical() const { return "[system]\n" + system + "\n[user]\n" + user; }

namespace {

bool is_name_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c == '-';
}

// Calls on_text(literal) and on_placeholder(name) in order.
template <typename Text, typename Placeholder>
void scan_placeholders(std::string_view s, Text&& on_text, Placeholder&& on_placeholder) {
  std::size_t pos = 0;
  while (pos < s.size()) {
    const auto open = s.find("{{", pos);
    if (open == std::string_view::npos) break;
    const auto close = s.find("}}", open + 2);
    if (close == std::string_view::npos) break;
    const auto name = s.substr(open + 2, close - open - 2);
    if (name.empty() || !std::all_of(name.begin(), name.end(), is_name_char)) {
      on_text(s.substr(pos, open + 2 - pos));
      pos = open + 2;
      continue;
    }
    on_text(s.substr(pos, open - pos));
    on_placeholder(std::string(name));
    pos = close + 2;
  }
  on_text(s.substr(pos));
}

}  // namespace

std::vector<std::string> placeholders(std::string_view instruction) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  scan_placeholders(
      instruction, [](std::string_view) {},
      [&](const std::string& name) {
        if (seen.insert(name).second) out.push_back(name);
      });
  return out;
}

Prompt render_prompt(const PromptTemplate& tmpl, const Bindings& bindings, const std::vector<Exemplar>& exemplars) {
  if (exemplars.size() != tmpl.few_shot_slots)
    throw Error(ErrorCode::ExemplarCountMismatch,
                "template '" + tmpl.id + "' has " + std::to_string(tmpl.few_shot_slots) + " few-shot slots but " +
                    std::to_string(exemplars.size()) + " exemplars were supplied");

  std::string task;
  scan_placeholders(
      tmpl.instruction, [&](std::string_view lit) { task.append(lit); },
      [&](const std::string& name) {
        auto it = bindings.find(name);
        if (it == bindings.end())
          throw Error(ErrorCode::UnboundPlaceholder,
                      "template '" + tmpl.id + "': placeholder {{" + name + "}} is not bound");
        task += it->second;
      });

  std::string user;
  for (std::size_t i = 0; i < exemplars.size(); ++i) {
    user += "### Example " + std::to_string(i + 1) + "\nInput:\n" + exemplars[i].input + "\nOutput:\n" +
            exemplars[i].output + "\n\n";
  }
  user += kTaskMarker;
  user += task;
  if (tmpl.output_schema_id) {
    user += "\n\n";
    user += structured::format_hint(*tmpl.output_schema_id);
  }
  if (tmpl.cot_directive && !tmpl.cot_directive->empty()) {
    user += "\n\n";
    user += *tmpl.cot_directive;
  }
  return Prompt{tmpl.system_role, std::move(user)};
}

void TemplateRegistry::add(PromptTemplate tmpl) {
  auto id = tmpl.id;
  templates_.insert_or_assign(std::move(id), std::move(tmpl));
}

void TemplateRegistry::load_directory(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir))
    throw Error(ErrorCode::FileNotFound, "template directory not found: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) add(PromptTemplate::load(f));
}

const PromptTemplate& TemplateRegistry::get(const std::string& id) const {
  auto it = templates_.find(id);
  if (it == templates_.end()) throw Error(ErrorCode::InvalidArgument, "unknown prompt template '" + id + "'");
  return it->second;
}

}  // namespace histolens

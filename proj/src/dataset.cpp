#include "histolens/dataset.hpp"

#include <cmath>
#include <map>

#include "histolens/errors.hpp"
#include "histolens/hashing.hpp"
#include "histolens/text.hpp"

namespace histolens {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(Label label) { return label == Label::Confucian ? "confucian" : "legalist"; }

Label parse_label(std::string_view s) {
  if (s == "confucian") return Label::Confucian;
  if (s == "legalist") return Label::Legalist;
  throw Error(ErrorCode::LabelOutOfVocabulary, "unknown label '" + std::string(s) + "'");
}

std::optional<Label> label_for_role(SpeakerRole role) {
  switch (role) {
    case SpeakerRole::LegalistOfficial: return Label::Legalist;
    case SpeakerRole::ConfucianScholar: return Label::Confucian;
    default: return std::nullopt;
  }
}

std::vector<LabeledStatement> build_dataset(const Corpus& corpus, std::size_t min_chars) {
  if (min_chars == 0) throw Error(ErrorCode::InvalidArgument, "min_chars must be positive");
  std::vector<LabeledStatement> out;
  for (const auto& ch : corpus.chapters) {
    for (const auto& u : ch.utterances) {
      const auto label = label_for_role(u.speaker_role);
      if (!label) continue;
      std::string body = u.body();
      const std::size_t n = text::han_count(body);
      if (n < min_chars) continue;
      out.push_back({u.id, std::move(body), *label, n, u.chapter_index});
    }
  }
  if (out.empty())
    throw Error(ErrorCode::EmptyDataset, "no labeled utterance has at least " + std::to_string(min_chars) + " characters");
  return out;
}

ordered_json DatasetStats::to_json() const {
  return ordered_json{{"n_total", n_total},
                      {"n_confucian", n_confucian},
                      {"n_legalist", n_legalist},
                      {"mean_char_count", mean_char_count},
                      {"total_chars", total_chars}};
}

DatasetStats dataset_stats(const std::vector<LabeledStatement>& statements) {
  DatasetStats s;
  for (const auto& st : statements) {
    ++s.n_total;
    (st.label == Label::Confucian ? s.n_confucian : s.n_legalist)++;
    s.total_chars += st.char_count;
  }
  if (s.n_total > 0) s.mean_char_count = static_cast<double>(s.total_chars) / static_cast<double>(s.n_total);
  return s;
}

std::pair<std::vector<LabeledStatement>, std::vector<LabeledStatement>> split(
    const std::vector<LabeledStatement>& statements, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw Error(ErrorCode::InvalidArgument, "split ratio must lie in (0, 1)");
  std::map<Label, std::vector<LabeledStatement>> by_label;
  for (const auto& s : statements) by_label[s.label].push_back(s);
  for (Label l : kAllLabels) {
    if (by_label[l].size() < 2)
      throw Error(ErrorCode::InsufficientPerLabel,
                  "label " + std::string(to_string(l)) + " has " + std::to_string(by_label[l].size()) +
                      " statements; split needs at least 2");
  }
  std::vector<LabeledStatement> train, eval;
  for (Label l : kAllLabels) {
    auto items = by_label[l];
    seeded_shuffle(items, seed ^ fnv1a64(to_string(l)));
    const std::size_t n = items.size();
    auto n_train = static_cast<std::size_t>(std::llround(static_cast<double>(n) * ratio));
    n_train = std::clamp<std::size_t>(n_train, 1, n - 1);
    train.insert(train.end(), items.begin(), items.begin() + static_cast<std::ptrdiff_t>(n_train));
    eval.insert(eval.end(), items.begin() + static_cast<std::ptrdiff_t>(n_train), items.end());
  }
  auto by_id = [](const LabeledStatement& a, const LabeledStatement& b) { return a.id < b.id; };
  std::sort(train.begin(), train.end(), by_id);
  std::sort(eval.begin(), eval.end(), by_id);
  return {std::move(train), std::move(eval)};
}

ordered_json to_json(const LabeledStatement& s) {
  return ordered_json{{"id", s.id},
                      {"text", s.text},
                      {"label", to_string(s.label)},
                      {"char_count", s.char_count},
                      {"chapter_index", s.chapter_index}};
}

LabeledStatement statement_from_json(const json& j) {
  LabeledStatement s;
  s.id = j.at("id").get<std::string>();
  s.text = j.at("text").get<std::string>();
  s.label = parse_label(j.at("label").get<std::string>());
  s.char_count = j.at("char_count").get<std::size_t>();
  s.chapter_index = j.at("chapter_index").get<int>();
  return s;
}

std::string export_jsonl(const std::vector<LabeledStatement>& statements) {
  std::string out;
  for (const auto& s : statements) out += to_json(s).dump() + "\n";
  return out;
}

void export_jsonl(const std::vector<LabeledStatement>& statements, const std::filesystem::path& path) {
  text::write_file(path, export_jsonl(statements));
}

std::vector<LabeledStatement> parse_jsonl(std::string_view doc, std::string_view source_name) {
  std::vector<LabeledStatement> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < doc.size()) {
    const auto nl = doc.find('\n', pos);
    const auto line = doc.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? doc.size() : nl + 1;
    ++line_no;
    if (text::trim(line).empty()) continue;
    try {
      out.push_back(statement_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw ParseError(std::string(source_name), line_no, e.what());
    } catch (const Error& e) {
      throw ParseError(std::string(source_name), line_no, e.what());
    }
  }
  return out;
}

std::vector<LabeledStatement> load_jsonl(const std::filesystem::path& path) {
  return parse_jsonl(text::read_file(path), path.string());
}

}  // namespace histolens

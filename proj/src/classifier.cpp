#include "histolens/classifier.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <thread>

#include "histolens/csv.hpp"
#include "histolens/errors.hpp"
#include "histolens/hashing.hpp"
#include "histolens/log.hpp"
#include "histolens/structured.hpp"
#include "histolens/text.hpp"

namespace histolens {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(Confidence c) {
  switch (c) {
    case Confidence::High: return "high";
    case Confidence::Medium: return "medium";
    case Confidence::Low: return "low";
  }
  return "medium";
}

Confidence parse_confidence(std::string_view s) {
  if (s == "high") return Confidence::High;
  if (s == "medium") return Confidence::Medium;
  if (s == "low") return Confidence::Low;
  throw Error(ErrorCode::InvalidArgument, "unknown confidence '" + std::string(s) + "'");
}

Label coerce_label(std::string_view raw) {
  std::string s = text::trim(raw);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (s == "confucian" || s == "confucianism" || s == "儒家") return Label::Confucian;
  if (s == "legalist" || s == "legalism" || s == "法家") return Label::Legalist;
  throw Error(ErrorCode::LabelOutOfVocabulary, "label '" + std::string(raw) + "' is neither confucian nor legalist");
}

ordered_json to_json(const ClassificationResult& r) {
  ordered_json j;
  j["statement_id"] = r.statement_id;
  j["predicted"] = to_string(r.predicted);
  j["confidence"] = to_string(r.confidence);
  j["explanation"] = r.explanation;
  j["cited_features"] = ordered_json::array();
  for (const auto& f : r.cited_features) j["cited_features"].push_back({{"span", f.span}, {"gloss", f.gloss}});
  j["reasoning_trace"] = r.reasoning_trace ? ordered_json(*r.reasoning_trace) : ordered_json(nullptr);
  return j;
}

ClassificationResult classification_from_json(const json& j) {
  ClassificationResult r;
  r.statement_id = j.at("statement_id").get<std::string>();
  r.predicted = parse_label(j.at("predicted").get<std::string>());
  r.confidence = parse_confidence(j.at("confidence").get<std::string>());
  r.explanation = j.at("explanation").get<std::string>();
  for (const auto& f : j.at("cited_features"))
    r.cited_features.push_back({f.at("span").get<std::string>(), f.at("gloss").get<std::string>()});
  if (j.contains("reasoning_trace") && !j.at("reasoning_trace").is_null())
    r.reasoning_trace = j.at("reasoning_trace").get<std::string>();
  return r;
}

std::vector<LabeledStatement> select_few_shot(const std::vector<LabeledStatement>& pool, std::size_t k,
                                              std::uint64_t seed, std::string_view exclude_id) {
  if (k == 0 || k % 2 != 0) throw Error(ErrorCode::InvalidArgument, "few-shot k must be even and positive");
  const std::size_t per_label = k / 2;
  std::vector<std::vector<LabeledStatement>> by_label(2);
  for (const auto& s : pool)
    if (s.id != exclude_id) by_label[s.label == Label::Confucian ? 0 : 1].push_back(s);
  for (std::size_t l = 0; l < 2; ++l) {
    if (by_label[l].size() < per_label)
      throw Error(ErrorCode::InsufficientPool, "few-shot pool has " + std::to_string(by_label[l].size()) + " " +
                                                   std::string(to_string(kAllLabels[l])) + " statements, need " +
                                                   std::to_string(per_label));
    auto& items = by_label[l];
    std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    seeded_shuffle(items, seed ^ fnv1a64(to_string(kAllLabels[l])));
  }
  std::vector<LabeledStatement> out;
  for (std::size_t i = 0; i < per_label; ++i) {
    out.push_back(by_label[0][i]);
    out.push_back(by_label[1][i]);
  }
  return out;
}

std::vector<Exemplar> to_exemplars(const std::vector<LabeledStatement>& shots) {
  std::vector<Exemplar> out;
  for (const auto& s : shots) out.push_back({s.text, "label: " + std::string(to_string(s.label))});
  return out;
}

ClassificationResult classify(const LabeledStatement& statement, Gateway& gateway, const std::string& template_id,
                              const std::vector<Exemplar>& exemplars) {
  if (text::trim(statement.text).empty())
    throw Error(ErrorCode::InvalidArgument, "statement " + statement.id + " has empty text");
  const auto& tmpl = gateway.templates().get(template_id);
  const Prompt prompt = render_prompt(tmpl, {{"statement", statement.text}}, exemplars);
  const json block = gateway.complete_structured(prompt, std::string(structured::kClassification));

  ClassificationResult r;
  r.statement_id = statement.id;
  r.predicted = coerce_label(block.at("label").get<std::string>());
  r.confidence = parse_confidence(block.at("confidence").get<std::string>());
  r.explanation = block.at("explanation").get<std::string>();
  for (const auto& f : block.at("features")) {
    const std::string span = f.at("span").get<std::string>();
    if (span.empty() || statement.text.find(span) == std::string::npos) {
      logger()->warn("statement {}: cited span '{}' is not in the text; dropped", statement.id, span);
      continue;
    }
    r.cited_features.push_back({span, f.at("gloss").get<std::string>()});
  }
  if (block.contains("reasoning") && block.at("reasoning").is_string())
    r.reasoning_trace = block.at("reasoning").get<std::string>();
  return r;
}

ordered_json EvalReport::to_json() const {
  ordered_json j;
  j["n"] = n;
  j["accuracy"] = accuracy;
  j["labels"] = {"confucian", "legalist"};
  j["confusion"] = {{confusion[0][0], confusion[0][1]}, {confusion[1][0], confusion[1][1]}};
  j["per_statement"] = ordered_json::array();
  for (const auto& it : per_statement) {
    ordered_json row;
    row["id"] = it.id;
    row["gold"] = to_string(it.gold);
    row["predicted"] = it.predicted ? ordered_json(to_string(*it.predicted)) : ordered_json(nullptr);
    row["correct"] = it.correct;
    if (!it.error.empty()) row["error"] = it.error;
    j["per_statement"].push_back(std::move(row));
  }
  return j;
}

std::string EvalReport::to_csv() const {
  std::string out = csv::format_row({"id", "gold", "predicted", "correct"});
  for (const auto& it : per_statement)
    out += csv::format_row({it.id, std::string(to_string(it.gold)),
                            it.predicted ? std::string(to_string(*it.predicted)) : "",
                            it.correct ? "true" : "false"});
  return out;
}

EvalReport evaluate(const std::vector<LabeledStatement>& eval_set, const std::vector<LabeledStatement>& pool,
                    Gateway& gateway, const std::string& template_id, std::size_t k, std::uint64_t seed,
                    std::size_t parallelism) {
  if (eval_set.empty()) throw Error(ErrorCode::InvalidArgument, "evaluation set is empty");
  std::vector<EvalItem> items(eval_set.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < eval_set.size(); i = next++) {
      const auto& s = eval_set[i];
      EvalItem& item = items[i];
      item.id = s.id;
      item.gold = s.label;
      try {
        const auto shots = k == 0 ? std::vector<LabeledStatement>{} : select_few_shot(pool, k, seed, s.id);
        const auto result = classify(s, gateway, template_id, to_exemplars(shots));
        item.predicted = result.predicted;
        item.correct = result.predicted == s.label;
      } catch (const Error& e) {
        item.error = std::string(error_code_name(e.code())) + ": " + e.what();
        logger()->warn("classification of {} failed: {}", s.id, item.error);
      } catch (const std::exception& e) {
        item.error = e.what();
        logger()->warn("classification of {} failed: {}", s.id, item.error);
      }
    }
  };
  const std::size_t n_threads = std::max<std::size_t>(1, std::min(parallelism, eval_set.size()));
  std::vector<std::thread> threads;
  for (std::size_t t = 1; t < n_threads; ++t) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();

  std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  EvalReport report;
  report.n = items.size();
  std::size_t correct = 0;
  for (const auto& it : items) {
    const std::size_t g = it.gold == Label::Confucian ? 0 : 1;
    const std::size_t p = it.predicted ? (*it.predicted == Label::Confucian ? 0 : 1) : 1 - g;
    ++report.confusion[g][p];
    if (it.correct) ++correct;
  }
  report.accuracy = static_cast<double>(correct) / static_cast<double>(report.n);
  report.per_statement = std::move(items);
  return report;
}

}  // namespace histolens

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "histolens/dataset.hpp"
#include "histolens/gateway.hpp"

namespace histolens {

inline constexpr std::string_view kClassifyTemplate = "classify";
inline constexpr std::size_t kDefaultFewShotK = 4;

enum class Confidence { High, Medium, Low };

std::string_view to_string(Confidence c);
Confidence parse_confidence(std::string_view s);

/// Accepts the English label, the school name and the Chinese school name
/// in any case; throws LabelOutOfVocabulary otherwise.
Label coerce_label(std::string_view raw);

struct CitedFeature {
  std::string span;
  std::string gloss;

  bool operator==(const CitedFeature&) const = default;
};

struct ClassificationResult {
  std::string statement_id;
  Label predicted = Label::Confucian;
  Confidence confidence = Confidence::Medium;
  std::string explanation;
  /// Spans are verbatim substrings of the statement text.
  std::vector<CitedFeature> cited_features;
  std::optional<std::string> reasoning_trace;

  bool operator==(const ClassificationResult&) const = default;
};

nlohmann::ordered_json to_json(const ClassificationResult& r);
ClassificationResult classification_from_json(const nlohmann::json& j);

/// k/2 statements per label, alternating labels, never the excluded id.
/// Throws InsufficientPool, or InvalidArgument for odd or zero k.
std::vector<LabeledStatement> select_few_shot(const std::vector<LabeledStatement>& pool, std::size_t k,
                                              std::uint64_t seed, std::string_view exclude_id = {});

std::vector<Exemplar> to_exemplars(const std::vector<LabeledStatement>& shots);

/// Throws InvalidArgument for empty text, UnparseableAfterRepairs and
/// LabelOutOfVocabulary, plus any gateway error.
ClassificationResult classify(const LabeledStatement& statement, Gateway& gateway, const std::string& template_id,
                              const std::vector<Exemplar>& exemplars);

struct EvalItem {
  std::string id;
  Label gold = Label::Confucian;
  /// Empty when classification failed.
  std::optional<Label> predicted;
  bool correct = false;
  std::string error;

  bool operator==(const EvalItem&) const = default;
};

struct EvalReport {
  std::size_t n = 0;
  double accuracy = 0;
  /// confusion[gold][predicted], index 0 = confucian, 1 = legalist. A failed
  /// item is counted in its gold row under the other label.
  std::array<std::array<std::size_t, 2>, 2> confusion{};
  std::vector<EvalItem> per_statement;

  bool operator==(const EvalReport&) const = default;
  nlohmann::ordered_json to_json() const;
  std::string to_csv() const;
};

/// Few-shot exemplars come from `pool` (seeded, excluding the query id). Items
/// run on up to `parallelism` threads; the report is ordered by statement id.
EvalReport evaluate(const std::vector<LabeledStatement>& eval_set, const std::vector<LabeledStatement>& pool,
                    Gateway& gateway, const std::string& template_id, std::size_t k, std::uint64_t seed,
                    std::size_t parallelism = 4);

}  // namespace histolens

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "histolens/corpus.hpp"

namespace histolens {

enum class Label { Confucian, Legalist };

std::string_view to_string(Label label);
Label parse_label(std::string_view s);
inline constexpr Label kAllLabels[] = {Label::Confucian, Label::Legalist};

/// Role -> label; nullopt for narration and unknown speakers.
std::optional<Label> label_for_role(SpeakerRole role);

struct LabeledStatement {
  std::string id;
  std::string text;
  Label label = Label::Confucian;
  std::size_t char_count = 0;
  int chapter_index = 0;

  bool operator==(const LabeledStatement&) const = default;
};

inline constexpr std::size_t kDefaultMinChars = 20;

/// One statement per labeled speech turn with at least `min_chars` Han
/// characters, cue removed. Throws EmptyDataset.
std::vector<LabeledStatement> build_dataset(const Corpus& corpus, std::size_t min_chars = kDefaultMinChars);

struct DatasetStats {
  std::size_t n_total = 0;
  std::size_t n_confucian = 0;
  std::size_t n_legalist = 0;
  double mean_char_count = 0;
  std::size_t total_chars = 0;

  bool operator==(const DatasetStats&) const = default;
  nlohmann::ordered_json to_json() const;
};

DatasetStats dataset_stats(const std::vector<LabeledStatement>& statements);

inline constexpr double kDefaultSplitRatio = 0.8;

/// Stratified train/eval split. Throws InsufficientPerLabel when a label has
/// fewer than 2 statements, InvalidArgument unless 0 < ratio < 1.
std::pair<std::vector<LabeledStatement>, std::vector<LabeledStatement>> split(
    const std::vector<LabeledStatement>& statements, double ratio, std::uint64_t seed);

nlohmann::ordered_json to_json(const LabeledStatement& s);
LabeledStatement statement_from_json(const nlohmann::json& j);

std::string export_jsonl(const std::vector<LabeledStatement>& statements);
void export_jsonl(const std::vector<LabeledStatement>& statements, const std::filesystem::path& path);
std::vector<LabeledStatement> parse_jsonl(std::string_view doc, std::string_view source_name = "<jsonl>");
std::vector<LabeledStatement> load_jsonl(const std::filesystem::path& path);

}  // namespace histolens

#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace histolens {

enum class Language { ClassicalChinese, Other };

enum class SpeakerRole { LegalistOfficial, ConfucianScholar, Narrator, Unknown };

std::string_view to_string(Language lang);
std::string_view to_string(SpeakerRole role);
Language parse_language(std::string_view s);
SpeakerRole parse_speaker_role(std::string_view s);

struct Utterance {
  std::string id;
  int chapter_index = 0;
  SpeakerRole speaker_role = SpeakerRole::Unknown;
  /// Leading speaker cue exactly as it appears at the start of `text`
  /// (empty for narration).
  std::string cue;
  std::string text;
  std::size_t char_count = 0;

  /// `text` without the leading cue, whitespace-trimmed.
  std::string body() const;

  bool operator==(const Utterance&) const = default;
};

struct Chapter {
  int index = 0;
  std::string title;
  std::vector<Utterance> utterances;
  std::string raw_text;

  bool operator==(const Chapter&) const = default;
};

struct Corpus {
  std::string id;
  std::string title;
  Language language = Language::ClassicalChinese;
  std::vector<Chapter> chapters;

  bool operator==(const Corpus&) const = default;
};

struct SpeakerCue {
  std::string cue;
  SpeakerRole role = SpeakerRole::Unknown;
};

/// How a raw text is cut into chapters and speech turns.
struct MarkerTable {
  std::vector<SpeakerCue> cues;
  std::string heading_prefix = "## ";
  /// Flag lines that look like "<name>曰：" but match no configured cue.
  bool detect_unknown_cues = true;
  /// Variant-character substitutions applied to raw text before segmentation.
  std::vector<std::pair<std::string, std::string>> substitutions;

  static MarkerTable from_json(const nlohmann::json& j);
  static MarkerTable load(const std::filesystem::path& path);
  nlohmann::json to_json() const;
};

enum class CorpusFormat { Auto, PlainMarkers, Structured };

CorpusFormat parse_corpus_format(std::string_view s);

/// Loads and validates a corpus. Plain-marker files may declare the format in
/// a `#format:` header line; Auto detects structured input by a leading '{'.
Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format,
                   const MarkerTable& markers);

Corpus parse_plain_markers(std::string_view doc, const MarkerTable& markers,
                           std::string_view source_name = "<corpus>");
Corpus parse_structured_corpus(std::string_view doc, const MarkerTable& markers,
                               std::string_view source_name = "<corpus>");

/// Splits a chapter into speech turns. A turn starts at each configured cue and
/// runs to the next one; text before the first cue is narration.
std::vector<Utterance> segment_utterances(std::string_view chapter_raw,
                                          const MarkerTable& markers,
                                          int chapter_index = 1);

nlohmann::ordered_json corpus_to_json(const Corpus& corpus);
std::string serialize_corpus(const Corpus& corpus);

struct CorpusStats {
  std::size_t chapters = 0;
  std::size_t utterances = 0;
  std::map<SpeakerRole, std::size_t> utterances_by_role;
  std::map<SpeakerRole, std::size_t> han_chars_by_role;
  std::size_t han_chars = 0;

  CorpusStats& operator+=(const CorpusStats& other);
  bool operator==(const CorpusStats&) const = default;
  nlohmann::ordered_json to_json() const;
};

CorpusStats chapter_stats(const Chapter& chapter);
CorpusStats corpus_stats(const Corpus& corpus);

/// Throws MalformedStructure if any type invariant is violated.
void validate_corpus(const Corpus& corpus);

}  // namespace histolens

#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "histolens/corpus.hpp"

namespace histolens {

enum class Theme { Confucianism, Legalism, Agriculture, Economy, HuaxiaRegion, EthnicMinorities };

inline constexpr std::array<Theme, 6> kAllThemes = {Theme::Confucianism, Theme::Legalism,
                                                    Theme::Agriculture,  Theme::Economy,
                                                    Theme::HuaxiaRegion, Theme::EthnicMinorities};

std::string_view to_string(Theme theme);
Theme parse_theme(std::string_view s);

struct ThemeLexicon {
  Theme theme = Theme::Confucianism;
  std::set<std::string> keywords;
  /// keyword -> surface variants counted as that keyword
  std::map<std::string, std::set<std::string>> aliases;
};

using Stopwords = std::set<std::string>;

/// Reads `{"themes": {"<theme>": {"keywords": [...], "aliases": {...}}}}`.
std::vector<ThemeLexicon> load_lexicons(const std::filesystem::path& path);
std::vector<ThemeLexicon> lexicons_from_json(const nlohmann::json& j);

/// Reads `{"stopwords": [...]}`.
Stopwords load_stopwords(const std::filesystem::path& path);

/// Throws if a lexicon is empty, names an alias for a non-keyword, or contains a stopword.
void validate_lexicons(const std::vector<ThemeLexicon>& lexicons, const Stopwords& stopwords);

struct Token {
  std::string text;
  std::size_t offset = 0;  // code points

  bool operator==(const Token&) const = default;
};

/// Code-point trie for greedy longest-match lookup.
class LexiconTrie {
 public:
  LexiconTrie();
  explicit LexiconTrie(const std::set<std::string>& entries);
  ~LexiconTrie();
  LexiconTrie(LexiconTrie&&) noexcept;
  LexiconTrie& operator=(LexiconTrie&&) noexcept;

  void insert(std::string_view entry);
  bool empty() const { return size_ == 0; }
  std::size_t size() const { return size_; }

  /// Length in code points of the longest entry starting at `pos`, or 0.
  std::size_t longest_match(std::u32string_view text, std::size_t pos) const;

 private:
  struct Node;
  std::unique_ptr<Node> root_;
  std::size_t size_ = 0;
};

/// Greedy longest match left to right; unmatched characters become single
/// character tokens, so the tokens always cover the input.
std::vector<Token> tokenize(std::string_view text, const LexiconTrie& lexicon);
std::vector<Token> tokenize(std::string_view text, const std::set<std::string>& lexicon);

std::vector<Token> remove_stopwords(std::vector<Token> tokens, const Stopwords& stopwords);

struct HistogramBin {
  double start = 0.0;
  double end = 0.0;
  std::size_t count = 0;
};

struct FrequencyReport {
  Theme theme = Theme::Confucianism;
  std::size_t total_count = 0;
  std::map<std::string, std::size_t> per_keyword;
  std::vector<HistogramBin> distribution;
  /// Utterances containing at least one keyword of the theme.
  std::size_t line_count = 0;

  nlohmann::ordered_json to_json() const;
};

inline constexpr std::size_t kDefaultBins = 20;

/// One report per theme, in kAllThemes order.
std::vector<FrequencyReport> theme_frequency(const Corpus& corpus, const std::vector<ThemeLexicon>& lexicons,
                                             const Stopwords& stopwords, std::size_t bins = kDefaultBins);

/// Occurrence counts per bin; occurrence at global offset o of T characters
/// lands in bin floor(o * bins / T).
std::vector<std::size_t> positional_distribution(const Corpus& corpus, const std::vector<ThemeLexicon>& lexicons,
                                                 const Stopwords& stopwords, Theme theme,
                                                 std::size_t bins = kDefaultBins);

using TermCount = std::pair<std::string, std::size_t>;

/// Ranked Han-script terms over all utterances: count descending, then code
/// point order. Without a lexicon every Han character is its own term.
std::vector<TermCount> term_frequency(const Corpus& corpus, const Stopwords& stopwords, std::size_t top_k,
                                      const std::set<std::string>& lexicon = {});

}  // namespace histolens

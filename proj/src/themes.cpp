#include "histolens/themes.hpp"

#include <algorithm>

#include "histolens/errors.hpp"
#include "histolens/text.hpp"

namespace histolens {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(Theme theme) {
  switch (theme) {
    case Theme::Confucianism: return "confucianism";
    case Theme::Legalism: return "legalism";
    case Theme::Agriculture: return "agriculture";
    case Theme::Economy: return "economy";
    case Theme::HuaxiaRegion: return "huaxia-region";
    case Theme::EthnicMinorities: return "ethnic-minorities";
  }
  return "unknown";
}

Theme parse_theme(std::string_view s) {
  for (Theme t : kAllThemes)
    if (to_string(t) == s) return t;
  throw Error(ErrorCode::InvalidArgument, "unknown theme '" + std::string(s) + "'");
}

std::vector<ThemeLexicon> lexicons_from_json(const json& j) {
  std::vector<ThemeLexicon> out;
  for (const auto& [name, body] : j.at("themes").items()) {
    ThemeLexicon lex;
    lex.theme = parse_theme(name);
    for (const auto& kw : body.at("keywords")) lex.keywords.insert(kw.get<std::string>());
    if (body.contains("aliases")) {
      for (const auto& [kw, variants] : body.at("aliases").items())
        for (const auto& v : variants) lex.aliases[kw].insert(v.get<std::string>());
    }
    out.push_back(std::move(lex));
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.theme < b.theme; });
  return out;
}

std::vector<ThemeLexicon> load_lexicons(const std::filesystem::path& path) {
  try {
    return lexicons_from_json(json::parse(text::read_file(path)));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedStructure, path.string() + ": " + e.what());
  }
}

Stopwords load_stopwords(const std::filesystem::path& path) {
  try {
    const json j = json::parse(text::read_file(path));
    Stopwords out;
    for (const auto& w : j.at("stopwords")) out.insert(w.get<std::string>());
    return out;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedStructure, path.string() + ": " + e.what());
  }
}

void validate_lexicons(const std::vector<ThemeLexicon>& lexicons, const Stopwords& stopwords) {
  std::set<Theme> seen;
  for (const auto& lex : lexicons) {
    const std::string name(to_string(lex.theme));
    if (!seen.insert(lex.theme).second)
      throw Error(ErrorCode::InvalidArgument, "theme '" + name + "' supplied twice");
    if (lex.keywords.empty()) throw Error(ErrorCode::InvalidArgument, "theme '" + name + "' has no keywords");
    for (const auto& kw : lex.keywords) {
      if (kw.empty()) throw Error(ErrorCode::InvalidArgument, "theme '" + name + "' has an empty keyword");
      if (stopwords.count(kw))
        throw Error(ErrorCode::InvalidArgument, "keyword '" + kw + "' of theme '" + name + "' is a stopword");
    }
    for (const auto& [kw, variants] : lex.aliases) {
      if (!lex.keywords.count(kw))
        throw Error(ErrorCode::InvalidArgument, "alias entry for unknown keyword '" + kw + "' in '" + name + "'");
      for (const auto& v : variants)
        if (v.empty() || stopwords.count(v))
          throw Error(ErrorCode::InvalidArgument, "invalid variant '" + v + "' for keyword '" + kw + "'");
    }
  }
  for (Theme t : kAllThemes)
    if (!seen.count(t)) throw Error(ErrorCode::MissingTheme, "no lexicon for theme '" + std::string(to_string(t)) + "'");
}

// ---------------------------------------------------------------------------
// Trie

struct LexiconTrie::Node {
  std::map<char32_t, std::unique_ptr<Node>> children;
  bool terminal = false;
};

LexiconTrie::LexiconTrie() : root_(std::make_unique<Node>()) {}
LexiconTrie::LexiconTrie(const std::set<std::string>& entries) : LexiconTrie() {
  for (const auto& e : entries) insert(e);
}
LexiconTrie::~LexiconTrie() = default;
LexiconTrie::LexiconTrie(LexiconTrie&&) noexcept = default;
LexiconTrie& LexiconTrie::operator=(LexiconTrie&&) noexcept = default;

void LexiconTrie::insert(std::string_view entry) {
  const auto cps = text::decode(entry);
  if (cps.empty()) return;
  Node* node = root_.get();
  for (char32_t cp : cps) {
    auto& child = node->children[cp];
    if (!child) child = std::make_unique<Node>();
    node = child.get();
  }
  if (!node->terminal) ++size_;
  node->terminal = true;
}

std::size_t LexiconTrie::longest_match(std::u32string_view s, std::size_t pos) const {
  const Node* node = root_.get();
  std::size_t best = 0;
  for (std::size_t i = pos; i < s.size(); ++i) {
    auto it = node->children.find(s[i]);
    if (it == node->children.end()) break;
    node = it->second.get();
    if (node->terminal) best = i - pos + 1;
  }
  return best;
}

// ---------------------------------------------------------------------------
// Tokenization

std::vector<Token> tokenize(std::string_view input, const LexiconTrie& lexicon) {
  const std::u32string cps = text::decode(input);
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < cps.size()) {
    std::size_t len = lexicon.longest_match(cps, i);
    if (len == 0) len = 1;
    out.push_back({text::encode(std::u32string_view(cps).substr(i, len)), i});
    i += len;
  }
  return out;
}

std::vector<Token> tokenize(std::string_view input, const std::set<std::string>& lexicon) {
  if (lexicon.empty()) throw Error(ErrorCode::InvalidArgument, "tokenize requires a non-empty lexicon");
  return tokenize(input, LexiconTrie(lexicon));
}

std::vector<Token> remove_stopwords(std::vector<Token> tokens, const Stopwords& stopwords) {
  std::erase_if(tokens, [&](const Token& t) { return stopwords.count(t.text) > 0; });
  return tokens;
}

// ---------------------------------------------------------------------------
// Theme statistics

ordered_json FrequencyReport::to_json() const {
  ordered_json j;
  j["theme"] = to_string(theme);
  j["total_count"] = total_count;
  j["line_count"] = line_count;
  j["per_keyword"] = ordered_json::object();
  for (const auto& [kw, n] : per_keyword) j["per_keyword"][kw] = n;
  j["distribution"] = ordered_json::array();
  for (const auto& b : distribution)
    j["distribution"].push_back({{"start", b.start}, {"end", b.end}, {"count", b.count}});
  return j;
}

namespace {

struct KeywordHit {
  std::size_t theme_slot;
  const std::string* keyword;
};

struct ThemeScanner {
  std::map<std::string, std::vector<KeywordHit>> surfaces;
  LexiconTrie trie;
  const std::vector<ThemeLexicon>* lexicons = nullptr;

  explicit ThemeScanner(const std::vector<ThemeLexicon>& lex) : lexicons(&lex) {
    for (std::size_t slot = 0; slot < lex.size(); ++slot) {
      for (const auto& kw : lex[slot].keywords) surfaces[kw].push_back({slot, &kw});
      for (const auto& [kw, variants] : lex[slot].aliases) {
        const std::string* canonical = &*lex[slot].keywords.find(kw);
        for (const auto& v : variants) surfaces[v].push_back({slot, canonical});
      }
    }
    for (const auto& [surface, hits] : surfaces) trie.insert(surface);
  }

  // Calls visit(slot, keyword, global_offset, utterance_ordinal) for each hit.
  template <typename Visit>
  std::size_t scan(const Corpus& corpus, const Stopwords& stopwords, Visit&& visit) const {
    std::size_t base = 0;
    std::size_t ordinal = 0;
    for (const auto& ch : corpus.chapters) {
      for (const auto& u : ch.utterances) {
        for (const auto& tok : remove_stopwords(tokenize(u.text, trie), stopwords)) {
          auto it = surfaces.find(tok.text);
          if (it == surfaces.end()) continue;
          for (const auto& hit : it->second) visit(hit.theme_slot, *hit.keyword, base + tok.offset, ordinal);
        }
        base += text::codepoint_count(u.text);
        ++ordinal;
      }
    }
    return base;
  }
};

std::size_t total_codepoints(const Corpus& corpus) {
  std::size_t n = 0;
  for (const auto& ch : corpus.chapters)
    for (const auto& u : ch.utterances) n += text::codepoint_count(u.text);
  return n;
}

std::size_t bin_of(std::size_t offset, std::size_t total, std::size_t bins) {
  if (total == 0) return 0;
  return std::min(bins - 1, static_cast<std::size_t>((static_cast<unsigned __int128>(offset) * bins) / total));
}

}  // namespace

std::vector<FrequencyReport> theme_frequency(const Corpus& corpus, const std::vector<ThemeLexicon>& lexicons,
                                             const Stopwords& stopwords, std::size_t bins) {
  if (bins == 0) throw Error(ErrorCode::InvalidArgument, "bins must be >= 1");
  validate_lexicons(lexicons, stopwords);

  std::vector<FrequencyReport> reports(lexicons.size());
  std::vector<std::size_t> last_line(lexicons.size(), SIZE_MAX);
  std::vector<std::vector<std::size_t>> offsets(lexicons.size());
  for (std::size_t slot = 0; slot < lexicons.size(); ++slot) {
    reports[slot].theme = lexicons[slot].theme;
    for (const auto& kw : lexicons[slot].keywords) reports[slot].per_keyword[kw] = 0;
  }

  ThemeScanner scanner(lexicons);
  const std::size_t total = scanner.scan(
      corpus, stopwords, [&](std::size_t slot, const std::string& kw, std::size_t offset, std::size_t line) {
        auto& r = reports[slot];
        ++r.per_keyword[kw];
        ++r.total_count;
        offsets[slot].push_back(offset);
        if (last_line[slot] != line) {
          last_line[slot] = line;
          ++r.line_count;
        }
      });

  for (std::size_t slot = 0; slot < reports.size(); ++slot) {
    auto& dist = reports[slot].distribution;
    dist.resize(bins);
    for (std::size_t b = 0; b < bins; ++b) {
      dist[b].start = static_cast<double>(b) / static_cast<double>(bins);
      dist[b].end = static_cast<double>(b + 1) / static_cast<double>(bins);
    }
    for (std::size_t off : offsets[slot]) ++dist[bin_of(off, total, bins)].count;
  }

  std::sort(reports.begin(), reports.end(), [](const auto& a, const auto& b) { return a.theme < b.theme; });
  return reports;
}

std::vector<std::size_t> positional_distribution(const Corpus& corpus, const std::vector<ThemeLexicon>& lexicons,
                                                 const Stopwords& stopwords, Theme theme, std::size_t bins) {
  if (bins == 0) throw Error(ErrorCode::InvalidArgument, "bins must be >= 1");
  auto it = std::find_if(lexicons.begin(), lexicons.end(), [&](const auto& l) { return l.theme == theme; });
  if (it == lexicons.end())
    throw Error(ErrorCode::MissingTheme, "no lexicon for theme '" + std::string(to_string(theme)) + "'");
  const std::size_t wanted = static_cast<std::size_t>(it - lexicons.begin());

  const std::size_t total = total_codepoints(corpus);
  std::vector<std::size_t> hist(bins, 0);
  ThemeScanner scanner(lexicons);
  scanner.scan(corpus, stopwords, [&](std::size_t slot, const std::string&, std::size_t offset, std::size_t) {
    if (slot == wanted) ++hist[bin_of(offset, total, bins)];
  });
  return hist;
}

std::vector<TermCount> term_frequency(const Corpus& corpus, const Stopwords& stopwords, std::size_t top_k,
                                      const std::set<std::string>& lexicon) {
  if (top_k == 0) throw Error(ErrorCode::InvalidArgument, "top_k must be >= 1");
  const LexiconTrie trie(lexicon);
  std::map<std::string, std::size_t> counts;
  for (const auto& ch : corpus.chapters) {
    for (const auto& u : ch.utterances) {
      for (const auto& tok : remove_stopwords(tokenize(u.text, trie), stopwords)) {
        const auto cps = text::decode(tok.text);
        if (std::any_of(cps.begin(), cps.end(), text::is_han)) ++counts[tok.text];
      }
    }
  }
  std::vector<TermCount> ranked(counts.begin(), counts.end());
  // UTF-8 byte order equals code point order, and std::map already sorted by
  // term, so a stable sort by count gives the tie-break for free.
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  if (ranked.size() > top_k) ranked.resize(top_k);
  return ranked;
}

}  // namespace histolens

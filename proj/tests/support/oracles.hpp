#pragma once

// Brute-force reference implementations. They share no code with the library
// beyond the data types: no trie, no maps keyed by canonical order, plain
// linear scans over decoded code points.

#include <algorithm>
#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "histolens/corpus.hpp"
#include "histolens/extraction.hpp"
#include "histolens/kgraph.hpp"
#include "histolens/text.hpp"
#include "histolens/themes.hpp"

namespace oracle {

inline std::u32string to32(const std::string& s) { return histolens::text::decode(s); }
inline std::string to8(const std::u32string& s) { return histolens::text::encode(s); }

/// Longest entry matching at each position by comparing every entry.
inline std::vector<histolens::Token> tokenize(const std::string& text, const std::set<std::string>& lexicon) {
  const std::u32string cps = to32(text);
  std::vector<std::u32string> entries;
  for (const auto& e : lexicon) entries.push_back(to32(e));
  std::vector<histolens::Token> out;
  std::size_t i = 0;
  while (i < cps.size()) {
    std::size_t best = 0;
    for (const auto& e : entries) {
      if (e.empty() || e.size() <= best || i + e.size() > cps.size()) continue;
      bool same = true;
      for (std::size_t k = 0; k < e.size() && same; ++k) same = cps[i + k] == e[k];
      if (same) best = e.size();
    }
    const std::size_t len = best == 0 ? 1 : best;
    out.push_back({to8(cps.substr(i, len)), i});
    i += len;
  }
  return out;
}

struct ThemeCounts {
  std::size_t total = 0;
  std::size_t lines = 0;
  std::map<std::string, std::size_t> per_keyword;
  std::vector<std::size_t> bins;
};

/// Per theme, in the order of `lexicons`.
inline std::vector<ThemeCounts> theme_frequency(const histolens::Corpus& corpus,
                                                const std::vector<histolens::ThemeLexicon>& lexicons,
                                                const histolens::Stopwords& stopwords, std::size_t n_bins) {
  // surface -> list of (theme index, keyword)
  std::vector<std::pair<std::string, std::pair<std::size_t, std::string>>> surfaces;
  std::set<std::string> all;
  for (std::size_t t = 0; t < lexicons.size(); ++t) {
    for (const auto& kw : lexicons[t].keywords) {
      surfaces.push_back({kw, {t, kw}});
      all.insert(kw);
    }
    for (const auto& [kw, vs] : lexicons[t].aliases) {
      for (const auto& v : vs) {
        surfaces.push_back({v, {t, kw}});
        all.insert(v);
      }
    }
  }
  std::size_t total_cps = 0;
  for (const auto& ch : corpus.chapters)
    for (const auto& u : ch.utterances) total_cps += to32(u.text).size();

  std::vector<ThemeCounts> out(lexicons.size());
  for (std::size_t t = 0; t < lexicons.size(); ++t) {
    out[t].bins.assign(n_bins, 0);
    for (const auto& kw : lexicons[t].keywords) out[t].per_keyword[kw] = 0;
  }
  std::size_t base = 0;
  for (const auto& ch : corpus.chapters) {
    for (const auto& u : ch.utterances) {
      std::vector<bool> hit(lexicons.size(), false);
      for (const auto& tok : tokenize(u.text, all)) {
        if (stopwords.count(tok.text)) continue;
        for (const auto& [surface, target] : surfaces) {
          if (surface != tok.text) continue;
          auto& c = out[target.first];
          ++c.total;
          ++c.per_keyword[target.second];
          const std::size_t off = base + tok.offset;
          std::size_t b = 0;
          while (b + 1 < n_bins && (off * n_bins) >= (b + 1) * total_cps) ++b;
          ++c.bins[b];
          hit[target.first] = true;
        }
      }
      for (std::size_t t = 0; t < hit.size(); ++t)
        if (hit[t]) ++out[t].lines;
      base += to32(u.text).size();
    }
  }
  return out;
}

/// Non-overlapping occurrences, scanning left to right one code point at a time.
inline std::size_t count_substring(const std::string& haystack, const std::string& needle) {
  const auto h = to32(haystack);
  const auto n = to32(needle);
  if (n.empty()) return 0;
  std::size_t count = 0;
  for (std::size_t i = 0; i + n.size() <= h.size();) {
    if (h.compare(i, n.size(), n) == 0) {
      ++count;
      i += n.size();
    } else {
      ++i;
    }
  }
  return count;
}

struct EntityRow {
  std::string name;
  histolens::EntityKind kind;
  std::size_t count = 0;
  std::set<std::string> surfaces;
  std::set<int> chapters;
  bool review = false;
};

/// Groups by linear search over an unsorted row list, then sorts.
inline std::vector<EntityRow> normalize(const std::vector<histolens::Mention>& mentions,
                                        const std::vector<std::pair<std::string, std::string>>& alias_pairs) {
  std::vector<EntityRow> rows;
  for (const auto& m : mentions) {
    std::string name = m.surface;
    bool known = false;
    for (const auto& [canonical, surface] : alias_pairs) {
      if (surface == m.surface || canonical == m.surface) {
        name = canonical;
        known = true;
        break;
      }
    }
    EntityRow* row = nullptr;
    for (auto& r : rows)
      if (r.name == name && r.kind == m.kind) row = &r;
    if (!row) {
      rows.push_back({name, m.kind, 0, {}, {}, false});
      row = &rows.back();
    }
    ++row->count;
    row->surfaces.insert(m.surface);
    row->chapters.insert(m.chapter_index);
    row->review = row->review || !known;
  }
  std::sort(rows.begin(), rows.end(), [](const EntityRow& a, const EntityRow& b) {
    if (a.name != b.name) return a.name < b.name;
    return static_cast<int>(a.kind) < static_cast<int>(b.kind);
  });
  return rows;
}

struct EdgeRow {
  std::string a, b, label;
  std::size_t weight = 0;
  bool directed = false;
};

struct GraphRows {
  std::vector<std::pair<std::string, std::size_t>> nodes;  // name, summed mentions
  std::vector<EdgeRow> edges;
};

inline GraphRows build_graph(const std::vector<histolens::Entity>& entities,
                             const std::vector<histolens::Relation>& relations,
                             const std::set<std::string>& directed_labels) {
  GraphRows g;
  for (const auto& e : entities) {
    bool found = false;
    for (auto& n : g.nodes)
      if (n.first == e.canonical_name) {
        n.second += e.mention_count;
        found = true;
      }
    if (!found) g.nodes.push_back({e.canonical_name, e.mention_count});
  }
  for (const auto& r : relations) {
    const bool directed = directed_labels.count(r.label) > 0;
    std::string a = r.source, b = r.target;
    if (!directed && b < a) std::swap(a, b);
    bool found = false;
    for (auto& e : g.edges)
      if (e.a == a && e.b == b && e.label == r.label) {
        e.weight += r.weight;
        found = true;
      }
    if (!found) g.edges.push_back({a, b, r.label, r.weight, directed});
  }
  std::sort(g.nodes.begin(), g.nodes.end());
  std::sort(g.edges.begin(), g.edges.end(), [](const EdgeRow& x, const EdgeRow& y) {
    if (x.a != y.a) return x.a < y.a;
    if (x.b != y.b) return x.b < y.b;
    return x.label < y.label;
  });
  return g;
}

// ---------------------------------------------------------------------------
// Random instances

/// A small Han alphabet so random lexicon entries actually collide with text.
inline const std::vector<std::string>& alphabet() {
  static const std::vector<std::string> a = {"仁", "義", "禮", "法", "刑", "農", "鹽", "鐵", "齊", "魯",
                                             "之", "也", "而", "民", "古", "今", "，", "。", " "};
  return a;
}

inline std::string random_text(std::mt19937_64& rng, std::size_t max_len) {
  std::uniform_int_distribution<std::size_t> len(0, max_len);
  std::uniform_int_distribution<std::size_t> pick(0, alphabet().size() - 1);
  std::string s;
  for (std::size_t n = len(rng), i = 0; i < n; ++i) s += alphabet()[pick(rng)];
  return s;
}

inline std::string random_word(std::mt19937_64& rng, std::size_t max_len = 3) {
  std::uniform_int_distribution<std::size_t> len(1, max_len);
  std::uniform_int_distribution<std::size_t> pick(0, 13);  // Han characters only
  std::string s;
  for (std::size_t n = len(rng), i = 0; i < n; ++i) s += alphabet()[pick(rng)];
  return s;
}

}  // namespace oracle

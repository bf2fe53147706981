#include "histolens/corpus.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

#include "histolens/errors.hpp"
#include "histolens/log.hpp"
#include "histolens/text.hpp"

namespace histolens {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(Language lang) {
  return lang == Language::ClassicalChinese ? "classical-chinese" : "other";
}

std::string_view to_string(SpeakerRole role) {
  switch (role) {
    case SpeakerRole::LegalistOfficial: return "legalist-official";
    case SpeakerRole::ConfucianScholar: return "confucian-scholar";
    case SpeakerRole::Narrator: return "narrator";
    case SpeakerRole::Unknown: return "unknown";
  }
  return "unknown";
}

Language parse_language(std::string_view s) {
  if (s == "classical-chinese") return Language::ClassicalChinese;
  if (s == "other") return Language::Other;
  throw Error(ErrorCode::InvalidArgument, "unknown language '" + std::string(s) + "'");
}

SpeakerRole parse_speaker_role(std::string_view s) {
  if (s == "legalist-official") return SpeakerRole::LegalistOfficial;
  if (s == "confucian-scholar") return SpeakerRole::ConfucianScholar;
  if (s == "narrator") return SpeakerRole::Narrator;
  if (s == "unknown") return SpeakerRole::Unknown;
  throw Error(ErrorCode::InvalidArgument, "unknown speaker role '" + std::string(s) + "'");
}

CorpusFormat parse_corpus_format(std::string_view s) {
  if (s == "auto" || s.empty()) return CorpusFormat::Auto;
  if (s == "plain-markers") return CorpusFormat::PlainMarkers;
  if (s == "structured") return CorpusFormat::Structured;
  throw Error(ErrorCode::InvalidArgument, "unknown corpus format '" + std::string(s) + "'");
}

std::string Utterance::body() const {
  std::string_view t = text;
  if (!cue.empty() && t.substr(0, cue.size()) == cue) t.remove_prefix(cue.size());
  return text::trim(t);
}

// ---------------------------------------------------------------------------
// Marker table

MarkerTable MarkerTable::from_json(const json& j) {
  MarkerTable m;
  if (j.contains("heading_prefix")) m.heading_prefix = j.at("heading_prefix").get<std::string>();
  if (j.contains("detect_unknown_cues")) m.detect_unknown_cues = j.at("detect_unknown_cues").get<bool>();
  if (j.contains("cues")) {
    for (const auto& c : j.at("cues")) {
      SpeakerCue cue{c.at("cue").get<std::string>(), parse_speaker_role(c.at("role").get<std::string>())};
      if (cue.cue.empty()) throw Error(ErrorCode::InvalidArgument, "empty speaker cue");
      m.cues.push_back(std::move(cue));
    }
  }
  if (j.contains("substitutions")) {
    for (const auto& [from, to] : j.at("substitutions").items())
      m.substitutions.emplace_back(from, to.get<std::string>());
  }
  if (m.heading_prefix.empty()) throw Error(ErrorCode::InvalidArgument, "heading_prefix must be non-empty");
  return m;
}

MarkerTable MarkerTable::load(const std::filesystem::path& path) {
  try {
    return from_json(json::parse(text::read_file(path)));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedStructure, path.string() + ": " + e.what());
  }
}

json MarkerTable::to_json() const {
  json j;
  j["heading_prefix"] = heading_prefix;
  j["detect_unknown_cues"] = detect_unknown_cues;
  j["cues"] = json::array();
  for (const auto& c : cues) j["cues"].push_back({{"cue", c.cue}, {"role", to_string(c.role)}});
  j["substitutions"] = json::object();
  for (const auto& [from, to] : substitutions) j["substitutions"][from] = to;
  return j;
}

// ---------------------------------------------------------------------------
// Segmentation

namespace {

std::string utterance_id(int chapter, std::size_t n) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "c%03d-u%03zu", chapter, n);
  return buf;
}

struct CueHit {
  std::size_t pos;
  std::size_t len;
  SpeakerRole role;
};

bool matches_at(const std::u32string& s, std::size_t i, const std::u32string& needle) {
  return !needle.empty() && i + needle.size() <= s.size() &&
         std::equal(needle.begin(), needle.end(), s.begin() + static_cast<std::ptrdiff_t>(i));
}

// "<1..6 Han>曰：" at a line start, or 0 if absent.
std::size_t generic_cue_length(const std::u32string& s, std::size_t i) {
  std::size_t j = i;
  while (j < s.size() && j - i < 7 && text::is_han(s[j]) && s[j] != U'曰') ++j;
  if (j == i || j - i > 6) return 0;
  if (j + 1 < s.size() && s[j] == U'曰' && (s[j + 1] == U'：' || s[j + 1] == U':')) return j + 2 - i;
  return 0;
}

std::string apply_substitutions(std::string s, const MarkerTable& markers) {
  for (const auto& [from, to] : markers.substitutions) {
    if (from.empty()) continue;
    std::size_t pos = 0;
    while ((pos = s.find(from, pos)) != std::string::npos) {
      s.replace(pos, from.size(), to);
      pos += to.size();
    }
  }
  return s;
}

}  // namespace

std::vector<Utterance> segment_utterances(std::string_view chapter_raw, const MarkerTable& markers,
                                          int chapter_index) {
  const std::u32string cps = text::decode(chapter_raw);
  std::vector<std::pair<std::u32string, SpeakerRole>> cues;
  for (const auto& c : markers.cues) cues.emplace_back(text::decode(c.cue), c.role);

  std::vector<CueHit> hits;
  bool line_start = true;
  for (std::size_t i = 0; i < cps.size();) {
    std::size_t best_len = 0;
    SpeakerRole best_role = SpeakerRole::Unknown;
    for (const auto& [cue, role] : cues) {
      if (cue.size() > best_len && matches_at(cps, i, cue)) {
        best_len = cue.size();
        best_role = role;
      }
    }
    if (best_len == 0 && line_start && markers.detect_unknown_cues) {
      best_len = generic_cue_length(cps, i);
      if (best_len > 0) {
        logger()->warn("chapter {}: unmatched speaker cue '{}' treated as unknown", chapter_index,
                       text::encode(std::u32string_view(cps).substr(i, best_len)));
      }
    }
    if (best_len > 0) {
      hits.push_back({i, best_len, best_role});
      i += best_len;
      line_start = false;
      continue;
    }
    if (cps[i] == U'\n') {
      line_start = true;
    } else if (!text::is_space(cps[i])) {
      line_start = false;
    }
    ++i;
  }

  std::vector<Utterance> out;
  auto emit = [&](std::size_t begin, std::size_t end, SpeakerRole role, std::size_t cue_len) {
    std::u32string span = text::trim(std::u32string_view(cps).substr(begin, end - begin));
    if (span.empty()) return;
    Utterance u;
    u.id = utterance_id(chapter_index, out.size() + 1);
    u.chapter_index = chapter_index;
    u.speaker_role = role;
    u.cue = text::encode(std::u32string_view(cps).substr(begin, cue_len));
    u.text = text::encode(span);
    u.char_count = text::han_count(u.text);
    out.push_back(std::move(u));
  };

  const std::size_t first = hits.empty() ? cps.size() : hits.front().pos;
  emit(0, first, SpeakerRole::Narrator, 0);
  for (std::size_t k = 0; k < hits.size(); ++k) {
    const std::size_t end = k + 1 < hits.size() ? hits[k + 1].pos : cps.size();
    emit(hits[k].pos, end, hits[k].role, hits[k].len);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Loading

namespace {

bool starts_with(std::string_view s, std::string_view prefix) {
  return s.substr(0, prefix.size()) == prefix;
}

std::string_view strip_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

void finish_corpus(Corpus& c, std::string_view source_name) {
  if (c.chapters.empty()) throw Error(ErrorCode::EmptyCorpus, std::string(source_name) + ": corpus has no chapters");
  if (c.id.empty()) c.id = "corpus";
}

}  // namespace

Corpus parse_plain_markers(std::string_view doc, const MarkerTable& markers, std::string_view source_name) {
  const std::string src(source_name);
  Corpus corpus;
  std::map<int, std::size_t> seen;  // index -> heading line
  std::vector<std::string> body;
  std::size_t line_no = 0;

  auto flush = [&] {
    if (corpus.chapters.empty()) return;
    while (!body.empty() && text::trim(body.back()).empty()) body.pop_back();
    std::size_t b = 0;
    while (b < body.size() && text::trim(body[b]).empty()) ++b;
    std::string raw;
    for (std::size_t i = b; i < body.size(); ++i) {
      if (i > b) raw.push_back('\n');
      raw += body[i];
    }
    auto& ch = corpus.chapters.back();
    ch.raw_text = apply_substitutions(std::move(raw), markers);
    ch.utterances = segment_utterances(ch.raw_text, markers, ch.index);
    body.clear();
  };

  std::size_t pos = 0;
  if (starts_with(doc, "\xEF\xBB\xBF")) pos = 3;
  while (pos <= doc.size()) {
    std::size_t nl = doc.find('\n', pos);
    if (nl == std::string_view::npos) nl = doc.size();
    std::string_view line = strip_cr(doc.substr(pos, nl - pos));
    pos = nl + 1;
    ++line_no;
    if (nl == doc.size() && line.empty()) break;

    if (starts_with(line, markers.heading_prefix)) {
      flush();
      std::string rest = text::trim(line.substr(markers.heading_prefix.size()));
      std::size_t digits = 0;
      while (digits < rest.size() && rest[digits] >= '0' && rest[digits] <= '9') ++digits;
      if (digits == 0 || digits > 6)
        throw ParseError(src, line_no, "chapter heading must start with a chapter index");
      const int index = std::stoi(rest.substr(0, digits));
      if (auto it = seen.find(index); it != seen.end())
        throw ParseError(src, line_no,
                         "duplicate chapter index " + std::to_string(index) + " (first at line " +
                             std::to_string(it->second) + ")");
      if (index != static_cast<int>(corpus.chapters.size()) + 1)
        throw ParseError(src, line_no,
                         "chapter index " + std::to_string(index) + " is not contiguous (expected " +
                             std::to_string(corpus.chapters.size() + 1) + ")");
      seen.emplace(index, line_no);
      Chapter ch;
      ch.index = index;
      ch.title = text::trim(std::string_view(rest).substr(digits));
      corpus.chapters.push_back(std::move(ch));
      continue;
    }
    if (corpus.chapters.empty()) {
      if (text::trim(line).empty()) continue;
      if (line.front() == '#') {
        const auto colon = line.find(':');
        if (colon == std::string_view::npos) throw ParseError(src, line_no, "header line without ':'");
        const std::string key = text::trim(line.substr(1, colon - 1));
        const std::string value = text::trim(line.substr(colon + 1));
        if (key == "id") {
          corpus.id = value;
        } else if (key == "title") {
          corpus.title = value;
        } else if (key == "language") {
          try {
            corpus.language = parse_language(value);
          } catch (const Error& e) {
            throw ParseError(src, line_no, e.what());
          }
        } else if (key == "format") {
          if (value != "plain-markers")
            throw ParseError(src, line_no, "header declares format '" + value + "'");
        }
        continue;
      }
      throw ParseError(src, line_no, "text before the first chapter heading");
    }
    body.emplace_back(line);
  }
  flush();
  finish_corpus(corpus, source_name);
  return corpus;
}

Corpus parse_structured_corpus(std::string_view doc, const MarkerTable& markers, std::string_view source_name) {
  const std::string src(source_name);
  json j;
  try {
    j = json::parse(doc);
  } catch (const json::parse_error& e) {
    throw ParseError(src, 0, std::string("invalid structured corpus (byte ") + std::to_string(e.byte) + "): " + e.what());
  }
  Corpus corpus;
  try {
    corpus.id = j.value("id", std::string("corpus"));
    corpus.title = j.value("title", std::string());
    corpus.language = parse_language(j.value("language", std::string("classical-chinese")));
    std::set<int> seen;
    for (const auto& jc : j.at("chapters")) {
      Chapter ch;
      ch.index = jc.at("index").get<int>();
      if (!seen.insert(ch.index).second)
        throw ParseError(src, 0, "duplicate chapter index " + std::to_string(ch.index));
      ch.title = jc.value("title", std::string());
      ch.raw_text = jc.value("raw_text", std::string());
      if (jc.contains("utterances")) {
        for (const auto& ju : jc.at("utterances")) {
          Utterance u;
          u.id = ju.at("id").get<std::string>();
          u.chapter_index = ju.at("chapter_index").get<int>();
          u.speaker_role = parse_speaker_role(ju.at("speaker_role").get<std::string>());
          u.cue = ju.value("cue", std::string());
          u.text = ju.at("text").get<std::string>();
          u.char_count = ju.at("char_count").get<std::size_t>();
          ch.utterances.push_back(std::move(u));
        }
      } else {
        ch.raw_text = apply_substitutions(ch.raw_text, markers);
        ch.utterances = segment_utterances(ch.raw_text, markers, ch.index);
      }
      corpus.chapters.push_back(std::move(ch));
    }
  } catch (const json::exception& e) {
    throw ParseError(src, 0, e.what());
  }
  finish_corpus(corpus, source_name);
  try {
    validate_corpus(corpus);
  } catch (const Error& e) {
    throw ParseError(src, 0, e.what());
  }
  return corpus;
}

Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format, const MarkerTable& markers) {
  if (!std::filesystem::exists(path)) throw Error(ErrorCode::FileNotFound, "corpus not found: " + path.string());
  const std::string doc = text::read_file(path);
  if (format == CorpusFormat::Auto) {
    const auto first = doc.find_first_not_of(" \t\r\n");
    format = (first != std::string::npos && doc[first] == '{') ? CorpusFormat::Structured
                                                                : CorpusFormat::PlainMarkers;
  }
  Corpus c = format == CorpusFormat::Structured ? parse_structured_corpus(doc, markers, path.string())
                                                : parse_plain_markers(doc, markers, path.string());
  validate_corpus(c);
  return c;
}

void validate_corpus(const Corpus& corpus) {
  if (corpus.chapters.empty()) throw Error(ErrorCode::EmptyCorpus, "corpus has no chapters");
  std::set<std::string> ids;
  for (std::size_t i = 0; i < corpus.chapters.size(); ++i) {
    const auto& ch = corpus.chapters[i];
    if (ch.index != static_cast<int>(i) + 1)
      throw Error(ErrorCode::MalformedStructure,
                  "chapter indices must be contiguous from 1 (found " + std::to_string(ch.index) + " at position " +
                      std::to_string(i + 1) + ")");
    for (const auto& u : ch.utterances) {
      if (u.chapter_index != ch.index)
        throw Error(ErrorCode::MalformedStructure, "utterance " + u.id + " has wrong chapter index");
      if (u.char_count != text::han_count(u.text))
        throw Error(ErrorCode::MalformedStructure, "utterance " + u.id + " char_count mismatch");
      if (!u.cue.empty() && u.text.compare(0, u.cue.size(), u.cue) != 0)
        throw Error(ErrorCode::MalformedStructure, "utterance " + u.id + " does not start with its cue");
      if (!ids.insert(u.id).second) throw Error(ErrorCode::MalformedStructure, "duplicate utterance id " + u.id);
    }
  }
}

// ---------------------------------------------------------------------------
// Serialization and stats

ordered_json corpus_to_json(const Corpus& corpus) {
  ordered_json j;
  j["format"] = "histolens-corpus/1";
  j["id"] = corpus.id;
  j["title"] = corpus.title;
  j["language"] = to_string(corpus.language);
  j["chapters"] = ordered_json::array();
  for (const auto& ch : corpus.chapters) {
    ordered_json jc;
    jc["index"] = ch.index;
    jc["title"] = ch.title;
    jc["raw_text"] = ch.raw_text;
    jc["utterances"] = ordered_json::array();
    for (const auto& u : ch.utterances) {
      ordered_json ju;
      ju["id"] = u.id;
      ju["chapter_index"] = u.chapter_index;
      ju["speaker_role"] = to_string(u.speaker_role);
      ju["cue"] = u.cue;
      ju["text"] = u.text;
      ju["char_count"] = u.char_count;
      jc["utterances"].push_back(std::move(ju));
    }
    j["chapters"].push_back(std::move(jc));
  }
  return j;
}

std::string serialize_corpus(const Corpus& corpus) { return corpus_to_json(corpus).dump(2) + "\n"; }

CorpusStats& CorpusStats::operator+=(const CorpusStats& o) {
  chapters += o.chapters;
  utterances += o.utterances;
  han_chars += o.han_chars;
  for (const auto& [r, n] : o.utterances_by_role) utterances_by_role[r] += n;
  for (const auto& [r, n] : o.han_chars_by_role) han_chars_by_role[r] += n;
  return *this;
}

ordered_json CorpusStats::to_json() const {
  ordered_json j;
  j["chapters"] = chapters;
  j["utterances"] = utterances;
  j["han_chars"] = han_chars;
  ordered_json by_role = ordered_json::object();
  for (auto role : {SpeakerRole::LegalistOfficial, SpeakerRole::ConfucianScholar, SpeakerRole::Narrator,
                    SpeakerRole::Unknown}) {
    auto u = utterances_by_role.find(role);
    auto h = han_chars_by_role.find(role);
    by_role[std::string(to_string(role))] = {
        {"utterances", u == utterances_by_role.end() ? 0 : u->second},
        {"han_chars", h == han_chars_by_role.end() ? 0 : h->second}};
  }
  j["by_role"] = std::move(by_role);
  return j;
}

CorpusStats chapter_stats(const Chapter& chapter) {
  CorpusStats s;
  s.chapters = 1;
  for (const auto& u : chapter.utterances) {
    ++s.utterances;
    ++s.utterances_by_role[u.speaker_role];
    s.han_chars += u.char_count;
    s.han_chars_by_role[u.speaker_role] += u.char_count;
  }
  return s;
}

CorpusStats corpus_stats(const Corpus& corpus) {
  CorpusStats total;
  for (const auto& ch : corpus.chapters) total += chapter_stats(ch);
  return total;
}

}  // namespace histolens

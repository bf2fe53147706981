#include "histolens/extraction.hpp"

#include <algorithm>
#include <atomic>
#include <thread>

#include "histolens/errors.hpp"
#include "histolens/log.hpp"
#include "histolens/structured.hpp"
#include "histolens/text.hpp"

namespace histolens {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(EntityKind kind) { return kind == EntityKind::Person ? "person" : "place"; }

EntityKind parse_entity_kind(std::string_view s) {
  if (s == "person") return EntityKind::Person;
  if (s == "place") return EntityKind::Place;
  throw Error(ErrorCode::InvalidArgument, "unknown entity kind '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// Tables

void AliasTable::add(const std::string& canonical, const std::string& surface) {
  if (canonical.empty() || surface.empty()) throw Error(ErrorCode::InvalidArgument, "empty alias entry");
  for (const auto* s : {&canonical, &surface}) {
    auto [it, inserted] = map_.emplace(*s, canonical);
    if (!inserted && it->second != canonical)
      throw Error(ErrorCode::AliasConflict,
                  "surface '" + *s + "' maps to both '" + it->second + "' and '" + canonical + "'");
  }
}

std::optional<std::string> AliasTable::canonical_of(const std::string& surface) const {
  auto it = map_.find(surface);
  if (it == map_.end()) return std::nullopt;
  return it->second;
}

AliasTable AliasTable::from_json(const json& j) {
  AliasTable t;
  for (const auto& [canonical, surfaces] : j.at("aliases").items()) {
    t.add(canonical, canonical);
    for (const auto& s : surfaces) t.add(canonical, s.get<std::string>());
  }
  return t;
}

AliasTable AliasTable::load(const std::filesystem::path& path) {
  try {
    return from_json(json::parse(text::read_file(path)));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedStructure, path.string() + ": " + e.what());
  }
}

void EraTable::add_era(const std::string& era, const std::set<std::string>& persons) {
  for (const auto& p : persons) {
    auto [it, inserted] = person_era_.emplace(p, era);
    if (!inserted && it->second != era)
      throw Error(ErrorCode::EraConflict, "person '" + p + "' listed under both '" + it->second + "' and '" + era + "'");
  }
  auto existing = std::find_if(eras_.begin(), eras_.end(), [&](const auto& e) { return e.first == era; });
  if (existing == eras_.end()) {
    eras_.emplace_back(era, persons);
  } else {
    existing->second.insert(persons.begin(), persons.end());
  }
}

std::optional<std::string> EraTable::era_of(const std::string& person) const {
  auto it = person_era_.find(person);
  if (it == person_era_.end()) return std::nullopt;
  return it->second;
}

EraTable EraTable::from_json(const json& j) {
  EraTable t;
  for (const auto& e : j.at("eras")) {
    std::set<std::string> persons;
    for (const auto& p : e.at("persons")) persons.insert(p.get<std::string>());
    t.add_era(e.at("name").get<std::string>(), persons);
  }
  return t;
}

EraTable EraTable::load(const std::filesystem::path& path) {
  try {
    return from_json(json::parse(text::read_file(path)));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedStructure, path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Chunking and prompts

std::vector<std::vector<ChunkPiece>> chunk_chapter(const Chapter& chapter, std::size_t budget) {
  if (budget == 0) throw Error(ErrorCode::InvalidArgument, "chunk budget must be > 0");
  std::vector<std::vector<ChunkPiece>> chunks;
  std::vector<ChunkPiece> current;
  std::size_t used = 0;
  auto flush = [&] {
    if (!current.empty()) chunks.push_back(std::move(current));
    current.clear();
    used = 0;
  };
  for (const auto& u : chapter.utterances) {
    const auto cps = text::decode(u.text);
    if (cps.size() > budget) {
      flush();
      for (std::size_t pos = 0; pos < cps.size(); pos += budget) {
        current.push_back({u.id, text::encode(std::u32string_view(cps).substr(pos, budget))});
        flush();
      }
      continue;
    }
    if (used + cps.size() > budget) flush();
    current.push_back({u.id, u.text});
    used += cps.size();
  }
  flush();
  return chunks;
}

namespace {

std::string format_passage(const std::vector<ChunkPiece>& chunk) {
  std::string out;
  for (const auto& p : chunk) out += "[" + p.utterance_id + "] " + p.text + "\n";
  return out;
}

Bindings chapter_bindings(const Chapter& chapter, const std::vector<ChunkPiece>& chunk) {
  return Bindings{{"chapter_index", std::to_string(chapter.index)},
                  {"chapter_title", chapter.title},
                  {"passage", format_passage(chunk)}};
}

const Utterance* find_utterance(const Chapter& chapter, const std::string& id) {
  for (const auto& u : chapter.utterances)
    if (u.id == id) return &u;
  return nullptr;
}

bool surface_at(const std::string& text_utf8, long offset, const std::string& surface) {
  if (offset < 0) return false;
  const auto cps = text::decode(text_utf8);
  const auto needle = text::decode(surface);
  const auto off = static_cast<std::size_t>(offset);
  return off + needle.size() <= cps.size() && std::u32string_view(cps).substr(off, needle.size()) == needle;
}

}  // namespace

std::vector<Mention> extract_entities(const Chapter& chapter, Gateway& gateway, const std::string& template_id,
                                      std::size_t chunk_chars) {
  std::vector<Mention> out;
  const auto& tmpl = gateway.templates().get(template_id);
  const std::string schema = tmpl.output_schema_id.value_or(std::string(structured::kEntityList));
  for (const auto& chunk : chunk_chapter(chapter, chunk_chars)) {
    const Prompt prompt = render_prompt(tmpl, chapter_bindings(chapter, chunk), {});
    const json reply = gateway.complete_structured(prompt, schema);
    for (const auto& item : reply.at("entities")) {
      Mention m;
      m.surface = text::trim(item.at("name").get<std::string>());
      if (m.surface.empty()) continue;
      m.kind = parse_entity_kind(item.at("kind").get<std::string>());
      m.chapter_index = chapter.index;
      const std::string claimed = item.value("utterance_id", std::string());
      const bool in_chunk = std::any_of(chunk.begin(), chunk.end(), [&](const auto& p) { return p.utterance_id == claimed; });
      if (in_chunk) {
        m.utterance_id = claimed;
      } else {
        for (const auto& p : chunk) {
          if (p.text.find(m.surface) != std::string::npos) {
            m.utterance_id = p.utterance_id;
            break;
          }
        }
      }
      if (item.contains("offset") && !m.utterance_id.empty()) {
        const long offset = item.at("offset").get<long>();
        if (const auto* u = find_utterance(chapter, m.utterance_id); u && surface_at(u->text, offset, m.surface))
          m.char_offset = offset;
      }
      out.push_back(std::move(m));
    }
  }
  return out;
}

std::vector<Relation> extract_relations(const Chapter& chapter, const std::vector<Entity>& entities,
                                        Gateway& gateway, const std::string& template_id, std::size_t chunk_chars) {
  std::map<std::string, std::string> resolve;
  std::string entity_list;
  for (const auto& e : entities) {
    resolve[e.canonical_name] = e.canonical_name;
    for (const auto& a : e.aliases) resolve.emplace(a, e.canonical_name);
    entity_list += e.canonical_name + " (" + std::string(to_string(e.kind)) + ")\n";
  }

  std::map<std::tuple<std::string, std::string, std::string>, Relation> merged;
  if (entities.size() < 2) return {};
  const auto& tmpl = gateway.templates().get(template_id);
  const std::string schema = tmpl.output_schema_id.value_or(std::string(structured::kRelationList));
  for (const auto& chunk : chunk_chapter(chapter, chunk_chars)) {
    Bindings b = chapter_bindings(chapter, chunk);
    b["entities"] = entity_list;
    const json reply = gateway.complete_structured(render_prompt(tmpl, b, {}), schema);
    for (const auto& item : reply.at("relations")) {
      const auto src = text::trim(item.at("source").get<std::string>());
      const auto dst = text::trim(item.at("target").get<std::string>());
      const auto label = text::trim(item.at("label").get<std::string>());
      auto s = resolve.find(src);
      auto t = resolve.find(dst);
      if (s == resolve.end() || t == resolve.end()) {
        logger()->warn("chapter {}: dropped relation {} -[{}]-> {} (unknown endpoint)", chapter.index, src, label, dst);
        continue;
      }
      if (s->second == t->second) {
        logger()->warn("chapter {}: dropped self relation on {}", chapter.index, s->second);
        continue;
      }
      const auto key = std::make_tuple(s->second, t->second, label);
      auto it = merged.find(key);
      if (it != merged.end()) {
        ++it->second.weight;
        continue;
      }
      std::string evidence = item.value("evidence", std::string());
      if (!find_utterance(chapter, evidence)) evidence.clear();
      merged.emplace(key, Relation{s->second, t->second, label, evidence, 1});
    }
  }
  std::vector<Relation> out;
  out.reserve(merged.size());
  for (auto& [k, r] : merged) out.push_back(std::move(r));
  return out;
}

// ---------------------------------------------------------------------------
// Normalization

std::vector<Entity> normalize(const std::vector<Mention>& mentions, const AliasTable& aliases) {
  std::map<std::pair<std::string, EntityKind>, Entity> groups;
  for (const auto& m : mentions) {
    auto canonical = aliases.canonical_of(m.surface);
    const bool known = canonical.has_value();
    const std::string name = known ? *canonical : m.surface;
    auto& e = groups[{name, m.kind}];
    if (e.mention_count == 0) {
      e.canonical_name = name;
      e.kind = m.kind;
    }
    ++e.mention_count;
    e.aliases.insert(m.surface);
    e.chapters.insert(m.chapter_index);
    if (!known) e.needs_review = true;
  }
  std::vector<Entity> out;
  out.reserve(groups.size());
  for (auto& [k, e] : groups) out.push_back(std::move(e));
  return out;
}

std::vector<Entity> resolve_kind_conflicts(std::vector<Entity> entities) {
  std::map<std::string, std::vector<Entity>> by_name;
  for (auto& e : entities) by_name[e.canonical_name].push_back(std::move(e));
  std::vector<Entity> out;
  for (auto& [name, group] : by_name) {
    if (group.size() == 1) {
      out.push_back(std::move(group.front()));
      continue;
    }
    std::size_t persons = 0;
    std::size_t places = 0;
    for (const auto& e : group) (e.kind == EntityKind::Person ? persons : places) += e.mention_count;
    Entity merged;
    merged.canonical_name = name;
    merged.kind = persons >= places ? EntityKind::Person : EntityKind::Place;
    merged.needs_review = true;
    for (const auto& e : group) {
      merged.mention_count += e.mention_count;
      merged.aliases.insert(e.aliases.begin(), e.aliases.end());
      merged.chapters.insert(e.chapters.begin(), e.chapters.end());
      if (e.era) merged.era = e.era;
    }
    logger()->warn("entity '{}' extracted as both person and place; kept as {}", name, to_string(merged.kind));
    out.push_back(std::move(merged));
  }
  return out;
}

void assign_eras(std::vector<Entity>& entities, const EraTable& eras) {
  for (auto& e : entities)
    if (e.kind == EntityKind::Person) e.era = eras.era_of(e.canonical_name);
}

std::vector<std::pair<std::string, std::size_t>> era_histogram(const std::vector<Entity>& entities,
                                                                const EraTable& eras, std::size_t min_mentions) {
  if (min_mentions == 0) throw Error(ErrorCode::InvalidArgument, "min_mentions must be >= 1");
  std::vector<std::pair<std::string, std::size_t>> hist;
  std::map<std::string, std::size_t> slot;
  for (const auto& [name, persons] : eras.eras()) {
    slot[name] = hist.size();
    hist.emplace_back(name, 0);
  }
  const std::size_t unassigned = hist.size();
  hist.emplace_back(std::string(kUnassignedEra), 0);
  for (const auto& e : entities) {
    if (e.kind != EntityKind::Person || e.mention_count < min_mentions) continue;
    auto era = eras.era_of(e.canonical_name);
    hist[era ? slot.at(*era) : unassigned].second += e.mention_count;
  }
  return hist;
}

std::vector<Relation> co_mention_relations(const std::vector<Mention>& mentions, const AliasTable& aliases) {
  std::map<std::string, std::set<std::string>> by_utterance;
  for (const auto& m : mentions) {
    if (m.utterance_id.empty()) continue;
    by_utterance[m.utterance_id].insert(aliases.canonical_of(m.surface).value_or(m.surface));
  }
  std::map<std::pair<std::string, std::string>, Relation> edges;
  for (const auto& [uid, names] : by_utterance) {
    for (auto a = names.begin(); a != names.end(); ++a) {
      for (auto b = std::next(a); b != names.end(); ++b) {
        auto [it, inserted] = edges.try_emplace({*a, *b}, Relation{*a, *b, std::string(kCoMentionLabel), uid, 0});
        ++it->second.weight;
      }
    }
  }
  std::vector<Relation> out;
  for (auto& [k, r] : edges) out.push_back(std::move(r));
  return out;
}

std::vector<ChapterExtraction> extract_corpus(const Corpus& corpus, Gateway& gateway, const AliasTable& aliases,
                                              const std::string& entity_template,
                                              const std::string& relation_template, std::size_t chunk_chars,
                                              std::size_t parallelism) {
  std::vector<ChapterExtraction> results(corpus.chapters.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < corpus.chapters.size(); i = next++) {
      const auto& ch = corpus.chapters[i];
      auto& r = results[i];
      r.chapter_index = ch.index;
      try {
        r.mentions = extract_entities(ch, gateway, entity_template, chunk_chars);
        r.relations = extract_relations(ch, normalize(r.mentions, aliases), gateway, relation_template, chunk_chars);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::UnparseableAfterRepairs && e.code() != ErrorCode::ProviderError &&
            e.code() != ErrorCode::Timeout && e.code() != ErrorCode::RateLimitedAfterRetries)
          throw;
        logger()->error("chapter {} skipped: {}", ch.index, e.what());
        r.mentions.clear();
        r.relations.clear();
        r.error = std::string(error_code_name(e.code())) + ": " + e.what();
      }
    }
  };
  parallelism = std::max<std::size_t>(1, std::min(parallelism, corpus.chapters.size()));
  if (parallelism == 1) {
    worker();
    return results;
  }
  std::vector<std::thread> threads;
  std::exception_ptr failure;
  std::mutex failure_mu;
  for (std::size_t t = 0; t < parallelism; ++t) {
    threads.emplace_back([&] {
      try {
        worker();
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
        next = corpus.chapters.size();
      }
    });
  }
  for (auto& t : threads) t.join();
  if (failure) std::rethrow_exception(failure);
  return results;
}

// ---------------------------------------------------------------------------
// JSON

ordered_json to_json(const Mention& m) {
  ordered_json j;
  j["surface"] = m.surface;
  j["kind"] = to_string(m.kind);
  j["chapter_index"] = m.chapter_index;
  j["utterance_id"] = m.utterance_id;
  j["char_offset"] = m.char_offset;
  return j;
}

ordered_json to_json(const Entity& e) {
  ordered_json j;
  j["canonical_name"] = e.canonical_name;
  j["kind"] = to_string(e.kind);
  j["aliases"] = e.aliases;
  j["mention_count"] = e.mention_count;
  j["era"] = e.era ? ordered_json(*e.era) : ordered_json(nullptr);
  j["stance_notes"] = e.stance_notes;
  j["chapters"] = e.chapters;
  j["needs_review"] = e.needs_review;
  return j;
}

ordered_json to_json(const Relation& r) {
  ordered_json j;
  j["source"] = r.source;
  j["target"] = r.target;
  j["label"] = r.label;
  j["evidence_utterance_id"] = r.evidence_utterance_id;
  j["weight"] = r.weight;
  return j;
}

Mention mention_from_json(const json& j) {
  return Mention{j.at("surface").get<std::string>(), parse_entity_kind(j.at("kind").get<std::string>()),
                 j.at("chapter_index").get<int>(), j.value("utterance_id", std::string()),
                 j.value("char_offset", -1L)};
}

Entity entity_from_json(const json& j) {
  Entity e;
  e.canonical_name = j.at("canonical_name").get<std::string>();
  e.kind = parse_entity_kind(j.at("kind").get<std::string>());
  e.aliases = j.value("aliases", std::set<std::string>{});
  e.mention_count = j.at("mention_count").get<std::size_t>();
  if (j.contains("era") && !j.at("era").is_null()) e.era = j.at("era").get<std::string>();
  e.stance_notes = j.value("stance_notes", std::string());
  e.chapters = j.value("chapters", std::set<int>{});
  e.needs_review = j.value("needs_review", false);
  return e;
}

Relation relation_from_json(const json& j) {
  return Relation{j.at("source").get<std::string>(), j.at("target").get<std::string>(),
                  j.at("label").get<std::string>(), j.value("evidence_utterance_id", std::string()),
                  j.value("weight", std::size_t{1})};
}

}  // namespace histolens

#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "histolens/corpus.hpp"
#include "histolens/gateway.hpp"

namespace histolens {

enum class EntityKind { Person, Place };

std::string_view to_string(EntityKind kind);
EntityKind parse_entity_kind(std::string_view s);

struct Mention {
  std::string surface;
  EntityKind kind = EntityKind::Person;
  int chapter_index = 0;
  std::string utterance_id;
  /// Code-point offset inside the utterance; -1 when the provider gave none
  /// or the given one did not point at the surface.
  long char_offset = -1;

  bool operator==(const Mention&) const = default;
  auto operator<=>(const Mention&) const = default;
};

struct Entity {
  std::string canonical_name;
  EntityKind kind = EntityKind::Person;
  std::set<std::string> aliases;
  std::size_t mention_count = 0;
  std::optional<std::string> era;
  std::string stance_notes;
  std::set<int> chapters;
  /// Surface was absent from the alias table.
  bool needs_review = false;

  bool operator==(const Entity&) const = default;
};

struct Relation {
  std::string source;
  std::string target;
  std::string label;
  std::string evidence_utterance_id;
  std::size_t weight = 1;

  bool operator==(const Relation&) const = default;
};

/// surface -> canonical name. Canonical names resolve to themselves.
class AliasTable {
 public:
  /// Throws AliasConflict when `surface` already maps to another canonical.
  void add(const std::string& canonical, const std::string& surface);
  std::optional<std::string> canonical_of(const std::string& surface) const;
  bool contains(const std::string& surface) const { return map_.count(surface) > 0; }
  std::size_t size() const { return map_.size(); }

  /// `{"aliases": {"<canonical>": ["<surface>", ...]}}`
  static AliasTable from_json(const nlohmann::json& j);
  static AliasTable load(const std::filesystem::path& path);

 private:
  std::map<std::string, std::string> map_;
};

class EraTable {
 public:
  /// Throws EraConflict if a person is already assigned to another era.
  void add_era(const std::string& era, const std::set<std::string>& persons);
  std::optional<std::string> era_of(const std::string& person) const;
  const std::vector<std::pair<std::string, std::set<std::string>>>& eras() const { return eras_; }

  /// `{"eras": [{"name": ..., "persons": [...]}, ...]}` in chronological order.
  static EraTable from_json(const nlohmann::json& j);
  static EraTable load(const std::filesystem::path& path);

 private:
  std::vector<std::pair<std::string, std::set<std::string>>> eras_;
  std::map<std::string, std::string> person_era_;
};

inline constexpr std::size_t kDefaultChunkChars = 6000;
inline constexpr std::string_view kEntityTemplate = "entity-extraction";
inline constexpr std::string_view kRelationTemplate = "relation-extraction";

/// Splits a chapter's utterances into overlap-free prompt chunks of at most
/// `budget` code points each (a longer utterance is cut into pieces).
struct ChunkPiece {
  std::string utterance_id;
  std::string text;
};
std::vector<std::vector<ChunkPiece>> chunk_chapter(const Chapter& chapter, std::size_t budget);

/// One structured gateway call per chunk. Throws UnparseableAfterRepairs.
std::vector<Mention> extract_entities(const Chapter& chapter, Gateway& gateway, const std::string& template_id,
                                      std::size_t chunk_chars = kDefaultChunkChars);

/// Relations whose endpoints resolve against `entities` (by canonical name or
/// alias); others are dropped and logged. Repeated triples merge into weight.
std::vector<Relation> extract_relations(const Chapter& chapter, const std::vector<Entity>& entities,
                                        Gateway& gateway, const std::string& template_id,
                                        std::size_t chunk_chars = kDefaultChunkChars);

/// Groups mentions by (canonical name, kind), sorted by name then kind.
std::vector<Entity> normalize(const std::vector<Mention>& mentions, const AliasTable& aliases);

/// Merges entities that share a canonical name under different kinds into the
/// majority kind (ties go to person) and flags them for review.
std::vector<Entity> resolve_kind_conflicts(std::vector<Entity> entities);

void assign_eras(std::vector<Entity>& entities, const EraTable& eras);

inline constexpr std::size_t kDefaultMinMentions = 3;
inline constexpr std::string_view kUnassignedEra = "unassigned";

/// Era name -> summed mentions of persons with mention_count >= min_mentions,
/// in era-table order followed by "unassigned".
std::vector<std::pair<std::string, std::size_t>> era_histogram(const std::vector<Entity>& entities,
                                                                const EraTable& eras,
                                                                std::size_t min_mentions = kDefaultMinMentions);

inline constexpr std::string_view kCoMentionLabel = "co-mentioned";

/// Undirected co-occurrence links between entities mentioned in the same
/// utterance; weight counts utterances.
std::vector<Relation> co_mention_relations(const std::vector<Mention>& mentions, const AliasTable& aliases);

struct ChapterExtraction {
  int chapter_index = 0;
  std::vector<Mention> mentions;
  std::vector<Relation> relations;
  /// Set when the chapter was skipped.
  std::optional<std::string> error;
};

/// Runs entity then relation extraction per chapter on up to `parallelism`
/// threads. Results are in chapter order.
std::vector<ChapterExtraction> extract_corpus(const Corpus& corpus, Gateway& gateway, const AliasTable& aliases,
                                              const std::string& entity_template,
                                              const std::string& relation_template, std::size_t chunk_chars,
                                              std::size_t parallelism);

nlohmann::ordered_json to_json(const Mention& m);
nlohmann::ordered_json to_json(const Entity& e);
nlohmann::ordered_json to_json(const Relation& r);
Mention mention_from_json(const nlohmann::json& j);
Entity entity_from_json(const nlohmann::json& j);
Relation relation_from_json(const nlohmann::json& j);

}  // namespace histolens

#pragma once

#include <filesystem>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "histolens/extraction.hpp"

namespace histolens {

inline constexpr std::string_view kPipelineVersion = "histolens 0.1.0";

struct GraphNode {
  std::string name;
  EntityKind kind = EntityKind::Person;
  /// Also emitted as the node's visual size.
  std::size_t mention_count = 0;

  bool operator==(const GraphNode&) const = default;
};

struct GraphEdge {
  std::string source;
  std::string target;
  std::string label;
  std::size_t weight = 1;
  bool directed = false;

  bool operator==(const GraphEdge&) const = default;
};

struct GraphMetadata {
  std::string corpus_id;
  std::string created_at;
  std::string pipeline_version = std::string(kPipelineVersion);

  bool operator==(const GraphMetadata&) const = default;
};

/// Nodes sorted by name; edges sorted by (source, target, label). Undirected
/// edges store the lexicographically smaller endpoint as source.
struct KnowledgeGraph {
  std::vector<GraphNode> nodes;
  std::vector<GraphEdge> edges;
  GraphMetadata metadata;

  bool operator==(const KnowledgeGraph&) const = default;
};

struct GraphOptions {
  /// Labels whose edges keep their direction; all others are undirected.
  std::set<std::string> directed_labels;
  GraphMetadata metadata;
};

/// Throws DanglingEndpoint for relations naming unknown entities and
/// DuplicateNode when one name appears with two kinds.
KnowledgeGraph build_graph(const std::vector<Entity>& entities, const std::vector<Relation>& relations,
                           const GraphOptions& options = {});

enum class GraphFormat { Gexf, GraphMl, Json };

GraphFormat parse_graph_format(std::string_view s);

std::string export_graph(const KnowledgeGraph& graph, GraphFormat format);
void write_graph(const KnowledgeGraph& graph, GraphFormat format, const std::filesystem::path& path);

/// Reads files produced by export_graph (and other well-formed GEXF 1.2 /
/// GraphML files using the same attribute names).
KnowledgeGraph import_graph(std::string_view bytes, GraphFormat format);

}  // namespace histolens

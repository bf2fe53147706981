#include <gtest/gtest.h>

#include <random>

#include "fixtures.hpp"
#include "histolens/errors.hpp"
#include "histolens/kgraph.hpp"
#include "oracles.hpp"

using namespace histolens;

namespace {

Entity entity(const std::string& name, EntityKind kind, std::size_t n) {
  Entity e;
  e.canonical_name = name;
  e.kind = kind;
  e.mention_count = n;
  return e;
}

KnowledgeGraph sample_graph() {
  GraphOptions o;
  o.directed_labels = {"served-in"};
  o.metadata = {"fixture & <corpus>", "2024-01-01T00:00:00Z", std::string(kPipelineVersion)};
  return build_graph({entity("管仲", EntityKind::Person, 4), entity("齊", EntityKind::Place, 6),
                      entity("孔子", EntityKind::Person, 9), entity("魯", EntityKind::Place, 3)},
                     {{"管仲", "齊", "served-in", "c1-u1", 2},
                      {"魯", "孔子", "born-in", "", 1},
                      {"孔子", "魯", "born-in", "", 1},
                      {"孔子", "管仲", "praised \"by\"", "", 1}},
                     o);
}

void expect_same(const KnowledgeGraph& a, const KnowledgeGraph& b) {
  EXPECT_EQ(a.nodes, b.nodes);
  EXPECT_EQ(a.edges, b.edges);
  EXPECT_EQ(a.metadata, b.metadata);
}

}  // namespace

TEST(BuildGraph, CanonicalizesUndirectedAndMergesWeights) {
  const auto g = sample_graph();
  ASSERT_EQ(g.nodes.size(), 4u);
  ASSERT_EQ(g.edges.size(), 3u);
  const auto born = std::find_if(g.edges.begin(), g.edges.end(), [](const auto& e) { return e.label == "born-in"; });
  ASSERT_NE(born, g.edges.end());
  EXPECT_LT(born->source, born->target);
  EXPECT_EQ(born->weight, 2u);
  EXPECT_FALSE(born->directed);
  const auto served = std::find_if(g.edges.begin(), g.edges.end(), [](const auto& e) { return e.directed; });
  ASSERT_NE(served, g.edges.end());
  EXPECT_EQ(served->source, "管仲");
  EXPECT_TRUE(std::is_sorted(g.nodes.begin(), g.nodes.end(),
                             [](const auto& x, const auto& y) { return x.name < y.name; }));
}

TEST(BuildGraph, DanglingEndpointIsRejected) {
  try {
    build_graph({entity("孔子", EntityKind::Person, 1)}, {{"孔子", "韓非", "debated", "", 1}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DanglingEndpoint);
  }
}

TEST(BuildGraph, KindConflictIsDuplicateNode) {
  try {
    build_graph({entity("中山", EntityKind::Person, 1), entity("中山", EntityKind::Place, 1)}, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DuplicateNode);
  }
}

TEST(BuildGraph, MatchesLinearScanOracle) {
  std::mt19937_64 rng(53);
  for (int i = 0; i < 100; ++i) {
    std::vector<Entity> ents;
    std::set<std::string> names;
    for (std::size_t k = 0, n = 2 + rng() % 6; k < n; ++k) {
      const auto name = oracle::random_word(rng, 2);
      if (!names.insert(name).second) continue;
      ents.push_back(entity(name, rng() % 2 ? EntityKind::Person : EntityKind::Place, 1 + rng() % 9));
    }
    std::vector<std::string> pool(names.begin(), names.end());
    std::vector<Relation> rels;
    for (std::size_t k = 0, n = rng() % 15; k < n && pool.size() > 1; ++k) {
      const auto a = pool[rng() % pool.size()];
      auto b = pool[rng() % pool.size()];
      if (a == b) continue;
      rels.push_back({a, b, rng() % 2 ? "allied" : "served-in", "", 1 + rng() % 3});
    }
    GraphOptions o;
    o.directed_labels = {"served-in"};
    const auto g = build_graph(ents, rels, o);
    const auto want = oracle::build_graph(ents, rels, o.directed_labels);
    ASSERT_EQ(g.nodes.size(), want.nodes.size());
    for (std::size_t k = 0; k < g.nodes.size(); ++k) {
      EXPECT_EQ(g.nodes[k].name, want.nodes[k].first);
      EXPECT_EQ(g.nodes[k].mention_count, want.nodes[k].second);
    }
    ASSERT_EQ(g.edges.size(), want.edges.size());
    for (std::size_t k = 0; k < g.edges.size(); ++k) {
      EXPECT_EQ(g.edges[k].source, want.edges[k].a);
      EXPECT_EQ(g.edges[k].target, want.edges[k].b);
      EXPECT_EQ(g.edges[k].label, want.edges[k].label);
      EXPECT_EQ(g.edges[k].weight, want.edges[k].weight);
      EXPECT_EQ(g.edges[k].directed, want.edges[k].directed);
    }
  }
}

TEST(GraphExport, EveryFormatRoundTrips) {
  const auto g = sample_graph();
  for (auto f : {GraphFormat::Gexf, GraphFormat::GraphMl, GraphFormat::Json}) {
    const auto bytes = export_graph(g, f);
    expect_same(import_graph(bytes, f), g);
    EXPECT_EQ(export_graph(import_graph(bytes, f), f), bytes);
  }
}

TEST(GraphExport, RandomGraphsRoundTrip) {
  std::mt19937_64 rng(59);
  for (int i = 0; i < 30; ++i) {
    std::vector<Entity> ents;
    std::set<std::string> names;
    for (int k = 0; k < 5; ++k) {
      const auto name = oracle::random_word(rng, 3);
      if (names.insert(name).second) ents.push_back(entity(name, EntityKind::Place, 1 + rng() % 5));
    }
    std::vector<std::string> pool(names.begin(), names.end());
    std::vector<Relation> rels;
    for (std::size_t k = 1; k < pool.size(); ++k) rels.push_back({pool[k - 1], pool[k], "near<&>", "", 1});
    GraphOptions o;
    o.metadata.corpus_id = "r" + std::to_string(i);
    o.metadata.created_at = "2024-01-01T00:00:00Z";
    const auto g = build_graph(ents, rels, o);
    for (auto f : {GraphFormat::Gexf, GraphFormat::GraphMl, GraphFormat::Json})
      expect_same(import_graph(export_graph(g, f), f), g);
  }
}

TEST(GraphExport, GexfCarriesVizSizeAndMetadata) {
  const auto s = export_graph(sample_graph(), GraphFormat::Gexf);
  EXPECT_NE(s.find("xmlns=\"http://www.gexf.net/1.2draft\""), std::string::npos);
  EXPECT_NE(s.find("<viz:size value=\"9\""), std::string::npos);
  EXPECT_NE(s.find("fixture &amp; &lt;corpus&gt;"), std::string::npos);
  EXPECT_NE(s.find(std::string(kPipelineVersion)), std::string::npos);
}

TEST(GraphExport, OutputIsDeterministic) {
  EXPECT_EQ(export_graph(sample_graph(), GraphFormat::Gexf), export_graph(sample_graph(), GraphFormat::Gexf));
}

TEST(GraphImport, MalformedInputIsReported) {
  for (auto f : {GraphFormat::Gexf, GraphFormat::GraphMl, GraphFormat::Json}) {
    try {
      import_graph("<gexf><graph", f);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::MalformedStructure);
    }
  }
}

TEST(GraphFormat, Parse) {
  EXPECT_EQ(parse_graph_format("gexf"), GraphFormat::Gexf);
  EXPECT_EQ(parse_graph_format("graphml"), GraphFormat::GraphMl);
  EXPECT_EQ(parse_graph_format("json"), GraphFormat::Json);
  EXPECT_THROW(parse_graph_format("dot"), Error);
}

#ifdef HISTOLENS_PYTHON
TEST(GraphExport, ValidatesAgainstPublishedSchemas) {
  const std::string python = HISTOLENS_PYTHON;
  if (python.empty()) GTEST_SKIP() << "python interpreter not found";
  fixtures::TempDir dir;
  const auto g = sample_graph();
  write_graph(g, GraphFormat::Gexf, dir / "graph.gexf");
  write_graph(g, GraphFormat::GraphMl, dir / "graph.graphml");
  const std::string cmd = python + " " + (fixtures::source_dir() / "tests/tools/validate_exports.py").string() +
                          " --gexf " + (dir / "graph.gexf").string() + " --graphml " +
                          (dir / "graph.graphml").string() + " --nodes 4 --edges 3 --directed 1";
  EXPECT_EQ(std::system(cmd.c_str()), 0) << cmd;
}
#endif

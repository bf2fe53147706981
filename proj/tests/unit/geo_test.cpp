#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "histolens/errors.hpp"
#include "histolens/geo.hpp"

using namespace histolens;

namespace {

constexpr const char* kHeader = "ancient_name,modern_equivalent,lat,lon,confidence,note\n";

Entity place(const std::string& name, std::size_t n, std::set<int> chapters = {1}) {
  Entity e;
  e.canonical_name = name;
  e.kind = EntityKind::Place;
  e.mention_count = n;
  e.chapters = std::move(chapters);
  return e;
}

std::size_t error_line(const std::string& doc) {
  try {
    parse_gazetteer(doc);
  } catch (const ParseError& e) {
    return e.line();
  }
  return 0;
}

}  // namespace

TEST(Gazetteer, ParsesRowsAndMythicalEntries) {
  const auto g = parse_gazetteer(std::string(kHeader) + "齊,Linzi,36.86,118.35,attested,\n蓬萊,,,,mythical,isle\n");
  ASSERT_EQ(g.size(), 2u);
  EXPECT_DOUBLE_EQ(*g.at("齊").latitude, 36.86);
  EXPECT_FALSE(g.at("蓬萊").latitude);
  EXPECT_EQ(g.at("蓬萊").confidence, GeoConfidence::Mythical);
}

TEST(Gazetteer, RejectsBadRowsWithLineNumbers) {
  EXPECT_EQ(error_line(std::string(kHeader) + "齊,x,91,0,attested,\n"), 2u);
  EXPECT_EQ(error_line(std::string(kHeader) + "齊,x,0,0,attested,\n魯,x,0,181,attested,\n"), 3u);
  EXPECT_EQ(error_line(std::string(kHeader) + "齊,x,,0,attested,\n"), 2u);
  EXPECT_EQ(error_line(std::string(kHeader) + "齊,x,1,1,certain,\n"), 2u);
  EXPECT_EQ(error_line(std::string(kHeader) + "齊,x,1,1,attested,\n齊,y,1,1,attested,\n"), 3u);
  EXPECT_EQ(error_line("name,lat\n"), 1u);
}

TEST(Gazetteer, ShippedFilesParse) {
  EXPECT_GT(load_gazetteer(fixtures::data_dir() / "gazetteer.csv").size(), 10u);
  EXPECT_EQ(load_gazetteer(fixtures::data_dir() / "overrides.csv").size(), 3u);
}

TEST(Geocode, OverridesCorrectModernNameCollisions) {
  const auto gaz = load_gazetteer(fixtures::data_dir() / "gazetteer.csv");
  const auto ovr = load_gazetteer(fixtures::data_dir() / "overrides.csv");
  const auto r = geocode({place("崑山", 2), place("中山", 3), place("蓬萊", 1), place("齊", 4)}, gaz, ovr);
  std::map<std::string, GeoRecord> by;
  for (const auto& rec : r.records) by[rec.entity] = rec;
  ASSERT_TRUE(by.count("崑山"));
  EXPECT_NEAR(*by["崑山"].entry.longitude, 94.0, 1e-9);
  EXPECT_NEAR(*by["崑山"].entry.latitude, 35.6, 1e-9);
  EXPECT_NEAR(*by["中山"].entry.latitude, 38.30, 1e-9);
  EXPECT_NEAR(*by["中山"].entry.longitude, 114.17, 1e-9);
  EXPECT_FALSE(by.count("蓬萊"));
  ASSERT_EQ(r.unresolved.size(), 1u);
  EXPECT_EQ(r.unresolved[0], (Unresolved{"蓬萊", "mythical", 1}));
}

TEST(Geocode, PartitionsPlacesAndSkipsPersons) {
  Entity person;
  person.canonical_name = "孔子";
  person.kind = EntityKind::Person;
  person.mention_count = 9;
  const auto gaz = parse_gazetteer(std::string(kHeader) + "齊,Linzi,36.86,118.35,attested,\n");
  const auto r = geocode({person, place("齊", 2), place("歷山", 1)}, gaz, {});
  EXPECT_EQ(r.records.size() + r.unresolved.size(), 2u);
  ASSERT_EQ(r.unresolved.size(), 1u);
  EXPECT_EQ(r.unresolved[0].reason, "unmatched");
}

TEST(GeoJson, FeaturesCarryLonLatAndProperties) {
  const auto gaz = parse_gazetteer(std::string(kHeader) + "齊,Linzi,36.86,118.35,attested,\n");
  const auto r = geocode({place("齊", 2, {1, 3})}, gaz, {});
  const auto j = nlohmann::json::parse(export_geojson(r.records));
  EXPECT_EQ(j.at("type"), "FeatureCollection");
  ASSERT_EQ(j.at("features").size(), 1u);
  const auto& f = j.at("features")[0];
  EXPECT_EQ(f.at("type"), "Feature");
  EXPECT_EQ(f.at("geometry").at("type"), "Point");
  EXPECT_DOUBLE_EQ(f.at("geometry").at("coordinates")[0].get<double>(), 118.35);
  EXPECT_DOUBLE_EQ(f.at("geometry").at("coordinates")[1].get<double>(), 36.86);
  EXPECT_EQ(f.at("properties").at("name"), "齊");
  EXPECT_EQ(f.at("properties").at("mention_count"), 2);
  EXPECT_EQ(f.at("properties").at("chapters"), nlohmann::json::array({1, 3}));
  EXPECT_EQ(f.at("properties").at("confidence"), "attested");
}

TEST(UnresolvedCsv, HeaderAndRows) {
  const auto csv = export_unresolved_csv({{"蓬萊", "mythical", 1}});
  EXPECT_EQ(csv.rfind("name,reason,mention_count\n", 0), 0u);
  EXPECT_NE(csv.find("蓬萊,mythical,1"), std::string::npos);
}

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "histolens/extraction.hpp"

namespace histolens {

enum class GeoConfidence { Attested, Inferred, Mythical };

std::string_view to_string(GeoConfidence c);
GeoConfidence parse_geo_confidence(std::string_view s);

struct GazetteerEntry {
  std::string ancient_name;
  std::string modern_equivalent;
  /// Absent for mythical places.
  std::optional<double> latitude;
  std::optional<double> longitude;
  GeoConfidence confidence = GeoConfidence::Attested;
  std::string note;

  bool operator==(const GazetteerEntry&) const = default;
};

/// ancient_name -> entry.
using Gazetteer = std::map<std::string, GazetteerEntry>;

/// CSV with header ancient_name,modern_equivalent,lat,lon,confidence,note.
/// Throws MalformedStructure (with line) on bad rows or out-of-range coordinates.
Gazetteer parse_gazetteer(std::string_view csv_doc, std::string_view source_name = "<gazetteer>");
Gazetteer load_gazetteer(const std::filesystem::path& path);

struct GeoRecord {
  std::string entity;
  GazetteerEntry entry;
  std::size_t mention_count = 0;
  std::set<int> chapters;

  bool operator==(const GeoRecord&) const = default;
};

struct Unresolved {
  std::string name;
  /// "mythical" or "unmatched".
  std::string reason;
  std::size_t mention_count = 0;

  bool operator==(const Unresolved&) const = default;
};

struct GeocodeResult {
  std::vector<GeoRecord> records;
  std::vector<Unresolved> unresolved;
};

/// Person entities are ignored. Overrides win over gazetteer rows.
GeocodeResult geocode(const std::vector<Entity>& entities, const Gazetteer& gazetteer, const Gazetteer& overrides);

/// FeatureCollection of Point features with [longitude, latitude].
std::string export_geojson(const std::vector<GeoRecord>& records);
std::string export_unresolved_csv(const std::vector<Unresolved>& unresolved);

}  // namespace histolens

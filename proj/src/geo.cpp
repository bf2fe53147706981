#include "histolens/geo.hpp"

#include <cmath>

#include <json.hpp>

#include "histolens/csv.hpp"
#include "histolens/errors.hpp"
#include "histolens/text.hpp"

namespace histolens {

using nlohmann::ordered_json;

std::string_view to_string(GeoConfidence c) {
  switch (c) {
    case GeoConfidence::Attested: return "attested";
    case GeoConfidence::Inferred: return "inferred";
    case GeoConfidence::Mythical: return "mythical";
  }
  return "attested";
}

GeoConfidence parse_geo_confidence(std::string_view s) {
  if (s == "attested") return GeoConfidence::Attested;
  if (s == "inferred") return GeoConfidence::Inferred;
  if (s == "mythical") return GeoConfidence::Mythical;
  throw Error(ErrorCode::InvalidArgument, "unknown confidence '" + std::string(s) + "'");
}

namespace {

std::optional<double> parse_coord(const std::string& field, double limit, const std::string& source, std::size_t line,
                                  const char* what) {
  const std::string t = text::trim(field);
  if (t.empty()) return std::nullopt;
  double v = 0;
  try {
    std::size_t used = 0;
    v = std::stod(t, &used);
    if (used != t.size()) throw std::invalid_argument(t);
  } catch (const std::exception&) {
    throw ParseError(source, line, std::string("invalid ") + what + " '" + t + "'");
  }
  if (!std::isfinite(v) || v < -limit || v > limit)
    throw ParseError(source, line, std::string(what) + " out of range: " + t);
  return v;
}

}  // namespace

Gazetteer parse_gazetteer(std::string_view csv_doc, std::string_view source_name) {
  const std::string source(source_name);
  const auto rows = csv::parse(csv_doc, source_name);
  Gazetteer out;
  if (rows.empty()) return out;
  const csv::Row expected = {"ancient_name", "modern_equivalent", "lat", "lon", "confidence", "note"};
  if (rows[0] != expected)
    throw ParseError(source, 1, "expected header ancient_name,modern_equivalent,lat,lon,confidence,note");
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    const std::size_t line = i + 1;
    if (r.size() == 1 && text::trim(r[0]).empty()) continue;
    if (r.size() != 6) throw ParseError(source, line, "expected 6 fields, got " + std::to_string(r.size()));
    GazetteerEntry e;
    e.ancient_name = text::trim(r[0]);
    e.modern_equivalent = text::trim(r[1]);
    if (e.ancient_name.empty()) throw ParseError(source, line, "empty ancient_name");
    e.latitude = parse_coord(r[2], 90, source, line, "latitude");
    e.longitude = parse_coord(r[3], 180, source, line, "longitude");
    try {
      e.confidence = parse_geo_confidence(text::trim(r[4]));
    } catch (const Error& err) {
      throw ParseError(source, line, err.what());
    }
    e.note = r[5];
    if (e.confidence == GeoConfidence::Mythical) {
      e.latitude.reset();
      e.longitude.reset();
    } else if (!e.latitude || !e.longitude) {
      throw ParseError(source, line, "non-mythical place '" + e.ancient_name + "' needs both coordinates");
    }
    if (out.count(e.ancient_name)) throw ParseError(source, line, "duplicate ancient_name '" + e.ancient_name + "'");
    out.emplace(e.ancient_name, std::move(e));
  }
  return out;
}

Gazetteer load_gazetteer(const std::filesystem::path& path) {
  return parse_gazetteer(text::read_file(path), path.string());
}

GeocodeResult geocode(const std::vector<Entity>& entities, const Gazetteer& gazetteer, const Gazetteer& overrides) {
  GeocodeResult result;
  for (const auto& e : entities) {
    if (e.kind != EntityKind::Place) continue;
    const GazetteerEntry* entry = nullptr;
    if (auto it = overrides.find(e.canonical_name); it != overrides.end()) {
      entry = &it->second;
    } else if (auto jt = gazetteer.find(e.canonical_name); jt != gazetteer.end()) {
      entry = &jt->second;
    }
    if (!entry) {
      result.unresolved.push_back({e.canonical_name, "unmatched", e.mention_count});
    } else if (entry->confidence == GeoConfidence::Mythical) {
      result.unresolved.push_back({e.canonical_name, "mythical", e.mention_count});
    } else {
      result.records.push_back({e.canonical_name, *entry, e.mention_count, e.chapters});
    }
  }
  return result;
}

std::string export_geojson(const std::vector<GeoRecord>& records) {
  ordered_json fc;
  fc["type"] = "FeatureCollection";
  fc["features"] = ordered_json::array();
  for (const auto& r : records) {
    if (r.entry.confidence == GeoConfidence::Mythical || !r.entry.latitude || !r.entry.longitude)
      throw Error(ErrorCode::InvalidArgument, "record '" + r.entity + "' has no coordinates");
    ordered_json f;
    f["type"] = "Feature";
    f["geometry"] = {{"type", "Point"}, {"coordinates", {*r.entry.longitude, *r.entry.latitude}}};
    f["properties"] = {{"name", r.entity},
                       {"modern_equivalent", r.entry.modern_equivalent},
                       {"mention_count", r.mention_count},
                       {"chapters", r.chapters},
                       {"confidence", to_string(r.entry.confidence)}};
    fc["features"].push_back(std::move(f));
  }
  return fc.dump(2) + "\n";
}

std::string export_unresolved_csv(const std::vector<Unresolved>& unresolved) {
  std::string out = csv::format_row({"name", "reason", "mention_count"});
  for (const auto& u : unresolved) out += csv::format_row({u.name, u.reason, std::to_string(u.mention_count)});
  return out;
}

}  // namespace histolens

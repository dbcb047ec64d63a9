#include "geofm/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <tuple>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "geofm/errors.hpp"
#include "geofm/text.hpp"

namespace geofm {

using nlohmann::json;

namespace {

std::string where(std::size_t feature) { return "feature " + std::to_string(feature) + ": "; }

Ring parse_ring(const json& coords, std::size_t feature) {
  if (!coords.is_array()) throw ParseError(where(feature) + "ring is not an array");
  Ring ring;
  ring.reserve(coords.size());
  for (const auto& pos : coords) {
    if (!pos.is_array() || pos.size() < 2 || !pos[0].is_number() || !pos[1].is_number())
      throw ParseError(where(feature) + "position must be [lon, lat]");
    const GeoPoint p{pos[0].get<double>(), pos[1].get<double>()};
    if (!is_valid(p)) throw ParseError(where(feature) + "coordinate out of range");
    ring.push_back(p);
  }
  return open_ring(std::move(ring));
}

json ring_to_json(const Ring& ring) {
  json out = json::array();
  for (const auto& p : ring) out.push_back({p.lon, p.lat});
  if (!ring.empty()) out.push_back({ring.front().lon, ring.front().lat});
  return out;
}

double number_property(const json& props, const char* key, std::size_t feature) {
  const auto it = props.find(key);
  if (it == props.end() || !it->is_number())
    throw ParseError(where(feature) + "properties." + key + " must be a number");
  return it->get<double>();
}

}  // namespace

std::vector<Catchment> parse_catchments(std::string_view geojson) {
  json doc;
  try {
    doc = json::parse(geojson);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("invalid JSON at byte ") + std::to_string(e.byte) + ": " +
                     e.what());
  }
  if (!doc.is_object() || doc.value("type", "") != "FeatureCollection" ||
      !doc.contains("features") || !doc["features"].is_array())
    throw ParseError("expected a GeoJSON FeatureCollection");

  std::vector<Catchment> out;
  std::set<std::string> seen;
  const auto& features = doc["features"];
  for (std::size_t i = 0; i < features.size(); ++i) {
    const auto& f = features[i];
    if (!f.is_object() || !f.contains("geometry") || !f.contains("properties"))
      throw ParseError(where(i) + "feature needs geometry and properties");
    const auto& geom = f["geometry"];
    const auto& props = f["properties"];
    if (!geom.is_object() || geom.value("type", "") != "Polygon")
      throw ParseError(where(i) + "geometry must be a Polygon");
    if (!props.is_object() || !props.contains("id") || !props["id"].is_string())
      throw ParseError(where(i) + "properties.id must be a string");
    const auto& rings = geom["coordinates"];
    if (!rings.is_array() || rings.empty())
      throw ParseError(where(i) + "Polygon needs at least one ring");

    Catchment c;
    c.id = props["id"].get<std::string>();
    c.population = number_property(props, "population", i);
    c.area_km2 = number_property(props, "area_km2", i);
    c.geometry.exterior = parse_ring(rings[0], i);
    for (std::size_t r = 1; r < rings.size(); ++r)
      c.geometry.holes.push_back(parse_ring(rings[r], i));
    if (!seen.insert(c.id).second) throw DuplicateId(c.id);
    try {
      validate(c);
    } catch (const InvalidGeometry& e) {
      throw InvalidGeometry("catchment " + c.id + ": " + e.what());
    }
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<Catchment> load_catchments(const std::string& path) {
  auto out = parse_catchments(text::read_file(path));
  spdlog::debug("loaded {} catchments from {}", out.size(), path);
  return out;
}

std::string catchments_to_geojson(std::span<const Catchment> catchments) {
  json features = json::array();
  for (const auto& c : catchments) {
    json rings = json::array();
    rings.push_back(ring_to_json(c.geometry.exterior));
    for (const auto& h : c.geometry.holes) rings.push_back(ring_to_json(h));
    features.push_back({{"type", "Feature"},
                        {"geometry", {{"type", "Polygon"}, {"coordinates", rings}}},
                        {"properties",
                         {{"id", c.id}, {"population", c.population}, {"area_km2", c.area_km2}}}});
  }
  const json doc = {{"type", "FeatureCollection"}, {"features", features}};
  return doc.dump() + "\n";
}

void save_catchments(const std::string& path, std::span<const Catchment> catchments) {
  text::write_file(path, catchments_to_geojson(catchments));
}

// ---- facilities ----

namespace {

constexpr std::string_view kFacilityHeader =
    "facility_id,lon,lat,indicator,period,numerator,denominator";

std::optional<double> optional_number(std::string_view field, std::size_t line, const char* name) {
  if (text::trim(field).empty()) return std::nullopt;
  const auto v = text::parse_double(field);
  if (!v || !std::isfinite(*v))
    throw ParseError("line " + std::to_string(line) + ": bad " + name + " '" +
                     std::string(field) + "'");
  return v;
}

template <typename Fn>
void for_each_line(std::string_view csv, Fn&& fn) {
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < csv.size()) {
    std::size_t end = csv.find('\n', start);
    if (end == std::string_view::npos) end = csv.size();
    ++line_no;
    std::string_view line = csv.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    start = end + 1;
    if (text::trim(line).empty()) continue;
    fn(line_no, line);
  }
}

}  // namespace

std::vector<FacilityRow> parse_facilities(std::string_view csv) {
  std::vector<FacilityRow> out;
  std::set<std::tuple<std::string, std::string, int>> keys;
  bool header = true;
  for_each_line(csv, [&](std::size_t ln, std::string_view line) {
    if (header) {
      if (text::trim(line) != kFacilityHeader)
        throw ParseError("line " + std::to_string(ln) + ": expected header '" +
                         std::string(kFacilityHeader) + "'");
      header = false;
      return;
    }
    const auto f = text::split_csv(line);
    if (f.size() != 7)
      throw ParseError("line " + std::to_string(ln) + ": expected 7 fields, got " +
                       std::to_string(f.size()));
    FacilityRow row;
    row.facility_id = std::string(text::trim(f[0]));
    if (row.facility_id.empty()) throw ParseError("line " + std::to_string(ln) + ": empty facility_id");
    const auto lon = text::parse_double(f[1]);
    const auto lat = text::parse_double(f[2]);
    if (!lon || !lat)
      throw ParseError("line " + std::to_string(ln) + ": facility " + row.facility_id +
                       " has no coordinates");
    row.location = {*lon, *lat};
    if (!is_valid(row.location))
      throw ParseError("line " + std::to_string(ln) + ": coordinates out of range");
    row.indicator = std::string(text::trim(f[3]));
    const auto period = text::parse_int(f[4]);
    if (!period || *period < 0)
      throw ParseError("line " + std::to_string(ln) + ": bad period '" + std::string(f[4]) + "'");
    row.period = static_cast<int>(*period);
    row.numerator = optional_number(f[5], ln, "numerator");
    row.denominator = optional_number(f[6], ln, "denominator");
    if (row.numerator && *row.numerator < 0.0)
      throw ParseError("line " + std::to_string(ln) + ": negative numerator");
    if (row.denominator && *row.denominator < 0.0)
      throw ParseError("line " + std::to_string(ln) + ": negative denominator");
    if (!keys.emplace(row.facility_id, row.indicator, row.period).second)
      throw DuplicateId(row.facility_id + "/" + row.indicator + "/" + std::to_string(row.period));
    out.push_back(std::move(row));
  });
  if (header) throw ParseError("facility file is empty");
  return out;
}

std::vector<FacilityRow> load_facilities(const std::string& path) {
  return parse_facilities(text::read_file(path));
}

std::string facilities_to_csv(std::span<const FacilityRow> rows) {
  std::string out(kFacilityHeader);
  out += '\n';
  for (const auto& r : rows) {
    out += r.facility_id;
    out += ',' + text::format_double(r.location.lon);
    out += ',' + text::format_double(r.location.lat);
    out += ',' + r.indicator;
    out += ',' + std::to_string(r.period);
    out += ',';
    if (r.numerator) out += text::format_double(*r.numerator);
    out += ',';
    if (r.denominator) out += text::format_double(*r.denominator);
    out += '\n';
  }
  return out;
}

void save_facilities(const std::string& path, std::span<const FacilityRow> rows) {
  text::write_file(path, facilities_to_csv(rows));
}

// ---- embeddings ----

std::size_t source_dim(EmbeddingSource source) noexcept {
  switch (source) {
    case EmbeddingSource::kPdfm: return 16;
    case EmbeddingSource::kAlphaEarth: return 64;
    case EmbeddingSource::kCdr: return 10;
    case EmbeddingSource::kMulti: return 90;
  }
  return 0;
}

std::string_view to_string(EmbeddingSource source) noexcept {
  switch (source) {
    case EmbeddingSource::kPdfm: return "PDFM";
    case EmbeddingSource::kAlphaEarth: return "ALPHAEARTH";
    case EmbeddingSource::kCdr: return "CDR";
    case EmbeddingSource::kMulti: return "MULTI";
  }
  return "";
}

EmbeddingSource parse_source(std::string_view text) {
  std::string up(text);
  std::transform(up.begin(), up.end(), up.begin(), [](unsigned char c) { return std::toupper(c); });
  if (up == "PDFM") return EmbeddingSource::kPdfm;
  if (up == "ALPHAEARTH") return EmbeddingSource::kAlphaEarth;
  if (up == "CDR") return EmbeddingSource::kCdr;
  if (up == "MULTI") return EmbeddingSource::kMulti;
  throw ContractError("unknown embedding source: " + std::string(text));
}

void validate(const EmbeddingTable& table) {
  if (table.dim != source_dim(table.source))
    throw DimMismatch(std::string(to_string(table.source)) + " expects " +
                      std::to_string(source_dim(table.source)) + " dimensions, got " +
                      std::to_string(table.dim));
  for (const auto& [id, v] : table.rows) {
    if (v.size() != table.dim)
      throw DimMismatch("row " + id + " has " + std::to_string(v.size()) + " values, expected " +
                        std::to_string(table.dim));
    for (double x : v)
      if (!std::isfinite(x)) throw ContractError("row " + id + " has a non-finite value");
  }
}

EmbeddingTable parse_embeddings(std::string_view csv, EmbeddingSource source,
                                const std::vector<std::string>* known_ids) {
  EmbeddingTable table;
  table.source = source;
  bool header = true;
  for_each_line(csv, [&](std::size_t ln, std::string_view line) {
    const auto f = text::split_csv(line);
    if (header) {
      if (f.empty() || text::trim(f[0]) != "catchment_id")
        throw ParseError("line " + std::to_string(ln) + ": header must start with catchment_id");
      for (std::size_t j = 1; j < f.size(); ++j)
        if (text::trim(f[j]) != "e" + std::to_string(j - 1))
          throw ParseError("line " + std::to_string(ln) + ": expected column e" +
                           std::to_string(j - 1));
      table.dim = f.size() - 1;
      if (table.dim != source_dim(source))
        throw DimMismatch(std::string(to_string(source)) + " expects " +
                          std::to_string(source_dim(source)) + " dimensions, file has " +
                          std::to_string(table.dim));
      header = false;
      return;
    }
    if (f.size() != table.dim + 1)
      throw DimMismatch("line " + std::to_string(ln) + ": expected " +
                        std::to_string(table.dim + 1) + " fields, got " +
                        std::to_string(f.size()));
    std::string id(text::trim(f[0]));
    std::vector<double> v(table.dim);
    for (std::size_t j = 0; j < table.dim; ++j) {
      const auto x = text::parse_double(f[j + 1]);
      if (!x || !std::isfinite(*x))
        throw ParseError("line " + std::to_string(ln) + ": non-finite or missing value in e" +
                         std::to_string(j));
      v[j] = *x;
    }
    if (!table.rows.emplace(id, std::move(v)).second) throw DuplicateId(id);
  });
  if (header) throw ParseError("embedding file is empty");
  if (known_ids) {
    const std::set<std::string> known(known_ids->begin(), known_ids->end());
    for (const auto& [id, v] : table.rows)
      if (!known.contains(id)) table.unknown_ids.push_back(id);
    if (!table.unknown_ids.empty())
      spdlog::warn("{} embedding rows reference unknown catchments", table.unknown_ids.size());
  }
  return table;
}

EmbeddingTable load_embeddings(const std::string& path, EmbeddingSource source,
                               const std::vector<std::string>* known_ids) {
  try {
    return parse_embeddings(text::read_file(path), source, known_ids);
  } catch (const DimMismatch& e) {
    throw DimMismatch(path + ": " + e.what());
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

std::string embeddings_to_csv(const EmbeddingTable& table) {
  std::string out = "catchment_id";
  for (std::size_t j = 0; j < table.dim; ++j) out += ",e" + std::to_string(j);
  out += '\n';
  for (const auto& [id, v] : table.rows) {
    out += id;
    for (double x : v) out += ',' + text::format_double(x);
    out += '\n';
  }
  return out;
}

void save_embeddings(const std::string& path, const EmbeddingTable& table) {
  text::write_file(path, embeddings_to_csv(table));
}

// ---- spatial join ----

AssignmentReport assign_facilities(std::span<const FacilityRow> facilities,
                                   std::span<const Catchment> catchments) {
  std::vector<const Catchment*> order;
  order.reserve(catchments.size());
  for (const auto& c : catchments) order.push_back(&c);
  std::sort(order.begin(), order.end(),
            [](const Catchment* a, const Catchment* b) { return a->id < b->id; });
  std::vector<BoundingBox> boxes;
  boxes.reserve(order.size());
  for (const auto* c : order) boxes.push_back(bounding_box(c->geometry));

  std::map<std::string, GeoPoint> locations;
  for (const auto& f : facilities) {
    const auto [it, inserted] = locations.emplace(f.facility_id, f.location);
    if (!inserted && !(it->second == f.location))
      throw ContractError("facility " + f.facility_id + " has conflicting locations");
  }

  AssignmentReport report;
  for (const auto& [id, p] : locations) {
    bool found = false;
    for (std::size_t i = 0; i < order.size() && !found; ++i) {
      if (!boxes[i].contains(p)) continue;
      if (point_in_polygon(p, order[i]->geometry)) {
        report.assigned.emplace(id, order[i]->id);
        found = true;
      }
    }
    if (!found) report.unassigned.push_back(id);
  }
  if (!report.unassigned.empty())
    spdlog::warn("{} facilities fall outside every catchment and are dropped",
                 report.unassigned.size());
  return report;
}

std::vector<FacilitySeries> collect_series(std::span<const FacilityRow> rows,
                                           const IndicatorSpec& spec,
                                           const AssignmentReport& assignment) {
  const auto periods = static_cast<std::size_t>(period_count(spec.cadence));
  const bool rate = spec.kind == IndicatorKind::kRate;
  std::map<std::string, FacilitySeries> by_facility;
  for (const auto& r : rows) {
    if (r.indicator != spec.name) continue;
    const auto a = assignment.assigned.find(r.facility_id);
    if (a == assignment.assigned.end()) continue;
    if (static_cast<std::size_t>(r.period) >= periods)
      throw ContractError("facility " + r.facility_id + " indicator " + spec.name + ": period " +
                          std::to_string(r.period) + " outside " + std::string(to_string(spec.cadence)) +
                          " calendar");
    auto [it, inserted] = by_facility.try_emplace(r.facility_id);
    FacilitySeries& s = it->second;
    if (inserted) {
      s.facility_id = r.facility_id;
      s.catchment_id = a->second;
      s.numerator.assign(periods, std::nullopt);
      if (rate) s.denominator.assign(periods, std::nullopt);
    }
    s.numerator[r.period] = r.numerator;
    if (rate) s.denominator[r.period] = r.denominator;
  }
  std::vector<FacilitySeries> out;
  out.reserve(by_facility.size());
  for (auto& [id, s] : by_facility) out.push_back(std::move(s));
  return out;
}

}  // namespace geofm

#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "geofm/geo_core.hpp"
#include "geofm/qc_aggregate.hpp"

namespace geofm {

// ---- catchments (GeoJSON FeatureCollection of Polygons) ----

std::vector<Catchment> parse_catchments(std::string_view geojson);
std::vector<Catchment> load_catchments(const std::string& path);

/// Canonical form: sorted keys, closed rings, shortest round-trip numbers.
std::string catchments_to_geojson(std::span<const Catchment> catchments);
void save_catchments(const std::string& path, std::span<const Catchment> catchments);

// ---- facility observations ----

struct FacilityRow {
  std::string facility_id;
  GeoPoint location;
  std::string indicator;
  int period = 0;
  std::optional<double> numerator;
  std::optional<double> denominator;

  friend bool operator==(const FacilityRow&, const FacilityRow&) = default;
};

/// Header `facility_id,lon,lat,indicator,period,numerator,denominator`.
/// Empty cells are missing values. Rows without coordinates are rejected.
std::vector<FacilityRow> parse_facilities(std::string_view csv);
std::vector<FacilityRow> load_facilities(const std::string& path);
std::string facilities_to_csv(std::span<const FacilityRow> rows);
void save_facilities(const std::string& path, std::span<const FacilityRow> rows);

// ---- embeddings ----

enum class EmbeddingSource { kPdfm, kAlphaEarth, kCdr, kMulti };

std::size_t source_dim(EmbeddingSource source) noexcept;
std::string_view to_string(EmbeddingSource source) noexcept;
EmbeddingSource parse_source(std::string_view text);

struct EmbeddingTable {
  EmbeddingSource source = EmbeddingSource::kPdfm;
  std::size_t dim = 0;
  std::map<std::string, std::vector<double>> rows;
  /// Ids absent from the catchment set passed to the loader; kept, not dropped.
  std::vector<std::string> unknown_ids;

  friend bool operator==(const EmbeddingTable&, const EmbeddingTable&) = default;
};

/// Throws DimMismatch when the column count disagrees with the source tag.
void validate(const EmbeddingTable& table);

EmbeddingTable parse_embeddings(std::string_view csv, EmbeddingSource source,
                                const std::vector<std::string>* known_ids = nullptr);
EmbeddingTable load_embeddings(const std::string& path, EmbeddingSource source,
                               const std::vector<std::string>* known_ids = nullptr);
std::string embeddings_to_csv(const EmbeddingTable& table);
void save_embeddings(const std::string& path, const EmbeddingTable& table);

// ---- spatial join ----

struct AssignmentReport {
  std::map<std::string, std::string> assigned;  // facility_id -> catchment_id
  std::vector<std::string> unassigned;          // sorted
};

/// Facilities are keyed by id; rows sharing an id must share a location.
/// A facility on a shared border goes to the smallest matching catchment id.
AssignmentReport assign_facilities(std::span<const FacilityRow> facilities,
                                   std::span<const Catchment> catchments);

/// Groups the rows of one indicator into per-facility period series, dropping
/// unassigned facilities. Periods outside the cadence are a ContractError.
std::vector<FacilitySeries> collect_series(std::span<const FacilityRow> rows,
                                           const IndicatorSpec& spec,
                                           const AssignmentReport& assignment);

}  // namespace geofm

#pragma once

#include <span>
#include <string>
#include <vector>

namespace geofm {

inline constexpr double kEarthRadiusKm = 6371.0;

struct GeoPoint {
  double lon = 0.0;
  double lat = 0.0;

  friend bool operator==(const GeoPoint&, const GeoPoint&) = default;
};

/// Throws ContractError when the coordinates are non-finite or out of range.
GeoPoint make_point(double lon, double lat);
bool is_valid(const GeoPoint& p) noexcept;

/// Rings are stored open: the closing vertex of a GeoJSON ring is stripped on
/// input and re-appended on output.
using Ring = std::vector<GeoPoint>;

struct Polygon {
  Ring exterior;
  std::vector<Ring> holes;

  friend bool operator==(const Polygon&, const Polygon&) = default;
};

struct BoundingBox {
  double min_lon, min_lat, max_lon, max_lat;

  bool contains(const GeoPoint& p) const noexcept {
    return p.lon >= min_lon && p.lon <= max_lon && p.lat >= min_lat && p.lat <= max_lat;
  }
};

struct Catchment {
  std::string id;
  Polygon geometry;
  double population = 0.0;
  double area_km2 = 0.0;

  friend bool operator==(const Catchment&, const Catchment&) = default;
};

/// Drops a trailing vertex equal to the first one.
Ring open_ring(Ring ring);

/// Signed planar area in squared degrees (counter-clockwise positive).
double signed_area(std::span<const GeoPoint> ring) noexcept;

/// Throws InvalidGeometry on fewer than three vertices, a zero-area exterior,
/// or non-finite coordinates.
void validate(const Polygon& poly);
void validate(const Catchment& c);

BoundingBox bounding_box(const Polygon& poly);

/// Boundary points (exterior or hole edges) count as inside.
bool point_in_polygon(const GeoPoint& p, const Polygon& poly);

/// Area-weighted planar centroid on lon/lat, holes subtracted.
GeoPoint centroid(const Polygon& poly);

/// Planar area converted to km^2 with a cos(latitude) correction at the centroid.
double approx_area_km2(const Polygon& poly);

enum class DistanceMetric { kHaversine, kPlanarDegrees };

/// Great-circle distance on a 6371 km sphere.
double distance_km(const GeoPoint& a, const GeoPoint& b) noexcept;

/// Euclidean distance in degree space, scaled by km per degree of arc so both
/// metrics share units. Used only for sensitivity runs.
double planar_distance_km(const GeoPoint& a, const GeoPoint& b) noexcept;

double distance_km(const GeoPoint& a, const GeoPoint& b, DistanceMetric metric) noexcept;

}  // namespace geofm

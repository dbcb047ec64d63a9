#include "geofm/geo_core.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "geofm/errors.hpp"

namespace geofm {

namespace {

constexpr double kKmPerDegree = 2.0 * std::numbers::pi * kEarthRadiusKm / 360.0;

double cross(const GeoPoint& o, const GeoPoint& a, const GeoPoint& b) noexcept {
  return (a.lon - o.lon) * (b.lat - o.lat) - (a.lat - o.lat) * (b.lon - o.lon);
}

bool on_segment(const GeoPoint& p, const GeoPoint& a, const GeoPoint& b) noexcept {
  const double scale = std::max({std::abs(a.lon - b.lon), std::abs(a.lat - b.lat), 1e-300});
  if (std::abs(cross(a, b, p)) > 1e-12 * scale) return false;
  return p.lon >= std::min(a.lon, b.lon) - 1e-12 && p.lon <= std::max(a.lon, b.lon) + 1e-12 &&
         p.lat >= std::min(a.lat, b.lat) - 1e-12 && p.lat <= std::max(a.lat, b.lat) + 1e-12;
}

enum class Location { kOutside, kBoundary, kInside };

Location locate(const GeoPoint& p, std::span<const GeoPoint> ring) noexcept {
  bool inside = false;
  const std::size_t n = ring.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const GeoPoint& a = ring[i];
    const GeoPoint& b = ring[j];
    if (on_segment(p, a, b)) return Location::kBoundary;
    if ((a.lat > p.lat) != (b.lat > p.lat)) {
      const double x = (b.lon - a.lon) * (p.lat - a.lat) / (b.lat - a.lat) + a.lon;
      if (p.lon < x) inside = !inside;
    }
  }
  return inside ? Location::kInside : Location::kOutside;
}

void require_valid_area(const Polygon& poly) {
  if (poly.exterior.size() < 3)
    throw InvalidGeometry("polygon exterior has fewer than 3 vertices");
  if (signed_area(poly.exterior) == 0.0)
    throw InvalidGeometry("polygon exterior is degenerate (zero area)");
}

}  // namespace

bool is_valid(const GeoPoint& p) noexcept {
  return std::isfinite(p.lon) && std::isfinite(p.lat) && p.lon >= -180.0 && p.lon <= 180.0 &&
         p.lat >= -90.0 && p.lat <= 90.0;
}

GeoPoint make_point(double lon, double lat) {
  GeoPoint p{lon, lat};
  if (!is_valid(p)) throw ContractError("coordinate out of range or non-finite");
  return p;
}

Ring open_ring(Ring ring) {
  if (ring.size() > 1 && ring.front() == ring.back()) ring.pop_back();
  return ring;
}

double signed_area(std::span<const GeoPoint> ring) noexcept {
  const std::size_t n = ring.size();
  if (n < 3) return 0.0;
  // Shift to the first vertex to limit cancellation.
  const GeoPoint o = ring[0];
  double acc = 0.0;
  for (std::size_t i = 1; i + 1 < n; ++i) acc += cross(o, ring[i], ring[i + 1]);
  return 0.5 * acc;
}

void validate(const Polygon& poly) {
  auto check_ring = [](const Ring& r) {
    for (const auto& p : r)
      if (!is_valid(p)) throw InvalidGeometry("polygon vertex out of range or non-finite");
  };
  check_ring(poly.exterior);
  for (const auto& h : poly.holes) {
    check_ring(h);
    if (h.size() < 3) throw InvalidGeometry("polygon hole has fewer than 3 vertices");
  }
  require_valid_area(poly);
}

void validate(const Catchment& c) {
  try {
    validate(c.geometry);
  } catch (const InvalidGeometry& e) {
    throw InvalidGeometry("catchment " + c.id + ": " + e.what());
  }
  if (!(c.area_km2 > 0.0) || !std::isfinite(c.area_km2))
    throw InvalidGeometry("catchment " + c.id + ": area_km2 must be positive");
  if (!(c.population >= 0.0) || !std::isfinite(c.population))
    throw InvalidGeometry("catchment " + c.id + ": population must be nonnegative");
}

BoundingBox bounding_box(const Polygon& poly) {
  BoundingBox bb{180.0, 90.0, -180.0, -90.0};
  for (const auto& p : poly.exterior) {
    bb.min_lon = std::min(bb.min_lon, p.lon);
    bb.max_lon = std::max(bb.max_lon, p.lon);
    bb.min_lat = std::min(bb.min_lat, p.lat);
    bb.max_lat = std::max(bb.max_lat, p.lat);
  }
  return bb;
}

bool point_in_polygon(const GeoPoint& p, const Polygon& poly) {
  require_valid_area(poly);
  if (locate(p, poly.exterior) == Location::kOutside) return false;
  for (const auto& hole : poly.holes)
    if (locate(p, hole) == Location::kInside) return false;
  return true;
}

GeoPoint centroid(const Polygon& poly) {
  require_valid_area(poly);
  double area = 0.0, cx = 0.0, cy = 0.0;
  auto accumulate = [&](const Ring& ring, double sign) {
    const double a = signed_area(ring);
    const double orient = (a < 0.0 ? -1.0 : 1.0) * sign;
    const GeoPoint o = ring[0];
    // Triangle fan from the first vertex.
    for (std::size_t i = 1; i + 1 < ring.size(); ++i) {
      const double t = 0.5 * cross(o, ring[i], ring[i + 1]) * orient;
      area += t;
      cx += t * (o.lon + ring[i].lon + ring[i + 1].lon) / 3.0;
      cy += t * (o.lat + ring[i].lat + ring[i + 1].lat) / 3.0;
    }
  };
  accumulate(poly.exterior, 1.0);
  for (const auto& h : poly.holes) accumulate(h, -1.0);
  if (area == 0.0) throw InvalidGeometry("polygon has zero net area");
  return {cx / area, cy / area};
}

double approx_area_km2(const Polygon& poly) {
  double a = std::abs(signed_area(poly.exterior));
  for (const auto& h : poly.holes) a -= std::abs(signed_area(h));
  const double lat = centroid(poly).lat * std::numbers::pi / 180.0;
  return a * kKmPerDegree * kKmPerDegree * std::cos(lat);
}

double distance_km(const GeoPoint& a, const GeoPoint& b) noexcept {
  constexpr double rad = std::numbers::pi / 180.0;
  const double dlat = (b.lat - a.lat) * rad;
  const double dlon = (b.lon - a.lon) * rad;
  const double s1 = std::sin(0.5 * dlat);
  const double s2 = std::sin(0.5 * dlon);
  const double h = s1 * s1 + std::cos(a.lat * rad) * std::cos(b.lat * rad) * s2 * s2;
  return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(h)));
}

double planar_distance_km(const GeoPoint& a, const GeoPoint& b) noexcept {
  return std::hypot(a.lon - b.lon, a.lat - b.lat) * kKmPerDegree;
}

double distance_km(const GeoPoint& a, const GeoPoint& b, DistanceMetric metric) noexcept {
  return metric == DistanceMetric::kHaversine ? distance_km(a, b) : planar_distance_km(a, b);
}

}  // namespace geofm

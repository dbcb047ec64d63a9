#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "geofm/errors.hpp"
#include "geofm/geo_core.hpp"

using namespace geofm;

namespace {

Polygon unit_square() { return {{{0, 0}, {1, 0}, {1, 1}, {0, 1}}, {}}; }

}  // namespace

TEST_CASE("point_in_polygon on the unit square") {
  const Polygon sq = unit_square();
  CHECK(point_in_polygon({0.5, 0.5}, sq));
  CHECK_FALSE(point_in_polygon({2.0, 2.0}, sq));
  CHECK(point_in_polygon({0.0, 0.5}, sq));
  CHECK(point_in_polygon({1.0, 1.0}, sq));
}

TEST_CASE("point_in_polygon respects holes, hole edges count as inside") {
  Polygon p = unit_square();
  p.holes.push_back({{0.25, 0.25}, {0.75, 0.25}, {0.75, 0.75}, {0.25, 0.75}});
  CHECK_FALSE(point_in_polygon({0.5, 0.5}, p));
  CHECK(point_in_polygon({0.1, 0.1}, p));
  CHECK(point_in_polygon({0.25, 0.5}, p));
}

TEST_CASE("collinear exterior is invalid geometry") {
  const Polygon line{{{0, 0}, {1, 1}, {2, 2}}, {}};
  CHECK_THROWS_AS(point_in_polygon({0.5, 0.5}, line), InvalidGeometry);
  CHECK_THROWS_AS(centroid(line), InvalidGeometry);
  CHECK_THROWS_AS(validate(line), InvalidGeometry);
}

TEST_CASE("centroid examples") {
  const GeoPoint c = centroid(unit_square());
  CHECK(c.lon == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(c.lat == doctest::Approx(0.5).epsilon(1e-15));

  Polygon holed = unit_square();
  holed.holes.push_back({{0.4, 0.4}, {0.6, 0.4}, {0.6, 0.6}, {0.4, 0.6}});
  const GeoPoint h = centroid(holed);
  CHECK(h.lon == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(h.lat == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("triangle centroid matches a rasterized average") {
  const Polygon tri{{{0, 0}, {1, 0}, {0, 1}}, {}};
  const GeoPoint c = centroid(tri);
  // Oracle: mean of grid cell centers strictly inside the triangle.
  const int n = 2000;
  double sx = 0.0, sy = 0.0;
  long count = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double x = (i + 0.5) / n, y = (j + 0.5) / n;
      if (x + y < 1.0) {
        sx += x;
        sy += y;
        ++count;
      }
    }
  }
  CHECK(c.lon == doctest::Approx(sx / count).epsilon(1e-3));
  CHECK(c.lat == doctest::Approx(sy / count).epsilon(1e-3));
  CHECK(c.lon == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("orientation does not change the centroid") {
  const Polygon ccw{{{0, 0}, {3, 0}, {3, 1}, {0, 1}}, {}};
  const Polygon cw{{{0, 1}, {3, 1}, {3, 0}, {0, 0}}, {}};
  CHECK(centroid(ccw).lon == doctest::Approx(centroid(cw).lon));
  CHECK(centroid(ccw).lat == doctest::Approx(centroid(cw).lat));
}

TEST_CASE("distance_km examples") {
  CHECK(distance_km({12.5, -3.0}, {12.5, -3.0}) == 0.0);
  const double one_deg = 2.0 * std::numbers::pi * 6371.0 / 360.0;
  CHECK(std::abs(distance_km({0, 0}, {1, 0}) - one_deg) < 0.01);
  CHECK(std::abs(distance_km({0, 0}, {1, 0}) - 111.195) < 0.01);
  CHECK(std::abs(distance_km({0, 0}, {180, 0}) - std::numbers::pi * 6371.0) < 0.1);
  CHECK(std::abs(distance_km({0, 0}, {180, 0}) - 20015.1) < 0.1);
}

TEST_CASE("planar distance is scaled degrees") {
  const double one_deg = 2.0 * std::numbers::pi * 6371.0 / 360.0;
  CHECK(planar_distance_km({0, 0}, {3, 4}) == doctest::Approx(5.0 * one_deg));
  CHECK(distance_km({0, 0}, {1, 0}, DistanceMetric::kPlanarDegrees) == doctest::Approx(one_deg));
}

TEST_CASE("make_point rejects out-of-range coordinates") {
  CHECK_NOTHROW(make_point(180.0, -90.0));
  CHECK_THROWS_AS(make_point(180.5, 0.0), ContractError);
  CHECK_THROWS_AS(make_point(0.0, NAN), ContractError);
}

TEST_CASE("open_ring strips the closing vertex only") {
  CHECK(open_ring({{0, 0}, {1, 0}, {1, 1}, {0, 0}}).size() == 3);
  CHECK(open_ring({{0, 0}, {1, 0}, {1, 1}}).size() == 3);
}

TEST_CASE("property: distance symmetry and triangle inequality") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> lon(-180, 180), lat(-90, 90);
  for (int t = 0; t < 2000; ++t) {
    const GeoPoint a{lon(rng), lat(rng)}, b{lon(rng), lat(rng)}, c{lon(rng), lat(rng)};
    CHECK(distance_km(a, b) == doctest::Approx(distance_km(b, a)).epsilon(1e-12));
    CHECK(distance_km(a, c) <= distance_km(a, b) + distance_km(b, c) + 1e-9);
    CHECK(distance_km(a, b) > 0.0);
  }
}

TEST_CASE("property: convex polygon interior and exterior") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 50; ++t) {
    // Random convex polygon: points on an ellipse at sorted angles.
    const double cx = 30 + 5 * u(rng), cy = -10 + 5 * u(rng);
    const double rx = 0.2 + u(rng), ry = 0.2 + u(rng);
    std::vector<double> angles(8);
    for (auto& a : angles) a = 2.0 * std::numbers::pi * u(rng);
    std::sort(angles.begin(), angles.end());
    Polygon poly;
    for (double a : angles) poly.exterior.push_back({cx + rx * std::cos(a), cy + ry * std::sin(a)});
    if (std::abs(signed_area(poly.exterior)) < 1e-6) continue;
    const BoundingBox bb = bounding_box(poly);
    for (int k = 0; k < 100; ++k) {
      // Convex combination of vertices with strictly positive weights.
      double w_sum = 0.0, x = 0.0, y = 0.0;
      for (const auto& v : poly.exterior) {
        const double w = 0.05 + u(rng);
        w_sum += w;
        x += w * v.lon;
        y += w * v.lat;
      }
      CHECK(point_in_polygon({x / w_sum, y / w_sum}, poly));
      const GeoPoint out{bb.max_lon + 0.01 + u(rng), bb.min_lat - 0.01 - u(rng)};
      CHECK_FALSE(point_in_polygon(out, poly));
    }
    const GeoPoint c = centroid(poly);
    CHECK(bb.contains(c));
  }
}

TEST_CASE("approx_area_km2 of a one-degree cell at the equator") {
  const double one_deg = 2.0 * std::numbers::pi * 6371.0 / 360.0;
  const Polygon cell{{{0, -0.5}, {1, -0.5}, {1, 0.5}, {0, 0.5}}, {}};
  CHECK(approx_area_km2(cell) == doctest::Approx(one_deg * one_deg).epsilon(1e-12));
}

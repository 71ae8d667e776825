#include <doctest.h>

#include <cmath>
#include <random>

#include "fieldcal/polygon.hpp"
#include "oracles.hpp"

using namespace fieldcal;

namespace {

Polygon unit_square() { return {{0.0, 0.0}, {1.0, 0.0}, {1.0, 1.0}, {0.0, 1.0}}; }

Polygon shifted(const Polygon& poly, const Vec2& d) {
  Polygon out = poly;
  for (Vec2& v : out) v += d;
  return out;
}

Polygon reversed(const Polygon& poly) { return Polygon(poly.rbegin(), poly.rend()); }

// Random convex polygon: points on a randomly squashed circle, angle-sorted.
Polygon random_convex(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const int n = 3 + static_cast<int>(uni(rng) * 5.0);
  const double cx = 4.0 * (uni(rng) - 0.5);
  const double cy = 4.0 * (uni(rng) - 0.5);
  const double rx = 0.5 + 2.0 * uni(rng);
  const double ry = 0.5 + 2.0 * uni(rng);

  std::vector<double> angles;
  for (int i = 0; i < n; ++i) angles.push_back(2.0 * 3.14159265358979323846 * uni(rng));
  std::sort(angles.begin(), angles.end());

  Polygon poly;
  for (const double a : angles) {
    poly.emplace_back(cx + rx * std::cos(a), cy + ry * std::sin(a));
  }
  return polygon_is_simple(poly) ? poly : random_convex(rng);
}

}  // namespace

TEST_SUITE("polygon") {
  TEST_CASE("signed area follows orientation") {
    CHECK(polygon_area_signed(unit_square()) == doctest::Approx(1.0));
    CHECK(polygon_area_signed(reversed(unit_square())) == doctest::Approx(-1.0));
    CHECK(polygon_area(reversed(unit_square())) == doctest::Approx(1.0));

    const Polygon tri = {{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}};
    CHECK(polygon_area(tri) == doctest::Approx(0.5));
  }

  TEST_CASE("degenerate rings have zero area") {
    CHECK(polygon_area({}) == 0.0);
    CHECK(polygon_area({{1.0, 2.0}}) == 0.0);
    CHECK(polygon_area({{0.0, 0.0}, {3.0, 4.0}}) == 0.0);
  }

  TEST_CASE("simplicity detection") {
    CHECK(polygon_is_simple(unit_square()));

    const Polygon bowtie = {{0.0, 0.0}, {1.0, 1.0}, {1.0, 0.0}, {0.0, 1.0}};
    CHECK_FALSE(polygon_is_simple(bowtie));

    const Polygon repeated = {{0.0, 0.0}, {1.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}};
    CHECK_FALSE(polygon_is_simple(repeated));

    const Polygon lshape = {{0, 0}, {2, 0}, {2, 1}, {1, 1}, {1, 2}, {0, 2}};
    CHECK(polygon_is_simple(lshape));
  }

  TEST_CASE("point containment") {
    const Polygon sq = unit_square();
    CHECK(point_in_polygon(sq, {0.5, 0.5}));
    CHECK_FALSE(point_in_polygon(sq, {1.5, 0.5}));
    CHECK_FALSE(point_in_polygon(sq, {-0.1, 0.5}));

    // Points on the outline count as inside.
    CHECK(point_in_polygon(sq, {1.0, 0.5}));
    CHECK(point_in_polygon(sq, {0.0, 0.0}));

    // Just past the edge tolerance: outside.
    CHECK_FALSE(point_in_polygon(sq, {1.0 + 1e-6, 0.5}));
  }

  TEST_CASE("outline distance") {
    const Polygon sq = unit_square();
    CHECK(point_to_outline_distance(sq, {0.5, 0.5}) == doctest::Approx(0.5));
    CHECK(point_to_outline_distance(sq, {0.0, 0.0}) == doctest::Approx(0.0));
    CHECK(point_to_outline_distance(sq, {2.0, 0.5}) == doctest::Approx(1.0));
    CHECK(point_to_outline_distance(sq, {2.0, 2.0}) == doctest::Approx(std::sqrt(2.0)));
  }

  TEST_CASE("dilated containment") {
    const Polygon sq = unit_square();
    CHECK(point_in_dilated_polygon(sq, {0.5, 0.5}, 0.0));
    CHECK(point_in_dilated_polygon(sq, {1.4, 0.5}, 0.5));
    CHECK_FALSE(point_in_dilated_polygon(sq, {1.6, 0.5}, 0.5));
    CHECK(point_in_dilated_polygon(sq, {-0.3, -0.3}, 0.5));
  }

  TEST_CASE("convex clipping") {
    const Polygon sq = unit_square();
    const Polygon half = rectangle_polygon(0.0, 0.0, 0.5, 1.0);

    const Polygon clipped = clip_convex(sq, half);
    CHECK(polygon_area(clipped) == doctest::Approx(0.5));

    const Polygon inside = rectangle_polygon(0.25, 0.25, 0.75, 0.75);
    CHECK(polygon_area(clip_convex(inside, sq)) == doctest::Approx(0.25));

    const Polygon disjoint = rectangle_polygon(5.0, 5.0, 6.0, 6.0);
    CHECK(clip_convex(sq, disjoint).size() < 3);
  }

  TEST_CASE("clipping a concave subject") {
    const Polygon lshape = {{0, 0}, {2, 0}, {2, 1}, {1, 1}, {1, 2}, {0, 2}};
    const Polygon window = rectangle_polygon(0.5, 0.5, 1.5, 1.5);
    CHECK(polygon_area(clip_convex(lshape, window)) == doctest::Approx(0.75));
  }

  TEST_CASE("intersection area basics") {
    const Polygon sq = unit_square();
    CHECK(intersection_area(sq, sq) == doctest::Approx(1.0));
    CHECK(intersection_area(sq, shifted(sq, {0.5, 0.0})) == doctest::Approx(0.5));
    CHECK(intersection_area(sq, shifted(sq, {2.0, 0.0})) == doctest::Approx(0.0));
    CHECK(intersection_area(sq, shifted(sq, {0.5, 0.5})) == doctest::Approx(0.25));
  }

  TEST_CASE("intersection area is orientation independent") {
    const Polygon sq = unit_square();
    const Polygon other = shifted(sq, {0.25, 0.25});
    const double base = intersection_area(sq, other);
    CHECK(base == doctest::Approx(0.5625));
    CHECK(intersection_area(reversed(sq), other) == doctest::Approx(base));
    CHECK(intersection_area(sq, reversed(other)) == doctest::Approx(base));
    CHECK(intersection_area(reversed(sq), reversed(other)) == doctest::Approx(base));
  }

  TEST_CASE("intersection with a concave polygon") {
    const Polygon lshape = {{0, 0}, {2, 0}, {2, 1}, {1, 1}, {1, 2}, {0, 2}};
    const Polygon window = rectangle_polygon(0.5, 0.5, 1.5, 1.5);
    CHECK(intersection_area(lshape, window) == doctest::Approx(0.75));
    CHECK(intersection_area(window, lshape) == doctest::Approx(0.75));
  }

  TEST_CASE("intersection area far from the origin") {
    // Internal normalization keeps far-away coordinates well conditioned.
    const Vec2 far(1.0e6, -3.0e6);
    const Polygon a = shifted(unit_square(), far);
    const Polygon b = shifted(unit_square(), far + Vec2(0.5, 0.0));
    CHECK(intersection_area(a, b) == doctest::Approx(0.5).epsilon(1e-6));
  }

  TEST_CASE("intersection area matches the rasterization oracle") {
    std::mt19937_64 rng(20240817);
    for (int trial = 0; trial < 200; ++trial) {
      const Polygon a = random_convex(rng);
      const Polygon b = random_convex(rng);
      const double fast = intersection_area(a, b);
      const oracle::RasterIoU raster = oracle::raster_iou(a, b, 4000);
      const double scale = std::max(1.0, polygon_area(a) + polygon_area(b));
      CHECK(std::abs(fast - raster.intersection) < 1e-3 * scale);
    }
  }

  TEST_CASE("rectangle helper") {
    const Polygon r = rectangle_polygon(1.0, 2.0, 4.0, 6.0);
    REQUIRE(r.size() == 4);
    CHECK(polygon_area_signed(r) == doctest::Approx(12.0));
    CHECK(point_in_polygon(r, {2.0, 3.0}));
  }
}

#include <catch_amalgamated.hpp>

#include <random>

#include "dlo/geom.hpp"
#include "oracles.hpp"

using namespace dlo;

namespace {

ConvexObstacle unit_square_at_origin() {
  return ConvexObstacle({{-0.5, -0.5}, {0.5, -0.5}, {0.5, 0.5}, {-0.5, 0.5}});
}

}  // namespace

TEST_CASE("convex obstacle validation") {
  CHECK_THROWS(ConvexObstacle({{0, 0}, {1, 0}}));
  CHECK_THROWS(ConvexObstacle({{0, 0}, {1, 0}, {1, 0}, {0, 1}}));       // repeated vertex
  CHECK_THROWS(ConvexObstacle({{0, 0}, {0, 1}, {1, 1}, {1, 0}}));       // clockwise
  CHECK_THROWS(ConvexObstacle({{0, 0}, {1, 0}, {2, 0}, {1, 1}}));       // collinear
  CHECK_NOTHROW(ConvexObstacle({{0, 0}, {1, 0}, {1, 1}}));
}

TEST_CASE("signed distance on the unit square") {
  const ConvexObstacle sq = unit_square_at_origin();
  CHECK(signed_distance({1.0, 0.0}, sq) == Catch::Approx(0.5).margin(1e-12));
  CHECK(signed_distance({0.0, 0.0}, sq) == Catch::Approx(-0.5).margin(1e-12));
  // corner point, frozen from the dense boundary-sampling oracle
  const double expect = oracle::dense_signed_distance({1.0, 1.0}, sq, 1e-5);
  CHECK(signed_distance({1.0, 1.0}, sq) == Catch::Approx(std::sqrt(2.0) * 0.5).margin(1e-9));
  CHECK(signed_distance({1.0, 1.0}, sq) == Catch::Approx(expect).margin(1e-6));
  CHECK(signed_distance({0.5, 0.25}, sq) == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("signed distance agrees with the dense boundary oracle") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  const ConvexObstacle tri({{-0.3, -0.2}, {0.4, -0.1}, {0.05, 0.5}});
  for (int i = 0; i < 200; ++i) {
    const Point2 p{u(rng), u(rng)};
    const double got = signed_distance(p, tri);
    if (got > 1e-3) {  // exterior points per the contract
      const double want = oracle::dense_signed_distance(p, tri, 1e-4);
      CHECK(got == Catch::Approx(want).margin(1e-6));
    }
  }
}

TEST_CASE("signed distance is 1-Lipschitz") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  const ConvexObstacle sq = unit_square_at_origin();
  for (int i = 0; i < 500; ++i) {
    const Point2 p{u(rng), u(rng)};
    const Point2 q{u(rng), u(rng)};
    CHECK(std::abs(signed_distance(p, sq) - signed_distance(q, sq)) <=
          distance(p, q) + 1e-12);
  }
}

TEST_CASE("min clearance") {
  SECTION("empty workspace uses the boundary") {
    const Workspace w(1.0, 1.0);
    CHECK(min_clearance({0.5, 0.5}, w) == Catch::Approx(0.5).margin(1e-12));
    CHECK(min_clearance({0.1, 0.5}, w) == Catch::Approx(0.1).margin(1e-12));
  }
  SECTION("obstacle closer than the boundary wins") {
    Workspace w(1.0, 1.0);
    w.obstacles.push_back(ConvexObstacle({{0.45, 0.45}, {0.55, 0.45}, {0.55, 0.55}, {0.45, 0.55}}));
    // point 0.1 left of the obstacle, 0.35 from the nearest wall
    CHECK(min_clearance({0.35, 0.5}, w) == Catch::Approx(0.1).margin(1e-12));
  }
  SECTION("matches the exhaustive per-obstacle minimum on random scenes") {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> u(0.05, 0.95);
    for (int scene = 0; scene < 20; ++scene) {
      Workspace w(1.0, 1.0);
      for (int k = 0; k < 3; ++k)
        w.obstacles.push_back(oracle::random_obstacle(rng, {0.25 + 0.25 * k, u(rng)}, 0.08));
      for (int i = 0; i < 20; ++i) {
        const Point2 p{u(rng), u(rng)};
        double want = std::min(std::min(p.x, 1.0 - p.x), std::min(p.y, 1.0 - p.y));
        for (const auto& o : w.obstacles) want = std::min(want, signed_distance(p, o));
        CHECK(min_clearance(p, w) == Catch::Approx(want).margin(1e-12));
        for (const auto& o : w.obstacles)
          CHECK(min_clearance(p, w) <= signed_distance(p, o) + 1e-12);
      }
    }
  }
}

TEST_CASE("segment collision predicate") {
  Workspace w(1.0, 1.0);
  w.obstacles.push_back(ConvexObstacle({{0.4, 0.4}, {0.6, 0.4}, {0.6, 0.6}, {0.4, 0.6}}));

  SECTION("fully outside the inflated obstacle") {
    CHECK_FALSE(segment_collides({0.1, 0.2}, {0.9, 0.2}, w, 0.05));
  }
  SECTION("crossing the interior") {
    CHECK(segment_collides({0.1, 0.5}, {0.9, 0.5}, w, 0.0));
    CHECK(segment_collides({0.1, 0.5}, {0.9, 0.5}, w, 0.05));
  }
  SECTION("tangent at exactly the margin does not collide") {
    // segment at y=0.3, obstacle face at y=0.4, margin exactly 0.1
    CHECK_FALSE(segment_collides({0.2, 0.3}, {0.8, 0.3}, w, 0.1));
    CHECK(segment_collides({0.2, 0.3}, {0.8, 0.3}, w, 0.1 + 1e-9));
  }
  SECTION("boundary margin") {
    CHECK(segment_collides({0.005, 0.2}, {0.005, 0.8}, w, 0.01));
    CHECK_FALSE(segment_collides({0.2, 0.2}, {0.2, 0.8}, w, 0.01));
  }
  SECTION("symmetry") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 200; ++i) {
      const Point2 a{u(rng), u(rng)};
      const Point2 b{u(rng), u(rng)};
      CHECK(segment_collides(a, b, w, 0.02) == segment_collides(b, a, w, 0.02));
    }
  }
}

TEST_CASE("convex set distance handles degenerate hulls") {
  const std::vector<Point2> square{{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  CHECK(convex_sets_distance({{2, 0}, {3, 0}, {3, 1}, {2, 1}}, square) ==
        Catch::Approx(1.0).margin(1e-12));
  // quad collapsed to a segment
  CHECK(convex_sets_distance({{2, 0}, {2, 1}, {2, 0.5}, {2, 0.2}}, square) ==
        Catch::Approx(1.0).margin(1e-12));
  // containment
  CHECK(convex_sets_distance({{0.4, 0.4}, {0.6, 0.4}, {0.6, 0.6}, {0.4, 0.6}}, square) == 0.0);
  CHECK(convex_sets_distance(square, {{0.5, 0.5}}) == 0.0);
  // touching
  CHECK(convex_sets_distance({{1, 0}, {2, 0}, {2, 1}, {1, 1}}, square) == 0.0);
}

#include <catch_amalgamated.hpp>

#include "dlo/planner.hpp"

using namespace dlo;

namespace {

Workspace empty_unit() { return Workspace(1.0, 1.0); }

Workspace with_block() {
  Workspace w(1.0, 1.0);
  w.obstacles.push_back(ConvexObstacle({{0.4, 0.2}, {0.6, 0.2}, {0.6, 0.8}, {0.4, 0.8}}));
  return w;
}

}  // namespace

TEST_CASE("edge cost") {
  const Workspace w = empty_unit();

  SECTION("pure length") {
    const PivotCostWeights weights{1.0, 0.0};
    CHECK(edge_cost({0.4, 0.5}, {0.6, 0.5}, w, weights) == Catch::Approx(0.2).margin(1e-12));
  }
  SECTION("pure clearance with constant clearance along the edge") {
    // y = 0.4 puts every sample at clearance 0.4 (nearest wall y=0)
    const PivotCostWeights weights{0.0, 1.0};
    CHECK(edge_cost({0.4, 0.4}, {0.6, 0.4}, w, weights) ==
          Catch::Approx(0.2 / 0.4).margin(1e-9));
  }
  SECTION("published weights add both terms") {
    const PivotCostWeights weights{1.0, 1.0};
    CHECK(edge_cost({0.4, 0.4}, {0.6, 0.4}, w, weights) ==
          Catch::Approx(0.2 + 0.5).margin(1e-9));
  }
  SECTION("non-positive clearance gives infinite cost") {
    const Workspace wb = with_block();
    CHECK(std::isinf(edge_cost({0.3, 0.5}, {0.7, 0.5}, wb, {1.0, 1.0})));
  }
}

TEST_CASE("path cost") {
  const Workspace w = empty_unit();
  const PivotCostWeights weights{1.0, 1.0};

  SECTION("two-waypoint path equals the single edge cost") {
    const Path p = Path::from_waypoints({{0.2, 0.4}, {0.8, 0.4}});
    CHECK(path_cost(p, w, weights) ==
          Catch::Approx(edge_cost({0.2, 0.4}, {0.8, 0.4}, w, weights)).margin(1e-12));
  }
  SECTION("splitting an edge at its midpoint changes cost negligibly") {
    const Path p1 = Path::from_waypoints({{0.2, 0.4}, {0.8, 0.4}});
    const Path p2 = Path::from_waypoints({{0.2, 0.4}, {0.5, 0.4}, {0.8, 0.4}});
    CHECK(path_cost(p1, w, weights) == Catch::Approx(path_cost(p2, w, weights)).margin(1e-9));
  }
  SECTION("matches a 10x denser quadrature within 1%") {
    const Workspace wb = with_block();
    const Path p = Path::from_waypoints({{0.2, 0.1}, {0.3, 0.12}, {0.35, 0.15}});
    const double coarse = path_cost(p, wb, weights, 0.005);
    const double fine = path_cost(p, wb, weights, 0.0005);
    CHECK(std::abs(coarse - fine) / fine < 0.01);
  }
}

TEST_CASE("pivot planning in an empty workspace") {
  const Workspace w = empty_unit();
  PlannerConfig cfg;
  cfg.max_iterations = 5000;
  cfg.rng_seed = 7;
  cfg.collision_margin = 0.01;
  const Point2 start{0.1, 0.1}, goal{0.9, 0.9};

  const PlanResult res = plan_pivot(start, goal, w, {1.0, 0.0}, cfg);
  REQUIRE(res.success);
  CHECK(res.path.waypoints.front() == start);
  CHECK(res.path.waypoints.back() == goal);
  // with the shortcut pass and no obstacles the path collapses to near-straight
  CHECK(res.cost <= 1.2 * distance(start, goal));

  SECTION("sigma is normalized cumulative arc length") {
    double total = res.path.length();
    double cum = 0.0;
    for (std::size_t i = 1; i < res.path.size(); ++i) {
      cum += distance(res.path.waypoints[i - 1], res.path.waypoints[i]);
      CHECK(res.path.sigma[i] == Catch::Approx(cum / total).margin(1e-9));
    }
  }
  SECTION("path cost equals the sum of edge costs") {
    CHECK(res.cost == Catch::Approx(path_cost(res.path, w, {1.0, 0.0},
                                              cfg.step_size / 10.0)).margin(1e-12));
  }
}

TEST_CASE("goal inside an obstacle is a precondition error") {
  const Workspace w = with_block();
  PlannerConfig cfg;
  const PlanResult res = plan_pivot({0.1, 0.5}, {0.5, 0.5}, w, {1.0, 1.0}, cfg);
  CHECK_FALSE(res.success);
  CHECK_FALSE(res.error.empty());
}

TEST_CASE("clearance-aware weighting increases the minimum clearance") {
  const Workspace w = with_block();
  PlannerConfig cfg;
  cfg.max_iterations = 4000;
  cfg.rng_seed = 11;
  cfg.collision_margin = 0.01;
  const Point2 start{0.15, 0.5}, goal{0.85, 0.5};

  const auto min_clear = [&](const Path& p) {
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i + 1 < p.size(); ++i)
      for (int k = 0; k <= 20; ++k) {
        const Point2 q = p.waypoints[i] +
                         (p.waypoints[i + 1] - p.waypoints[i]) * (k / 20.0);
        m = std::min(m, min_clearance(q, w));
      }
    return m;
  };

  const PlanResult short_path = plan_pivot(start, goal, w, {1.0, 0.0}, cfg);
  const PlanResult clear_path = plan_pivot(start, goal, w, {0.05, 1.0}, cfg);
  REQUIRE(short_path.success);
  REQUIRE(clear_path.success);
  CHECK(min_clear(clear_path.path) >= min_clear(short_path.path) - 1e-9);
}

TEST_CASE("planner invariants") {
  const Workspace w = with_block();
  PlannerConfig cfg;
  cfg.max_iterations = 3000;
  cfg.rng_seed = 3;
  cfg.collision_margin = 0.01;
  const PlanResult res = plan_pivot({0.1, 0.1}, {0.9, 0.9}, w, {1.0, 1.0}, cfg);
  REQUIRE(res.success);

  SECTION("collision-free at margin") {
    for (std::size_t i = 0; i + 1 < res.path.size(); ++i)
      CHECK_FALSE(segment_collides(res.path.waypoints[i], res.path.waypoints[i + 1], w,
                                   cfg.collision_margin));
  }
  SECTION("deterministic for a fixed seed") {
    const PlanResult again = plan_pivot({0.1, 0.1}, {0.9, 0.9}, w, {1.0, 1.0}, cfg);
    REQUIRE(again.success);
    REQUIRE(again.path.size() == res.path.size());
    for (std::size_t i = 0; i < res.path.size(); ++i) {
      CHECK(again.path.waypoints[i].x == res.path.waypoints[i].x);
      CHECK(again.path.waypoints[i].y == res.path.waypoints[i].y);
    }
    CHECK(again.cost == res.cost);
  }
  SECTION("best-cost trace is non-increasing") {
    for (std::size_t i = 1; i < res.best_cost_trace.size(); ++i)
      CHECK(res.best_cost_trace[i] <= res.best_cost_trace[i - 1] + 1e-12);
  }
  SECTION("cost positivity") { CHECK(res.cost > 0.0); }
}

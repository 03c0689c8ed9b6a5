#pragma once

// Test-only oracles, written independently of the library implementation
// paths they check.

#include <cmath>
#include <random>
#include <vector>

#include "dlo/geom.hpp"
#include "dlo/passage.hpp"

namespace oracle {

using dlo::ConvexObstacle;
using dlo::Point2;

/// Unsigned distance to the polygon boundary by dense sampling of every edge.
inline double dense_boundary_distance(const Point2& p, const ConvexObstacle& o,
                                      double spacing = 1e-4) {
  double best = std::numeric_limits<double>::infinity();
  const std::size_t n = o.vertices.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Point2 a = o.vertices[i];
    const Point2 b = o.vertices[(i + 1) % n];
    const double len = dlo::distance(a, b);
    const int steps = std::max(1, static_cast<int>(std::ceil(len / spacing)));
    for (int k = 0; k <= steps; ++k) {
      const Point2 q = a + (b - a) * (static_cast<double>(k) / steps);
      best = std::min(best, dlo::distance(p, q));
    }
  }
  return best;
}

/// Signed distance via the sampling oracle plus a containment test done with
/// winding of half-plane checks (independent code path from the library).
inline double dense_signed_distance(const Point2& p, const ConvexObstacle& o,
                                    double spacing = 1e-4) {
  bool inside = true;
  const std::size_t n = o.vertices.size();
  for (std::size_t i = 0; i < n && inside; ++i) {
    const Point2 a = o.vertices[i];
    const Point2 b = o.vertices[(i + 1) % n];
    if ((b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x) < 0.0) inside = false;
  }
  const double d = dense_boundary_distance(p, o, spacing);
  return inside ? -d : d;
}

/// Distance between two disjoint convex polygons via the support-function
/// lower bound max_u [ h_A-(u) - h_B+(u) ], swept over a dense direction grid.
inline double support_function_distance(const ConvexObstacle& a, const ConvexObstacle& b,
                                        int directions = 200000) {
  double best = 0.0;
  for (int i = 0; i < directions; ++i) {
    const double th = 2.0 * M_PI * i / directions;
    const Point2 u{std::cos(th), std::sin(th)};
    double min_a = std::numeric_limits<double>::infinity();
    double max_b = -std::numeric_limits<double>::infinity();
    for (const auto& v : a.vertices) min_a = std::min(min_a, u.dot(v));
    for (const auto& v : b.vertices) max_b = std::max(max_b, u.dot(v));
    best = std::max(best, min_a - max_b);
  }
  return best;
}

/// Dense-sampled closest pair between two convex polygon boundaries.
inline std::pair<Point2, Point2> dense_closest_pair(const ConvexObstacle& a,
                                                    const ConvexObstacle& b,
                                                    double spacing = 5e-4) {
  const auto samples = [&](const ConvexObstacle& o) {
    std::vector<Point2> pts;
    const std::size_t n = o.vertices.size();
    for (std::size_t i = 0; i < n; ++i) {
      const Point2 p = o.vertices[i];
      const Point2 q = o.vertices[(i + 1) % n];
      const int steps = std::max(1, static_cast<int>(std::ceil(dlo::distance(p, q) / spacing)));
      for (int k = 0; k < steps; ++k) pts.push_back(p + (q - p) * (static_cast<double>(k) / steps));
    }
    return pts;
  };
  const auto sa = samples(a);
  const auto sb = samples(b);
  double best = std::numeric_limits<double>::infinity();
  std::pair<Point2, Point2> out;
  for (const auto& p : sa)
    for (const auto& q : sb) {
      const double d = dlo::distance(p, q);
      if (d < best) {
        best = d;
        out = {p, q};
      }
    }
  return out;
}

/// Brute-force passage enumeration: all pairs over obstacles plus walls,
/// distance by the support oracle, validity by an independently coded
/// circumcircle test.
inline std::vector<std::pair<int, int>> brute_force_passages(const dlo::Workspace& w) {
  std::vector<ConvexObstacle> all = w.obstacles;
  for (auto& wall : dlo::boundary_walls(w)) all.push_back(std::move(wall));
  const int n = static_cast<int>(all.size());
  std::vector<std::pair<int, int>> out;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double dist = support_function_distance(all[i], all[j], 20000);
      if (dist <= 1e-9) continue;  // touching or overlapping
      // canonical midpoint pair comes from the library's contract; here only
      // the center/radius matter, computed from the independent closest pair
      dlo::NearestSegmentResult seg;
      try {
        seg = dlo::nearest_segment(all[i], all[j]);
      } catch (const std::exception&) {
        continue;
      }
      const Point2 c = (seg.on_a + seg.on_b) * 0.5;
      const double r = seg.dist * 0.5;
      bool valid = true;
      for (int k = 0; k < n && valid; ++k) {
        if (k == i || k == j) continue;
        const double d = std::max(dense_signed_distance(c, all[k], 2e-4), 0.0);
        if (d < r - 1e-9) valid = false;
      }
      if (valid) out.emplace_back(i, j);
    }
  return out;
}

/// Random strictly convex CCW polygon from a hull of random points around a
/// center.
inline ConvexObstacle random_obstacle(std::mt19937_64& rng, const Point2& center,
                                      double radius) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (;;) {
    std::vector<Point2> pts;
    const int count = 4 + static_cast<int>(u01(rng) * 5);
    for (int i = 0; i < count; ++i) {
      const double th = 2.0 * M_PI * u01(rng);
      const double r = radius * (0.4 + 0.6 * u01(rng));
      pts.push_back(center + Point2{r * std::cos(th), r * std::sin(th)});
    }
    const std::vector<Point2> hull = dlo::convex_hull(pts);
    if (hull.size() < 3) continue;
    try {
      return ConvexObstacle(hull);
    } catch (const std::exception&) {
      continue;
    }
  }
}

}  // namespace oracle

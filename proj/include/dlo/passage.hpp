#pragma once

#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "dlo/geom.hpp"
#include "dlo/path.hpp"

namespace dlo {

/// Shortest line segment between a pair of obstacles; the compact passage
/// representation. Obstacle ids index into the workspace obstacle list
/// extended with the four boundary walls.
struct Passage {
  Point2 endpoint_a;
  Point2 endpoint_b;
  double width = 0.0;
  std::pair<int, int> obstacle_ids{-1, -1};

  Point2 center() const { return (endpoint_a + endpoint_b) * 0.5; }
  Point2 direction() const { return (endpoint_b - endpoint_a).normalized(); }
};

struct PassageSet {
  std::vector<Passage> passages;
};

/// Thickness of the pseudo-obstacle rectangles that model workspace walls.
inline constexpr double kWallThickness = 0.05;

/// The four boundary walls as degenerate rectangle obstacles hugging the
/// workspace from outside, in order: left, right, bottom, top. Adjacent walls
/// touch only at corner points, so no wall pair overlaps.
inline std::vector<ConvexObstacle> boundary_walls(const Workspace& w) {
  const double h = kWallThickness;
  const double W = w.width, H = w.height;
  std::vector<ConvexObstacle> walls;
  walls.emplace_back(std::vector<Point2>{{-h, 0}, {0, 0}, {0, H}, {-h, H}});
  walls.emplace_back(std::vector<Point2>{{W, 0}, {W + h, 0}, {W + h, H}, {W, H}});
  walls.emplace_back(std::vector<Point2>{{0, -h}, {W, -h}, {W, 0}, {0, 0}});
  walls.emplace_back(std::vector<Point2>{{0, H}, {W, H}, {W, H + h}, {0, H + h}});
  return walls;
}

inline bool convex_obstacles_intersect(const ConvexObstacle& a, const ConvexObstacle& b) {
  for (const auto& v : a.vertices)
    if (b.contains(v)) return true;
  for (const auto& v : b.vertices)
    if (a.contains(v)) return true;
  const std::size_t na = a.vertices.size(), nb = b.vertices.size();
  for (std::size_t i = 0; i < na; ++i)
    for (std::size_t j = 0; j < nb; ++j)
      if (segments_intersect(a.vertices[i], a.vertices[(i + 1) % na], b.vertices[j],
                             b.vertices[(j + 1) % nb]))
        return true;
  return false;
}

struct NearestSegmentResult {
  Point2 on_a;
  Point2 on_b;
  double dist = 0.0;
};

/// Minimum-distance point pair between two disjoint convex polygons. When the
/// minimum is attained along a pair of parallel facing edges, the midpoints of
/// the overlap interval are returned so the result is canonical.
inline NearestSegmentResult nearest_segment(const ConvexObstacle& o1,
                                            const ConvexObstacle& o2) {
  if (convex_obstacles_intersect(o1, o2))
    throw std::invalid_argument("nearest_segment: obstacles overlap or touch");

  const std::size_t n1 = o1.vertices.size(), n2 = o2.vertices.size();
  ClosestPair best;
  for (std::size_t i = 0; i < n1; ++i)
    for (std::size_t j = 0; j < n2; ++j) {
      const ClosestPair cp =
          segment_segment_closest(o1.vertices[i], o1.vertices[(i + 1) % n1],
                                  o2.vertices[j], o2.vertices[(j + 1) % n2]);
      if (cp.dist < best.dist) best = cp;
    }

  // Prefer the parallel-overlap midpoint pair among all ties at the minimum.
  for (std::size_t i = 0; i < n1; ++i) {
    const Point2 a0 = o1.vertices[i], a1 = o1.vertices[(i + 1) % n1];
    const Point2 ua = (a1 - a0).normalized();
    const double la = distance(a0, a1);
    for (std::size_t j = 0; j < n2; ++j) {
      const Point2 b0 = o2.vertices[j], b1 = o2.vertices[(j + 1) % n2];
      const Point2 ub = (b1 - b0).normalized();
      if (std::abs(ua.cross(ub)) > 1e-9) continue;
      const ClosestPair cp = segment_segment_closest(a0, a1, b0, b1);
      if (cp.dist > best.dist + kGeomEps) continue;
      const double s0 = (b0 - a0).dot(ua);
      const double s1 = (b1 - a0).dot(ua);
      const double lo = std::max(0.0, std::min(s0, s1));
      const double hi = std::min(la, std::max(s0, s1));
      if (hi - lo <= kGeomEps) continue;
      const Point2 pa = a0 + ua * ((lo + hi) * 0.5);
      const Point2 pb = closest_point_on_segment(pa, b0, b1);
      return {pa, pb, distance(pa, pb)};
    }
  }
  return {best.on_a, best.on_b, best.dist};
}

/// Validity rule: a passage is valid iff no other obstacle intersects the
/// circle whose diameter is the passage segment. A circle-polygon distance of
/// zero (tangency, within the geometric tolerance) counts as non-intersecting.
inline bool passage_valid(const Passage& p, const std::vector<ConvexObstacle>& all) {
  const Point2 c = p.center();
  const double r = p.width * 0.5;
  for (int k = 0; k < static_cast<int>(all.size()); ++k) {
    if (k == p.obstacle_ids.first || k == p.obstacle_ids.second) continue;
    const double d = std::max(signed_distance(c, all[k]), 0.0);
    if (d < r - kGeomEps) return false;
  }
  return true;
}

inline bool passage_valid(const Passage& p, const Workspace& w) {
  std::vector<ConvexObstacle> all = w.obstacles;
  for (auto& wall : boundary_walls(w)) all.push_back(std::move(wall));
  return passage_valid(p, all);
}

/// All valid passages between obstacle pairs, boundary walls included as
/// pseudo-obstacles. Deterministic ordering by (min_id, max_id). Touching or
/// overlapping pairs produce no passage.
inline PassageSet detect_passages(const Workspace& w) {
  std::vector<ConvexObstacle> all = w.obstacles;
  for (auto& wall : boundary_walls(w)) all.push_back(std::move(wall));

  PassageSet ps;
  const int n = static_cast<int>(all.size());
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      if (convex_obstacles_intersect(all[i], all[j])) continue;
      const NearestSegmentResult seg = nearest_segment(all[i], all[j]);
      if (seg.dist <= kGeomEps) continue;
      Passage p{seg.on_a, seg.on_b, seg.dist, {i, j}};
      if (passage_valid(p, all)) ps.passages.push_back(std::move(p));
    }
  return ps;
}

struct PassageCrossing {
  int passage_id = -1;
  double sigma = 0.0;
  Point2 point;
};

/// Transversal crossing of segment [a,b] with segment [c,d]; returns the
/// parameter along [a,b] when the segments properly cross.
inline std::optional<double> segment_crossing_param(const Point2& a, const Point2& b,
                                                    const Point2& c, const Point2& d) {
  const Point2 cd = d - c;
  const double da = cd.cross(a - c);
  const double db = cd.cross(b - c);
  if (!((da > 0.0 && db < 0.0) || (da < 0.0 && db > 0.0))) return std::nullopt;
  const double t = da / (da - db);
  const Point2 x = a + (b - a) * t;
  const double len2 = cd.squared_norm();
  const double u = len2 > 0.0 ? (x - c).dot(cd) / len2 : 0.0;
  if (u < -kGeomEps || u > 1.0 + kGeomEps) return std::nullopt;
  return t;
}

/// Passages whose segment is crossed by the path polyline, ordered by the
/// path parameter at the crossing. A passage crossed several times appears
/// once per crossing.
inline std::vector<PassageCrossing> traversed_passages(const Path& path,
                                                       const PassageSet& ps) {
  std::vector<PassageCrossing> out;
  for (std::size_t e = 0; e + 1 < path.waypoints.size(); ++e) {
    const Point2& a = path.waypoints[e];
    const Point2& b = path.waypoints[e + 1];
    for (int pid = 0; pid < static_cast<int>(ps.passages.size()); ++pid) {
      const Passage& p = ps.passages[pid];
      if (auto t = segment_crossing_param(a, b, p.endpoint_a, p.endpoint_b)) {
        const double sig = path.sigma[e] + (*t) * (path.sigma[e + 1] - path.sigma[e]);
        out.push_back({pid, sig, a + (b - a) * (*t)});
      }
    }
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const PassageCrossing& x, const PassageCrossing& y) {
                     return x.sigma < y.sigma;
                   });
  // drop duplicate detections of one crossing at a shared waypoint
  std::vector<PassageCrossing> dedup;
  for (const auto& c : out) {
    if (!dedup.empty() && dedup.back().passage_id == c.passage_id &&
        std::abs(dedup.back().sigma - c.sigma) < 1e-12)
      continue;
    dedup.push_back(c);
  }
  return dedup;
}

}  // namespace dlo

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace dlo {

/// Tolerance for geometric degeneracy tests (meters / square meters).
inline constexpr double kGeomEps = 1e-9;

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  Point2() = default;
  Point2(double x_, double y_) : x(x_), y(y_) {}

  Point2 operator+(const Point2& o) const { return {x + o.x, y + o.y}; }
  Point2 operator-(const Point2& o) const { return {x - o.x, y - o.y}; }
  Point2 operator*(double s) const { return {x * s, y * s}; }
  Point2 operator/(double s) const { return {x / s, y / s}; }
  Point2& operator+=(const Point2& o) { x += o.x; y += o.y; return *this; }
  Point2& operator-=(const Point2& o) { x -= o.x; y -= o.y; return *this; }
  bool operator==(const Point2& o) const { return x == o.x && y == o.y; }

  double dot(const Point2& o) const { return x * o.x + y * o.y; }
  double cross(const Point2& o) const { return x * o.y - y * o.x; }
  double norm() const { return std::hypot(x, y); }
  double squared_norm() const { return x * x + y * y; }
  Point2 normalized() const {
    double n = norm();
    return n > 0.0 ? Point2{x / n, y / n} : Point2{0.0, 0.0};
  }
  /// 90-degree counter-clockwise rotation.
  Point2 perp() const { return {-y, x}; }
  bool finite() const { return std::isfinite(x) && std::isfinite(y); }
};

inline Point2 operator*(double s, const Point2& p) { return p * s; }

inline double distance(const Point2& a, const Point2& b) { return (a - b).norm(); }

/// Convex polygon obstacle with counter-clockwise vertices. Validated on
/// construction: at least 3 vertices, strictly convex, CCW, no repeats.
struct ConvexObstacle {
  std::vector<Point2> vertices;

  ConvexObstacle() = default;
  explicit ConvexObstacle(std::vector<Point2> verts) : vertices(std::move(verts)) {
    validate();
  }

  void validate() const {
    const std::size_t n = vertices.size();
    if (n < 3) throw std::invalid_argument("obstacle needs at least 3 vertices");
    for (const auto& v : vertices)
      if (!v.finite()) throw std::invalid_argument("obstacle vertex not finite");
    for (std::size_t i = 0; i < n; ++i) {
      const Point2& a = vertices[i];
      const Point2& b = vertices[(i + 1) % n];
      const Point2& c = vertices[(i + 2) % n];
      if (distance(a, b) < kGeomEps)
        throw std::invalid_argument("obstacle has repeated vertices");
      // strict convexity and CCW orientation in one test
      if ((b - a).cross(c - b) <= kGeomEps)
        throw std::invalid_argument("obstacle not strictly convex CCW");
    }
  }

  bool contains(const Point2& p) const {
    const std::size_t n = vertices.size();
    for (std::size_t i = 0; i < n; ++i) {
      const Point2& a = vertices[i];
      const Point2& b = vertices[(i + 1) % n];
      if ((b - a).cross(p - a) < 0.0) return false;
    }
    return true;
  }
};

struct Workspace {
  double width = 0.0;
  double height = 0.0;
  std::vector<ConvexObstacle> obstacles;

  Workspace() = default;
  Workspace(double w, double h, std::vector<ConvexObstacle> obs = {})
      : width(w), height(h), obstacles(std::move(obs)) {
    validate();
  }

  void validate() const {
    if (!(width > 0.0) || !(height > 0.0))
      throw std::invalid_argument("workspace dimensions must be positive");
    for (const auto& o : obstacles) {
      o.validate();
      for (const auto& v : o.vertices)
        if (v.x < 0.0 || v.x > width || v.y < 0.0 || v.y > height)
          throw std::invalid_argument("obstacle vertex outside workspace");
    }
  }

  /// Distance to the workspace boundary, negative outside the rectangle.
  double boundary_clearance(const Point2& p) const {
    return std::min(std::min(p.x, width - p.x), std::min(p.y, height - p.y));
  }

  bool inside(const Point2& p) const { return boundary_clearance(p) >= 0.0; }
};

inline double point_segment_distance(const Point2& p, const Point2& a, const Point2& b) {
  const Point2 ab = b - a;
  const double len2 = ab.squared_norm();
  if (len2 <= kGeomEps * kGeomEps) return distance(p, a);
  double t = (p - a).dot(ab) / len2;
  t = std::clamp(t, 0.0, 1.0);
  return distance(p, a + ab * t);
}

inline Point2 closest_point_on_segment(const Point2& p, const Point2& a, const Point2& b) {
  const Point2 ab = b - a;
  const double len2 = ab.squared_norm();
  if (len2 <= kGeomEps * kGeomEps) return a;
  double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return a + ab * t;
}

/// Proper or touching intersection test for segments [a,b] and [c,d].
inline bool segments_intersect(const Point2& a, const Point2& b, const Point2& c,
                               const Point2& d) {
  const auto orient = [](const Point2& p, const Point2& q, const Point2& r) {
    const double v = (q - p).cross(r - p);
    if (v > kGeomEps) return 1;
    if (v < -kGeomEps) return -1;
    return 0;
  };
  const int o1 = orient(a, b, c), o2 = orient(a, b, d);
  const int o3 = orient(c, d, a), o4 = orient(c, d, b);
  if (o1 != o2 && o3 != o4 && o1 != 0 && o2 != 0 && o3 != 0 && o4 != 0) return true;
  const auto on_segment = [](const Point2& p, const Point2& q, const Point2& r) {
    return point_segment_distance(q, p, r) <= kGeomEps;
  };
  if (o1 == 0 && on_segment(a, c, b)) return true;
  if (o2 == 0 && on_segment(a, d, b)) return true;
  if (o3 == 0 && on_segment(c, a, d)) return true;
  if (o4 == 0 && on_segment(c, b, d)) return true;
  return false;
}

struct ClosestPair {
  Point2 on_a;
  Point2 on_b;
  double dist = std::numeric_limits<double>::infinity();
};

inline ClosestPair segment_segment_closest(const Point2& a, const Point2& b,
                                           const Point2& c, const Point2& d) {
  if (segments_intersect(a, b, c, d)) {
    // any common point will do; use the crossing of the supporting lines when
    // it exists, otherwise an overlapping endpoint
    const Point2 r = b - a, s = d - c;
    const double denom = r.cross(s);
    if (std::abs(denom) > kGeomEps) {
      const double t = (c - a).cross(s) / denom;
      const Point2 x = a + r * t;
      return {x, x, 0.0};
    }
    for (const Point2& q : {c, d})
      if (point_segment_distance(q, a, b) <= kGeomEps) return {q, q, 0.0};
    for (const Point2& q : {a, b})
      if (point_segment_distance(q, c, d) <= kGeomEps) return {q, q, 0.0};
    return {a, a, 0.0};
  }
  ClosestPair best;
  const auto consider = [&best](const Point2& p, const Point2& q) {
    const double d2 = distance(p, q);
    if (d2 < best.dist) best = {p, q, d2};
  };
  consider(a, closest_point_on_segment(a, c, d));
  consider(b, closest_point_on_segment(b, c, d));
  consider(closest_point_on_segment(c, a, b), c);
  consider(closest_point_on_segment(d, a, b), d);
  return best;
}

/// Signed distance from a point to a convex obstacle: positive outside,
/// negative inside, zero on the boundary. Inside values are the (negated)
/// minimum over half-plane distances, which is exact for convex polygons.
inline double signed_distance(const Point2& p, const ConvexObstacle& o) {
  const std::size_t n = o.vertices.size();
  double min_halfplane = std::numeric_limits<double>::infinity();
  bool inside = true;
  for (std::size_t i = 0; i < n; ++i) {
    const Point2& a = o.vertices[i];
    const Point2& b = o.vertices[(i + 1) % n];
    const Point2 e = b - a;
    const double d = e.cross(p - a) / e.norm();  // >= 0 when left of edge
    if (d < 0.0) inside = false;
    min_halfplane = std::min(min_halfplane, d);
  }
  if (inside) return -min_halfplane;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i)
    best = std::min(best, point_segment_distance(p, o.vertices[i], o.vertices[(i + 1) % n]));
  return best;
}

/// Minimum clearance over all obstacles and the workspace boundary.
inline double min_clearance(const Point2& p, const Workspace& w) {
  double c = w.boundary_clearance(p);
  for (const auto& o : w.obstacles) c = std::min(c, signed_distance(p, o));
  return c;
}

/// Distance between segment [a,b] and a convex polygon; zero when they
/// intersect or the segment lies inside.
inline double segment_polygon_distance(const Point2& a, const Point2& b,
                                       const ConvexObstacle& o) {
  if (o.contains(a) || o.contains(b)) return 0.0;
  const std::size_t n = o.vertices.size();
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    const Point2& c = o.vertices[i];
    const Point2& d = o.vertices[(i + 1) % n];
    if (segments_intersect(a, b, c, d)) return 0.0;
    best = std::min(best, segment_segment_closest(a, b, c, d).dist);
  }
  return best;
}

/// True iff the open clipped overlap of the segment with the polygon interior
/// has positive length, i.e. the segment actually enters the interior
/// (touching the boundary or sliding along an edge does not count).
inline bool segment_penetrates_polygon(const Point2& a, const Point2& b,
                                       const ConvexObstacle& o) {
  double t0 = 0.0, t1 = 1.0;
  const std::size_t n = o.vertices.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Point2& v = o.vertices[i];
    const Point2 e = o.vertices[(i + 1) % n] - v;
    const double fa = e.cross(a - v);
    const double fb = e.cross(b - v);
    const double df = fb - fa;
    if (std::abs(df) < 1e-300) {
      if (fa < 0.0) return false;  // entirely outside this half-plane
      continue;
    }
    const double t = -fa / df;
    if (df > 0.0) t0 = std::max(t0, t); else t1 = std::min(t1, t);
    if (t0 >= t1) return false;
  }
  if (t1 - t0 <= 1e-12) return false;
  return signed_distance(a + (b - a) * (0.5 * (t0 + t1)), o) < 0.0;
}

/// True iff any point of segment [a,b] has clearance strictly below margin.
/// Exact: uses closed-form segment-polygon distances, not sampling.
inline bool segment_collides(const Point2& a, const Point2& b, const Workspace& w,
                             double margin) {
  if (std::min(w.boundary_clearance(a), w.boundary_clearance(b)) < margin) return true;
  for (const auto& o : w.obstacles) {
    if (segment_penetrates_polygon(a, b, o)) return true;
    if (segment_polygon_distance(a, b, o) < margin) return true;
  }
  return false;
}

/// Convex hull (monotone chain); collinear points are dropped. Works for any
/// point count; outputs 1, 2, or >=3 CCW points.
inline std::vector<Point2> convex_hull(std::vector<Point2> pts) {
  std::sort(pts.begin(), pts.end(), [](const Point2& a, const Point2& b) {
    return a.x < b.x || (a.x == b.x && a.y < b.y);
  });
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [](const Point2& a, const Point2& b) {
                          return distance(a, b) <= kGeomEps;
                        }),
            pts.end());
  const std::size_t n = pts.size();
  if (n <= 2) return pts;
  std::vector<Point2> hull(2 * n);
  std::size_t k = 0;
  for (std::size_t i = 0; i < n; ++i) {
    while (k >= 2 && (hull[k - 1] - hull[k - 2]).cross(pts[i] - hull[k - 2]) <= kGeomEps)
      --k;
    hull[k++] = pts[i];
  }
  for (std::size_t i = n - 1, t = k + 1; i-- > 0;) {
    while (k >= t && (hull[k - 1] - hull[k - 2]).cross(pts[i] - hull[k - 2]) <= kGeomEps)
      --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

inline bool point_in_convex_points(const Point2& p, const std::vector<Point2>& hull) {
  if (hull.size() < 3) return false;
  for (std::size_t i = 0; i < hull.size(); ++i) {
    const Point2& a = hull[i];
    const Point2& b = hull[(i + 1) % hull.size()];
    if ((b - a).cross(p - a) < -kGeomEps) return false;
  }
  return true;
}

/// Distance between two convex point sets (degenerate hulls allowed).
/// Zero when the sets intersect or one contains the other.
inline double convex_sets_distance(const std::vector<Point2>& pa,
                                   const std::vector<Point2>& pb) {
  const std::vector<Point2> a = convex_hull(pa);
  const std::vector<Point2> b = convex_hull(pb);
  if (a.empty() || b.empty()) return std::numeric_limits<double>::infinity();
  for (const auto& p : a)
    if (point_in_convex_points(p, b)) return 0.0;
  for (const auto& p : b)
    if (point_in_convex_points(p, a)) return 0.0;
  const auto edges = [](const std::vector<Point2>& h) {
    std::vector<std::pair<Point2, Point2>> es;
    if (h.size() == 1) {
      es.emplace_back(h[0], h[0]);
    } else {
      for (std::size_t i = 0; i < h.size(); ++i)
        es.emplace_back(h[i], h[(i + 1) % h.size()]);
      if (h.size() == 2) es.resize(1);
    }
    return es;
  };
  double best = std::numeric_limits<double>::infinity();
  for (const auto& [a0, a1] : edges(a))
    for (const auto& [b0, b1] : edges(b)) {
      best = std::min(best, segment_segment_closest(a0, a1, b0, b1).dist);
      if (best == 0.0) return 0.0;
    }
  return best;
}

}  // namespace dlo

#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "dlo/geom.hpp"
#include "dlo/passage.hpp"
#include "dlo/path.hpp"
#include "dlo/util.hpp"

namespace dlo {

/// Ordered chain of 2D keypoints describing the cable state.
struct DLOShape {
  std::vector<Point2> keypoints;

  DLOShape() = default;
  explicit DLOShape(std::vector<Point2> kps) : keypoints(std::move(kps)) {}

  std::size_t n() const { return keypoints.size(); }

  Point2 centroid() const {
    Point2 c{0, 0};
    for (const auto& p : keypoints) c += p;
    return c / static_cast<double>(keypoints.size());
  }

  double chord_length() const {
    double total = 0.0;
    for (std::size_t i = 1; i < keypoints.size(); ++i)
      total += distance(keypoints[i - 1], keypoints[i]);
    return total;
  }
};

/// Sanity check: at least 3 keypoints and consecutive spacing within
/// [0.2, 2.0] x the nominal segment length.
inline void validate_shape(const DLOShape& s, double nominal_segment,
                           const std::string& name = "shape") {
  if (s.n() < 3) throw std::invalid_argument(name + ": needs at least 3 keypoints");
  for (const auto& p : s.keypoints)
    if (!p.finite()) throw std::invalid_argument(name + ": keypoint not finite");
  for (std::size_t i = 1; i < s.n(); ++i) {
    const double d = distance(s.keypoints[i - 1], s.keypoints[i]);
    if (d < 0.2 * nominal_segment || d > 2.0 * nominal_segment)
      throw std::invalid_argument(name + ": keypoint spacing outside sanity band at index " +
                                  std::to_string(i));
  }
}

/// One waypoint path per keypoint; all paths share the waypoint count.
struct PathSet {
  std::vector<Path> paths;
  std::size_t pivot_index = 0;
};

struct PathSetParams {
  double gamma = 0.2;        // shape scale factor used during transfer
  double alpha = 0.7;        // stretch fraction bounding passage spread
  std::size_t resample_count = 60;
};

inline std::size_t default_pivot_index(std::size_t n) { return n / 2; }

/// Linear-interpolation transfer of the pivot path to keypoint i: the start
/// offset morphs into the goal offset linearly in the path parameter.
inline Path transfer_linear(const Path& pivot, const DLOShape& start, const DLOShape& goal,
                            std::size_t i, std::size_t pivot_index) {
  const Point2 ds = start.keypoints[i] - start.keypoints[pivot_index];
  const Point2 dg = goal.keypoints[i] - goal.keypoints[pivot_index];
  std::vector<Point2> wps(pivot.waypoints.size());
  for (std::size_t j = 0; j < pivot.waypoints.size(); ++j) {
    const double s = pivot.sigma[j];
    wps[j] = pivot.waypoints[j] + ds + (dg - ds) * s;
  }
  return Path(std::move(wps), pivot.sigma);
}

inline Path transfer_linear(const Path& pivot, const DLOShape& start, const DLOShape& goal,
                            std::size_t i) {
  return transfer_linear(pivot, start, goal, i, default_pivot_index(start.n()));
}

/// Uniform scaling of a shape about a pivot point.
inline DLOShape scale_shape(const DLOShape& s, const Point2& pivot, double gamma) {
  if (!(gamma > 0.0) || gamma > 1.0)
    throw std::invalid_argument("scale factor must be in (0, 1]");
  DLOShape out;
  out.keypoints.reserve(s.n());
  for (const auto& p : s.keypoints) out.keypoints.push_back(pivot + (p - pivot) * gamma);
  return out;
}

/// First meeting point of each keypoint path with the passage segment,
/// ordered by keypoint index. Touching counts as a crossing. Fails naming the
/// keypoint whose path misses the passage (gamma too large).
inline Expected<std::vector<Point2>> passage_intersections(const PathSet& ps,
                                                           const Passage& passage) {
  std::vector<Point2> out;
  out.reserve(ps.paths.size());
  for (std::size_t i = 0; i < ps.paths.size(); ++i) {
    const Path& p = ps.paths[i];
    bool found = false;
    for (std::size_t e = 0; e + 1 < p.waypoints.size() && !found; ++e) {
      const Point2& a = p.waypoints[e];
      const Point2& b = p.waypoints[e + 1];
      if (auto t = segment_crossing_param(a, b, passage.endpoint_a, passage.endpoint_b)) {
        out.push_back(a + (b - a) * (*t));
        found = true;
      } else if (segments_intersect(a, b, passage.endpoint_a, passage.endpoint_b)) {
        out.push_back(segment_segment_closest(a, b, passage.endpoint_a, passage.endpoint_b).on_a);
        found = true;
      }
    }
    if (!found)
      return Expected<std::vector<Point2>>::fail(
          "keypoint " + std::to_string(i) + " path does not cross the passage");
  }
  return Expected<std::vector<Point2>>::ok(std::move(out));
}

/// Re-centers points at the passage midpoint and rescales them linearly along
/// the passage so the extreme spacing equals min(passage width, alpha * L).
/// Coincident points stay at the center.
inline std::vector<Point2> redistribute(const std::vector<Point2>& points,
                                        const Passage& passage, double alpha,
                                        double cable_len) {
  const Point2 dir = passage.direction();
  const double p_w = std::min(passage.width, alpha * cable_len);
  std::vector<double> t(points.size());
  for (std::size_t i = 0; i < points.size(); ++i)
    t[i] = (points[i] - passage.endpoint_a).dot(dir);
  const auto [tmin_it, tmax_it] = std::minmax_element(t.begin(), t.end());
  const double tmin = *tmin_it, tmax = *tmax_it;
  const double spread = tmax - tmin;
  const double mid = passage.width * 0.5;
  std::vector<Point2> out(points.size());
  if (spread <= kGeomEps) {
    for (auto& p : out) p = passage.endpoint_a + dir * mid;
  } else {
    const double scale = p_w / spread;
    const double center = 0.5 * (tmin + tmax);
    for (std::size_t i = 0; i < points.size(); ++i)
      out[i] = passage.endpoint_a + dir * (mid + (t[i] - center) * scale);
  }
  return out;
}

struct QuadFailure {
  std::size_t keypoint = 0;  // pair (keypoint, keypoint+1)
  std::size_t waypoint = 0;  // waypoint interval [waypoint, waypoint+1]
  int obstacle = -1;
};

struct PathSetReport {
  std::vector<bool> path_collision_free;
  std::vector<QuadFailure> homotopy_failures;
  std::vector<int> order_reversed_passages;  // informational, not a failure
  bool collision_ok = false;
  bool homotopy_ok = false;
  bool all_pass() const { return collision_ok && homotopy_ok; }
};

/// Collision report plus homotopy proxy: for each adjacent keypoint pair and
/// each waypoint interval, the swept quadrilateral must not intersect any
/// obstacle, which certifies the continuous deformation between adjacent
/// paths is obstacle-free.
inline PathSetReport validate_path_set(const PathSet& ps, const Workspace& w,
                                       double margin = 0.0) {
  PathSetReport report;
  report.collision_ok = true;
  report.homotopy_ok = true;
  report.path_collision_free.resize(ps.paths.size(), true);
  for (std::size_t i = 0; i < ps.paths.size(); ++i) {
    const auto& wp = ps.paths[i].waypoints;
    for (std::size_t j = 0; j + 1 < wp.size(); ++j)
      if (segment_collides(wp[j], wp[j + 1], w, margin)) {
        report.path_collision_free[i] = false;
        report.collision_ok = false;
        break;
      }
  }
  for (std::size_t i = 0; i + 1 < ps.paths.size(); ++i) {
    const auto& pa = ps.paths[i].waypoints;
    const auto& pb = ps.paths[i + 1].waypoints;
    const std::size_t m = std::min(pa.size(), pb.size());
    for (std::size_t j = 0; j + 1 < m; ++j) {
      const std::vector<Point2> quad{pa[j], pb[j], pb[j + 1], pa[j + 1]};
      for (int o = 0; o < static_cast<int>(w.obstacles.size()); ++o) {
        if (convex_sets_distance(quad, w.obstacles[o].vertices) <= 0.0) {
          report.homotopy_failures.push_back({i, j, o});
          report.homotopy_ok = false;
        }
      }
    }
  }
  return report;
}

namespace detail {

struct AnchorStage {
  std::vector<Point2> points;  // one per keypoint
  double sigma = 0.0;          // pivot parameter of this stage
};

/// Builds per-keypoint polylines through the anchor stages by leg-local
/// linear-interpolation transfer of the pivot path.
inline std::vector<Path> connect_stages(const Path& pivot,
                                        const std::vector<AnchorStage>& stages,
                                        std::size_t n, std::size_t resample_count) {
  // allocate resample points per leg proportional to pivot leg length
  const std::size_t legs = stages.size() - 1;
  std::vector<double> leg_len(legs);
  double total = 0.0;
  for (std::size_t j = 0; j < legs; ++j) {
    double len = 0.0;
    Point2 prev = pivot.point_at(stages[j].sigma);
    for (std::size_t k = 0; k < pivot.size(); ++k) {
      if (pivot.sigma[k] > stages[j].sigma && pivot.sigma[k] < stages[j + 1].sigma) {
        len += distance(prev, pivot.waypoints[k]);
        prev = pivot.waypoints[k];
      }
    }
    len += distance(prev, pivot.point_at(stages[j + 1].sigma));
    leg_len[j] = std::max(len, kGeomEps);
    total += leg_len[j];
  }
  // segment budget: resample_count waypoints total with anchors shared
  const std::size_t budget = std::max(resample_count - 1, legs);
  std::vector<std::size_t> seg(legs, 1);
  std::size_t assigned = legs;
  for (std::size_t j = 0; j < legs; ++j) {
    const std::size_t extra = static_cast<std::size_t>(
        std::floor((leg_len[j] / total) * static_cast<double>(budget - legs)));
    seg[j] += extra;
    assigned += extra;
  }
  const std::size_t longest = static_cast<std::size_t>(
      std::max_element(leg_len.begin(), leg_len.end()) - leg_len.begin());
  seg[longest] += budget - assigned;

  std::vector<Path> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<Point2> raw;
    for (std::size_t j = 0; j < legs; ++j) {
      const double s0 = stages[j].sigma, s1 = stages[j + 1].sigma;
      const Point2 d0 = stages[j].points[i] - pivot.point_at(s0);
      const Point2 d1 = stages[j + 1].points[i] - pivot.point_at(s1);
      // leg polyline in pivot parameters
      std::vector<double> sig{s0};
      for (std::size_t k = 0; k < pivot.size(); ++k)
        if (pivot.sigma[k] > s0 && pivot.sigma[k] < s1) sig.push_back(pivot.sigma[k]);
      sig.push_back(s1);
      std::vector<Point2> leg;
      leg.reserve(sig.size());
      for (double s : sig) {
        const double u = (s - s0) / (s1 - s0);
        leg.push_back(pivot.point_at(s) + d0 + (d1 - d0) * u);
      }
      Path leg_path = Path::from_waypoints(std::move(leg)).resample(seg[j] + 1);
      const std::size_t from = (j == 0) ? 0 : 1;  // avoid duplicating anchors
      for (std::size_t k = from; k < leg_path.waypoints.size(); ++k)
        raw.push_back(leg_path.waypoints[k]);
    }
    out.push_back(Path::from_waypoints(std::move(raw)));
  }
  return out;
}

}  // namespace detail

/// Passage-assisted homotopic path set generation: (1) find passages the
/// pivot path traverses, (2) transfer the pivot with gamma-scaled shapes and
/// collect per-passage intersections, (3) redistribute intersections along
/// each passage, (4) reconnect stages with leg-local linear transfer and
/// resample. Retries with halved gamma when a generated path collides.
inline Expected<PathSet> generate_path_set(const Path& pivot, const DLOShape& start,
                                           const DLOShape& goal, const PassageSet& passages,
                                           const Workspace& w, const PathSetParams& params,
                                           double collision_margin = 0.0) {
  const std::size_t n = start.n();
  if (goal.n() != n) return Expected<PathSet>::fail("start/goal keypoint counts differ");
  const std::size_t pivot_idx = default_pivot_index(n);
  const double cable_len = start.chord_length();

  const std::vector<PassageCrossing> crossings = traversed_passages(pivot, passages);

  std::string last_error = "path set generation failed";
  double gamma = params.gamma;
  for (int attempt = 0; attempt < 4; ++attempt, gamma *= 0.5) {
    // step 2: transfer with scaled shapes
    const DLOShape s_start = scale_shape(start, start.keypoints[pivot_idx], gamma);
    const DLOShape s_goal = scale_shape(goal, goal.keypoints[pivot_idx], gamma);
    PathSet raw;
    raw.pivot_index = pivot_idx;
    for (std::size_t i = 0; i < n; ++i)
      raw.paths.push_back(transfer_linear(pivot, s_start, s_goal, i, pivot_idx));

    // steps 2-3: per traversed passage, intersections then redistribution
    std::vector<detail::AnchorStage> stages;
    stages.push_back({start.keypoints, 0.0});
    bool failed = false;
    for (const auto& c : crossings) {
      if (c.sigma <= stages.back().sigma + 1e-9) continue;  // repeated crossing
      if (c.sigma >= 1.0 - 1e-9) continue;
      const Passage& p = passages.passages[c.passage_id];
      auto inter = passage_intersections(raw, p);
      if (!inter) {
        last_error = inter.error();
        failed = true;
        break;
      }
      stages.push_back({redistribute(inter.value(), p, params.alpha, cable_len), c.sigma});
    }
    if (failed) continue;
    stages.push_back({goal.keypoints, 1.0});

    // step 4: reconnect and resample
    PathSet out;
    out.pivot_index = pivot_idx;
    out.paths = detail::connect_stages(pivot, stages, n, params.resample_count);

    bool collision = false;
    for (const auto& path : out.paths) {
      for (std::size_t j = 0; j + 1 < path.waypoints.size() && !collision; ++j)
        if (segment_collides(path.waypoints[j], path.waypoints[j + 1], w, collision_margin))
          collision = true;
      if (collision) break;
    }
    if (collision) {
      last_error = "generated path collides (gamma " + std::to_string(gamma) + ")";
      continue;
    }
    return Expected<PathSet>::ok(std::move(out));
  }
  return Expected<PathSet>::fail(last_error);
}

}  // namespace dlo

#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "dlo/geom.hpp"
#include "dlo/path.hpp"

namespace dlo {

struct PivotCostWeights {
  double k_len = 1.0;
  double k_clear = 1.0;
};

struct PlannerConfig {
  int max_iterations = 5000;
  double step_size = 0.05;
  double goal_bias = 0.1;
  double rewire_radius = 0.15;
  std::uint64_t rng_seed = 0;
  double collision_margin = 0.01;
};

/// Clearance is clamped below at this value when integrating 1/clearance.
inline constexpr double kClearanceClamp = 1e-3;

/// Edge cost: k_len * length + k_clear * integral of 1/clearance along the
/// edge (trapezoidal rule, sample spacing given in meters). Non-positive
/// clearance anywhere on the samples makes the edge cost infinite.
inline double edge_cost(const Point2& a, const Point2& b, const Workspace& w,
                        const PivotCostWeights& weights, double sample_spacing = 0.005) {
  const double len = distance(a, b);
  double cost = weights.k_len * len;
  if (weights.k_clear > 0.0 && len > 0.0) {
    const int ns = std::max(1, static_cast<int>(std::ceil(len / sample_spacing)));
    const double h = len / ns;
    double integral = 0.0;
    double prev = 0.0;
    for (int i = 0; i <= ns; ++i) {
      const double t = static_cast<double>(i) / ns;
      const double c = min_clearance(a + (b - a) * t, w);
      if (c <= 0.0) return std::numeric_limits<double>::infinity();
      const double f = 1.0 / std::max(c, kClearanceClamp);
      if (i > 0) integral += 0.5 * h * (prev + f);
      prev = f;
    }
    cost += weights.k_clear * integral;
  }
  return cost;
}

/// Sum of edge costs over consecutive waypoints.
inline double path_cost(const Path& p, const Workspace& w, const PivotCostWeights& weights,
                        double sample_spacing = 0.005) {
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < p.waypoints.size(); ++i)
    total += edge_cost(p.waypoints[i], p.waypoints[i + 1], w, weights, sample_spacing);
  return total;
}

struct PlanResult {
  bool success = false;
  Path path;
  double cost = std::numeric_limits<double>::infinity();
  std::vector<double> best_cost_trace;  // best goal cost after each iteration
  int iterations = 0;
  std::string error;
};

namespace detail {

struct RrtNode {
  Point2 pos;
  int parent = -1;
  double cost = 0.0;            // cost-to-come
  double edge_to_parent = 0.0;  // cached metric of the parent edge
};

}  // namespace detail

/// Clearance-aware optimal pivot planning: RRT* with the length+clearance
/// edge metric, followed by a shortcut pass that only accepts shortcuts that
/// do not increase the metric. Deterministic given cfg.rng_seed.
inline PlanResult plan_pivot(const Point2& start, const Point2& goal, const Workspace& w,
                             const PivotCostWeights& weights, const PlannerConfig& cfg) {
  PlanResult result;
  const double margin = cfg.collision_margin;
  const double spacing = cfg.step_size / 10.0;
  if (min_clearance(start, w) < margin) {
    result.error = "start is in collision";
    return result;
  }
  if (min_clearance(goal, w) < margin) {
    result.error = "goal is in collision";
    return result;
  }

  std::mt19937_64 rng(cfg.rng_seed);
  std::uniform_real_distribution<double> ux(0.0, w.width);
  std::uniform_real_distribution<double> uy(0.0, w.height);
  std::uniform_real_distribution<double> u01(0.0, 1.0);

  std::vector<detail::RrtNode> nodes;
  std::vector<std::vector<int>> children;
  nodes.push_back({start, -1, 0.0, 0.0});
  children.emplace_back();
  int goal_node = -1;  // index of goal once connected

  const auto try_edge = [&](const Point2& a, const Point2& b) -> double {
    if (segment_collides(a, b, w, margin)) return std::numeric_limits<double>::infinity();
    return edge_cost(a, b, w, weights, spacing);
  };

  // propagates a cost change at node i to its whole subtree
  const auto propagate = [&](int i) {
    std::vector<int> stack{i};
    while (!stack.empty()) {
      const int j = stack.back();
      stack.pop_back();
      for (int c : children[j]) {
        nodes[c].cost = nodes[j].cost + nodes[c].edge_to_parent;
        stack.push_back(c);
      }
    }
  };

  const auto set_parent = [&](int i, int parent, double ec) {
    if (nodes[i].parent >= 0) {
      auto& sib = children[nodes[i].parent];
      sib.erase(std::find(sib.begin(), sib.end(), i));
    }
    nodes[i].parent = parent;
    nodes[i].edge_to_parent = ec;
    nodes[i].cost = nodes[parent].cost + ec;
    children[parent].push_back(i);
    propagate(i);
  };

  for (int it = 0; it < cfg.max_iterations; ++it) {
    const bool sample_goal = u01(rng) < cfg.goal_bias;
    const Point2 sample = sample_goal ? goal : Point2{ux(rng), uy(rng)};

    const auto record_trace = [&] {
      result.best_cost_trace.push_back(
          goal_node >= 0 ? nodes[goal_node].cost : std::numeric_limits<double>::infinity());
    };

    // nearest node by Euclidean distance, first index wins ties
    int nearest = 0;
    double nearest_d = std::numeric_limits<double>::infinity();
    for (int i = 0; i < static_cast<int>(nodes.size()); ++i) {
      if (i == goal_node) continue;
      const double d = distance(nodes[i].pos, sample);
      if (d < nearest_d) { nearest_d = d; nearest = i; }
    }

    Point2 candidate = sample;
    if (nearest_d > cfg.step_size)
      candidate = nodes[nearest].pos + (sample - nodes[nearest].pos) * (cfg.step_size / nearest_d);
    if (min_clearance(candidate, w) < margin) { record_trace(); continue; }

    // choose the lowest-cost parent among neighbors within the rewire radius
    std::vector<int> neighbors;
    for (int i = 0; i < static_cast<int>(nodes.size()); ++i) {
      if (i == goal_node) continue;
      if (distance(nodes[i].pos, candidate) <= cfg.rewire_radius) neighbors.push_back(i);
    }
    if (neighbors.empty()) neighbors.push_back(nearest);

    int best_parent = -1;
    double best_cost = std::numeric_limits<double>::infinity();
    double best_edge = 0.0;
    for (int i : neighbors) {
      const double ec = try_edge(nodes[i].pos, candidate);
      const double c = nodes[i].cost + ec;
      if (c < best_cost) { best_cost = c; best_parent = i; best_edge = ec; }
    }
    if (best_parent < 0 || !std::isfinite(best_cost)) { record_trace(); continue; }

    const int new_idx = static_cast<int>(nodes.size());
    nodes.push_back({candidate, best_parent, best_cost, best_edge});
    children.emplace_back();
    children[best_parent].push_back(new_idx);

    // rewire neighbors through the new node when cheaper
    for (int i : neighbors) {
      if (i == best_parent) continue;
      const double ec = try_edge(candidate, nodes[i].pos);
      if (best_cost + ec + 1e-12 < nodes[i].cost) set_parent(i, new_idx, ec);
    }

    // try to connect the new node to the goal
    if (distance(candidate, goal) <= cfg.step_size) {
      const double ec = try_edge(candidate, goal);
      if (std::isfinite(ec)) {
        if (goal_node < 0) {
          goal_node = static_cast<int>(nodes.size());
          nodes.push_back({goal, new_idx, best_cost + ec, ec});
          children.emplace_back();
          children[new_idx].push_back(goal_node);
        } else if (best_cost + ec + 1e-12 < nodes[goal_node].cost) {
          set_parent(goal_node, new_idx, ec);
        }
      }
    }
    record_trace();
  }

  if (goal_node < 0) {
    result.error = "no path found within max_iterations";
    result.iterations = cfg.max_iterations;
    return result;
  }

  // costs of ancestors may have improved after rewiring; recompute chain cost
  std::vector<Point2> wps;
  for (int i = goal_node; i >= 0; i = nodes[i].parent) wps.push_back(nodes[i].pos);
  std::reverse(wps.begin(), wps.end());

  // shortcut pass: accept only shortcuts that keep the metric from rising
  bool improved = true;
  int passes = 0;
  while (improved && passes < 8) {
    improved = false;
    ++passes;
    for (std::size_t i = 0; i + 2 < wps.size();) {
      const double old_cost = edge_cost(wps[i], wps[i + 1], w, weights, spacing) +
                              edge_cost(wps[i + 1], wps[i + 2], w, weights, spacing);
      const double new_cost = try_edge(wps[i], wps[i + 2]);
      if (new_cost <= old_cost + 1e-12) {
        wps.erase(wps.begin() + static_cast<std::ptrdiff_t>(i) + 1);
        improved = true;
      } else {
        ++i;
      }
    }
  }

  result.success = true;
  result.path = Path::from_waypoints(std::move(wps));
  result.cost = path_cost(result.path, w, weights, spacing);
  result.iterations = cfg.max_iterations;
  return result;
}

}  // namespace dlo

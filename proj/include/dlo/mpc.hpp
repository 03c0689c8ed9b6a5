#pragma once

#include <Eigen/Dense>
#include <chrono>
#include <string>
#include <vector>

#include "dlo/deform_opt.hpp"
#include "dlo/model.hpp"
#include "dlo/sim.hpp"

namespace dlo {

struct MPCConfig {
  int horizon = 5;
  int max_iterations = 15;
  double lambda1 = 150.0;  // tracking weight
  double lambda2 = 0.01;   // obstacle weight
  double lambda3 = 1.0;    // control weight
  double d = 0.005;        // obstacle activation distance (m)
  Eigen::VectorXd q_diag;  // per-keypoint tracking weights (default ones)
  Eigen::Matrix<double, 6, 1> r_diag = Eigen::Matrix<double, 6, 1>::Ones();
  ActionBounds bounds = ActionBounds::symmetric();
  double step_size = 1e-3;       // initial gradient step on actions
  double advance_threshold = 0.01;
  double stop_tolerance = 0.01;  // terminal mean keypoint error
  int step_cap = 600;

  void validate(int n) const {
    if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
    if (!(d > 0.0)) throw std::invalid_argument("activation distance must be positive");
    if (lambda1 < 0 || lambda2 < 0 || lambda3 < 0)
      throw std::invalid_argument("cost weights must be non-negative");
    if (q_diag.size() != 0 && q_diag.size() != n)
      throw std::invalid_argument("q_diag must have one entry per keypoint");
    for (int i = 0; i < 6; ++i)
      if (!(bounds.min[i] < bounds.max[i]))
        throw std::invalid_argument("action bounds must satisfy a_min < a_max");
  }
  Eigen::VectorXd q_or_default(int n) const {
    return q_diag.size() == n ? q_diag : Eigen::VectorXd::Ones(n);
  }
};

/// Clearance and its spatial gradient at a point (direction of increasing
/// clearance, from the closest obstacle or wall).
inline std::pair<double, Point2> clearance_with_grad(const Point2& p, const Workspace& w) {
  double best = p.x;
  Point2 grad{1.0, 0.0};
  if (w.width - p.x < best) { best = w.width - p.x; grad = {-1.0, 0.0}; }
  if (p.y < best) { best = p.y; grad = {0.0, 1.0}; }
  if (w.height - p.y < best) { best = w.height - p.y; grad = {0.0, -1.0}; }
  for (const auto& o : w.obstacles) {
    const double sd = signed_distance(p, o);
    if (sd >= best) continue;
    best = sd;
    if (sd > 0.0) {
      // outside: direction away from closest boundary point
      double dmin = std::numeric_limits<double>::infinity();
      Point2 cp;
      const std::size_t n = o.vertices.size();
      for (std::size_t i = 0; i < n; ++i) {
        const Point2 q = closest_point_on_segment(p, o.vertices[i], o.vertices[(i + 1) % n]);
        const double dq = distance(p, q);
        if (dq < dmin) { dmin = dq; cp = q; }
      }
      grad = dmin > 1e-12 ? (p - cp) / dmin : Point2{0.0, 0.0};
    } else {
      // inside: signed distance increases toward the nearest edge
      const std::size_t n = o.vertices.size();
      double dmin = std::numeric_limits<double>::infinity();
      Point2 inward{0, 0};
      for (std::size_t i = 0; i < n; ++i) {
        const Point2 a = o.vertices[i];
        const Point2 e = o.vertices[(i + 1) % n] - a;
        const Point2 nin = e.perp().normalized();
        const double di = (p - a).dot(nin);
        if (di < dmin) { dmin = di; inward = nin; }
      }
      grad = Point2{0, 0} - inward;
    }
  }
  return {best, grad};
}

/// Quadratic tracking cost (s - s_ref)^T Q (s - s_ref) / 2 with block-diagonal
/// per-keypoint weights.
inline double cost_track(const DLOShape& s, const DLOShape& s_ref, const Eigen::VectorXd& q) {
  double c = 0.0;
  for (std::size_t i = 0; i < s.n(); ++i) {
    const Point2 d = s.keypoints[i] - s_ref.keypoints[i];
    c += q[static_cast<Eigen::Index>(i)] * d.squared_norm();
  }
  return 0.5 * c;
}

inline constexpr double kPenetrationEps = 1e-4;

/// Inverse-square clearance penalty, active within distance d of an obstacle.
inline double obstacle_penalty_point(double phi, double d) {
  if (phi > d) return 0.0;
  const double pc = std::max(phi, kPenetrationEps);
  return 1.0 / (pc * pc);
}

/// Keypoint terms plus per-EEF terms, each against its closest obstacle.
inline double cost_obstacle(const DLOShape& s, const RobotConfig& y, const Workspace& w,
                            double d) {
  double c = 0.0;
  for (const auto& p : s.keypoints) c += obstacle_penalty_point(min_clearance(p, w), d);
  c += obstacle_penalty_point(min_clearance(y.left.position(), w), d);
  c += obstacle_penalty_point(min_clearance(y.right.position(), w), d);
  return c;
}

/// Control regularization a^T R a / 2 with diagonal R.
inline double cost_control(const Action& a, const Eigen::Matrix<double, 6, 1>& r_diag) {
  const auto v = a.flat();
  return 0.5 * v.dot(r_diag.cwiseProduct(v));
}

namespace detail {

/// Obstacle penalty over the rows of an on-tape position matrix, with its
/// analytic local gradient recorded for the backward pass.
inline ad::Var obstacle_cost_op(ad::Tape& t, ad::Var positions, const Workspace& w, double d) {
  const Eigen::MatrixXd& P = t.val(positions);
  double value = 0.0;
  Eigen::MatrixXd local = Eigen::MatrixXd::Zero(P.rows(), P.cols());
  for (Eigen::Index i = 0; i < P.rows(); ++i) {
    const Point2 p{P(i, 0), P(i, 1)};
    const auto [phi, g] = clearance_with_grad(p, w);
    if (phi > d) continue;
    const double pc = std::max(phi, kPenetrationEps);
    value += 1.0 / (pc * pc);
    const double slope = -2.0 / (pc * pc * pc);
    local(i, 0) = slope * g.x;
    local(i, 1) = slope * g.y;
  }
  return t.custom_scalar(positions, value, std::move(local));
}

struct MpcGraph {
  std::vector<ad::Var> action_leaves;
  ad::Var total;
  std::vector<ad::Var> shapes;  // s_0 .. s_H
};

inline MpcGraph build_mpc_graph(ad::Tape& t, const DeformationModel& model,
                                const DLOShape& s0, const RobotConfig& y0,
                                const std::vector<DLOShape>& refs, const Workspace& w,
                                const MPCConfig& cfg, const Eigen::MatrixXd& actions) {
  const int H = cfg.horizon;
  const int n = model.n();
  const Eigen::VectorXd q = cfg.q_or_default(n);
  Eigen::MatrixXd r_mat(2, 3);
  r_mat << cfg.r_diag[0], cfg.r_diag[1], cfg.r_diag[2], cfg.r_diag[3], cfg.r_diag[4],
      cfg.r_diag[5];

  Eigen::MatrixXd s0m(n, 2);
  for (int i = 0; i < n; ++i) s0m.row(i) << s0.keypoints[i].x, s0.keypoints[i].y;
  Eigen::MatrixXd y0m(2, 3);
  y0m << y0.left.x, y0.left.y, y0.left.theta, y0.right.x, y0.right.y, y0.right.theta;

  MpcGraph g;
  ad::Var s = t.constant(s0m);
  ad::Var y = t.constant(y0m);
  g.shapes.push_back(s);
  DeformationModel::Bound bound;
  ad::Var total;
  const auto ref_const = [&](int k) {
    Eigen::MatrixXd rm(n, 2);
    const DLOShape& rs = refs[static_cast<std::size_t>(k)];
    for (int i = 0; i < n; ++i) rm.row(i) << rs.keypoints[i].x, rs.keypoints[i].y;
    return t.constant(rm);
  };
  const auto track_cost = [&](ad::Var sk, int k) {
    ad::Var diff = t.sub(sk, ref_const(k));
    ad::Var sq = t.hadamard(diff, diff);
    return t.scale(t.sum_all(t.scale_rows_const(sq, q)), 0.5);
  };
  const auto add_to_total = [&](ad::Var c) { total = total.valid() ? t.add(total, c) : c; };

  for (int k = 0; k < H; ++k) {
    Eigen::MatrixXd am(2, 3);
    am << actions(k, 0), actions(k, 1), actions(k, 2), actions(k, 3), actions(k, 4),
        actions(k, 5);
    ad::Var a = t.leaf(am);
    g.action_leaves.push_back(a);

    add_to_total(t.scale(track_cost(s, k), cfg.lambda1));
    if (cfg.lambda2 > 0.0) {
      ad::Var obs = t.add(obstacle_cost_op(t, s, w, cfg.d),
                          obstacle_cost_op(t, t.slice_cols(y, 0, 2), w, cfg.d));
      add_to_total(t.scale(obs, cfg.lambda2));
    }
    ad::Var asq = t.hadamard(a, a);
    add_to_total(t.scale(t.sum_all(t.hadamard(asq, t.constant(r_mat))),
                         0.5 * cfg.lambda3));

    ad::Var ds = model.forward_on_tape(t, s, y, a, bound);
    s = t.add(s, ds);
    y = t.add(y, a);
    g.shapes.push_back(s);
  }
  // terminal objective: tracking and obstacle terms only
  add_to_total(t.scale(track_cost(s, H), cfg.lambda1));
  if (cfg.lambda2 > 0.0) {
    ad::Var obs = t.add(obstacle_cost_op(t, s, w, cfg.d),
                        obstacle_cost_op(t, t.slice_cols(y, 0, 2), w, cfg.d));
    add_to_total(t.scale(obs, cfg.lambda2));
  }
  g.total = total;
  return g;
}

}  // namespace detail

/// Open-loop rollout of the learned model (values only): H+1 predicted
/// (shape, robot) pairs; robot kinematics integrate exactly.
inline std::vector<std::pair<DLOShape, RobotConfig>> rollout(
    const DeformationModel& model, const DLOShape& s0, const RobotConfig& y0,
    const std::vector<Action>& actions) {
  std::vector<std::pair<DLOShape, RobotConfig>> out;
  out.emplace_back(s0, y0);
  DLOShape s = s0;
  RobotConfig y = y0;
  for (const Action& a : actions) {
    const Eigen::MatrixX2d ds = model.forward(s, y, a);
    for (std::size_t i = 0; i < s.n(); ++i) {
      s.keypoints[i].x += ds(static_cast<Eigen::Index>(i), 0);
      s.keypoints[i].y += ds(static_cast<Eigen::Index>(i), 1);
    }
    y.left.x += a.left.dx;
    y.left.y += a.left.dy;
    y.left.theta = wrap_angle(y.left.theta + a.left.dtheta);
    y.right.x += a.right.dx;
    y.right.y += a.right.dy;
    y.right.theta = wrap_angle(y.right.theta + a.right.dtheta);
    out.emplace_back(s, y);
  }
  return out;
}

/// Total MPC objective for a given action plan (plain evaluation, used by the
/// solver's line search and by gradient checks).
inline double mpc_total_cost(const DeformationModel& model, const DLOShape& s0,
                             const RobotConfig& y0, const std::vector<DLOShape>& refs,
                             const Workspace& w, const MPCConfig& cfg,
                             const Eigen::MatrixXd& actions) {
  ad::Tape t;
  const auto g = detail::build_mpc_graph(t, model, s0, y0, refs, w, cfg, actions);
  return t.val(g.total)(0, 0);
}

/// Gradient of the total objective with respect to the action plan, exact via
/// reverse mode through the model rollout.
inline std::pair<double, Eigen::MatrixXd> mpc_cost_grad(
    const DeformationModel& model, const DLOShape& s0, const RobotConfig& y0,
    const std::vector<DLOShape>& refs, const Workspace& w, const MPCConfig& cfg,
    const Eigen::MatrixXd& actions) {
  ad::Tape t;
  const auto g = detail::build_mpc_graph(t, model, s0, y0, refs, w, cfg, actions);
  t.backward(g.total);
  Eigen::MatrixXd grad(cfg.horizon, 6);
  for (int k = 0; k < cfg.horizon; ++k) {
    const Eigen::MatrixXd& ga = t.grad(g.action_leaves[static_cast<std::size_t>(k)]);
    grad.row(k) << ga(0, 0), ga(0, 1), ga(0, 2), ga(1, 0), ga(1, 1), ga(1, 2);
  }
  return {t.val(g.total)(0, 0), std::move(grad)};
}

struct MpcSolution {
  Action first;
  Eigen::MatrixXd plan;  // H x 6
  double cost = 0.0;
  int iterations = 0;
};

/// Projected gradient descent on the action plan with box projection onto the
/// action bounds and backtracking; the cost never rises across accepted
/// steps. Warm started from the caller's plan.
inline MpcSolution solve_mpc(const DeformationModel& model, const DLOShape& s_curr,
                             const RobotConfig& y_curr, const std::vector<DLOShape>& refs,
                             const Workspace& w, const MPCConfig& cfg,
                             const Eigen::MatrixXd& warm_start) {
  cfg.validate(model.n());
  const int H = cfg.horizon;
  const auto project = [&](Eigen::MatrixXd A) {
    for (int k = 0; k < H; ++k)
      for (int i = 0; i < 6; ++i)
        A(k, i) = std::clamp(A(k, i), cfg.bounds.min[i], cfg.bounds.max[i]);
    return A;
  };

  Eigen::MatrixXd A = project(warm_start);
  auto [cost, grad] = mpc_cost_grad(model, s_curr, y_curr, refs, w, cfg, A);
  double step = cfg.step_size;
  int it = 0;
  for (; it < cfg.max_iterations; ++it) {
    bool accepted = false;
    for (int ls = 0; ls < 12 && !accepted; ++ls, step *= 0.5) {
      const Eigen::MatrixXd An = project(A - step * grad);
      if ((An - A).cwiseAbs().maxCoeff() < 1e-14) break;
      const double cn = mpc_total_cost(model, s_curr, y_curr, refs, w, cfg, An);
      if (cn < cost) {
        A = An;
        cost = cn;
        accepted = true;
        step *= 4.0;  // net doubling after the loop's halving
      }
    }
    if (!accepted) break;
    if (it + 1 < cfg.max_iterations) {
      auto [c2, g2] = mpc_cost_grad(model, s_curr, y_curr, refs, w, cfg, A);
      cost = c2;
      grad = g2;
    }
  }

  MpcSolution sol;
  sol.plan = A;
  sol.cost = cost;
  sol.iterations = it;
  Eigen::Matrix<double, 6, 1> first;
  first << A(0, 0), A(0, 1), A(0, 2), A(0, 3), A(0, 4), A(0, 5);
  sol.first = Action::from_flat(first);
  return sol;
}

struct ReferenceSchedule {
  DeformationSequence sequence;
  int current_index = 0;
  double advance_threshold = 0.01;

  int last_index() const { return static_cast<int>(sequence.shapes.size()) - 1; }
};

inline double shape_error_inf(const DLOShape& a, const DLOShape& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.n(); ++i) {
    m = std::max(m, std::abs(a.keypoints[i].x - b.keypoints[i].x));
    m = std::max(m, std::abs(a.keypoints[i].y - b.keypoints[i].y));
  }
  return m;
}

inline double shape_error_mean(const DLOShape& a, const DLOShape& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.n(); ++i) s += distance(a.keypoints[i], b.keypoints[i]);
  return s / static_cast<double>(a.n());
}

/// Advances the reference index while the current shape is within the
/// threshold of the indexed reference, then returns H+1 reference shapes
/// clamped at the goal. The index never decreases.
inline std::vector<DLOShape> schedule_reference(ReferenceSchedule& sched,
                                                const DLOShape& s_curr, int horizon) {
  while (sched.current_index < sched.last_index() &&
         shape_error_inf(s_curr, sched.sequence.shapes[sched.current_index]) <
             sched.advance_threshold)
    ++sched.current_index;
  std::vector<DLOShape> refs;
  refs.reserve(horizon + 1);
  for (int k = 0; k <= horizon; ++k) {
    const int idx = std::min(sched.current_index + k, sched.last_index());
    refs.push_back(sched.sequence.shapes[static_cast<std::size_t>(idx)]);
  }
  return refs;
}

struct MetricsRow {
  int step = 0;
  double time_s = 0.0;
  double shape_error_m = 0.0;
  double min_clearance_m = 0.0;
  int ref_index = 0;
  int solve_iterations = 0;
  double solve_time_ms = 0.0;
};

struct TrackResult {
  std::vector<MetricsRow> rows;
  bool success = false;
  std::string failure;
  double final_error = 0.0;
  double min_clearance = std::numeric_limits<double>::infinity();
  int steps = 0;
  double total_solve_time_s = 0.0;
  std::vector<DLOShape> executed_shapes;
  std::vector<DLOShape> reference_shapes;  // the scheduled reference per step
};

inline double min_shape_clearance(const DLOShape& s, const Workspace& w) {
  double c = std::numeric_limits<double>::infinity();
  for (const auto& p : s.keypoints) c = std::min(c, min_clearance(p, w));
  return c;
}

/// Closed-loop tracking of a planned deformation sequence: schedule the
/// reference, solve the MPC, apply the first action to the simulator, repeat.
/// Aborts on collision or when the step cap is reached. Wall-clock solve time
/// is accumulated in the result but kept out of the deterministic metrics.
inline TrackResult track(DloSim& sim, const SimState& initial,
                         const DeformationSequence& sequence, const DeformationModel& model,
                         const Workspace& w, const MPCConfig& cfg) {
  cfg.validate(model.n());
  TrackResult result;
  ReferenceSchedule sched{sequence, 0, cfg.advance_threshold};
  const DLOShape& goal = sequence.shapes.back();
  SimState state = initial;
  Eigen::MatrixXd plan = Eigen::MatrixXd::Zero(cfg.horizon, 6);
  const double control_dt = 0.1;  // nominal control period for timestamps

  for (int step_i = 0; step_i < cfg.step_cap; ++step_i) {
    const double clearance = min_shape_clearance(state.shape, w);
    result.min_clearance = std::min(result.min_clearance, clearance);
    const double err_goal = shape_error_mean(state.shape, goal);
    if (clearance <= 0.0) {
      result.failure = "collision at step " + std::to_string(step_i);
      result.final_error = err_goal;
      return result;
    }
    const std::vector<DLOShape> refs = schedule_reference(sched, state.shape, cfg.horizon);
    if (sched.current_index >= sched.last_index() && err_goal < cfg.stop_tolerance) {
      result.success = true;
      result.final_error = err_goal;
      result.steps = step_i;
      return result;
    }

    const auto t0 = std::chrono::steady_clock::now();
    const MpcSolution sol = solve_mpc(model, state.shape, state.robot, refs, w, cfg, plan);
    const double solve_s = std::chrono::duration<double>(
        std::chrono::steady_clock::now() - t0).count();
    result.total_solve_time_s += solve_s;

    auto next = sim.step(state, sol.first);
    if (!next) {
      result.failure = "simulator: " + next.error();
      result.final_error = err_goal;
      return result;
    }
    state = next.value();

    MetricsRow row;
    row.step = step_i;
    row.time_s = control_dt * (step_i + 1);
    row.shape_error_m = shape_error_mean(state.shape, goal);
    row.min_clearance_m = min_shape_clearance(state.shape, w);
    row.ref_index = sched.current_index;
    row.solve_iterations = sol.iterations;
    row.solve_time_ms = 0.0;  // kept deterministic; wall time in total_solve_time_s
    result.rows.push_back(row);
    result.executed_shapes.push_back(state.shape);
    result.reference_shapes.push_back(refs.front());
    result.steps = step_i + 1;

    // receding-horizon warm start: shift the plan one step
    plan.topRows(cfg.horizon - 1) = sol.plan.bottomRows(cfg.horizon - 1);
    plan.row(cfg.horizon - 1).setZero();
    if (cfg.horizon == 1) plan.setZero();
  }
  result.failure = "step cap reached";
  result.final_error = shape_error_mean(state.shape, goal);
  return result;
}

}  // namespace dlo

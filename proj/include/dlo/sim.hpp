#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <vector>

#include "dlo/pathset.hpp"
#include "dlo/util.hpp"

namespace dlo {

struct CableParams {
  double length = 0.3;
  int num_keypoints = 13;
  double joint_stiffness = 0.02;  // Nm/rad
  double joint_damping = 0.03;    // Nms/rad
  double radius = 0.02;

  void validate() const {
    if (!(length > 0.0)) throw std::invalid_argument("cable length must be positive");
    if (num_keypoints < 3) throw std::invalid_argument("need at least 3 keypoints");
  }
  int num_links() const { return num_keypoints - 1; }
  double link_length() const { return length / num_links(); }
};

struct EefPose {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;  // yaw, wrapped to (-pi, pi]

  Point2 position() const { return {x, y}; }
};

struct RobotConfig {
  EefPose left;
  EefPose right;
};

struct EefMotion {
  double dx = 0.0;
  double dy = 0.0;
  double dtheta = 0.0;
};

struct Action {
  EefMotion left;
  EefMotion right;

  Eigen::Matrix<double, 6, 1> flat() const {
    Eigen::Matrix<double, 6, 1> v;
    v << left.dx, left.dy, left.dtheta, right.dx, right.dy, right.dtheta;
    return v;
  }
  static Action from_flat(const Eigen::Matrix<double, 6, 1>& v) {
    return {{v[0], v[1], v[2]}, {v[3], v[4], v[5]}};
  }
};

/// Componentwise action bounds in (dx, dy, dtheta) x (left, right) order.
struct ActionBounds {
  Eigen::Matrix<double, 6, 1> min;
  Eigen::Matrix<double, 6, 1> max;

  static ActionBounds symmetric(double trans = 0.01, double rot = 0.05) {
    ActionBounds b;
    b.max << trans, trans, rot, trans, trans, rot;
    b.min = -b.max;
    return b;
  }
  Eigen::Matrix<double, 6, 1> clip(const Eigen::Matrix<double, 6, 1>& a) const {
    return a.cwiseMax(min).cwiseMin(max);
  }
};

inline double wrap_angle(double a) {
  a = std::fmod(a + M_PI, 2.0 * M_PI);
  if (a <= 0.0) a += 2.0 * M_PI;
  return a - M_PI;
}

/// Rigid-link chain state. Keypoints are the joint positions implied by the
/// grasp poses and absolute link angles; the first and last link are welded
/// to the EEF frames.
struct SimState {
  DLOShape shape;
  RobotConfig robot;
  std::vector<double> link_angles;  // absolute, unwrapped
  bool converged = true;
};

/// Quasi-static articulated-chain cable simulator. Each action moves the EEF
/// grasp frames, then the chain relaxes to a bending-energy equilibrium
/// subject to the grasp constraints; the rigid links keep the chain
/// inextensible by construction.
class DloSim {
 public:
  explicit DloSim(CableParams cable) : cable_(cable) { cable_.validate(); }

  const CableParams& cable() const { return cable_; }

  /// Equilibrium chain satisfying both grasps. Fails when the grasp
  /// separation exceeds the cable length.
  Expected<SimState> init(const RobotConfig& robot, std::uint64_t seed = 0) const {
    (void)seed;  // reserved; the relaxation itself is deterministic
    const double sep = distance(robot.left.position(), robot.right.position());
    if (sep > cable_.length + 1e-12)
      return Expected<SimState>::fail("EEF separation exceeds cable length");

    SimState st;
    st.robot = robot;
    st.robot.left.theta = wrap_angle(robot.left.theta);
    st.robot.right.theta = wrap_angle(robot.right.theta);
    st.link_angles = initial_angles(st.robot);
    if (!project_to_grasp(st)) return Expected<SimState>::fail("no feasible chain for grasps");
    SimState relaxed = relax(st);
    return Expected<SimState>::ok(std::move(relaxed));
  }

  /// Applies an EEF motion and re-relaxes to equilibrium.
  Expected<SimState> step(const SimState& state, const Action& a) const {
    SimState st = state;
    st.robot.left.x += a.left.dx;
    st.robot.left.y += a.left.dy;
    st.robot.right.x += a.right.dx;
    st.robot.right.y += a.right.dy;
    const int m = cable_.num_links();
    st.link_angles[0] += a.left.dtheta;
    st.link_angles[m - 1] += a.right.dtheta;
    st.robot.left.theta = wrap_angle(st.link_angles[0]);
    st.robot.right.theta = wrap_angle(st.link_angles[m - 1]);
    const double sep = distance(st.robot.left.position(), st.robot.right.position());
    if (sep > cable_.length + 1e-12)
      return Expected<SimState>::fail("overstretch: EEF separation exceeds cable length");
    if (!project_to_grasp(st))
      return Expected<SimState>::fail("no feasible chain after action");
    return Expected<SimState>::ok(relax(st));
  }

  /// Damped projected-gradient minimization of the bending energy under the
  /// grasp constraints, until the constraint-projected gradient infinity norm
  /// drops below 1e-8 or the iteration cap. The cable damping coefficient
  /// scales the step size.
  SimState relax(const SimState& state) const {
    SimState st = state;
    const int m = cable_.num_links();
    const int f = m - 2;  // free link angles
    st.converged = true;
    if (f <= 0) {
      rebuild_shape(st);
      return st;
    }

    // step-size scale: nominal damping 0.03 maps to unit rate
    const double rate = 0.03 / std::max(cable_.joint_damping, 1e-6);
    double eta = rate / (4.0 * std::max(cable_.joint_stiffness, 1e-9));
    const double eta_max = eta * 64.0;

    double e = bending_energy(st.link_angles);
    bool ok = true;
    int it = 0;
    for (; it < kMaxRelaxIterations; ++it) {
      const Eigen::VectorXd gp = projected_gradient(st);
      if (gp.cwiseAbs().maxCoeff() < kGradTol) break;
      bool accepted = false;
      for (; eta >= 1e-14; eta *= 0.5) {
        SimState trial = st;
        for (int k = 0; k < f; ++k) trial.link_angles[k + 1] -= eta * gp[k];
        if (!project_to_grasp(trial)) continue;
        const double et = bending_energy(trial.link_angles);
        if (et <= e + 1e-15) {
          st.link_angles = trial.link_angles;
          e = et;
          accepted = true;
          eta = std::min(eta * 2.0, eta_max);
          break;
        }
      }
      if (!accepted) { ok = false; break; }
    }
    st.converged = ok && it < kMaxRelaxIterations;
    rebuild_shape(st);
    return st;
  }

  /// Infinity norm of the constraint-projected bending-energy gradient.
  double equilibrium_residual(const SimState& state) const {
    if (cable_.num_links() - 2 <= 0) return 0.0;
    return projected_gradient(state).cwiseAbs().maxCoeff();
  }

  double bending_energy(const std::vector<double>& angles) const {
    double e = 0.0;
    for (std::size_t k = 0; k + 1 < angles.size(); ++k) {
      const double d = angles[k + 1] - angles[k];
      e += 0.5 * cable_.joint_stiffness * d * d;
    }
    return e;
  }

 private:
  static constexpr int kMaxRelaxIterations = 20000;
  static constexpr double kGradTol = 1e-8;
  static constexpr double kConstraintTol = 1e-13;

  CableParams cable_;

  // chain endpoint as a function of the angles
  Point2 chain_end(const SimState& st) const {
    const double l = cable_.link_length();
    Point2 p = st.robot.left.position();
    for (double a : st.link_angles) p += Point2{l * std::cos(a), l * std::sin(a)};
    return p;
  }

  void rebuild_shape(SimState& st) const {
    const double l = cable_.link_length();
    st.shape.keypoints.resize(cable_.num_keypoints);
    Point2 p = st.robot.left.position();
    st.shape.keypoints[0] = p;
    for (int k = 0; k < cable_.num_links(); ++k) {
      p += Point2{l * std::cos(st.link_angles[k]), l * std::sin(st.link_angles[k])};
      st.shape.keypoints[k + 1] = p;
    }
  }

  Eigen::VectorXd energy_gradient_free(const SimState& st) const {
    const int m = cable_.num_links();
    const int f = m - 2;
    Eigen::VectorXd g(f);
    const auto& a = st.link_angles;
    for (int k = 1; k <= f; ++k)
      g[k - 1] = cable_.joint_stiffness * (2.0 * a[k] - a[k - 1] - a[k + 1]);
    return g;
  }

  // Jacobian of the endpoint constraint w.r.t. the free angles (2 x f)
  Eigen::MatrixXd constraint_jacobian(const SimState& st) const {
    const int f = cable_.num_links() - 2;
    const double l = cable_.link_length();
    Eigen::MatrixXd J(2, f);
    for (int k = 0; k < f; ++k) {
      J(0, k) = -l * std::sin(st.link_angles[k + 1]);
      J(1, k) = l * std::cos(st.link_angles[k + 1]);
    }
    return J;
  }

  // pseudo-inverse solve of (J J^T) x = b for the 2x2 Gram matrix
  static Eigen::Vector2d gram_pinv_solve(const Eigen::MatrixXd& J, const Eigen::Vector2d& b) {
    const Eigen::Matrix2d G = J * J.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(G);
    const double cutoff = std::max(es.eigenvalues().maxCoeff(), 0.0) * 1e-12 + 1e-300;
    Eigen::Vector2d w = es.eigenvectors().transpose() * b;
    for (int i = 0; i < 2; ++i)
      w[i] = es.eigenvalues()[i] > cutoff ? w[i] / es.eigenvalues()[i] : 0.0;
    return es.eigenvectors() * w;
  }

  Eigen::VectorXd projected_gradient(const SimState& st) const {
    const Eigen::VectorXd g = energy_gradient_free(st);
    const Eigen::MatrixXd J = constraint_jacobian(st);
    const Eigen::Vector2d y = gram_pinv_solve(J, J * g);
    return g - J.transpose() * y;
  }

  // Gauss-Newton projection onto the endpoint constraint manifold
  bool project_to_grasp(SimState& st) const {
    const int f = cable_.num_links() - 2;
    for (int it = 0; it < 100; ++it) {
      const Point2 c = chain_end(st) - st.robot.right.position();
      const double cn = std::hypot(c.x, c.y);
      if (cn < kConstraintTol) return true;
      if (f <= 0) return false;
      const Eigen::MatrixXd J = constraint_jacobian(st);
      const Eigen::Vector2d y = gram_pinv_solve(J, Eigen::Vector2d(c.x, c.y));
      Eigen::VectorXd delta = J.transpose() * y;
      // backtracking on the residual norm
      double alpha = 1.0;
      bool moved = false;
      for (int ls = 0; ls < 40; ++ls, alpha *= 0.5) {
        SimState trial = st;
        for (int k = 0; k < f; ++k) trial.link_angles[k + 1] -= alpha * delta[k];
        const Point2 ct = chain_end(trial) - st.robot.right.position();
        if (std::hypot(ct.x, ct.y) < cn * (1.0 - 0.1 * alpha) + 1e-300) {
          st.link_angles = trial.link_angles;
          moved = true;
          break;
        }
      }
      if (!moved) {
        // rank-deficient at a straight chain: bow the interior deterministically
        SimState trial = st;
        for (int k = 0; k < f; ++k)
          trial.link_angles[k + 1] += 0.05 * std::sin(M_PI * (k + 1) / (f + 1));
        const Point2 ct = chain_end(trial) - st.robot.right.position();
        const Point2 cb = chain_end(st) - st.robot.right.position();
        if (std::hypot(ct.x, ct.y) < std::hypot(cb.x, cb.y))
          st.link_angles = trial.link_angles;
        else
          return false;
      }
    }
    return (chain_end(st) - st.robot.right.position()).norm() < 1e-9;
  }

  // uniform-curvature bow between the fixed end tangents, close to the
  // minimum-bending chain for the given chord
  std::vector<double> initial_angles(const RobotConfig& robot) const {
    const int m = cable_.num_links();
    std::vector<double> a(m);
    const Point2 chord = robot.right.position() - robot.left.position();
    const double d = chord.norm();
    const double ratio = std::min(d / cable_.length, 1.0);
    // total turn beta with chord/L = sin(beta/2)/(beta/2)
    double lo = 1e-9, hi = 2.0 * M_PI - 1e-6;
    const auto chord_ratio = [](double beta) { return std::sin(beta / 2.0) / (beta / 2.0); };
    if (ratio >= 1.0 - 1e-12) {
      lo = hi = 1e-9;
    } else {
      for (int i = 0; i < 80; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (chord_ratio(mid) > ratio) lo = mid; else hi = mid;
      }
    }
    double beta = 0.5 * (lo + hi);
    const double chord_angle = std::atan2(chord.y, chord.x);
    // bow side from the mean end tangent
    const double mean_tangent =
        std::atan2(std::sin(robot.left.theta) + std::sin(robot.right.theta),
                   std::cos(robot.left.theta) + std::cos(robot.right.theta));
    if (wrap_angle(mean_tangent - chord_angle) < 0.0) beta = -beta;
    const double psi0 = chord_angle + beta / 2.0;
    for (int k = 0; k < m; ++k)
      a[k] = psi0 - beta * ((k + 0.5) / m);
    // weld the end links to the grasp frames, unwrapped near the bow angles
    a[0] += wrap_angle(robot.left.theta - a[0]);
    a[m - 1] += wrap_angle(robot.right.theta - a[m - 1]);
    return a;
  }
};

}  // namespace dlo

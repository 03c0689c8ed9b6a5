#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "dlo/path_param.hpp"
#include "dlo/pathset.hpp"

namespace dlo {

/// Virtual mass-spring parameters: adjacent springs (k1) and skip-one springs
/// (k2) with their rest lengths.
struct MSModelParams {
  double k1 = 2.0;
  double k2 = 1.0;
  std::vector<double> rest_adjacent;  // n-1 entries
  std::vector<double> rest_skip;      // n-2 entries

  /// Rest lengths taken from a reference shape; skip-one rests are straight
  /// chain sums of the adjacent rests.
  static MSModelParams from_shape(const DLOShape& s, double k1 = 2.0, double k2 = 1.0) {
    MSModelParams ms;
    ms.k1 = k1;
    ms.k2 = k2;
    const std::size_t n = s.n();
    ms.rest_adjacent.resize(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i)
      ms.rest_adjacent[i] = distance(s.keypoints[i], s.keypoints[i + 1]);
    ms.rest_skip.resize(n - 2);
    for (std::size_t j = 0; j + 2 < n; ++j)
      ms.rest_skip[j] = ms.rest_adjacent[j] + ms.rest_adjacent[j + 1];
    return ms;
  }
};

struct DeformOptConfig {
  int T = 50;
  std::vector<double> lb;  // per-keypoint lower increment bound
  std::vector<double> ub;  // per-keypoint upper increment bound
  int max_iterations = 300;
  double tolerance = 1e-8;

  static DeformOptConfig uniform(int T, double lb_all, double ub_all, std::size_t n) {
    DeformOptConfig cfg;
    cfg.T = T;
    cfg.lb.assign(n, lb_all);
    cfg.ub.assign(n, ub_all);
    return cfg;
  }

  void validate(std::size_t n) const {
    if (T < 2) throw std::invalid_argument("T must be >= 2");
    if (lb.size() != n || ub.size() != n)
      throw std::invalid_argument("bound vectors must have one entry per keypoint");
    for (std::size_t i = 0; i < n; ++i) {
      if (!(0.0 <= lb[i]) || !(lb[i] <= ub[i]))
        throw std::invalid_argument("bounds must satisfy 0 <= lb <= ub");
      if (!(T * lb[i] <= 1.0) || !(1.0 <= T * ub[i]))
        throw std::invalid_argument("infeasible bounds: need T*lb <= 1 <= T*ub");
    }
  }
};

struct DeformationSequence {
  std::vector<DLOShape> shapes;  // T+1 shapes
  Eigen::MatrixXd sigmas;        // (T+1) x n path parameters
};

/// Shape mapping h(P, sigma): per-keypoint interpolation along its path.
inline DLOShape map_shape(const std::vector<ParametrizedPath>& paths,
                          const Eigen::RowVectorXd& sigma_vec) {
  DLOShape s;
  s.keypoints.resize(paths.size());
  for (std::size_t i = 0; i < paths.size(); ++i)
    s.keypoints[i] = interpolate(paths[i], sigma_vec[static_cast<Eigen::Index>(i)]);
  return s;
}

/// Hooke potential over adjacent and skip-one springs.
inline double ms_energy(const DLOShape& s, const MSModelParams& ms) {
  const std::size_t n = s.n();
  if (n < 3) throw std::invalid_argument("ms_energy needs at least 3 keypoints");
  double e = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double d = distance(s.keypoints[i], s.keypoints[i + 1]) - ms.rest_adjacent[i];
    e += 0.5 * ms.k1 * d * d;
  }
  for (std::size_t j = 0; j + 2 < n; ++j) {
    const double d = distance(s.keypoints[j], s.keypoints[j + 2]) - ms.rest_skip[j];
    e += 0.5 * ms.k2 * d * d;
  }
  return e;
}

/// Gradient of ms_energy with respect to keypoint positions (n x 2).
inline Eigen::MatrixX2d ms_energy_grad(const DLOShape& s, const MSModelParams& ms) {
  const std::size_t n = s.n();
  Eigen::MatrixX2d g = Eigen::MatrixX2d::Zero(static_cast<Eigen::Index>(n), 2);
  const auto spring = [&](std::size_t p, std::size_t q, double rest, double k) {
    const Point2 d = s.keypoints[q] - s.keypoints[p];
    const double r = d.norm();
    if (r < 1e-12) return;
    const double f = k * (r - rest) / r;
    g(static_cast<Eigen::Index>(q), 0) += f * d.x;
    g(static_cast<Eigen::Index>(q), 1) += f * d.y;
    g(static_cast<Eigen::Index>(p), 0) -= f * d.x;
    g(static_cast<Eigen::Index>(p), 1) -= f * d.y;
  };
  for (std::size_t i = 0; i + 1 < n; ++i) spring(i, i + 1, ms.rest_adjacent[i], ms.k1);
  for (std::size_t j = 0; j + 2 < n; ++j) spring(j, j + 2, ms.rest_skip[j], ms.k2);
  return g;
}

/// Accumulated energy over the whole sequence: J(z) = sum_t E(h(P, sigma^t)).
inline double objective(const Eigen::MatrixXd& z, const std::vector<ParametrizedPath>& paths,
                        const MSModelParams& ms) {
  double j = 0.0;
  for (Eigen::Index t = 0; t < z.rows(); ++t) j += ms_energy(map_shape(paths, z.row(t)), ms);
  return j;
}

/// Analytic gradient of the accumulated energy with respect to every sigma
/// entry, via the chain rule through the smooth path interpolant.
inline Eigen::MatrixXd objective_grad(const Eigen::MatrixXd& z,
                                      const std::vector<ParametrizedPath>& paths,
                                      const MSModelParams& ms) {
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(z.rows(), z.cols());
  for (Eigen::Index t = 0; t < z.rows(); ++t) {
    const DLOShape s = map_shape(paths, z.row(t));
    const Eigen::MatrixX2d gs = ms_energy_grad(s, ms);
    for (Eigen::Index i = 0; i < z.cols(); ++i) {
      const auto [pos, dpos] = interpolate_grad(paths[static_cast<std::size_t>(i)], z(t, i));
      g(t, i) = gs(i, 0) * dpos.x + gs(i, 1) * dpos.y;
    }
  }
  return g;
}

/// Uniform progression baseline: sigma^t = t/T for every keypoint.
inline Eigen::MatrixXd uniform_baseline(int T, std::size_t n) {
  Eigen::MatrixXd z(T + 1, static_cast<Eigen::Index>(n));
  for (int t = 0; t <= T; ++t)
    z.row(t).setConstant(static_cast<double>(t) / static_cast<double>(T));
  z.row(0).setZero();
  z.row(T).setOnes();
  return z;
}

namespace detail {

/// Euclidean projection of v onto { lb <= d <= ub, sum(d) = target } by
/// bisection on the dual variable.
inline Eigen::VectorXd project_capped_simplex(const Eigen::VectorXd& v, double lb, double ub,
                                              double target) {
  const auto sum_clip = [&](double lambda) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i)
      s += std::clamp(v[i] - lambda, lb, ub);
    return s;
  };
  double lo = v.minCoeff() - ub - 1.0;
  double hi = v.maxCoeff() - lb + 1.0;
  for (int it = 0; it < 100; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (sum_clip(mid) > target) lo = mid; else hi = mid;
  }
  const double lambda = 0.5 * (lo + hi);
  Eigen::VectorXd out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) out[i] = std::clamp(v[i] - lambda, lb, ub);
  return out;
}

}  // namespace detail

struct DeformOptResult {
  DeformationSequence sequence;
  double objective = 0.0;
  bool converged = false;
  int iterations = 0;
};

/// Path-set-guided deformation optimization on the increment parametrization:
/// per-keypoint increments live in [lb, ub] and sum to one, which fixes the
/// boundary rows at 0 and 1. Projected gradient descent from the uniform
/// baseline with Armijo backtracking; the objective never rises across
/// accepted iterations.
inline DeformOptResult optimize_deformation(const std::vector<ParametrizedPath>& paths,
                                            const MSModelParams& ms,
                                            const DeformOptConfig& cfg) {
  const std::size_t n = paths.size();
  cfg.validate(n);
  const int T = cfg.T;
  const Eigen::Index ni = static_cast<Eigen::Index>(n);

  const auto sigmas_of = [&](const Eigen::MatrixXd& D) {
    Eigen::MatrixXd z = Eigen::MatrixXd::Zero(T + 1, ni);
    for (int t = 1; t <= T; ++t) z.row(t) = z.row(t - 1) + D.row(t - 1);
    z.row(0).setZero();
    z.row(T).setOnes();  // sum-to-one holds to projection precision
    return z;
  };
  const auto project = [&](Eigen::MatrixXd D) {
    for (Eigen::Index i = 0; i < ni; ++i)
      D.col(i) = detail::project_capped_simplex(
          D.col(i), cfg.lb[static_cast<std::size_t>(i)], cfg.ub[static_cast<std::size_t>(i)],
          1.0);
    return D;
  };
  const auto eval = [&](const Eigen::MatrixXd& D) { return objective(sigmas_of(D), paths, ms); };
  const auto grad_D = [&](const Eigen::MatrixXd& D) {
    const Eigen::MatrixXd gz = objective_grad(sigmas_of(D), paths, ms);
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(T, ni);
    Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(ni);
    for (int t = T; t >= 1; --t) {
      acc += gz.row(t);
      g.row(t - 1) = acc;
    }
    return g;
  };

  Eigen::MatrixXd D = project(Eigen::MatrixXd::Constant(T, ni, 1.0 / T));
  double J = eval(D);

  DeformOptResult result;
  double step = 1.0;
  int it = 0;
  for (; it < cfg.max_iterations; ++it) {
    const Eigen::MatrixXd g = grad_D(D);
    bool accepted = false;
    step = std::min(step * 2.0, 1e4);
    for (; step >= 1e-12; step *= 0.5) {
      const Eigen::MatrixXd Dn = project(D - step * g);
      const double move2 = (Dn - D).squaredNorm();
      if (move2 == 0.0) break;  // stationary
      const double Jn = eval(Dn);
      if (Jn <= J - 1e-4 * move2 / step) {
        const double move_inf = (Dn - D).cwiseAbs().maxCoeff();
        D = Dn;
        J = Jn;
        accepted = true;
        if (move_inf < cfg.tolerance) { result.converged = true; }
        break;
      }
    }
    if (!accepted || result.converged) {
      result.converged = true;
      break;
    }
  }

  result.iterations = it;
  result.objective = J;
  result.sequence.sigmas = sigmas_of(D);
  result.sequence.shapes.reserve(T + 1);
  for (int t = 0; t <= T; ++t)
    result.sequence.shapes.push_back(map_shape(paths, result.sequence.sigmas.row(t)));
  return result;
}

}  // namespace dlo

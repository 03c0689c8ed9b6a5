#pragma once

#include <cmath>
#include <vector>

#include "dlo/path.hpp"

namespace dlo {

/// Smooth differentiable interpolation over a discrete path: every segment's
/// linear extrapolation is blended with sigmoid weights centered on the
/// segment's parameter interval. Weights are evaluated in log space to avoid
/// underflow at high sharpness.
struct ParametrizedPath {
  Path path;
  double sharpness = 50.0;

  ParametrizedPath() = default;
  ParametrizedPath(Path p, double a = 50.0) : path(std::move(p)), sharpness(a) {
    if (!(sharpness > 0.0)) throw std::invalid_argument("sharpness must be positive");
    path.validate();  // rejects zero-length parameter intervals
  }
};

/// Linear extrapolation of segment k evaluated at sigma (defined for all
/// sigma, no clamping).
inline Point2 segment_point(const ParametrizedPath& pp, std::size_t k, double sigma) {
  const auto& wp = pp.path.waypoints;
  const auto& sg = pp.path.sigma;
  const double t = (sigma - sg[k]) / (sg[k + 1] - sg[k]);
  return wp[k] + (wp[k + 1] - wp[k]) * t;
}

namespace detail {

inline double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline double sigmoid_sharp(double u, double a) {
  const double z = a * u;
  return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

struct InterpEval {
  Point2 value;
  Point2 derivative;
};

inline InterpEval interpolate_impl(const ParametrizedPath& pp, double sigma) {
  const auto& wp = pp.path.waypoints;
  const auto& sg = pp.path.sigma;
  const std::size_t m = wp.size() - 1;
  const double a = pp.sharpness;

  // log-weights with max shift
  std::vector<double> logw(m);
  double max_logw = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < m; ++k) {
    logw[k] = -softplus(-a * (sigma - sg[k])) - softplus(-a * (sg[k + 1] - sigma));
    max_logw = std::max(max_logw, logw[k]);
  }

  double wsum = 0.0;
  Point2 wx{0, 0}, wrx_dx{0, 0};
  double wr = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    const double wk = std::exp(logw[k] - max_logw);
    const Point2 xk = segment_point(pp, k, sigma);
    const Point2 dxk = (wp[k + 1] - wp[k]) / (sg[k + 1] - sg[k]);
    const double s1 = sigmoid_sharp(sigma - sg[k], a);
    const double s2 = sigmoid_sharp(sg[k + 1] - sigma, a);
    const double rk = a * (s2 - s1);  // d(log w_k)/d(sigma)
    wsum += wk;
    wx += wk * xk;
    wrx_dx += wk * (rk * xk + dxk);
    wr += wk * rk;
  }
  const Point2 value = wx / wsum;
  const Point2 derivative = wrx_dx / wsum - value * (wr / wsum);
  return {value, derivative};
}

}  // namespace detail

/// Interpolated position at sigma in [0,1]. At exactly sigma=0 and sigma=1
/// the true endpoints are substituted so boundary shapes are exact.
inline Point2 interpolate(const ParametrizedPath& pp, double sigma) {
  if (sigma <= 0.0) return pp.path.waypoints.front();
  if (sigma >= 1.0) return pp.path.waypoints.back();
  return detail::interpolate_impl(pp, sigma).value;
}

/// Position and exact analytic derivative with respect to sigma.
inline std::pair<Point2, Point2> interpolate_grad(const ParametrizedPath& pp, double sigma) {
  const detail::InterpEval e = detail::interpolate_impl(pp, sigma);
  Point2 v = e.value;
  if (sigma <= 0.0) v = pp.path.waypoints.front();
  if (sigma >= 1.0) v = pp.path.waypoints.back();
  return {v, e.derivative};
}

}  // namespace dlo

#pragma once

#include <stdexcept>
#include <vector>

#include "dlo/geom.hpp"

namespace dlo {

/// Polyline path with a strictly increasing parameter in [0,1] per waypoint.
struct Path {
  std::vector<Point2> waypoints;
  std::vector<double> sigma;

  Path() = default;
  Path(std::vector<Point2> wps, std::vector<double> sig)
      : waypoints(std::move(wps)), sigma(std::move(sig)) {
    validate();
  }

  /// Builds a path with sigma assigned by normalized cumulative arc length.
  /// Zero-length segments get a tiny positive parameter increment so sigma
  /// stays strictly increasing.
  static Path from_waypoints(std::vector<Point2> wps) {
    if (wps.size() < 2) throw std::invalid_argument("path needs at least 2 waypoints");
    std::vector<double> sig(wps.size(), 0.0);
    double total = 0.0;
    for (std::size_t i = 1; i < wps.size(); ++i) total += distance(wps[i - 1], wps[i]);
    if (total <= 0.0) {
      for (std::size_t i = 0; i < sig.size(); ++i)
        sig[i] = static_cast<double>(i) / static_cast<double>(sig.size() - 1);
    } else {
      const double floor_len = total * 1e-9;
      double cum = 0.0;
      for (std::size_t i = 1; i < wps.size(); ++i) {
        cum += std::max(distance(wps[i - 1], wps[i]), floor_len);
        sig[i] = cum;
      }
      for (auto& s : sig) s /= cum;
      sig.front() = 0.0;
      sig.back() = 1.0;
    }
    return Path(std::move(wps), std::move(sig));
  }

  void validate() const {
    if (waypoints.size() < 2) throw std::invalid_argument("path needs at least 2 waypoints");
    if (sigma.size() != waypoints.size())
      throw std::invalid_argument("sigma size must match waypoint count");
    if (sigma.front() != 0.0 || sigma.back() != 1.0)
      throw std::invalid_argument("sigma must start at 0 and end at 1");
    for (std::size_t i = 1; i < sigma.size(); ++i)
      if (!(sigma[i] > sigma[i - 1]))
        throw std::invalid_argument("sigma must be strictly increasing");
  }

  std::size_t size() const { return waypoints.size(); }

  double length() const {
    double total = 0.0;
    for (std::size_t i = 1; i < waypoints.size(); ++i)
      total += distance(waypoints[i - 1], waypoints[i]);
    return total;
  }

  /// Piecewise-linear evaluation at parameter s (clamped to [0,1]).
  Point2 point_at(double s) const {
    if (s <= sigma.front()) return waypoints.front();
    if (s >= sigma.back()) return waypoints.back();
    std::size_t k = segment_index(s);
    const double t = (s - sigma[k]) / (sigma[k + 1] - sigma[k]);
    return waypoints[k] + (waypoints[k + 1] - waypoints[k]) * t;
  }

  /// Index k with sigma[k] <= s < sigma[k+1].
  std::size_t segment_index(double s) const {
    std::size_t lo = 0, hi = sigma.size() - 1;
    while (hi - lo > 1) {
      std::size_t mid = (lo + hi) / 2;
      if (sigma[mid] <= s) lo = mid; else hi = mid;
    }
    return lo;
  }

  /// Resamples to `count` waypoints uniformly spaced in arc length; first and
  /// last waypoints are preserved exactly.
  Path resample(std::size_t count) const {
    if (count < 2) throw std::invalid_argument("resample count must be >= 2");
    std::vector<double> cum(waypoints.size(), 0.0);
    for (std::size_t i = 1; i < waypoints.size(); ++i)
      cum[i] = cum[i - 1] + distance(waypoints[i - 1], waypoints[i]);
    const double total = cum.back();
    std::vector<Point2> out(count);
    out.front() = waypoints.front();
    out.back() = waypoints.back();
    if (total <= 0.0) {
      for (std::size_t i = 1; i + 1 < count; ++i) out[i] = waypoints.front();
    } else {
      std::size_t k = 0;
      for (std::size_t i = 1; i + 1 < count; ++i) {
        const double target = total * static_cast<double>(i) / static_cast<double>(count - 1);
        while (k + 2 < cum.size() && cum[k + 1] < target) ++k;
        const double seg = cum[k + 1] - cum[k];
        const double t = seg > 0.0 ? (target - cum[k]) / seg : 0.0;
        out[i] = waypoints[k] + (waypoints[k + 1] - waypoints[k]) * t;
      }
    }
    return Path::from_waypoints(std::move(out));
  }
};

}  // namespace dlo

#include <catch_amalgamated.hpp>

#include <random>

#include "dlo/path_param.hpp"

using namespace dlo;

namespace {

// direct transliteration of the weighted-sum interpolation, no log-space
// stabilization, used as the independent oracle at moderate sharpness
Point2 naive_interpolate(const ParametrizedPath& pp, double s) {
  const auto& wp = pp.path.waypoints;
  const auto& sg = pp.path.sigma;
  const double a = pp.sharpness;
  const auto sigmoid = [a](double x) { return 1.0 / (1.0 + std::exp(-a * x)); };
  Point2 num{0, 0};
  double den = 0.0;
  for (std::size_t k = 0; k + 1 < wp.size(); ++k) {
    const double w = sigmoid(s - sg[k]) * sigmoid(sg[k + 1] - s);
    const double t = (s - sg[k]) / (sg[k + 1] - sg[k]);
    num += w * (wp[k] + (wp[k + 1] - wp[k]) * t);
    den += w;
  }
  return num / den;
}

ParametrizedPath right_angle(double sharpness) {
  return ParametrizedPath(Path({{0, 0}, {1, 0}, {1, 1}}, {0.0, 0.5, 1.0}), sharpness);
}

}  // namespace

TEST_CASE("segment point evaluates the unclamped linear form") {
  const ParametrizedPath pp = right_angle(50.0);
  const Point2 a = segment_point(pp, 0, 0.0);
  CHECK(a.x == 0.0);
  CHECK(a.y == 0.0);
  const Point2 b = segment_point(pp, 0, 0.5);
  CHECK(b.x == Catch::Approx(1.0));
  const Point2 mid = segment_point(pp, 0, 0.25);
  CHECK(mid.x == Catch::Approx(0.5));
  // extrapolation beyond the segment is defined
  const Point2 ext = segment_point(pp, 0, 0.75);
  CHECK(ext.x == Catch::Approx(1.5));
}

TEST_CASE("zero-length parameter intervals are rejected at construction") {
  CHECK_THROWS(ParametrizedPath(Path({{0, 0}, {1, 0}, {1, 1}}, {0.0, 0.0, 1.0}), 50.0));
}

TEST_CASE("single-segment path reduces to exact linear interpolation") {
  const ParametrizedPath pp(Path::from_waypoints({{0, 0}, {2, 0}}), 50.0);
  const Point2 p = interpolate(pp, 0.25);
  CHECK(p.x == Catch::Approx(0.5).margin(1e-15));
  CHECK(p.y == 0.0);
  for (double s : {0.1, 0.33, 0.77}) {
    const Point2 q = interpolate(pp, s);
    CHECK(q.x == Catch::Approx(2.0 * s).margin(1e-13));
  }
}

TEST_CASE("two-segment right angle matches the direct evaluation") {
  const ParametrizedPath pp = right_angle(50.0);
  const Point2 got = interpolate(pp, 0.5);
  const Point2 want = naive_interpolate(pp, 0.5);
  CHECK(got.x == Catch::Approx(want.x).margin(1e-12));
  CHECK(got.y == Catch::Approx(want.y).margin(1e-12));
  // smoothed around the corner
  CHECK(distance(got, {1.0, 0.0}) < 0.02);

  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.01, 0.99);
  for (int i = 0; i < 100; ++i) {
    const double s = u(rng);
    const Point2 g = interpolate(pp, s);
    const Point2 n = naive_interpolate(pp, s);
    CHECK(g.x == Catch::Approx(n.x).margin(1e-10));
    CHECK(g.y == Catch::Approx(n.y).margin(1e-10));
  }
}

TEST_CASE("boundary behavior") {
  const ParametrizedPath pp = right_angle(50.0);

  SECTION("exact pinning at the boundary parameters") {
    CHECK(interpolate(pp, 0.0) == pp.path.waypoints.front());
    CHECK(interpolate(pp, 1.0) == pp.path.waypoints.back());
  }
  SECTION("boundary leakage shrinks as sharpness grows") {
    double prev = std::numeric_limits<double>::infinity();
    for (double a : {10.0, 50.0, 200.0}) {
      const ParametrizedPath p = right_angle(a);
      const double leak0 = distance(naive_interpolate(p, 0.0), p.path.waypoints.front());
      const double leak1 = distance(naive_interpolate(p, 1.0), p.path.waypoints.back());
      const double leak = std::max(leak0, leak1);
      CHECK(leak < prev);
      prev = leak;
    }
  }
  SECTION("leakage at sharpness 50 on an arc-length 60-waypoint path") {
    std::vector<Point2> wps;
    for (int i = 0; i < 60; ++i) {
      const double t = i / 59.0;
      wps.push_back({t, 0.2 * std::sin(3.0 * t)});
    }
    const ParametrizedPath p(Path::from_waypoints(wps), 50.0);
    const double plen = p.path.length();
    const double leak = distance(naive_interpolate(p, 0.0), p.path.waypoints.front());
    CHECK(leak < 1e-3 * plen);
  }
}

TEST_CASE("analytic derivative matches central finite differences") {
  SECTION("single segment has constant derivative") {
    const ParametrizedPath pp(Path::from_waypoints({{0, 0}, {2, 0}}), 50.0);
    for (double s : {0.1, 0.5, 0.9}) {
      const auto [v, d] = interpolate_grad(pp, s);
      CHECK(d.x == Catch::Approx(2.0).margin(1e-9));
      CHECK(d.y == Catch::Approx(0.0).margin(1e-12));
    }
  }
  SECTION("random paths") {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<Point2> wps;
      for (int k = 0; k < 8; ++k) wps.push_back({u(rng), u(rng)});
      const ParametrizedPath pp(Path::from_waypoints(wps), 30.0 + 40.0 * u(rng));
      for (int i = 0; i < 10; ++i) {
        const double s = 0.05 + 0.9 * u(rng);
        const double h = 1e-6;
        const auto [v, d] = interpolate_grad(pp, s);
        const Point2 fd = (naive_interpolate(pp, s + h) - naive_interpolate(pp, s - h)) / (2 * h);
        const double scale = std::max(1.0, fd.norm());
        CHECK(std::abs(d.x - fd.x) / scale < 1e-5);
        CHECK(std::abs(d.y - fd.y) / scale < 1e-5);
      }
    }
  }
  SECTION("constant path has zero derivative") {
    const ParametrizedPath pp(Path({{0.3, 0.3}, {0.3, 0.3}, {0.3, 0.3}},
                                   {0.0, 0.5, 1.0}), 50.0);
    const auto [v, d] = interpolate_grad(pp, 0.4);
    CHECK(d.x == Catch::Approx(0.0).margin(1e-12));
    CHECK(d.y == Catch::Approx(0.0).margin(1e-12));
  }
}

TEST_CASE("interior smoothness: no jumps") {
  const ParametrizedPath pp = right_angle(50.0);
  // max segment slope: |dx/dsigma| = 2 per segment; C bound = 2 x 2
  const double C = 4.0;
  for (double s = 0.01; s < 0.985; s += 0.013) {
    const double h = 1e-4;
    const double jump = distance(interpolate(pp, s + h), interpolate(pp, s));
    CHECK(jump <= C * h);
  }
}

TEST_CASE("high sharpness does not underflow") {
  const ParametrizedPath pp = right_angle(5000.0);
  for (double s : {0.001, 0.25, 0.5, 0.75, 0.999}) {
    const Point2 p = interpolate(pp, s);
    CHECK(p.finite());
  }
}

#include "doctest.h"

#include <cmath>
#include <numbers>
#include <vector>

#include "quayfleet/errors.hpp"
#include "quayfleet/navigation.hpp"
#include "test_support.hpp"

using namespace quayfleet;

TEST_CASE("pulses to distance") {
  CHECK(odometry_distance(1024, 1024, 0.25) == doctest::Approx(1.5708).epsilon(1e-4));
  CHECK(odometry_distance(0, 1024, 0.25) == 0.0);
  CHECK(odometry_distance(2048, 1024, 0.25) == doctest::Approx(std::numbers::pi).epsilon(1e-12));
  CHECK(odometry_distance(-512, 1024, 0.25) == doctest::Approx(-std::numbers::pi / 4.0));
}

TEST_CASE("heading change from side arcs") {
  CHECK(heading_delta(2.0, 2.0, 3.0) == 0.0);
  CHECK(heading_delta(1.0, 1.3, 3.0) == doctest::Approx(0.1).epsilon(1e-12));
  const double d = 3.0;
  CHECK(heading_delta(-std::numbers::pi * d / 2.0, std::numbers::pi * d / 2.0, d) ==
        doctest::Approx(std::numbers::pi).epsilon(1e-12));
}

TEST_CASE("dead reckoning geometry") {
  PoseEstimate e{{1.0, 2.0, 0.3}, 0.5, 0.01};
  CHECK(dead_reckon(e, 0.0, 0.0, 3.0) == e);

  PoseEstimate o{{0.0, 0.0, 0.0}, 0.0, 0.0};
  const auto s = dead_reckon(o, 10.0, 10.0, 3.0);
  CHECK(s.pose.x == doctest::Approx(10.0));
  CHECK(s.pose.y == doctest::Approx(0.0));
  CHECK(s.pose.heading == 0.0);
  CHECK(s.sigma_xy > 0.0);
}

TEST_CASE("square loop closes") {
  const double d = 3.0;
  PoseEstimate e{{4.0, -2.0, 0.7}, 0.0, 0.0};
  const auto start = e.pose;
  const double turn = std::numbers::pi / 2.0;
  for (int side = 0; side < 4; ++side) {
    for (int k = 0; k < 100; ++k) e = dead_reckon(e, 0.1, 0.1, d);
    // Turn in place in small steps.
    for (int k = 0; k < 10; ++k)
      e = dead_reckon(e, -turn * d / 20.0, turn * d / 20.0, d);
  }
  CHECK(std::hypot(e.pose.x - start.x, e.pose.y - start.y) < 1e-6);
  CHECK(std::abs(std::remainder(e.pose.heading - start.heading, 2.0 * std::numbers::pi)) < 1e-9);
}

TEST_CASE("closed random polylines return to the start") {
  test::Rng rng(8);
  const double d = 3.0;
  for (int trial = 0; trial < 50; ++trial) {
    PoseEstimate e{{rng.uniform(-50, 50), rng.uniform(-50, 50), rng.uniform(-3, 3)}, 0.0, 0.0};
    const auto start = e.pose;
    // Walk out, then retrace each move backwards.
    std::vector<std::pair<double, double>> moves;
    for (int i = 0; i < 20; ++i) {
      const double turn = rng.uniform(-1.5, 1.5);
      moves.push_back({-turn * d / 2.0, turn * d / 2.0});
      const double len = rng.uniform(0.0, 20.0);
      moves.push_back({len, len});
    }
    for (const auto& [l, r] : moves) e = dead_reckon(e, l, r, d);
    for (auto it = moves.rbegin(); it != moves.rend(); ++it) e = dead_reckon(e, -it->first, -it->second, d);
    CHECK(std::hypot(e.pose.x - start.x, e.pose.y - start.y) < 1e-6);
    CHECK(std::abs(std::remainder(e.pose.heading - start.heading, 2.0 * std::numbers::pi)) < 1e-9);
  }
}

TEST_CASE("odometry uncertainty grows with distance") {
  test::Rng rng(2);
  PoseEstimate e{{0, 0, 0}, 0.2, 0.0};
  for (int i = 0; i < 500; ++i) {
    const double l = rng.uniform(-1, 1), r = rng.uniform(-1, 1);
    const auto n = dead_reckon(e, l, r, 3.0);
    CHECK(n.sigma_xy >= e.sigma_xy);
    CHECK(n.sigma_heading >= e.sigma_heading);
    e = n;
  }
}

TEST_CASE("GPS sampling") {
  const Pose truth{120.0, 45.0, 0.0};
  const auto quiet = NoiseModel::noiseless();
  const auto r = sample_gps(truth, quiet, GpsMode::Raw, 12.0, 3);
  CHECK(r.x == truth.x);
  CHECK(r.y == truth.y);
  CHECK(r.timestamp == 12.0);

  NoiseModel noise;
  noise.seed = 99;
  const auto a = sample_gps(truth, noise, GpsMode::Raw, 7.5, 4);
  const auto b = sample_gps(truth, noise, GpsMode::Raw, 7.5, 4);
  CHECK(a.x == b.x);
  CHECK(a.y == b.y);
  const auto c = sample_gps(truth, noise, GpsMode::Raw, 7.5, 5);
  CHECK(a.x != c.x);

  int within = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto g = sample_gps(truth, noise, GpsMode::Raw, i * 1.0, static_cast<std::uint64_t>(i % 7));
    if (std::hypot(g.x - truth.x, g.y - truth.y) <= 15.0) ++within;
  }
  CHECK(within >= 9300);
}

TEST_CASE("DGPS removes the shared bias") {
  const Pose rover_truth{300.0, 80.0, 0.0};
  const Pose base_truth{0.0, 0.0, 0.0};
  auto bias_only = NoiseModel::noiseless();
  bias_only.gps_bias_mean = {5.0, -3.0};
  const auto rover = sample_gps(rover_truth, bias_only, GpsMode::DgpsRover, 4.0, 1);
  const auto base = sample_gps(base_truth, bias_only, GpsMode::DgpsBase, 4.0, 0);
  CHECK(rover.x == doctest::Approx(305.0));
  const auto fixed = dgps_correct(rover, base, base_truth);
  CHECK(fixed.x == doctest::Approx(rover_truth.x).epsilon(1e-12));
  CHECK(fixed.y == doctest::Approx(rover_truth.y).epsilon(1e-12));

  auto late = base;
  late.timestamp = 5.0;
  CHECK_THROWS_AS(dgps_correct(rover, late, base_truth), TimestampMismatch);

  NoiseModel noise;
  noise.gps_bias_mean = {5.0, -3.0};
  noise.seed = 4;
  const int n = 4000;
  double mx = 0, my = 0, raw_err = 0, dgps_err = 0;
  for (int i = 0; i < n; ++i) {
    const double t = i * 0.5;
    const auto raw = sample_gps(rover_truth, noise, GpsMode::Raw, t, 1);
    const auto rv = sample_gps(rover_truth, noise, GpsMode::DgpsRover, t, 1);
    const auto bs = sample_gps(base_truth, noise, GpsMode::DgpsBase, t, 0);
    const auto fx = dgps_correct(rv, bs, base_truth);
    mx += fx.x - rover_truth.x;
    my += fx.y - rover_truth.y;
    raw_err += std::hypot(raw.x - rover_truth.x, raw.y - rover_truth.y);
    dgps_err += std::hypot(fx.x - rover_truth.x, fx.y - rover_truth.y);
  }
  const double sigma = gps_axis_sigma(noise, GpsMode::DgpsRover);
  CHECK(std::abs(mx / n) < 3.0 * sigma / std::sqrt(n));
  CHECK(std::abs(my / n) < 3.0 * sigma / std::sqrt(n));
  CHECK(dgps_err < raw_err);
}

TEST_CASE("compass sampling") {
  auto quiet = NoiseModel::noiseless();
  CHECK(sample_compass(1.2, quiet, 3.0) == 1.2);

  NoiseModel noise;
  noise.seed = 6;
  double c = 0, s = 0;
  for (int i = 0; i < 10000; ++i) {
    const double h = sample_compass(std::numbers::pi, noise, i * 0.1, 2);
    CHECK(h > -std::numbers::pi);
    CHECK(h <= std::numbers::pi);
    c += std::cos(h - std::numbers::pi);
    s += std::sin(h - std::numbers::pi);
  }
  const double R = std::hypot(c, s) / 10000.0;
  const double circ_std = std::sqrt(-2.0 * std::log(R));
  CHECK(std::abs(circ_std - noise.compass_sigma) / noise.compass_sigma < 0.1);
}

TEST_CASE("precision-weighted fusion") {
  PoseEstimate pred{{10.0, 20.0, 0.5}, 2.0, 0.05};
  CHECK(fuse_pose(pred, std::nullopt, 3.0, std::nullopt, 0.02) == pred);

  GpsReading g{14.0, 16.0, GpsMode::Raw, 0.0};
  const auto exact = fuse_pose(pred, g, 1e-9, std::nullopt, 0.02);
  CHECK(exact.pose.x == doctest::Approx(14.0));
  CHECK(exact.pose.y == doctest::Approx(16.0));
  CHECK(exact.pose.heading == pred.pose.heading);

  const auto mid = fuse_pose(pred, g, 2.0, std::nullopt, 0.02);
  CHECK(mid.pose.x == doctest::Approx(12.0));
  CHECK(mid.pose.y == doctest::Approx(18.0));
  CHECK(mid.sigma_xy == doctest::Approx(2.0 / std::sqrt(2.0)));

  const auto h = fuse_pose(pred, std::nullopt, 1.0, 0.7, 0.05);
  CHECK(h.pose.heading == doctest::Approx(0.6));
  CHECK(h.pose.x == pred.pose.x);
  CHECK(h.sigma_heading < pred.sigma_heading);

  // Blending across the +-pi seam picks the short way round.
  PoseEstimate seam{{0, 0, 3.1}, 1.0, 0.05};
  const auto w = fuse_pose(seam, std::nullopt, 1.0, -3.1, 0.05);
  CHECK(std::abs(std::abs(w.pose.heading) - std::numbers::pi) < 1e-6);
}

TEST_CASE("localizer is deterministic and tracks a straight run") {
  const double r = 0.25;
  const double per_pulse = 2.0 * std::numbers::pi * r / 1024.0;
  auto run = [&](const NoiseModel& noise, bool compass) {
    Localizer loc(3, {0, 0, 0}, noise, r, 3.0);
    for (std::uint64_t k = 1; k <= 1000; ++k) {
      const auto p = std::llround(static_cast<double>(k) * 0.6 / per_pulse);
      loc.odometry({p, p, p, p}, k);
      if (compass) loc.compass_fix(sample_compass(0.0, noise, static_cast<double>(k) * 0.1, 3));
    }
    return loc.estimate();
  };
  const auto exact = run(NoiseModel::noiseless(), false);
  CHECK(exact.pose.x == doctest::Approx(std::llround(600.0 / per_pulse) * per_pulse).epsilon(1e-12));
  CHECK(exact.pose.y == 0.0);

  NoiseModel noise;
  noise.seed = 12;
  const auto a = run(noise, false);
  CHECK(a == run(noise, false));
  CHECK(a.sigma_xy >= noise.odometry_drift * 600.0 * 0.99);
  // Heading aid keeps the cross-track error small.
  const auto aided = run(noise, true);
  CHECK(std::abs(aided.pose.y) < 30.0);
  CHECK(std::abs(aided.pose.y) < std::abs(a.pose.y));
  CHECK(aided.pose.x == doctest::Approx(600.0).epsilon(0.05));
}

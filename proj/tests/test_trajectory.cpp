#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "quayfleet/terminal_map.hpp"
#include "quayfleet/trajectory.hpp"
#include "test_support.hpp"

using namespace quayfleet;

namespace {

// Minimum travel time to rest at s_b by integrating ds/v over the speed
// envelope: every cap, reachable from behind and stoppable ahead.
double envelope_time(const std::vector<SpeedCap>& caps, double s_a, double v_a, double s_b,
                     double a) {
  auto cap_at = [&](double s) {
    for (const auto& c : caps)
      if (s >= c.from && s < c.to) return c.v_limit;
    return caps.back().v_limit;
  };
  auto v_env = [&](double s) {
    double v = cap_at(s);
    v = std::min(v, std::sqrt(v_a * v_a + 2.0 * a * (s - s_a)));
    v = std::min(v, std::sqrt(2.0 * a * std::max(0.0, s_b - s)));
    for (const auto& c : caps) {
      if (c.from > s) v = std::min(v, std::sqrt(c.v_limit * c.v_limit + 2.0 * a * (c.from - s)));
      if (c.to <= s) v = std::min(v, std::sqrt(c.v_limit * c.v_limit + 2.0 * a * (s - c.to)));
    }
    return v;
  };
  const int n = 200000;
  const double h = (s_b - s_a) / n;
  double t = 0.0;
  for (int i = 0; i < n; ++i) {
    // Exact time across a step under constant acceleration between end speeds.
    const double v0 = v_env(s_a + i * h);
    const double v1 = v_env(s_a + (i + 1) * h);
    t += 2.0 * h / (v0 + v1);
  }
  return t;
}

}  // namespace

TEST_CASE("trapezoidal profile on one straight cap") {
  std::vector<SpeedCap> caps{{0.0, 124.0, 6.0}};
  auto ph = plan_run(caps, 0.0, 0.0, 124.0, 2.0);
  REQUIRE(ph);
  CHECK(profile_duration(*ph) == doctest::Approx(3.0 + 106.0 / 6.0 + 3.0).epsilon(1e-12));

  // Too short to reach the cap: triangle.
  std::vector<SpeedCap> short_cap{{0.0, 4.0, 6.0}};
  auto tri = plan_run(short_cap, 0.0, 0.0, 4.0, 2.0);
  REQUIRE(tri);
  CHECK(profile_duration(*tri) == doctest::Approx(2.0 * std::sqrt(2.0)).epsilon(1e-6));
}

TEST_CASE("infeasible initial speed is reported") {
  std::vector<SpeedCap> caps{{0.0, 10.0, 6.0}, {10.0, 20.0, 1.0}};
  CHECK_FALSE(plan_run(caps, 9.0, 6.0, 20.0, 2.0));
  CHECK_FALSE(plan_run(caps, 0.0, 6.0, 5.0, 2.0));
}

TEST_CASE("profiles match the envelope integral and respect limits") {
  test::Rng rng(3);
  const double limits[3] = {1.0, 3.0, 6.0};
  for (int trial = 0; trial < 60; ++trial) {
    std::vector<SpeedCap> caps;
    double s = 0.0;
    const int k = rng.integer(1, 8);
    for (int i = 0; i < k; ++i) {
      const double len = rng.uniform(1.0, 20.0);
      caps.push_back({s, s + len, limits[rng.index(3)]});
      s += len;
    }
    const double a = rng.uniform(0.5, 3.0);
    auto ph = plan_run(caps, 0.0, 0.0, s, a);
    REQUIRE(ph);
    CAPTURE(trial);
    CHECK(profile_duration(*ph) == doctest::Approx(envelope_time(caps, 0.0, 0.0, s, a)).epsilon(2e-3));

    double s_prev = 0.0, v_prev = 0.0;
    for (const auto& p : *ph) {
      CHECK(p.s0 == doctest::Approx(s_prev));
      CHECK(std::abs(p.v0 - v_prev) < 1e-6);
      CHECK(std::abs(p.accel) <= a + 1e-9);
      const double v_end = p.v0 + p.accel * p.duration;
      CHECK(p.s1 == doctest::Approx(p.s0 + 0.5 * (p.v0 + v_end) * p.duration));
      // Sample the phase against the cap in force.
      for (int j = 0; j <= 10; ++j) {
        const double tau = p.duration * j / 10.0;
        const double sj = p.s0 + p.v0 * tau + 0.5 * p.accel * tau * tau;
        const double vj = p.v0 + p.accel * tau;
        for (const auto& c : caps)
          if (sj > c.from + 1e-6 && sj < c.to - 1e-6) CHECK(vj <= c.v_limit + 1e-6);
      }
      s_prev = p.s1;
      v_prev = v_end;
    }
    CHECK(s_prev == doctest::Approx(s));
    CHECK(std::abs(v_prev) < 1e-6);
  }
}

TEST_CASE("pieces of a straight corridor") {
  auto m = build_map(MapSpec{{"Q" + std::string(10, '-') + "Q"}, 4.0, {}});
  std::vector<CellIndex> path;
  for (int x = 0; x < 12; ++x) path.push_back(m.index(x, 0));
  const auto pieces = build_pieces(m, path, AgvParams{});
  REQUIRE(pieces.size() == path.size());
  double total = 0.0;
  for (const auto& p : pieces) {
    CHECK(p.kind == SegmentKind::Straight);
    CHECK(p.v_limit == 6.0);
    total += p.length;
  }
  CHECK(total == doctest::Approx(11 * 4.0));
  CHECK(pieces.front().length == 2.0);
  CHECK(pieces.back().length == 2.0);
  CHECK(build_pieces(m, std::vector<CellIndex>{path[0]}, AgvParams{}).empty());
}

TEST_CASE("a turn becomes a quarter arc and pieces join smoothly") {
  const auto m = build_map(default_terminal_spec());
  // Along the outer ring's north lane, then down its east side.
  std::vector<CellIndex> path{m.index(16, 18), m.index(17, 18), m.index(18, 18),
                              m.index(18, 17), m.index(18, 16)};
  const auto pieces = build_pieces(m, path, AgvParams{});
  REQUIRE(pieces.size() == 5);
  CHECK(pieces[2].kind == SegmentKind::Curve);
  CHECK(pieces[2].v_limit == 3.0);
  CHECK(pieces[2].length == doctest::Approx(std::numbers::pi / 2.0 * 3.0));
  CHECK(pieces[2].sweep == doctest::Approx(-std::numbers::pi / 2.0));
  for (std::size_t k = 0; k + 1 < pieces.size(); ++k) {
    CHECK(distance(pieces[k].end, pieces[k + 1].start) < 1e-9);
    const double d = std::remainder(
        pieces[k].tangent_at(pieces[k].length) - pieces[k + 1].tangent_at(0.0), 2.0 * std::numbers::pi);
    CHECK(std::abs(d) < 1e-9);
    // Points along the piece stay within its cell.
    for (int j = 0; j <= 8; ++j) {
      const auto c = m.cell_at(pieces[k].point_at(pieces[k].length * j / 8.0));
      REQUIRE(c);
      const bool edge = std::abs(m.x_of(*c) - m.x_of(pieces[k].cell)) + std::abs(m.y_of(*c) - m.y_of(pieces[k].cell)) <= 1;
      CHECK(edge);
    }
  }
}

TEST_CASE("timed trajectory accessors") {
  auto m = build_map(MapSpec{{"Q" + std::string(10, '-') + "Q"}, 4.0, {}});
  Trajectory tr;
  for (int x = 0; x < 12; ++x) tr.path.push_back(m.index(x, 0));
  tr.pieces = build_pieces(m, tr.path, AgvParams{});
  // 44 m: 3 s up, 26 m at 6 m/s, 3 s down, starting at t = 5.
  tr.motion = {{5.0, 8.0, 0.0, 0.0, 2.0},
               {8.0, 8.0 + 26.0 / 6.0, 9.0, 6.0, 0.0},
               {8.0 + 26.0 / 6.0, 11.0 + 26.0 / 6.0, 35.0, 6.0, -2.0},
               {11.0 + 26.0 / 6.0, 20.0, 44.0, 0.0, 0.0}};
  CHECK(tr.length() == doctest::Approx(44.0));
  CHECK(tr.progress_at(0.0) == 0.0);
  CHECK(tr.progress_at(6.0) == doctest::Approx(1.0));
  CHECK(tr.speed_at(9.0) == doctest::Approx(6.0));
  CHECK(tr.progress_at(100.0) == doctest::Approx(44.0));
  CHECK(tr.time_reaching(9.0) == doctest::Approx(8.0));
  CHECK(tr.arrival_time() == doctest::Approx(11.0 + 26.0 / 6.0));
  CHECK(tr.position_at(8.0).x == doctest::Approx(2.0 + 9.0));
  CHECK(tr.piece_index_at(44.0) == 11);
  const auto timing = tr.cell_timing();
  REQUIRE(timing.size() == 11 + 1);
  for (std::size_t k = 1; k < timing.size(); ++k) CHECK(timing[k].enter_t >= timing[k - 1].enter_t);
  CHECK(tr.path_hash() == hash_path(tr.path));
}

#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "quayfleet/errors.hpp"
#include "quayfleet/reservation.hpp"
#include "quayfleet/supervisor.hpp"
#include "quayfleet/terminal_map.hpp"
#include "test_support.hpp"

using namespace quayfleet;

namespace {

TerminalMap corridor(int roads, double cs = 4.0) {
  return build_map(MapSpec{{"Q" + std::string(static_cast<std::size_t>(roads), '-') + "Q"}, cs, {}});
}

TerminalMap crossing() {
  return build_map(MapSpec{{"###Q###", "###|###", "###|###", "Q--+--Q", "###|###", "###|###",
                            "###Q###"},
                           6.0,
                           {}});
}

std::vector<CellIndex> row_path(const TerminalMap& m, int y, int x0, int x1) {
  std::vector<CellIndex> p;
  const int step = x1 >= x0 ? 1 : -1;
  for (int x = x0;; x += step) {
    p.push_back(m.index(x, y));
    if (x == x1) break;
  }
  return p;
}

// A copy of `tr` that waits `d` seconds at its start before the same motion.
Trajectory delayed(const Trajectory& tr, double d) {
  Trajectory out = tr;
  out.motion.clear();
  const double t0 = tr.t_begin();
  if (d > 0.0) out.motion.push_back({t0, t0 + d, 0.0, 0.0, 0.0});
  for (auto m : tr.motion) {
    m.t0 += d;
    m.t1 += d;
    out.motion.push_back(m);
  }
  return out;
}

bool clears(const std::vector<Occupancy>& occ, CellIndex cell, double t0, double t1, double h) {
  for (const auto& o : occ)
    if (o.cell == cell && o.t0 < t1 + h && o.t1 > t0 - h) return false;
  return true;
}

}  // namespace

TEST_CASE("plan_path trivial and unreachable cases") {
  const auto m = corridor(6);
  AgvParams p;
  CHECK(plan_path(m, 0, 0, p) == std::vector<CellIndex>{0});
  const auto full = plan_path(m, 0, 7, p);
  CHECK(full.size() == 8);

  const auto walled = build_map(MapSpec{{"Q+--+", "#|##|", "#+--+"}, 4.0, {}});
  const CellIndex bay = walled.index(0, 2);
  CHECK_THROWS_AS(plan_path(walled, bay, walled.index(2, 1), p), Unreachable);
  // The short way round leaves the bay sideways into a turn; going
  // straight out and taking the long way is quicker.
  const auto route = plan_path(walled, bay, walled.index(3, 0), p);
  const std::vector<CellIndex> short_way{bay, walled.index(1, 2), walled.index(1, 1),
                                         walled.index(1, 0), walled.index(2, 0), walled.index(3, 0)};
  CHECK(route.size() == 8);
  CHECK(free_flight_cost(walled, route, p) < free_flight_cost(walled, short_way, p));
}

TEST_CASE("plan_path is optimal on a small open grid") {
  const auto m = build_map(MapSpec{{"Q++++", "+++++", "+++++", "+++++", "++++S"}, 4.0, {}});
  AgvParams p;
  const CellIndex start = m.index(0, 4);
  const CellIndex goal = m.index(4, 0);

  // Enumerate every simple path; bays only at the ends.
  double best = std::numeric_limits<double>::infinity();
  std::size_t paths = 0;
  std::vector<CellIndex> cur{start};
  std::vector<bool> used(m.cell_count(), false);
  used[static_cast<std::size_t>(start)] = true;
  std::function<void(CellIndex)> dfs = [&](CellIndex c) {
    for (auto n : neighbors(m, c)) {
      if (used[static_cast<std::size_t>(n)]) continue;
      cur.push_back(n);
      if (n == goal) {
        ++paths;
        best = std::min(best, free_flight_cost(m, cur, p));
      } else if (m.kind(n) == CellKind::Road) {
        used[static_cast<std::size_t>(n)] = true;
        dfs(n);
        used[static_cast<std::size_t>(n)] = false;
      }
      cur.pop_back();
    }
  };
  dfs(start);
  CHECK(paths > 1000);

  const auto got = plan_path(m, start, goal, p);
  CHECK(got.front() == start);
  CHECK(got.back() == goal);
  CHECK(free_flight_cost(m, got, p) == doctest::Approx(best).epsilon(1e-12));
  // Manhattan length at top speed bounds every path from below.
  CHECK(best >= 8 * 4.0 / p.v_max_straight);
  CHECK(plan_path(m, start, goal, p) == got);
}

TEST_CASE("schedule_velocity on an empty table is the free-flight profile") {
  const auto m = corridor(30);
  AgvParams p;
  ReservationTable table(m.cell_count(), 1.0);
  const auto tr = schedule_velocity(m, row_path(m, 0, 0, 31), table, p, 0, 0.0);
  CHECK(tr.arrival_time() == doctest::Approx(3.0 + (124.0 - 18.0) / 6.0 + 3.0).epsilon(1e-9));
  CHECK(table.count_for(0) > 0);
  CHECK(table.headway_violations().empty());
}

TEST_CASE("waiting for a reserved cell matches the delay-grid oracle") {
  const auto m = corridor(30);
  AgvParams p;
  const double h = 1.0;
  const CellIndex blocked = m.index(15, 0);
  const auto path = row_path(m, 0, 0, 31);

  ReservationTable empty(m.cell_count(), h);
  const auto free_flight = schedule_velocity(m, path, empty, p, 0, 0.0);

  ReservationTable table(m.cell_count(), h);
  table.add(blocked, 9, 10.0, 14.0);
  const auto tr = schedule_velocity(m, path, table, p, 0, 0.0);

  const auto occ = trajectory_occupancy(m, tr, p.safety_radius_m, 0.0);
  CHECK(clears(occ, blocked, 10.0, 14.0, h));
  CHECK(table.headway_violations().empty());
  CHECK(tr.path == path);

  // Smallest start delay on a 0.1 s grid that clears the reserved interval.
  double oracle = -1.0;
  for (int k = 0; k < 400; ++k) {
    const auto cand = delayed(free_flight, 0.1 * k);
    if (clears(trajectory_occupancy(m, cand, p.safety_radius_m, 0.0), blocked, 10.0, 14.0, h)) {
      oracle = cand.arrival_time();
      break;
    }
  }
  REQUIRE(oracle > 0.0);
  CHECK(tr.arrival_time() <= oracle + 1e-6);
  CHECK(tr.arrival_time() > free_flight.arrival_time());
}

TEST_CASE("a permanently reserved cell is unschedulable") {
  const auto m = corridor(30);
  AgvParams p;
  ReservationTable table(m.cell_count(), 1.0);
  table.add(m.index(15, 0), 9, 0.0, kForever);
  ScheduleOptions opt;
  opt.horizon_s = 600.0;
  CHECK_THROWS_AS(schedule_velocity(m, row_path(m, 0, 0, 31), table, p, 0, 0.0, opt), Unschedulable);
  CHECK(table.count_for(0) == 0);
}

TEST_CASE("crossing AGVs are separated by the schedule") {
  const auto m = crossing();
  AgvParams p;
  ReservationTable table(m.cell_count(), 1.0);
  std::vector<CellIndex> north_south;
  for (int y = 6; y >= 0; --y) north_south.push_back(m.index(3, y));
  const auto a = schedule_velocity(m, row_path(m, 3, 0, 6), table, p, 0, 0.0);
  const auto before = a;
  const auto b = schedule_velocity(m, north_south, table, p, 1, 0.0);
  CHECK(a == before);

  ReservationTable alone(m.cell_count(), 1.0);
  const auto b_free = schedule_velocity(m, north_south, alone, p, 1, 0.0);
  CHECK(b.arrival_time() > b_free.arrival_time());
  CHECK(b.path == b_free.path);

  std::vector<Trajectory> both{a, b};
  CHECK(detect_conflicts(both, p).empty());
  CHECK(table.headway_violations().empty());
}

TEST_CASE("detect_conflicts examples") {
  const auto m = corridor(20, 6.0);
  AgvParams p;
  ReservationTable t1(m.cell_count(), 1.0), t2(m.cell_count(), 1.0);
  const auto east = schedule_velocity(m, row_path(m, 0, 0, 21), t1, p, 0, 0.0);
  const auto west = schedule_velocity(m, row_path(m, 0, 21, 0), t2, p, 1, 0.0);

  std::vector<Trajectory> one{east};
  CHECK(detect_conflicts(one, p).empty());

  std::vector<Trajectory> head_on{east, west};
  const auto c = detect_conflicts(head_on, p);
  REQUIRE(c.size() == 1);
  CHECK(c[0].distance < 2.0 * p.safety_radius_m);
  CHECK(distance(east.position_at(c[0].t), west.position_at(c[0].t)) == doctest::Approx(c[0].distance));
  // Closing at 12 m/s from 126 m apart: contact close to 126-5 m / 12 m/s plus the ramp.
  CHECK(distance(east.position_at(c[0].t - 0.05), west.position_at(c[0].t - 0.05)) >=
        2.0 * p.safety_radius_m);
  CHECK(c[0].t == doctest::Approx((121.0 + 18.0) / 12.0).epsilon(0.01));
}

TEST_CASE("reservation table keeps headway under random inserts") {
  test::Rng rng(17);
  const double h = 1.0;
  for (int trial = 0; trial < 50; ++trial) {
    ReservationTable table(6, h);
    for (int i = 0; i < 200; ++i) {
      const auto cell = static_cast<CellIndex>(rng.index(6));
      const auto agv = rng.integer(0, 4);
      const double t0 = rng.uniform(0.0, 200.0);
      const double t1 = t0 + rng.uniform(0.0, 20.0);
      // Repeated shifting reaches the earliest clear slot.
      double shift = 0.0;
      bool blocked = false;
      for (int it = 0; it < 1000; ++it) {
        const double d = table.required_shift(cell, agv, t0 + shift, t1 + shift);
        if (std::isinf(d)) { blocked = true; break; }
        CHECK(d >= 0.0);
        if (d > 0.0) CHECK(table.conflicts(cell, agv, t0 + shift, t1 + shift));
        if (d == 0.0) break;
        shift += d;
      }
      if (blocked) continue;
      CHECK_FALSE(table.conflicts(cell, agv, t0 + shift, t1 + shift));
      table.add(cell, agv, t0 + shift, t1 + shift);
    }
    CHECK(table.headway_violations().empty());
    // Direct scan.
    for (CellIndex c = 0; c < 6; ++c) {
      const auto& rs = table.at(c);
      for (std::size_t i = 0; i < rs.size(); ++i)
        for (std::size_t j = i + 1; j < rs.size(); ++j)
          if (rs[i].agv != rs[j].agv)
            CHECK((rs[i].t1 + h <= rs[j].t0 + 1e-9 || rs[j].t1 + h <= rs[i].t0 + 1e-9));
    }
  }
}

TEST_CASE("reservation release and truncation") {
  ReservationTable table(3, 1.0);
  table.add(0, 1, 0.0, 5.0);
  table.add(1, 1, 5.0, 10.0);
  table.add(2, 1, 10.0, kForever);
  table.add(0, 2, 20.0, 25.0);
  CHECK(table.count() == 4);
  table.release_before(1, 6.0);
  CHECK(table.count_for(1) == 2);
  table.truncate_after(1, 8.0);
  CHECK(table.count_for(1) == 1);
  CHECK(table.at(1)[0].t1 == 8.0);
  CHECK(std::isinf(table.required_shift(0, 3, 0.0, 1.0)) == false);
  table.add(2, 2, 0.0, kForever);
  CHECK(std::isinf(table.required_shift(2, 3, 0.0, 1.0)));
  table.remove_agv(2);
  CHECK(table.count_for(2) == 0);
}

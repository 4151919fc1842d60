#include "doctest.h"

#include <cmath>
#include <cstdlib>
#include <numbers>
#include <vector>

#include "quayfleet/errors.hpp"
#include "quayfleet/reservation.hpp"
#include "quayfleet/supervisor.hpp"
#include "quayfleet/terminal_map.hpp"
#include "quayfleet/vehicle.hpp"

using namespace quayfleet;

namespace {

VehicleState parked_at(Vec2 p, double heading = 0.0) {
  VehicleState s;
  s.pose_true = {p.x, p.y, heading};
  s.pack = size_battery_pack(battery_cell(Chemistry::LiFePO4), 640.0, 200000.0);
  return s;
}

Trajectory straight_run(const TerminalMap& m, int cells) {
  std::vector<CellIndex> path;
  for (int x = 0; x < cells; ++x) path.push_back(m.index(x, 0));
  ReservationTable table(m.cell_count(), 1.0);
  return schedule_velocity(m, path, table, AgvParams{}, 0, 0.0);
}

Trajectory ring_mission(Supervisor& sup, const TerminalMap& m) {
  Job j;
  j.pickup = m.index(4, 19);
  j.dropoff = m.index(15, 0);
  j.container = ContainerKind::Std40;
  return sup.plan_free_flight(0, m.index(6, 3), j, 0.0);
}

const TerminalMap& ring() {
  static const TerminalMap m = build_map(default_terminal_spec());
  return m;
}

}  // namespace

TEST_CASE("speed limits by segment kind") {
  AgvParams p;
  CHECK(speed_limit_for(SegmentKind::Straight, p) == 6.0);
  CHECK(speed_limit_for(SegmentKind::Curve, p) == 3.0);
  CHECK(speed_limit_for(SegmentKind::Crab, p) == 1.0);
}

TEST_CASE("a stationary vehicle without a trajectory does not move") {
  auto s = parked_at({10.0, 6.0}, 0.5);
  const auto before = s;
  step_kinematics(s, AgvParams{}, 0.1);
  CHECK(s.pose_true == before.pose_true);
  CHECK(s.wheel_pulses == before.wheel_pulses);
  CHECK(s.speed == 0.0);
  CHECK(s.pack.remaining_Wh == before.pack.remaining_Wh);
  CHECK_THROWS_AS(step_kinematics(s, AgvParams{}, 0.0), std::invalid_argument);
}

TEST_CASE("straight run from rest") {
  const auto m = build_map(MapSpec{{"Q" + std::string(30, '-') + "Q"}, 4.0, {}});
  const auto tr = straight_run(m, 32);
  AgvParams p;

  auto s = parked_at(m.center(0));
  adopt_trajectory(s, tr, std::nullopt);
  CHECK(s.mode == Mode::MoveToTarget);
  step_kinematics(s, p, 1.0);
  CHECK(s.speed == doctest::Approx(2.0));

  auto r = parked_at(m.center(0));
  adopt_trajectory(r, tr, std::nullopt);
  for (int i = 0; i < 100; ++i) step_kinematics(r, p, 0.1);
  // 9 m ramping to 6 m/s over 3 s, then 7 s at 6 m/s.
  CHECK(r.path_progress == doctest::Approx(51.0).epsilon(1e-9));
  CHECK(r.pose_true.x - m.center(0).x == doctest::Approx(51.0).epsilon(1e-9));
  CHECK(r.distance_m == doctest::Approx(51.0).epsilon(1e-9));
}

TEST_CASE("speed envelope and pulse consistency over a full mission") {
  const auto& m = ring();
  Supervisor sup(m, AgvParams{}, SupervisorConfig{}, std::vector<CellIndex>{m.index(6, 3)},
                 std::vector<double>{216000.0});
  const auto tr = ring_mission(sup, m);
  AgvParams p;
  const double per_pulse = 2.0 * std::numbers::pi * p.wheel_radius_m / kPulsesPerRev;
  const double dt = 0.1;

  auto s = parked_at(m.center(m.index(6, 3)), std::numbers::pi / 2.0);
  adopt_trajectory(s, tr, ContainerKind::Std40);
  std::vector<Mode> modes{s.mode};
  double v_prev = s.speed;
  double drained = 0.0;
  const double start_Wh = s.pack.remaining_Wh;
  while (s.time < tr.t_end() + 1.0) {
    const auto ev = step_kinematics(s, p, dt);
    drained += ev.power_W * dt / 3600.0;
    if (s.mode != modes.back()) modes.push_back(s.mode);
    CHECK(std::abs(s.speed - v_prev) <= p.a_max * dt + 1e-9);
    CHECK(s.speed <= p.v_max_straight + 1e-9);
    const auto& piece = tr.pieces[tr.piece_index_at(s.path_progress)];
    CHECK(s.speed <= piece.v_limit + 1e-6);
    for (int w = 0; w < 4; ++w)
      CHECK(std::abs(static_cast<double>(s.wheel_pulses[static_cast<std::size_t>(w)]) * per_pulse -
                     s.wheel_arc[static_cast<std::size_t>(w)]) <= 0.5 * per_pulse + 1e-9);
    v_prev = s.speed;
  }
  CHECK(modes == std::vector<Mode>{Mode::MoveToTarget, Mode::Loading, Mode::MoveToTarget,
                                   Mode::Unloading, Mode::Standby});
  CHECK_FALSE(s.carried);
  CHECK(s.path_progress == doctest::Approx(tr.length()));
  CHECK(distance(s.pose_true.position(), m.center(m.index(15, 0))) < 1e-6);
  CHECK(start_Wh - s.pack.remaining_Wh == doctest::Approx(drained).epsilon(1e-9));
  CHECK(s.energy_used_Wh == doctest::Approx(drained).epsilon(1e-9));
}

TEST_CASE("cargo changes energy but not motion") {
  const auto& m = ring();
  Supervisor sup(m, AgvParams{}, SupervisorConfig{}, std::vector<CellIndex>{m.index(6, 3)},
                 std::vector<double>{216000.0});
  const auto tr = ring_mission(sup, m);
  AgvParams p;
  auto light = parked_at(m.center(m.index(6, 3)));
  auto heavy = light;
  adopt_trajectory(light, tr, ContainerKind::Std20);
  adopt_trajectory(heavy, tr, ContainerKind::HighCube40);
  while (light.time < tr.t_end()) {
    step_kinematics(light, p, 0.1);
    step_kinematics(heavy, p, 0.1);
    CHECK(light.pose_true == heavy.pose_true);
    CHECK(light.speed == heavy.speed);
  }
  CHECK(heavy.energy_used_Wh > light.energy_used_Wh);
}

TEST_CASE("mode transitions") {
  auto s = parked_at({0, 0});
  set_mode(s, Mode::MoveToTarget, 0.0, 0.0);
  CHECK(s.mode == Mode::MoveToTarget);
  s.mission_container = ContainerKind::Std20;
  set_mode(s, Mode::Loading, 60.0, 10.0);
  CHECK_FALSE(finish_dwell(s, 69.0));
  CHECK_THROWS_AS(set_mode(s, Mode::MoveToTarget, 0.0, 20.0), IllegalTransition);
  CHECK(finish_dwell(s, 70.0));
  CHECK(s.carried == ContainerKind::Std20);
  CHECK(s.mode == Mode::MoveToTarget);
  CHECK_THROWS_AS(set_mode(s, Mode::Loading, 60.0, 80.0), IllegalTransition);
  set_mode(s, Mode::Unloading, 60.0, 100.0);
  CHECK(finish_dwell(s, 160.0));
  CHECK(s.mode == Mode::Standby);
  CHECK_FALSE(s.carried);
  CHECK_THROWS_AS(set_mode(s, Mode::Unloading, 60.0, 170.0), IllegalTransition);
  CHECK_THROWS_AS(set_mode(s, Mode::Loading, 60.0, 170.0), IllegalTransition);
}

TEST_CASE("encoder tracking") {
  CHECK(track_wheel_reference(100, 100, 0.1) == WheelCommand{WheelCommand::Direction::Brake, 0.0});
  const auto sat = track_wheel_reference(0, 1000, 0.01);
  CHECK(sat.direction == WheelCommand::Direction::CW);
  CHECK(sat.duty == 1.0);
  const auto back = track_wheel_reference(50, 40, 0.05);
  CHECK(back.direction == WheelCommand::Direction::CCW);
  CHECK(back.duty == doctest::Approx(0.5));
  CHECK_THROWS_AS(track_wheel_reference(0, 1, 0.0), std::invalid_argument);

  // Plant: the counter moves by duty * k pulses per tick.
  for (std::int64_t ref : {-5000, -3, 0, 1, 777, 20000}) {
    std::int64_t count = 0;
    std::int64_t err = std::llabs(ref - count);
    int steps = 0;
    while (err != 0 && steps < 2000) {
      const auto cmd = track_wheel_reference(count, ref, 0.01);
      const auto move = std::llround(cmd.duty * 50.0);
      count += cmd.direction == WheelCommand::Direction::CW ? move : -move;
      const auto next = std::llabs(ref - count);
      CHECK(next <= err);
      err = next;
      ++steps;
    }
    CHECK(err == 0);
    CHECK(steps < 2000);
  }
}

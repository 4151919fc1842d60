#include "quayfleet/vehicle.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "quayfleet/errors.hpp"

namespace quayfleet {

const char* to_string(Mode m) {
  switch (m) {
    case Mode::Standby: return "Standby";
    case Mode::MoveToTarget: return "MoveToTarget";
    case Mode::Loading: return "Loading";
    case Mode::Unloading: return "Unloading";
  }
  return "?";
}

WheelCommand track_wheel_reference(std::int64_t current_count, std::int64_t reference_count,
                                   double gain) {
  if (!(gain > 0.0)) throw std::invalid_argument("track_wheel_reference: gain must be > 0");
  const std::int64_t err = reference_count - current_count;
  if (err == 0) return {WheelCommand::Direction::Brake, 0.0};
  const double duty = std::clamp(gain * std::abs(static_cast<double>(err)), 0.0, 1.0);
  return {err > 0 ? WheelCommand::Direction::CW : WheelCommand::Direction::CCW, duty};
}

void set_mode(VehicleState& state, Mode command, double dwell, double now) {
  const Mode from = state.mode;
  auto illegal = [&](const char* why) {
    throw IllegalTransition(std::string(to_string(from)) + " -> " + to_string(command) + ": " +
                            why);
  };
  switch (command) {
    case Mode::Standby:
      if (from == Mode::Loading || from == Mode::Unloading) illegal("dwell in progress");
      break;
    case Mode::MoveToTarget:
      if (from == Mode::Loading || from == Mode::Unloading) illegal("dwell in progress");
      break;
    case Mode::Loading:
      if (from != Mode::MoveToTarget) illegal("loading starts from MoveToTarget");
      if (state.carried) illegal("already carrying a container");
      state.mode_until = now + dwell;
      break;
    case Mode::Unloading:
      if (from != Mode::MoveToTarget) illegal("unloading starts from MoveToTarget");
      if (!state.carried) illegal("nothing to unload");
      state.mode_until = now + dwell;
      break;
  }
  state.mode = command;
}

bool finish_dwell(VehicleState& state, double now) {
  if (state.mode == Mode::Loading && now >= state.mode_until) {
    state.carried = state.mission_container;
    state.mode = Mode::MoveToTarget;
    return true;
  }
  if (state.mode == Mode::Unloading && now >= state.mode_until) {
    state.carried.reset();
    state.mission_container.reset();
    state.mode = Mode::Standby;
    return true;
  }
  return false;
}

void adopt_trajectory(VehicleState& state, Trajectory traj,
                      std::optional<ContainerKind> container) {
  if (state.mode == Mode::Standby) {
    set_mode(state, Mode::MoveToTarget, 0.0, state.time);
    state.mission_container = container;
  } else if (!state.mission_container) {
    state.mission_container = container;
  }
  state.path_progress = traj.progress_at(state.time);
  state.trajectory = std::move(traj);
}

namespace {

// Mode changes due by `t_end`, applied at their exact planned times.
void advance_modes(VehicleState& state, double t_end, StepEvents& ev) {
  if (!state.trajectory) return;
  const Trajectory& traj = *state.trajectory;
  const bool has_pickup = traj.pickup_boundary >= 0;
  for (int guard = 0; guard < 4; ++guard) {
    if (state.mode == Mode::MoveToTarget && has_pickup && !state.carried &&
        state.mission_container) {
      const double pa = traj.pickup_arrival_time();
      if (pa > t_end) return;
      set_mode(state, Mode::Loading, traj.dwell_s, pa);
      ev.loading_started = pa;
    } else if (state.mode == Mode::Loading) {
      if (state.mode_until > t_end) return;
      ev.loaded = state.mode_until;
      finish_dwell(state, state.mode_until);
    } else if (state.mode == Mode::MoveToTarget && (state.carried || !has_pickup)) {
      const double arr = traj.arrival_time();
      if (arr > t_end) return;
      if (state.carried) {
        set_mode(state, Mode::Unloading, traj.dwell_s, arr);
        ev.unloading_started = arr;
      } else {
        state.mode = Mode::Standby;
        ev.completed = arr;
        return;
      }
    } else if (state.mode == Mode::Unloading) {
      if (state.mode_until > t_end) return;
      ev.completed = state.mode_until;
      finish_dwell(state, state.mode_until);
      return;
    } else {
      return;
    }
  }
}

void move_wheels(VehicleState& state, double ds, double dtheta, const AgvParams& params) {
  const double half = 0.5 * params.wheelbase_d_m * dtheta;
  const double left = ds - half;
  const double right = ds + half;
  const double per_pulse = 2.0 * std::numbers::pi * params.wheel_radius_m / kPulsesPerRev;
  for (int w = 0; w < 4; ++w) {
    const bool is_left = w == static_cast<int>(WheelIndex::FrontLeft) ||
                         w == static_cast<int>(WheelIndex::RearLeft);
    auto& arc = state.wheel_arc[static_cast<std::size_t>(w)];
    auto& pulses = state.wheel_pulses[static_cast<std::size_t>(w)];
    arc += is_left ? left : right;
    const auto target = static_cast<std::int64_t>(std::llround(arc / per_pulse));
    state.wheel_commands[static_cast<std::size_t>(w)] = track_wheel_reference(pulses, target, 0.05);
    pulses = target;
  }
}

}  // namespace

StepEvents step_kinematics(VehicleState& state, const AgvParams& params, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("step_kinematics: dt must be > 0");
  StepEvents ev;
  const double t_new = state.time + dt;
  const std::optional<ContainerKind> carried_before = state.carried;

  if (!state.trajectory || state.mode == Mode::Standby) {
    if (state.speed > 0.0 && state.trajectory) {
      // Depleted: coast to a stop along the path.
    } else {
      state.time = t_new;
      state.speed = 0.0;
      state.wheel_commands.fill({});
      return ev;
    }
  }

  const Trajectory& traj = *state.trajectory;
  const double s_old = state.path_progress;
  const double v_old = state.speed;
  double s_new = 0.0;
  double v_new = 0.0;
  if (state.pack.depleted) {
    const double stop_t = v_old / params.a_max;
    const double tau = std::min(dt, stop_t);
    s_new = std::min(traj.length(), s_old + v_old * tau - 0.5 * params.a_max * tau * tau);
    v_new = std::max(0.0, v_old - params.a_max * dt);
  } else {
    s_new = std::max(s_old, traj.progress_at(t_new));
    v_new = traj.speed_at(t_new);
  }
  const double ds = s_new - s_old;

  if (ds > 0.0) {
    if (v_old == 0.0) {
      const double ahead = traj.tangent_at_s(s_old);
      state.reversing =
          std::abs(normalize_angle(ahead - state.pose_true.heading)) > std::numbers::pi / 2.0;
    }
    const Vec2 p = traj.point_at_s(s_new);
    double heading = traj.tangent_at_s(s_new);
    if (state.reversing) heading += std::numbers::pi;
    heading = normalize_angle(heading);
    const double dtheta = normalize_angle(heading - state.pose_true.heading);
    move_wheels(state, state.reversing ? -ds : ds, dtheta, params);
    state.pose_true = {p.x, p.y, heading};
    state.distance_m += ds;

    const double v_avg = ds / dt;
    const double a_avg = std::max(0.0, (v_new - v_old) / dt);
    const ContainerClass* cls = carried_before ? &container_class(*carried_before) : nullptr;
    ev.power_W = motor_power(required_force(params, cls, a_avg), v_avg);
    const bool was_depleted = state.pack.depleted;
    state.pack = consume_energy(state.pack, ev.power_W, dt);
    state.energy_used_Wh += ev.power_W * dt / 3600.0;
    ev.depleted_now = state.pack.depleted && !was_depleted;
  } else {
    state.wheel_commands.fill({});
  }
  state.path_progress = s_new;
  state.speed = v_new;

  if (state.pack.depleted) {
    if (v_new == 0.0) {
      state.mode = Mode::Standby;
      state.trajectory.reset();
    }
  } else {
    advance_modes(state, t_new, ev);
  }
  state.time = t_new;
  return ev;
}

}  // namespace quayfleet

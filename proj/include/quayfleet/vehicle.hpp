/**
 * @file vehicle.hpp
 * @brief Per-AGV state propagation: trajectory following under the speed and
 *        acceleration envelope, wheel encoders, motor control and job modes.
 */
#pragma once

#include <array>
#include <cstdint>
#include <optional>

#include "quayfleet/geometry.hpp"
#include "quayfleet/powertrain.hpp"
#include "quayfleet/trajectory.hpp"

namespace quayfleet {

enum class Mode : std::uint8_t { Standby, MoveToTarget, Loading, Unloading };

const char* to_string(Mode m);

/// Encoder resolution (pulses per wheel revolution).
inline constexpr int kPulsesPerRev = 1024;

enum class WheelIndex : std::uint8_t { FrontLeft, FrontRight, RearLeft, RearRight };

struct WheelCommand {
  enum class Direction : std::uint8_t { CW, CCW, Brake };
  Direction direction = Direction::Brake;
  double duty = 0.0;  ///< PWM duty in [0, 1]

  friend bool operator==(const WheelCommand&, const WheelCommand&) = default;
};

/// Proportional encoder tracking: compares the pulse counter with its
/// reference and drives toward it, braking when they match.
WheelCommand track_wheel_reference(std::int64_t current_count,
                                   std::int64_t reference_count, double gain);

struct VehicleState {
  std::int32_t id = 0;
  double time = 0.0;
  Pose pose_true;
  double speed = 0.0;  ///< magnitude, m/s
  Mode mode = Mode::Standby;
  std::array<std::int64_t, 4> wheel_pulses{};
  std::array<double, 4> wheel_arc{};  ///< true signed arc per wheel, m
  std::array<WheelCommand, 4> wheel_commands{};
  std::optional<ContainerKind> carried;
  BatteryPack pack;
  std::optional<Trajectory> trajectory;
  double path_progress = 0.0;
  bool reversing = false;

  std::optional<ContainerKind> mission_container;
  double mode_until = 0.0;
  double energy_used_Wh = 0.0;  ///< sum of P*dt/3600
  double distance_m = 0.0;
};

/// Mode changes with exact (unquantised) times, reported by step_kinematics.
struct StepEvents {
  std::optional<double> loading_started;
  std::optional<double> loaded;
  std::optional<double> unloading_started;
  std::optional<double> completed;
  bool depleted_now = false;
  double power_W = 0.0;
};

/// Moves the vehicle over [time, time+dt]. Follows the trajectory clock when
/// one is active; a depleted vehicle brakes at a_max and falls back to Standby.
StepEvents step_kinematics(VehicleState& state, const AgvParams& params, double dt);

/// Command-mode transitions. Loading/Unloading start a dwell that ends at
/// `now + dwell`; `finish_dwell` applies the cargo change afterwards.
void set_mode(VehicleState& state, Mode command, double dwell, double now);

/// Completes a Loading/Unloading dwell that has elapsed by `now`.
/// Returns true when a dwell was completed.
bool finish_dwell(VehicleState& state, double now);

/// Accepts a new mission (or a re-timed version of the current one).
void adopt_trajectory(VehicleState& state, Trajectory traj,
                      std::optional<ContainerKind> container);

}  // namespace quayfleet

/**
 * @file powertrain.hpp
 * @brief Electric drivetrain sizing and battery bookkeeping for a container AGV.
 */
#pragma once

#include <array>
#include <optional>
#include <string_view>
#include <vector>

namespace quayfleet {

enum class ContainerKind { Std20, Std40, HighCube40, HighCube45 };

/// ISO ocean container with tare and maximum payload.
struct ContainerClass {
  ContainerKind kind;
  std::string_view name;
  double tare_kg;
  double max_load_kg;
  double total_kg;
};

const std::array<ContainerClass, 4>& container_classes();
const ContainerClass& container_class(ContainerKind kind);
std::optional<ContainerKind> parse_container(std::string_view name);

/// Physical constants of one AGV.
struct AgvParams {
  double dead_weight_kg = 30000.0;
  double wheel_radius_m = 0.25;
  double v_max_straight = 6.0;  ///< m/s
  double v_max_curve = 3.0;     ///< m/s
  double v_max_crab = 1.0;      ///< m/s
  double a_max = 2.0;           ///< m/s^2
  double rolling_coeff_c = 0.015;
  double gravity = 9.8;
  double wheelbase_d_m = 3.0;   ///< track width used for differential odometry
  double safety_radius_m = 2.5;

  /// Throws std::invalid_argument when an invariant is violated.
  void validate() const;
};

/// Traction force (N) to accelerate the loaded AGV at `accel` against rolling
/// friction. A missing container means the AGV runs empty.
double required_force(const AgvParams& params,
                      const ContainerClass* container, double accel);

inline double motor_torque(double force_n, double wheel_radius_m) {
  return force_n * wheel_radius_m;
}

inline double motor_power(double force_n, double speed_mps) {
  return force_n * speed_mps;
}

double wheel_speed_rpm(double speed_mps, double wheel_radius_m);

struct MotorSpec {
  double torque_Nm;
  double power_W;
  double speed_rpm;
  int motor_count;
  double gear_ratio;
};

/// One row of the sizing table: drivetrain totals plus the two realizations
/// (one hub motor per wheel, or a single motor behind a 2:1 reducer).
struct SpecRow {
  ContainerClass container;
  double force_N;
  MotorSpec total;
  MotorSpec per_wheel_motor;
  MotorSpec single_geared_motor;
};

std::vector<SpecRow> agv_spec_table(const AgvParams& params);

// ---------------------------------------------------------------------------
// Batteries

enum class Chemistry { LiFePO4, LeadAcid, NiCd, NiMH, LiMnNiCo, LiCoO2 };

struct BatteryCell {
  Chemistry chemistry;
  std::string_view name;
  double cell_voltage_V;
  double cell_energy_Wh;
};

const std::array<BatteryCell, 6>& battery_cells();
const BatteryCell& battery_cell(Chemistry chemistry);
std::optional<Chemistry> parse_chemistry(std::string_view name);

struct BatteryPack {
  BatteryCell cell;
  int series_count = 0;
  int parallel_count = 0;
  double capacity_Wh = 0.0;
  double voltage_V = 0.0;
  double remaining_Wh = 0.0;
  bool depleted = false;
};

/// Smallest series/parallel arrangement meeting both voltage and energy.
BatteryPack size_battery_pack(const BatteryCell& cell, double bus_voltage_V,
                              double required_energy_Wh);

/// Drains power*dt/3600 Wh, clamping at zero and raising the depleted flag.
BatteryPack consume_energy(BatteryPack pack, double power_W, double dt_s);

}  // namespace quayfleet

#include "quayfleet/powertrain.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace quayfleet {

const std::array<ContainerClass, 4>& container_classes() {
  static const std::array<ContainerClass, 4> table{{
      {ContainerKind::Std20, "Std20", 2220.0, 22100.0, 24320.0},
      {ContainerKind::Std40, "Std40", 3740.0, 27397.0, 31137.0},
      {ContainerKind::HighCube40, "HighCube40", 3950.0, 29600.0, 33550.0},
      {ContainerKind::HighCube45, "HighCube45", 4470.0, 28390.0, 32860.0},
  }};
  return table;
}

const ContainerClass& container_class(ContainerKind kind) {
  return container_classes()[static_cast<std::size_t>(kind)];
}

std::optional<ContainerKind> parse_container(std::string_view name) {
  for (const auto& c : container_classes())
    if (c.name == name) return c.kind;
  return std::nullopt;
}

void AgvParams::validate() const {
  const double values[] = {dead_weight_kg, wheel_radius_m, v_max_straight,
                           v_max_curve,    v_max_crab,     a_max,
                           rolling_coeff_c, gravity,       wheelbase_d_m,
                           safety_radius_m};
  for (double v : values)
    if (!(v > 0.0)) throw std::invalid_argument("AgvParams: values must be > 0");
  if (!(v_max_crab <= v_max_curve && v_max_curve <= v_max_straight))
    throw std::invalid_argument("AgvParams: need v_crab <= v_curve <= v_straight");
}

double required_force(const AgvParams& params, const ContainerClass* container,
                      double accel) {
  const double mass =
      params.dead_weight_kg + (container ? container->total_kg : 0.0);
  const double normal = mass * params.gravity;
  return mass * accel + params.rolling_coeff_c * normal;
}

double wheel_speed_rpm(double speed_mps, double wheel_radius_m) {
  return speed_mps / (2.0 * std::numbers::pi * wheel_radius_m) * 60.0;
}

std::vector<SpecRow> agv_spec_table(const AgvParams& params) {
  std::vector<SpecRow> rows;
  for (const auto& c : container_classes()) {
    const double f = required_force(params, &c, params.a_max);
    const MotorSpec total{motor_torque(f, params.wheel_radius_m),
                          motor_power(f, params.v_max_straight),
                          wheel_speed_rpm(params.v_max_straight, params.wheel_radius_m),
                          1, 1.0};
    const MotorSpec per_wheel{total.torque_Nm / 4.0, total.power_W / 4.0,
                              total.speed_rpm, 4, 1.0};
    constexpr double gear = 2.0;
    const MotorSpec geared{total.torque_Nm / gear, total.power_W,
                           total.speed_rpm * gear, 1, gear};
    rows.push_back({c, f, total, per_wheel, geared});
  }
  return rows;
}

const std::array<BatteryCell, 6>& battery_cells() {
  static const std::array<BatteryCell, 6> table{{
      {Chemistry::LiFePO4, "LiFePO4", 3.2, 120.0},
      {Chemistry::LeadAcid, "LeadAcid", 2.0, 35.0},
      {Chemistry::NiCd, "NiCd", 1.2, 40.0},
      {Chemistry::NiMH, "NiMH", 1.2, 80.0},
      {Chemistry::LiMnNiCo, "LiMnNiCo", 3.7, 160.0},
      {Chemistry::LiCoO2, "LiCoO2", 3.7, 200.0},
  }};
  return table;
}

const BatteryCell& battery_cell(Chemistry chemistry) {
  return battery_cells()[static_cast<std::size_t>(chemistry)];
}

std::optional<Chemistry> parse_chemistry(std::string_view name) {
  for (const auto& c : battery_cells())
    if (c.name == name) return c.chemistry;
  return std::nullopt;
}

namespace {

// ceil(a/b) that does not round 640/3.2 = 200.00000000000003 up to 201.
int ceil_ratio(double a, double b) {
  const double q = a / b;
  const double r = std::round(q);
  if (std::abs(q - r) <= 1e-9 * std::max(1.0, r)) return static_cast<int>(r);
  return static_cast<int>(std::ceil(q));
}

}  // namespace

BatteryPack size_battery_pack(const BatteryCell& cell, double bus_voltage_V,
                              double required_energy_Wh) {
  if (!(bus_voltage_V > 0.0) || !(required_energy_Wh > 0.0))
    throw std::invalid_argument("size_battery_pack: voltage and energy must be > 0");
  BatteryPack pack;
  pack.cell = cell;
  pack.series_count = std::max(1, ceil_ratio(bus_voltage_V, cell.cell_voltage_V));
  const double string_Wh = pack.series_count * cell.cell_energy_Wh;
  pack.parallel_count = std::max(1, ceil_ratio(required_energy_Wh, string_Wh));
  pack.voltage_V = pack.series_count * cell.cell_voltage_V;
  pack.capacity_Wh = pack.series_count * pack.parallel_count * cell.cell_energy_Wh;
  pack.remaining_Wh = pack.capacity_Wh;
  return pack;
}

BatteryPack consume_energy(BatteryPack pack, double power_W, double dt_s) {
  if (power_W < 0.0 || !(dt_s > 0.0))
    throw std::invalid_argument("consume_energy: need power >= 0 and dt > 0");
  pack.remaining_Wh -= power_W * dt_s / 3600.0;
  if (pack.remaining_Wh <= 0.0) {
    pack.remaining_Wh = 0.0;
    pack.depleted = true;
  }
  return pack;
}

}  // namespace quayfleet

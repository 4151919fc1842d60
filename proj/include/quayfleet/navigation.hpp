/**
 * @file navigation.hpp
 * @brief Free-ranging localisation: wheel odometry, simulated GPS/DGPS and
 *        compass, and a precision-weighted pose blend.
 */
#pragma once

#include <array>
#include <cstdint>
#include <optional>

#include "quayfleet/geometry.hpp"

namespace quayfleet {

struct PoseEstimate {
  Pose pose;
  double sigma_xy = 0.0;       ///< position 1-sigma per axis, m
  double sigma_heading = 0.0;  ///< rad

  friend bool operator==(const PoseEstimate&, const PoseEstimate&) = default;
};

enum class GpsMode : std::uint8_t { Raw, DgpsRover, DgpsBase };

struct GpsReading {
  double x = 0.0;
  double y = 0.0;
  GpsMode mode = GpsMode::Raw;
  double timestamp = 0.0;
};

struct NoiseModel {
  double gps_sigma = 7.5;         ///< receiver noise, 2-D RMS (m)
  double base_sigma = 0.5;        ///< DGPS base receiver noise, 2-D RMS (m)
  Vec2 gps_bias_mean{0.0, 0.0};   ///< constant part of the common bias
  double gps_bias_sigma = 3.0;    ///< stationary spread of the common bias, per axis
  double gps_bias_tau_s = 300.0;  ///< correlation time of the common bias
  double compass_sigma = 0.02;    ///< rad
  double encoder_dropout = 0.0;   ///< fraction of steps with lost encoder pulses
  double wheel_radius_sigma = 0.003;  ///< per-wheel systematic radius error (relative)
  double wheel_slip_sigma = 0.02;     ///< per-step relative arc noise
  double odometry_drift = 0.01;       ///< sigma_xy growth per metre travelled
  double heading_drift = 0.001;       ///< sigma_heading growth per metre travelled
  std::uint64_t seed = 0;

  /// All noise switched off.
  static NoiseModel noiseless();
};

/// Odometry: pulses to arc length.
double odometry_distance(double pulse_count, double pulses_per_rev, double wheel_radius);

/// Heading change from the two side arcs; positive when the right (outer)
/// side travels further, i.e. a left turn.
double heading_delta(double inner_arc, double outer_arc, double wheelbase_d);

/// Advances an estimate by one odometry increment. Uncertainty grows with
/// distance travelled.
PoseEstimate dead_reckon(const PoseEstimate& prev, double left_arc, double right_arc,
                         double wheelbase_d, double odometry_drift = 0.01,
                         double heading_drift = 0.001);

/// Slowly varying bias shared by every receiver at time t.
Vec2 gps_common_bias(const NoiseModel& noise, double t);

GpsReading sample_gps(const Pose& true_pose, const NoiseModel& noise, GpsMode mode,
                      double t, std::uint64_t entity_id = 0);

/// Subtracts the base receiver's observed error from the rover reading.
/// Throws TimestampMismatch when the two readings are not simultaneous.
GpsReading dgps_correct(const GpsReading& rover, const GpsReading& base,
                        const Pose& base_truth);

double sample_compass(double true_heading, const NoiseModel& noise, double t,
                      std::uint64_t entity_id = 0);

/// Per-axis standard deviation of one GPS reading in the given mode.
double gps_axis_sigma(const NoiseModel& noise, GpsMode mode);

/// Precision-weighted blend of prediction and absolute fixes. Missing sensors
/// leave the corresponding part of the prediction untouched.
PoseEstimate fuse_pose(const PoseEstimate& prediction,
                       const std::optional<GpsReading>& gps, double gps_sigma,
                       const std::optional<double>& compass, double compass_sigma);

/// On-board localisation of one AGV: dead reckoning from the four encoder
/// counters (with per-wheel radius error, slip and dropout from the noise
/// model), corrected by GPS and compass fixes.
class Localizer {
 public:
  Localizer(std::uint64_t entity_id, const Pose& start, const NoiseModel& noise,
            double wheel_radius, double wheelbase_d, int pulses_per_rev = 1024);

  /// Integrates the counter change since the previous call. `step` keys the
  /// per-step noise draws.
  void odometry(const std::array<std::int64_t, 4>& pulses, std::uint64_t step);
  void gps_fix(const GpsReading& reading, double axis_sigma);
  void compass_fix(double heading);

  const PoseEstimate& estimate() const { return est_; }

 private:
  std::uint64_t id_;
  NoiseModel noise_;
  double wheel_radius_;
  double wheelbase_;
  int ppr_;
  std::array<double, 4> radius_error_{};
  std::array<std::int64_t, 4> last_{};
  PoseEstimate est_;
};

}  // namespace quayfleet

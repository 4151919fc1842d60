#include "quayfleet/navigation.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "quayfleet/errors.hpp"
#include "quayfleet/random.hpp"

namespace quayfleet {

namespace {

constexpr std::uint64_t kTagBias = 0xb1a5;
constexpr std::uint64_t kTagGps = 0x6b5;
constexpr std::uint64_t kTagCompass = 0xc0a5;
constexpr std::uint64_t kTagRadius = 0x7ad;
constexpr std::uint64_t kTagSlip = 0x5119;
constexpr std::uint64_t kTagDropout = 0xd209;
constexpr int kBiasTerms = 16;

// Variance-weighted step toward an observation.
double blend_weight(double sigma_prior, double sigma_obs) {
  const double vp = sigma_prior * sigma_prior;
  const double vo = sigma_obs * sigma_obs;
  if (vp + vo == 0.0) return 0.0;
  return vp / (vp + vo);
}

double posterior_sigma(double sigma_prior, double sigma_obs) {
  if (sigma_prior == 0.0 || sigma_obs == 0.0) return 0.0;
  return std::sqrt(1.0 / (1.0 / (sigma_prior * sigma_prior) + 1.0 / (sigma_obs * sigma_obs)));
}

}  // namespace

NoiseModel NoiseModel::noiseless() {
  NoiseModel n;
  n.gps_sigma = 0.0;
  n.base_sigma = 0.0;
  n.gps_bias_sigma = 0.0;
  n.compass_sigma = 0.0;
  n.wheel_radius_sigma = 0.0;
  n.wheel_slip_sigma = 0.0;
  return n;
}

double odometry_distance(double pulse_count, double pulses_per_rev, double wheel_radius) {
  if (!(pulses_per_rev > 0.0)) throw std::invalid_argument("pulses_per_rev must be > 0");
  return pulse_count / pulses_per_rev * 2.0 * std::numbers::pi * wheel_radius;
}

double heading_delta(double inner_arc, double outer_arc, double wheelbase_d) {
  if (!(wheelbase_d > 0.0)) throw std::invalid_argument("wheelbase must be > 0");
  return (outer_arc - inner_arc) / wheelbase_d;
}

PoseEstimate dead_reckon(const PoseEstimate& prev, double left_arc, double right_arc,
                         double wheelbase_d, double odometry_drift, double heading_drift) {
  const double ds = 0.5 * (left_arc + right_arc);
  const double dtheta = heading_delta(left_arc, right_arc, wheelbase_d);
  PoseEstimate out = prev;
  const double mid = prev.pose.heading + 0.5 * dtheta;
  out.pose.x += ds * std::cos(mid);
  out.pose.y += ds * std::sin(mid);
  out.pose.heading = normalize_angle(prev.pose.heading + dtheta);
  // Wheels on both sides roll; the larger side arc bounds the travelled distance.
  const double travelled = std::max(std::abs(left_arc), std::abs(right_arc));
  out.sigma_xy += odometry_drift * travelled;
  out.sigma_heading += heading_drift * travelled;
  return out;
}

Vec2 gps_common_bias(const NoiseModel& noise, double t) {
  Vec2 b = noise.gps_bias_mean;
  if (noise.gps_bias_sigma == 0.0) return b;
  const double amp = noise.gps_bias_sigma * std::sqrt(2.0 / kBiasTerms);
  for (int axis = 0; axis < 2; ++axis) {
    double sum = 0.0;
    for (int i = 0; i < kBiasTerms; ++i) {
      const auto k = static_cast<std::uint64_t>(axis * kBiasTerms + i);
      const double u = to_unit(hash_key({noise.seed, kTagBias, k, 1}));
      const double phase = 2.0 * std::numbers::pi * to_unit(hash_key({noise.seed, kTagBias, k, 2}));
      // Cauchy-distributed frequencies give an exponential autocorrelation.
      const double omega =
          std::abs(std::tan(std::numbers::pi * (0.5 * u))) / noise.gps_bias_tau_s;
      sum += std::cos(omega * t + phase);
    }
    (axis == 0 ? b.x : b.y) += amp * sum;
  }
  return b;
}

double gps_axis_sigma(const NoiseModel& noise, GpsMode mode) {
  const double g2 = noise.gps_sigma * noise.gps_sigma / 2.0;
  const double base2 = noise.base_sigma * noise.base_sigma / 2.0;
  switch (mode) {
    case GpsMode::Raw:
      return std::sqrt(g2 + noise.gps_bias_sigma * noise.gps_bias_sigma);
    case GpsMode::DgpsRover:
      return std::sqrt(g2 + base2);
    case GpsMode::DgpsBase:
      return std::sqrt(base2);
  }
  return 0.0;
}

GpsReading sample_gps(const Pose& true_pose, const NoiseModel& noise, GpsMode mode, double t,
                      std::uint64_t entity_id) {
  const double drms = mode == GpsMode::DgpsBase ? noise.base_sigma : noise.gps_sigma;
  const double axis_sigma = drms / std::numbers::sqrt2;
  const Vec2 bias = gps_common_bias(noise, t);
  const auto tk = time_key(t);
  const auto m = static_cast<std::uint64_t>(mode);
  GpsReading r;
  r.x = true_pose.x + bias.x + axis_sigma * keyed_normal(hash_key({noise.seed, kTagGps, entity_id, m, tk, 0}));
  r.y = true_pose.y + bias.y + axis_sigma * keyed_normal(hash_key({noise.seed, kTagGps, entity_id, m, tk, 1}));
  r.mode = mode;
  r.timestamp = t;
  return r;
}

GpsReading dgps_correct(const GpsReading& rover, const GpsReading& base, const Pose& base_truth) {
  if (rover.timestamp != base.timestamp)
    throw TimestampMismatch("rover t=" + std::to_string(rover.timestamp) +
                            " base t=" + std::to_string(base.timestamp));
  GpsReading out = rover;
  out.x = rover.x - (base.x - base_truth.x);
  out.y = rover.y - (base.y - base_truth.y);
  out.mode = GpsMode::DgpsRover;
  return out;
}

double sample_compass(double true_heading, const NoiseModel& noise, double t,
                      std::uint64_t entity_id) {
  const double n = keyed_normal(hash_key({noise.seed, kTagCompass, entity_id, time_key(t)}));
  return normalize_angle(true_heading + noise.compass_sigma * n);
}

PoseEstimate fuse_pose(const PoseEstimate& prediction, const std::optional<GpsReading>& gps,
                       double gps_sigma, const std::optional<double>& compass,
                       double compass_sigma) {
  PoseEstimate out = prediction;
  if (gps) {
    const double w = blend_weight(prediction.sigma_xy, gps_sigma);
    out.pose.x += w * (gps->x - prediction.pose.x);
    out.pose.y += w * (gps->y - prediction.pose.y);
    out.sigma_xy = posterior_sigma(prediction.sigma_xy, gps_sigma);
  }
  if (compass) {
    const double w = blend_weight(prediction.sigma_heading, compass_sigma);
    out.pose.heading =
        normalize_angle(prediction.pose.heading + w * normalize_angle(*compass - prediction.pose.heading));
    out.sigma_heading = posterior_sigma(prediction.sigma_heading, compass_sigma);
  }
  return out;
}

Localizer::Localizer(std::uint64_t entity_id, const Pose& start, const NoiseModel& noise,
                     double wheel_radius, double wheelbase_d, int pulses_per_rev)
    : id_(entity_id), noise_(noise), wheel_radius_(wheel_radius), wheelbase_(wheelbase_d),
      ppr_(pulses_per_rev) {
  est_.pose = start;
  for (std::uint64_t w = 0; w < 4; ++w)
    radius_error_[w] =
        noise_.wheel_radius_sigma * keyed_normal(hash_key({noise_.seed, kTagRadius, id_, w}));
}

void Localizer::odometry(const std::array<std::int64_t, 4>& pulses, std::uint64_t step) {
  std::array<double, 4> arc{};
  const bool dropped = noise_.encoder_dropout > 0.0 &&
                       to_unit(hash_key({noise_.seed, kTagDropout, id_, step})) <
                           noise_.encoder_dropout;
  for (std::size_t w = 0; w < 4; ++w) {
    const auto delta = pulses[w] - last_[w];
    if (dropped || delta == 0) continue;
    const double slip = noise_.wheel_slip_sigma *
                        keyed_normal(hash_key({noise_.seed, kTagSlip, id_, step, w}));
    arc[w] = odometry_distance(static_cast<double>(delta), ppr_, wheel_radius_) *
             (1.0 + radius_error_[w]) * (1.0 + slip);
  }
  last_ = pulses;
  // Front-left, front-right, rear-left, rear-right.
  const double left = 0.5 * (arc[0] + arc[2]);
  const double right = 0.5 * (arc[1] + arc[3]);
  est_ = dead_reckon(est_, left, right, wheelbase_, noise_.odometry_drift, noise_.heading_drift);
}

void Localizer::gps_fix(const GpsReading& reading, double axis_sigma) {
  est_ = fuse_pose(est_, reading, axis_sigma, std::nullopt, 0.0);
}

void Localizer::compass_fix(double heading) {
  est_ = fuse_pose(est_, std::nullopt, 0.0, heading, noise_.compass_sigma);
}

}  // namespace quayfleet

/**
 * @file trajectory.hpp
 * @brief Spatial path pieces, time-optimal speed profiles and timed trajectories.
 *
 * A path of cells is turned into pieces, one per cell: a half piece out of
 * the start cell centre, a full piece per intermediate cell (straight, or a
 * quarter arc of radius cell_size/2 where the path turns) and a half piece
 * into the goal centre. Piece boundaries are where an AGV may come to rest.
 */
#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "quayfleet/geometry.hpp"
#include "quayfleet/powertrain.hpp"
#include "quayfleet/terminal_map.hpp"

namespace quayfleet {

enum class SegmentKind : std::uint8_t { Straight, Curve, Crab };

const char* to_string(SegmentKind k);

/// Straight, curve or crab limit from the AGV envelope.
double speed_limit_for(SegmentKind kind, const AgvParams& params);

struct Piece {
  CellIndex cell = 0;
  SegmentKind kind = SegmentKind::Straight;
  double length = 0.0;
  double v_limit = 0.0;
  Vec2 start;
  Vec2 end;
  // Arc pieces only (radius > 0).
  Vec2 arc_center;
  double radius = 0.0;
  double start_angle = 0.0;
  double sweep = 0.0;  ///< signed, +pi/2 for a left turn

  Vec2 point_at(double u) const;     ///< u in [0, length]
  double tangent_at(double u) const; ///< direction of travel (rad)

  friend bool operator==(const Piece&, const Piece&) = default;
};

/// Pieces for a cell path. A single-cell path has no pieces.
std::vector<Piece> build_pieces(const TerminalMap& map,
                                std::span<const CellIndex> path,
                                const AgvParams& params);

/// One constant-acceleration phase of a speed profile.
struct Phase {
  double s0 = 0.0;
  double s1 = 0.0;
  double v0 = 0.0;
  double accel = 0.0;
  double duration = 0.0;
};

/// Speed cap over [from, to) of the global arc-length coordinate.
struct SpeedCap {
  double from;
  double to;
  double v_limit;
};

/// Time-optimal profile from (s_a, v_a) to rest at s_b under piecewise speed
/// caps and |accel| <= a_max. Returns nullopt when v_a cannot be honoured
/// (too fast for a cap ahead or for stopping by s_b).
std::optional<std::vector<Phase>> plan_run(std::span<const SpeedCap> caps,
                                           double s_a, double v_a, double s_b,
                                           double a_max);

double profile_duration(std::span<const Phase> phases);

struct MotionSegment {
  double t0 = 0.0;
  double t1 = 0.0;
  double s0 = 0.0;
  double v0 = 0.0;
  double accel = 0.0;

  double s_at(double t) const {
    const double tau = t - t0;
    return s0 + v0 * tau + 0.5 * accel * tau * tau;
  }
  double v_at(double t) const { return v0 + accel * (t - t0); }
  bool is_hold() const { return v0 == 0.0 && accel == 0.0; }

  friend bool operator==(const MotionSegment&, const MotionSegment&) = default;
};

struct CellTiming {
  CellIndex cell;
  double enter_t;
  double exit_t;
};

/// Path plus timed speed profile for one mission: drive to the pickup bay,
/// dwell, drive to the drop-off bay, dwell, then stay parked.
struct Trajectory {
  std::int32_t agv = -1;
  std::int32_t job = -1;
  std::uint32_t revision = 0;
  std::vector<CellIndex> path;
  std::vector<Piece> pieces;
  std::vector<MotionSegment> motion;
  std::int32_t pickup_boundary = -1;  ///< piece boundary of the pickup bay
  double dwell_s = 0.0;

  /// Arc length at each piece boundary (size pieces+1).
  std::vector<double> boundary_s() const;
  double length() const;

  double t_begin() const { return motion.empty() ? 0.0 : motion.front().t0; }
  double t_end() const { return motion.empty() ? 0.0 : motion.back().t1; }

  double progress_at(double t) const;
  double speed_at(double t) const;
  double accel_at(double t) const;
  Vec2 point_at_s(double s) const;
  double tangent_at_s(double s) const;
  Vec2 position_at(double t) const { return point_at_s(progress_at(t)); }
  /// Index of the piece containing arc length s (last piece at the end).
  std::size_t piece_index_at(double s) const;

  /// First time the AGV reaches arc length s.
  double time_reaching(double s) const;
  /// Rest-arrival at the drop-off bay (start of the final dwell).
  double arrival_time() const;
  /// Rest-arrival at the pickup bay.
  double pickup_arrival_time() const;

  /// Per piece: departure from its entry boundary and arrival at its exit.
  std::vector<CellTiming> cell_timing() const;
  std::uint64_t path_hash() const;

  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

std::uint64_t hash_path(std::span<const CellIndex> path);

/// Cells whose square lies within `radius` of some point of the piece.
std::vector<CellIndex> piece_footprint(const TerminalMap& map, const Piece& piece,
                                       double radius);
std::vector<CellIndex> point_footprint(const TerminalMap& map, Vec2 p, double radius);

inline constexpr double kForever = std::numeric_limits<double>::infinity();

struct Occupancy {
  CellIndex cell;
  double t0;
  double t1;  ///< kForever for a parked AGV
};

/// Cell occupancy implied by a trajectory from `from_t` on, including the
/// open-ended parking interval after the final dwell. Intervals of the same
/// cell that touch or overlap are merged.
std::vector<Occupancy> trajectory_occupancy(const TerminalMap& map,
                                            const Trajectory& traj,
                                            double radius,
                                            double from_t = -kForever);

}  // namespace quayfleet

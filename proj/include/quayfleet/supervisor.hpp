/**
 * @file supervisor.hpp
 * @brief Priority-based cooperative supervisory control of the AGV fleet.
 *
 * Paths are planned on the static map only. Cooperation happens purely in
 * time: each new mission is fitted around the reservations of missions
 * already running, by waiting or slowing at piece boundaries. A priority
 * mission instead gets the unconstrained time-optimal plan and every
 * running mission it crosses is re-timed around it on its unchanged path.
 */
#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <vector>

#include "quayfleet/comms.hpp"
#include "quayfleet/powertrain.hpp"
#include "quayfleet/reservation.hpp"
#include "quayfleet/terminal_map.hpp"
#include "quayfleet/trajectory.hpp"

namespace quayfleet {

/// Time-optimal cell path (edge cost = piece length / speed limit). Ties go
/// to fewer turns, then to the lexicographically smaller cell sequence.
/// Bays are used only as start or goal. Throws Unreachable.
std::vector<CellIndex> plan_path(const TerminalMap& map, CellIndex start, CellIndex goal,
                                 const AgvParams& params);

/// Sum of piece length / limit along a path.
double free_flight_cost(const TerminalMap& map, std::span<const CellIndex> path,
                        const AgvParams& params);

struct ScheduleOptions {
  double safety_radius = 2.5;
  double horizon_s = 3600.0;  ///< give up when arrival would exceed t0 + horizon
};

/// Where the scheduler starts: at rest on a piece boundary (possibly with a
/// minimum departure time), or in motion at an arbitrary arc length.
struct ScheduleStart {
  double t = 0.0;
  double s = 0.0;
  double v = 0.0;
  std::int32_t boundary = 0;  ///< used when v == 0
  double min_departure = 0.0;
};

/// Earliest-arrival timing of fixed pieces against the reservation table.
/// Mandatory rests: the pickup boundary (at least `dwell`) and the final
/// boundary (dwell, then parked indefinitely). The path is never changed.
/// Throws Unschedulable.
std::vector<MotionSegment> schedule_motion(const TerminalMap& map,
                                           std::span<const Piece> pieces,
                                           std::int32_t pickup_boundary, double dwell,
                                           const ScheduleStart& start,
                                           const ReservationTable& table,
                                           std::int32_t agv, const AgvParams& params,
                                           const ScheduleOptions& options);

/// Single-leg velocity scheduling: fits a path starting at rest at t0 around
/// existing reservations and inserts the result into the table.
Trajectory schedule_velocity(const TerminalMap& map, std::span<const CellIndex> path,
                             ReservationTable& table, const AgvParams& params,
                             std::int32_t agv, double t0,
                             const ScheduleOptions& options = {});

// ---------------------------------------------------------------------------
// Collision oracle

/// Everything one AGV did: its initial parking spot and the missions it
/// executed in order (a re-timed mission replaces its predecessor).
struct AgvTimeline {
  Vec2 initial;
  std::vector<Trajectory> legs;

  Vec2 position_at(double t) const;
  double t_end() const;
};

struct Conflict {
  double t;
  std::int32_t agv_a;
  std::int32_t agv_b;
  double distance;
};

/// Brute-force sweep: samples every AGV at `step` and reports, per pair, the
/// first instant their distance drops below 2 * safety radius.
std::vector<Conflict> detect_conflicts(std::span<const AgvTimeline> timelines,
                                       const AgvParams& params, double step = 0.05);
std::vector<Conflict> detect_conflicts(std::span<const Trajectory> trajectories,
                                       const AgvParams& params, double step = 0.05);

// ---------------------------------------------------------------------------
// Supervisor

struct SupervisorConfig {
  double headway_s = 1.0;
  double dwell_s = 60.0;
  double command_lead_s = 0.05;  ///< plans start this long after the decision
  double schedule_horizon_s = 3600.0;
  double lost_timeout_s = 5.0;
  double min_battery_fraction = 0.05;
};

struct AgvView {
  std::int32_t id = 0;
  std::optional<StatusPayload> last_status;
  double last_heard = 0.0;
  bool lost = false;
  std::optional<Trajectory> active;
  std::optional<ContainerKind> active_container;
  bool active_is_priority = false;
  CellIndex parked_cell = 0;
  double parked_since = 0.0;
  std::deque<std::int32_t> mission_queue;
  std::int64_t priority_order = 0;  ///< order of the current mission's assignment
  std::uint32_t revision = 0;
  double battery_capacity_Wh = 0.0;
  double battery_Wh = 0.0;
  AgvTimeline timeline;
};

struct FleetView {
  std::vector<AgvView> agvs;
};

struct SupervisorEvent {
  enum class Type : std::uint8_t { Assign, PriorityAssign, Retime, Complete, Deferred, Reposition };
  Type type;
  double t;
  std::int32_t agv;
  std::int32_t job;
  std::uint64_t path_hash = 0;
  std::uint64_t old_path_hash = 0;
  double arrival = 0.0;
  double old_arrival = 0.0;
  double free_flight_arrival = 0.0;  ///< empty-terminal plan (priority only)
  bool conflict_existed = false;
  std::vector<std::int32_t> retimed = {};
};

const char* to_string(SupervisorEvent::Type t);

struct AssignmentDelta {
  std::int32_t agv = -1;  ///< vehicle chosen for the job
  std::vector<CommandPayload> commands;  ///< new or re-timed missions to send
};

class Supervisor {
 public:
  Supervisor(const TerminalMap& map, AgvParams params, SupervisorConfig config,
             std::span<const CellIndex> start_cells,
             std::span<const double> battery_capacity_Wh);

  /// Assigns `job` to the nearest available AGV. Throws NoVehicle when no
  /// AGV is idle with enough charge, Unschedulable when no timing fits
  /// (a priority job whose optimal plan cannot be protected is deferred
  /// with Unschedulable too, leaving all state unchanged).
  AssignmentDelta assign_mission(const Job& job, double now);

  /// Breaks a bay deadlock for `job`: when idle AGVs are parked on both its
  /// pick-up and drop-off bays, the one on the drop-off moves to the nearest
  /// free bay. Returns nothing when there is no such deadlock or no way out.
  std::optional<AssignmentDelta> clear_dropoff_bay(const Job& job, double now);

  /// Applies a vehicle status report. Throws UnknownVehicle.
  void on_status(std::int32_t agv, const StatusPayload& status, double now);

  /// Marks AGVs silent for longer than the timeout as lost.
  void tick(double now);

  bool has_idle_vehicle() const;

  const FleetView& fleet() const { return fleet_; }
  const ReservationTable& reservations() const { return table_; }
  const std::vector<SupervisorEvent>& events() const { return events_; }
  const TerminalMap& map() const { return map_; }
  const AgvParams& params() const { return params_; }
  const SupervisorConfig& config() const { return config_; }

  /// Believed cell of an AGV from its last status (parking cell when idle).
  CellIndex believed_cell(const AgvView& view) const;

  /// Free-flight mission plan from `from` starting at rest at t0.
  Trajectory plan_free_flight(std::int32_t agv, CellIndex from, const Job& job,
                              double t0) const;

 private:
  struct MissionGeometry {
    std::vector<CellIndex> path;
    std::vector<Piece> pieces;
    std::int32_t pickup_boundary;
  };
  MissionGeometry mission_geometry(CellIndex from, const Job& job) const;
  std::optional<std::int32_t> select_vehicle(const Job& job) const;
  bool available(const AgvView& v) const;
  ScheduleOptions schedule_options() const;
  std::vector<std::int32_t> conflicting_agvs(std::int32_t agv,
                                             const std::vector<Occupancy>& occ) const;
  /// Re-times the unexecuted part of `agv`'s mission from t_c on. Its
  /// reservations from t_c on must already be removed.
  Trajectory retime(const AgvView& view, double t_c) const;
  void install(AgvView& view, Trajectory traj, double from_t, bool replace_leg);

  const TerminalMap& map_;
  AgvParams params_;
  SupervisorConfig config_;
  FleetView fleet_;
  ReservationTable table_;
  std::vector<SupervisorEvent> events_;
  std::int64_t next_order_ = 1;
};

}  // namespace quayfleet

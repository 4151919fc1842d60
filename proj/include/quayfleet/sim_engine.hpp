/**
 * @file sim_engine.hpp
 * @brief Fixed-timestep simulation of a terminal: vehicles, localisation,
 *        radio link and supervisor, with a ground-truth collision check,
 *        a CSV trace and summary metrics.
 */
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "quayfleet/comms.hpp"
#include "quayfleet/navigation.hpp"
#include "quayfleet/powertrain.hpp"
#include "quayfleet/supervisor.hpp"
#include "quayfleet/terminal_map.hpp"

namespace quayfleet {

/// Grid coordinate (x east, y north; y = 0 is the southern row).
struct GridPoint {
  int x = 0;
  int y = 0;
  friend bool operator==(const GridPoint&, const GridPoint&) = default;
};

struct JobSpec {
  FlowCategory flow = FlowCategory::Transit;
  ContainerKind container = ContainerKind::Std20;
  GridPoint pickup;
  GridPoint dropoff;
  double release_time = 0.0;
  bool priority = false;
};

struct JobGeneration {
  int count = 0;
  FlowMix mix;
  JobGenOptions options;
  std::optional<std::uint64_t> seed;  ///< defaults to the scenario seed
};

struct BatterySpec {
  Chemistry chemistry = Chemistry::LiFePO4;
  double bus_voltage_V = 640.0;
  double energy_Wh = 200000.0;
};

struct EngineConfig {
  double dt = 0.1;
  double horizon_s = 3600.0;
  double dwell_s = 60.0;
  double headway_s = 1.0;
  double retry_s = 10.0;
  double status_period_s = 1.0;
  double gps_period_s = 1.0;
  double ack_timeout_s = 1.0;
  bool use_dgps = false;
};

struct Scenario {
  MapSpec map;
  AgvParams params;
  std::vector<GridPoint> starts;
  BatterySpec battery;
  std::vector<JobSpec> jobs;
  std::optional<JobGeneration> generate;
  NoiseModel noise;
  ChannelModel channel;
  EngineConfig engine;
  std::uint64_t seed = 0;
};

/// Parses a version-1 scenario document. Throws ScenarioInvalid.
Scenario parse_scenario(const std::string& json_text);
Scenario load_scenario(const std::string& path);
std::string scenario_to_json(const Scenario& scenario);

/// Checks dt/horizon, the map, start cells (distinct, road or bay, at least
/// two safety radii apart) and job endpoints. Throws ScenarioInvalid.
void validate_scenario(const Scenario& scenario, const TerminalMap& map);

struct Metrics {
  int jobs_completed = 0;
  int jobs_failed = 0;
  double makespan_s = 0.0;
  double throughput_per_h = 0.0;
  double total_distance_m = 0.0;
  double total_energy_Wh = 0.0;
  double mean_job_wait_s = 0.0;
  int collision_count = 0;
  std::vector<double> priority_delay_s;  ///< assignment minus release, per priority job

  friend bool operator==(const Metrics&, const Metrics&) = default;
};

struct Violation {
  double t;
  std::int32_t agv_a;
  std::int32_t agv_b;  ///< -1 for an obstacle or off-map violation
  double distance;
};

/// Ground-truth check: pairs closer than two safety radii, and AGVs whose
/// centre lies on an obstacle or off the map.
std::vector<Violation> check_collisions(const TerminalMap& map,
                                        const std::vector<Pose>& poses,
                                        const AgvParams& params, double t);

struct JobOutcome {
  Job job;
  std::optional<std::int32_t> agv;
  std::optional<double> assigned_t;
  std::optional<double> completed_t;
  int attempts = 0;
};

struct RunResult {
  Metrics metrics;
  std::string trace;  ///< CSV, header first
  std::uint64_t trace_hash = 0;
  std::vector<Violation> violations;
  std::vector<JobOutcome> jobs;
  std::vector<SupervisorEvent> events;
  std::vector<AgvTimeline> timelines;
  std::vector<double> energy_from_power_Wh;  ///< per AGV, sum of P*dt/3600
  std::vector<double> battery_drain_Wh;      ///< per AGV, capacity - remaining
  std::vector<double> distance_m;            ///< per AGV, true path distance
  std::vector<std::array<std::int64_t, 4>> wheel_pulses;
  std::vector<std::array<double, 4>> wheel_arc;
  std::vector<std::string> frames;  ///< hex frames when dumping is enabled
  std::size_t messages_sent = 0;
  std::size_t messages_dropped = 0;
  double end_time = 0.0;
};

struct RunOptions {
  bool dump_frames = false;
};

RunResult run(const Scenario& scenario, const RunOptions& options = {});

inline constexpr const char* kTraceHeader =
    "t,kind,id,x,y,heading,speed,mode,energy_Wh,est_x,est_y,est_err_m";

/// Metrics recomputed from a trace alone.
Metrics compute_metrics(const std::string& trace);

std::uint64_t hash_trace(const std::string& trace);

std::string metrics_to_json(const Metrics& m);

/// Random ring terminal with a small fleet and mixed-priority jobs, used by
/// the randomized property suite.
Scenario random_scenario(std::uint64_t seed);

}  // namespace quayfleet

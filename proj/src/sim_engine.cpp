#include "quayfleet/sim_engine.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>

#include "quayfleet/errors.hpp"
#include "quayfleet/random.hpp"
#include "quayfleet/vehicle.hpp"

namespace quayfleet {

namespace {

constexpr double kNever = std::numeric_limits<double>::infinity();

class TraceWriter {
 public:
  TraceWriter() {
    out_ = kTraceHeader;
    out_ += '\n';
  }

  void agv(double t, const VehicleState& v, const PoseEstimate& est) {
    const double err = distance(est.pose.position(), v.pose_true.position());
    char buf[320];
    std::snprintf(buf, sizeof buf, "%.6f,agv,%d,%.6f,%.6f,%.6f,%.6f,%s,%.6f,%.6f,%.6f,%.6f\n", t,
                  v.id, v.pose_true.x, v.pose_true.y, v.pose_true.heading, v.speed,
                  to_string(v.mode), v.energy_used_Wh, est.pose.x, est.pose.y, err);
    out_ += buf;
  }

  /// Event rows keep the column layout; `what` goes into the mode column as
  /// `<type>|<job>|<detail>`.
  void event(double t, std::int32_t id, const std::string& type, std::int32_t job,
             const std::string& detail = "") {
    char buf[96];
    std::snprintf(buf, sizeof buf, "%.6f,event,%d,,,,,", t, id);
    out_ += buf;
    out_ += type;
    out_ += '|';
    out_ += std::to_string(job);
    out_ += '|';
    out_ += detail;
    out_ += ",,,,\n";
  }

  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

struct PendingCommand {
  std::int32_t agv;
  CommandPayload payload;
  double last_sent;
};

struct JobState {
  JobOutcome outcome;
  bool released = false;
  bool abandoned = false;
  double next_try = 0.0;
};

std::string hex64(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, v);
  return buf;
}

}  // namespace

std::vector<Violation> check_collisions(const TerminalMap& map, const std::vector<Pose>& poses,
                                        const AgvParams& params, double t) {
  std::vector<Violation> out;
  const double limit = 2.0 * params.safety_radius_m;
  for (std::size_t a = 0; a < poses.size(); ++a) {
    const auto cell = map.cell_at(poses[a].position());
    if (!cell || map.kind(*cell) == CellKind::Obstacle)
      out.push_back({t, static_cast<std::int32_t>(a), -1, 0.0});
    for (std::size_t b = a + 1; b < poses.size(); ++b) {
      const double d = distance(poses[a].position(), poses[b].position());
      if (d < limit)
        out.push_back({t, static_cast<std::int32_t>(a), static_cast<std::int32_t>(b), d});
    }
  }
  return out;
}

std::uint64_t hash_trace(const std::string& trace) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : trace) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

RunResult run(const Scenario& sc, const RunOptions& options) {
  TerminalMap map;
  try {
    map = build_map(sc.map);
  } catch (const InvalidMap& e) {
    throw ScenarioInvalid(e.what());
  }
  validate_scenario(sc, map);
  const EngineConfig& cfg = sc.engine;
  const AgvParams& params = sc.params;

  NoiseModel noise = sc.noise;
  noise.seed = hash_key({sc.seed, 0x4e01});
  ChannelModel channel_model = sc.channel;
  channel_model.seed = hash_key({sc.seed, 0xc4a2});

  std::vector<Job> jobs;
  if (sc.generate) {
    try {
      jobs = generate_jobs(map, sc.generate->mix, sc.generate->count,
                           sc.generate->seed.value_or(sc.seed), sc.generate->options);
    } catch (const NoEndpoints& e) {
      throw ScenarioInvalid(e.what());
    }
  } else {
    for (std::size_t i = 0; i < sc.jobs.size(); ++i) {
      const JobSpec& s = sc.jobs[i];
      jobs.push_back({static_cast<std::int32_t>(i), s.flow, s.container,
                      map.index(s.pickup.x, s.pickup.y), map.index(s.dropoff.x, s.dropoff.y),
                      s.release_time, s.priority});
    }
  }

  // Fleet.
  const BatteryPack pack =
      size_battery_pack(battery_cell(sc.battery.chemistry), sc.battery.bus_voltage_V,
                        sc.battery.energy_Wh);
  const std::size_t n = sc.starts.size();
  std::vector<VehicleState> vehicles(n);
  std::vector<Localizer> nav;
  std::vector<CellIndex> start_cells;
  std::vector<double> capacities;
  for (std::size_t i = 0; i < n; ++i) {
    VehicleState& v = vehicles[i];
    v.id = static_cast<std::int32_t>(i);
    const CellIndex c = map.index(sc.starts[i].x, sc.starts[i].y);
    const Vec2 p = map.center(c);
    v.pose_true = {p.x, p.y, 0.0};
    v.pack = pack;
    start_cells.push_back(c);
    capacities.push_back(pack.capacity_Wh);
    nav.emplace_back(i + 1, v.pose_true, noise, params.wheel_radius_m, params.wheelbase_d_m,
                     kPulsesPerRev);
  }

  SupervisorConfig sup_cfg;
  sup_cfg.headway_s = cfg.headway_s;
  sup_cfg.dwell_s = cfg.dwell_s;
  sup_cfg.command_lead_s = channel_model.latency;
  sup_cfg.lost_timeout_s = std::max(5.0, 5.0 * cfg.status_period_s);
  Supervisor sup(map, params, sup_cfg, start_cells, capacities);

  Channel channel(channel_model);
  channel.set_frame_dump(options.dump_frames);
  std::uint64_t sup_seq = 0;
  std::vector<std::uint64_t> veh_seq(n, 0);
  std::vector<std::uint32_t> applied_revision(n, 0);
  std::map<std::uint64_t, PendingCommand> pending;

  std::vector<JobState> job_states;
  for (const Job& j : jobs) {
    JobState js;
    js.outcome.job = j;
    js.next_try = j.release_time;
    job_states.push_back(js);
  }
  std::map<std::int32_t, std::size_t> job_index;
  for (std::size_t i = 0; i < jobs.size(); ++i) job_index[jobs[i].id] = i;

  TraceWriter trace;
  RunResult result;
  std::size_t events_seen = 0;
  const Pose base_truth{0.0, 0.0, 0.0};

  auto send_command = [&](const CommandPayload& cmd, double now) {
    // A newer command supersedes anything still unacknowledged for this AGV.
    std::erase_if(pending, [&](const auto& kv) { return kv.second.agv == cmd.agv; });
    const std::uint64_t seq = ++sup_seq;
    channel.send({seq, Endpoint::supervisor(), cmd}, now);
    pending[seq] = {cmd.agv, cmd, now};
  };

  auto flush_supervisor_events = [&]() {
    const auto& ev = sup.events();
    for (; events_seen < ev.size(); ++events_seen) {
      const SupervisorEvent& e = ev[events_seen];
      if (e.type == SupervisorEvent::Type::Complete) continue;
      std::string detail = "path=" + hex64(e.path_hash);
      char buf[64];
      std::snprintf(buf, sizeof buf, ";arrival=%.6f", e.arrival);
      detail += buf;
      if (e.type == SupervisorEvent::Type::Retime) {
        detail += ";old_path=" + hex64(e.old_path_hash);
        std::snprintf(buf, sizeof buf, ";old_arrival=%.6f", e.old_arrival);
        detail += buf;
      }
      if (e.type == SupervisorEvent::Type::PriorityAssign) {
        std::snprintf(buf, sizeof buf, ";free_flight=%.6f;conflict=%d", e.free_flight_arrival,
                      e.conflict_existed ? 1 : 0);
        detail += buf;
      }
      trace.event(e.t, e.agv, to_string(e.type), e.job, detail);
    }
  };

  const auto steps_per = [&](double period) {
    return std::max<long long>(1, std::llround(period / cfg.dt));
  };
  const long long status_every = steps_per(cfg.status_period_s);
  const long long gps_every = steps_per(cfg.gps_period_s);
  const auto max_steps = static_cast<long long>(std::ceil(cfg.horizon_s / cfg.dt - 1e-9));

  auto all_done = [&]() {
    return std::all_of(job_states.begin(), job_states.end(), [](const JobState& j) {
      return j.outcome.completed_t.has_value() || j.abandoned;
    });
  };

  for (std::size_t i = 0; i < n; ++i) trace.agv(0.0, vehicles[i], nav[i].estimate());

  double t = 0.0;
  long long k = 0;
  for (; k < max_steps && !all_done(); ++k) {
    t = static_cast<double>(k) * cfg.dt;

    // 1. Supervisor inbox.
    for (const Message& m : channel.poll(Endpoint::supervisor(), t)) {
      if (const auto* st = std::get_if<StatusPayload>(&m.payload)) {
        sup.on_status(m.sender.id, *st, t);
      } else if (const auto* ack = std::get_if<AckPayload>(&m.payload)) {
        pending.erase(ack->seq);
      }
    }
    sup.tick(t);

    // 2. Releases and assignments, priority jobs first.
    std::vector<std::size_t> ready;
    for (std::size_t j = 0; j < job_states.size(); ++j) {
      JobState& js = job_states[j];
      if (!js.released && js.outcome.job.release_time <= t + 1e-9) {
        js.released = true;
        trace.event(js.outcome.job.release_time, -1, "release", js.outcome.job.id,
                    js.outcome.job.priority ? "priority" : "");
      }
      if (js.released && !js.outcome.agv && !js.abandoned && js.next_try <= t + 1e-9)
        ready.push_back(j);
    }
    std::stable_sort(ready.begin(), ready.end(), [&](std::size_t a, std::size_t b) {
      const Job& x = job_states[a].outcome.job;
      const Job& y = job_states[b].outcome.job;
      if (x.priority != y.priority) return x.priority;
      if (x.release_time != y.release_time) return x.release_time < y.release_time;
      return x.id < y.id;
    });
    for (std::size_t j : ready) {
      if (!sup.has_idle_vehicle()) break;
      JobState& js = job_states[j];
      ++js.outcome.attempts;
      try {
        const AssignmentDelta delta = sup.assign_mission(js.outcome.job, t);
        js.outcome.agv = delta.agv;
        js.outcome.assigned_t = t;
        for (const auto& cmd : delta.commands) send_command(cmd, t);
      } catch (const NoVehicle&) {
        // Nobody idle could take it; try again next step.
      } catch (const Unschedulable& e) {
        js.next_try = t + cfg.retry_s;
        std::string why = e.what();
        std::replace(why.begin(), why.end(), ',', ';');
        std::replace(why.begin(), why.end(), '|', '/');
        trace.event(t, -1, "fail", js.outcome.job.id, "retry: " + why);
        if (const auto moved = sup.clear_dropoff_bay(js.outcome.job, t))
          for (const auto& cmd : moved->commands) send_command(cmd, t);
      } catch (const Unreachable&) {
        js.abandoned = true;
        trace.event(t, -1, "fail", js.outcome.job.id, "unreachable");
      }
      flush_supervisor_events();
    }
    flush_supervisor_events();

    // 3. Retransmit unacknowledged commands.
    std::vector<PendingCommand> resend;
    for (auto it = pending.begin(); it != pending.end();) {
      if (t - it->second.last_sent >= cfg.ack_timeout_s - 1e-9) {
        resend.push_back(it->second);
        it = pending.erase(it);
      } else {
        ++it;
      }
    }
    for (const auto& p : resend) send_command(p.payload, t);

    // 4. Vehicle inboxes: whatever arrives during this step is in hand before
    // the vehicle moves; trajectories never start before their delivery.
    const double t_next = static_cast<double>(k + 1) * cfg.dt;
    for (std::size_t i = 0; i < n; ++i) {
      for (const Message& m : channel.poll(Endpoint::vehicle(static_cast<std::int32_t>(i)), t_next)) {
        const auto* cmd = std::get_if<CommandPayload>(&m.payload);
        if (!cmd) continue;
        channel.send({++veh_seq[i], Endpoint::vehicle(static_cast<std::int32_t>(i)),
                      AckPayload{m.seq}},
                     t_next);
        if (cmd->trajectory.revision > applied_revision[i]) {
          applied_revision[i] = cmd->trajectory.revision;
          adopt_trajectory(vehicles[i], cmd->trajectory, cmd->container);
        }
      }
    }

    // 5. Vehicles, localisation, status.
    std::vector<Pose> truth(n);
    for (std::size_t i = 0; i < n; ++i) {
      VehicleState& v = vehicles[i];
      const Mode before = v.mode;
      const std::int32_t job_id = v.trajectory ? v.trajectory->job : -1;
      const StepEvents ev = step_kinematics(v, params, cfg.dt);
      v.time = t_next;  // keep the vehicle clock on the step grid
      const auto id = static_cast<std::int32_t>(i);
      if (ev.loading_started) trace.event(*ev.loading_started, id, "loading", job_id);
      if (ev.loaded) trace.event(*ev.loaded, id, "loaded", job_id);
      if (ev.unloading_started) trace.event(*ev.unloading_started, id, "unloading", job_id);
      if (ev.completed && job_id < 0) trace.event(*ev.completed, id, "parked", job_id);
      if (ev.completed && job_id >= 0) {
        trace.event(*ev.completed, id, "complete", job_id);
        auto it = job_index.find(job_id);
        if (it != job_index.end()) job_states[it->second].outcome.completed_t = *ev.completed;
      }
      if (ev.depleted_now) trace.event(t_next, id, "depleted", job_id);

      nav[i].odometry(v.wheel_pulses, static_cast<std::uint64_t>(k));
      if ((k + 1) % gps_every == 0) {
        if (cfg.use_dgps) {
          const auto rover = sample_gps(v.pose_true, noise, GpsMode::DgpsRover, t_next, i + 1);
          const auto base = sample_gps(base_truth, noise, GpsMode::DgpsBase, t_next, 0);
          nav[i].gps_fix(dgps_correct(rover, base, base_truth),
                         gps_axis_sigma(noise, GpsMode::DgpsRover));
        } else {
          nav[i].gps_fix(sample_gps(v.pose_true, noise, GpsMode::Raw, t_next, i + 1),
                         gps_axis_sigma(noise, GpsMode::Raw));
        }
      }
      nav[i].compass_fix(sample_compass(v.pose_true.heading, noise, t_next, i + 1));

      if ((k + 1) % status_every == 0 || v.mode != before) {
        StatusPayload st;
        st.pose_estimate = nav[i].estimate();
        st.mode = v.mode;
        st.battery_Wh = v.pack.remaining_Wh;
        st.path_progress = v.path_progress;
        st.revision = v.trajectory ? v.trajectory->revision : 0;
        st.carried = v.carried;
        channel.send({++veh_seq[i], Endpoint::vehicle(id), st}, t_next);
      }
      truth[i] = v.pose_true;
    }

    for (const auto& viol : check_collisions(map, truth, params, t_next)) {
      result.violations.push_back(viol);
      trace.event(t_next, viol.agv_a, "collision", -1,
                  "other=" + std::to_string(viol.agv_b));
    }
    for (std::size_t i = 0; i < n; ++i) trace.agv(t_next, vehicles[i], nav[i].estimate());
  }
  t = static_cast<double>(k) * cfg.dt;

  for (auto& js : job_states)
    if (!js.outcome.completed_t) {
      js.abandoned = true;
      trace.event(t, js.outcome.agv.value_or(-1), "abandon", js.outcome.job.id);
    }

  result.end_time = t;
  result.trace = trace.take();
  result.trace_hash = hash_trace(result.trace);
  result.metrics = compute_metrics(result.trace);
  for (auto& js : job_states) result.jobs.push_back(js.outcome);
  result.events = sup.events();
  for (const auto& a : sup.fleet().agvs) result.timelines.push_back(a.timeline);
  for (const auto& v : vehicles) {
    result.energy_from_power_Wh.push_back(v.energy_used_Wh);
    result.battery_drain_Wh.push_back(v.pack.capacity_Wh - v.pack.remaining_Wh);
    result.distance_m.push_back(v.distance_m);
    result.wheel_pulses.push_back(v.wheel_pulses);
    result.wheel_arc.push_back(v.wheel_arc);
  }
  result.frames = channel.take_frames();
  result.messages_sent = channel.sent();
  result.messages_dropped = channel.dropped();
  return result;
}

}  // namespace quayfleet

#include "quayfleet/supervisor.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "quayfleet/errors.hpp"

namespace quayfleet {

const char* to_string(SupervisorEvent::Type t) {
  switch (t) {
    case SupervisorEvent::Type::Assign: return "assign";
    case SupervisorEvent::Type::PriorityAssign: return "priority_assign";
    case SupervisorEvent::Type::Retime: return "retime";
    case SupervisorEvent::Type::Complete: return "complete";
    case SupervisorEvent::Type::Deferred: return "deferred";
    case SupervisorEvent::Type::Reposition: return "reposition";
  }
  return "?";
}

Supervisor::Supervisor(const TerminalMap& map, AgvParams params, SupervisorConfig config,
                       std::span<const CellIndex> start_cells,
                       std::span<const double> battery_capacity_Wh)
    : map_(map), params_(params), config_(config),
      table_(map.cell_count(), config.headway_s) {
  if (start_cells.size() != battery_capacity_Wh.size())
    throw std::invalid_argument("one battery capacity per AGV is required");
  for (std::size_t i = 0; i < start_cells.size(); ++i) {
    AgvView v;
    v.id = static_cast<std::int32_t>(i);
    v.parked_cell = start_cells[i];
    v.battery_capacity_Wh = battery_capacity_Wh[i];
    v.battery_Wh = battery_capacity_Wh[i];
    v.timeline.initial = map_.center(start_cells[i]);
    for (CellIndex c : point_footprint(map_, v.timeline.initial, params_.safety_radius_m))
      table_.add(c, v.id, 0.0, kForever);
    fleet_.agvs.push_back(std::move(v));
  }
}

ScheduleOptions Supervisor::schedule_options() const {
  return {params_.safety_radius_m, config_.schedule_horizon_s};
}

bool Supervisor::available(const AgvView& v) const {
  return !v.lost && !v.active && v.mission_queue.empty() &&
         v.battery_Wh >= config_.min_battery_fraction * v.battery_capacity_Wh;
}

bool Supervisor::has_idle_vehicle() const {
  return std::any_of(fleet_.agvs.begin(), fleet_.agvs.end(),
                     [&](const AgvView& v) { return available(v); });
}

CellIndex Supervisor::believed_cell(const AgvView& view) const {
  if (!view.active) return view.parked_cell;
  const Trajectory& t = *view.active;
  if (t.pieces.empty()) return t.path.empty() ? view.parked_cell : t.path.back();
  double s = 0.0;
  if (view.last_status && view.last_status->revision == t.revision)
    s = view.last_status->path_progress;
  return t.pieces[t.piece_index_at(s)].cell;
}

Supervisor::MissionGeometry Supervisor::mission_geometry(CellIndex from, const Job& job) const {
  const auto leg1 = plan_path(map_, from, job.pickup, params_);
  const auto leg2 = plan_path(map_, job.pickup, job.dropoff, params_);
  MissionGeometry g;
  g.path = leg1;
  g.path.insert(g.path.end(), leg2.begin() + 1, leg2.end());
  g.pieces = build_pieces(map_, leg1, params_);
  g.pickup_boundary = static_cast<std::int32_t>(g.pieces.size());
  const auto p2 = build_pieces(map_, leg2, params_);
  g.pieces.insert(g.pieces.end(), p2.begin(), p2.end());
  return g;
}

std::optional<std::int32_t> Supervisor::select_vehicle(const Job& job) const {
  // An idle AGV parked on the drop-off bay would block it for anyone else.
  for (const auto& v : fleet_.agvs)
    if (available(v) && v.parked_cell == job.dropoff) return v.id;
  std::optional<std::int32_t> best;
  double best_cost = kForever;
  for (const auto& v : fleet_.agvs) {
    if (!available(v)) continue;
    double cost = 0.0;
    try {
      const CellIndex from = believed_cell(v);
      cost = free_flight_cost(map_, plan_path(map_, from, job.pickup, params_), params_);
      plan_path(map_, job.pickup, job.dropoff, params_);
    } catch (const Unreachable&) {
      continue;
    }
    if (cost < best_cost - 1e-9) {
      best_cost = cost;
      best = v.id;
    }
  }
  return best;
}

Trajectory Supervisor::plan_free_flight(std::int32_t agv, CellIndex from, const Job& job,
                                        double t0) const {
  auto g = mission_geometry(from, job);
  Trajectory traj;
  traj.agv = agv;
  traj.job = job.id;
  traj.path = std::move(g.path);
  traj.pieces = std::move(g.pieces);
  traj.pickup_boundary = g.pickup_boundary;
  traj.dwell_s = config_.dwell_s;
  const ReservationTable empty(map_.cell_count(), config_.headway_s);
  ScheduleStart start;
  start.t = t0;
  start.min_departure = g.pickup_boundary == 0 ? t0 + config_.dwell_s : t0;
  traj.motion = schedule_motion(map_, traj.pieces, traj.pickup_boundary, traj.dwell_s, start,
                                empty, agv, params_, schedule_options());
  return traj;
}

std::vector<std::int32_t> Supervisor::conflicting_agvs(std::int32_t agv,
                                                       const std::vector<Occupancy>& occ) const {
  std::set<std::int32_t> out;
  for (const auto& o : occ)
    for (const auto& r : table_.at(o.cell))
      if (r.agv != agv && r.t0 < o.t1 + table_.headway() && o.t0 < r.t1 + table_.headway())
        out.insert(r.agv);
  return {out.begin(), out.end()};
}

Trajectory Supervisor::retime(const AgvView& view, double t_c) const {
  const Trajectory& old = *view.active;
  const double s_c = old.progress_at(t_c);
  const double v_c = old.speed_at(t_c);
  if (s_c >= old.length() - 1e-9)
    throw Unschedulable("AGV " + std::to_string(view.id) + " already at its goal");

  Trajectory traj = old;
  traj.revision = old.revision + 1;
  traj.motion.clear();
  for (const auto& m : old.motion) {
    if (m.t0 >= t_c) break;
    MotionSegment clipped = m;
    clipped.t1 = std::min(m.t1, t_c);
    if (clipped.t1 > clipped.t0) traj.motion.push_back(clipped);
  }

  ScheduleStart start;
  start.t = t_c;
  start.s = s_c;
  if (v_c > 1e-9) {
    start.v = v_c;
  } else {
    const auto bs = old.boundary_s();
    std::int32_t b = -1;
    for (std::size_t k = 0; k < bs.size(); ++k)
      if (std::abs(bs[k] - s_c) < 1e-6) b = static_cast<std::int32_t>(k);
    if (b < 0) throw Unschedulable("AGV at rest between piece boundaries");
    start.boundary = b;
    start.s = bs[static_cast<std::size_t>(b)];
    start.min_departure = t_c;
    if (b == old.pickup_boundary) {
      const double arrived = old.pickup_arrival_time();
      if (arrived <= t_c + 1e-9) start.min_departure = std::max(t_c, arrived + old.dwell_s);
      else start.min_departure = t_c + old.dwell_s;
    }
  }
  const auto tail = schedule_motion(map_, old.pieces, old.pickup_boundary, old.dwell_s, start,
                                    table_, view.id, params_, schedule_options());
  traj.motion.insert(traj.motion.end(), tail.begin(), tail.end());
  return traj;
}

void Supervisor::install(AgvView& view, Trajectory traj, double from_t, bool replace_leg) {
  table_.add(view.id, trajectory_occupancy(map_, traj, params_.safety_radius_m, from_t));
  view.revision = traj.revision;
  if (replace_leg && !view.timeline.legs.empty())
    view.timeline.legs.back() = traj;
  else
    view.timeline.legs.push_back(traj);
  view.active = std::move(traj);
}

AssignmentDelta Supervisor::assign_mission(const Job& job, double now) {
  const auto chosen = select_vehicle(job);
  if (!chosen) throw NoVehicle("no idle AGV with enough charge for job " + std::to_string(job.id));
  const std::int32_t id = *chosen;
  const double t0 = now + config_.command_lead_s;
  const CellIndex from = believed_cell(fleet_.agvs[static_cast<std::size_t>(id)]);
  const double radius = params_.safety_radius_m;

  auto defer = [&](const std::string& why) {
    SupervisorEvent e{SupervisorEvent::Type::Deferred, now, id, job.id};
    events_.push_back(e);
    throw Unschedulable("job " + std::to_string(job.id) + " deferred: " + why);
  };

  AssignmentDelta delta;
  delta.agv = id;

  if (!job.priority) {
    const ReservationTable snapshot = table_;
    Trajectory traj;
    try {
      auto g = mission_geometry(from, job);
      traj.agv = id;
      traj.job = job.id;
      traj.path = std::move(g.path);
      traj.pieces = std::move(g.pieces);
      traj.pickup_boundary = g.pickup_boundary;
      traj.dwell_s = config_.dwell_s;
      table_.truncate_after(id, t0);
      ScheduleStart start;
      start.t = t0;
      start.min_departure = traj.pickup_boundary == 0 ? t0 + config_.dwell_s : t0;
      traj.motion = schedule_motion(map_, traj.pieces, traj.pickup_boundary, traj.dwell_s,
                                    start, table_, id, params_, schedule_options());
    } catch (const Unschedulable& e) {
      table_ = snapshot;
      defer(e.what());
    }
    AgvView& v = fleet_.agvs[static_cast<std::size_t>(id)];
    traj.revision = v.revision + 1;
    install(v, traj, t0, false);
    v.active_container = job.container;
    v.active_is_priority = false;
    v.priority_order = next_order_++;
    SupervisorEvent e{SupervisorEvent::Type::Assign, now, id, job.id};
    e.path_hash = traj.path_hash();
    e.arrival = traj.arrival_time();
    events_.push_back(e);
    delta.commands.push_back({id, Mode::MoveToTarget, job.container, *v.active});
    return delta;
  }

  // Priority: the free-flight plan is fixed; everything it crosses yields.
  Trajectory plan = plan_free_flight(id, from, job, t0);
  const auto occ = trajectory_occupancy(map_, plan, radius, t0);
  const ReservationTable table_snapshot = table_;
  const FleetView fleet_snapshot = fleet_;

  auto conflicting = conflicting_agvs(id, occ);
  for (std::int32_t c : conflicting) {
    const AgvView& cv = fleet_.agvs[static_cast<std::size_t>(c)];
    if (!cv.active) defer("AGV " + std::to_string(c) + " is parked on the priority path");
    if (cv.active_is_priority)
      defer("earlier priority mission of AGV " + std::to_string(c) + " is in the way");
  }
  std::sort(conflicting.begin(), conflicting.end(), [&](std::int32_t a, std::int32_t b) {
    return fleet_.agvs[static_cast<std::size_t>(a)].priority_order <
           fleet_.agvs[static_cast<std::size_t>(b)].priority_order;
  });

  table_.truncate_after(id, t0);
  for (std::int32_t c : conflicting) table_.truncate_after(c, t0);
  table_.add(id, occ);

  std::vector<Trajectory> retimed;
  bool ok = true;
  std::string why;
  for (std::int32_t c : conflicting) {
    try {
      Trajectory t = retime(fleet_.agvs[static_cast<std::size_t>(c)], t0);
      table_.add(c, trajectory_occupancy(map_, t, radius, t0));
      retimed.push_back(std::move(t));
    } catch (const Unschedulable& e) {
      ok = false;
      why = e.what();
      break;
    }
  }
  if (ok) {
    for (const auto& o : occ)
      if (table_.conflicts(o.cell, id, o.t0, o.t1)) {
        ok = false;
        why = "priority reservations could not be kept clear";
        break;
      }
  }
  if (!ok) {
    table_ = table_snapshot;
    fleet_ = fleet_snapshot;
    defer(why);
  }

  // Commit: reservations are already in the table.
  AgvView& v = fleet_.agvs[static_cast<std::size_t>(id)];
  plan.revision = v.revision + 1;
  v.revision = plan.revision;
  v.timeline.legs.push_back(plan);
  v.active = plan;
  v.active_container = job.container;
  v.active_is_priority = true;
  v.priority_order = next_order_++;

  SupervisorEvent pe{SupervisorEvent::Type::PriorityAssign, now, id, job.id};
  pe.path_hash = plan.path_hash();
  pe.arrival = plan.arrival_time();
  pe.free_flight_arrival = plan.arrival_time();
  pe.conflict_existed = !conflicting.empty();
  pe.retimed = conflicting;
  events_.push_back(pe);
  delta.commands.push_back({id, Mode::MoveToTarget, job.container, plan});

  for (auto& t : retimed) {
    AgvView& cv = fleet_.agvs[static_cast<std::size_t>(t.agv)];
    SupervisorEvent re{SupervisorEvent::Type::Retime, now, t.agv, t.job};
    re.old_path_hash = cv.active->path_hash();
    re.old_arrival = cv.active->arrival_time();
    re.path_hash = t.path_hash();
    re.arrival = t.arrival_time();
    events_.push_back(re);
    cv.revision = t.revision;
    if (!cv.timeline.legs.empty()) cv.timeline.legs.back() = t;
    cv.active = t;
    delta.commands.push_back({t.agv, Mode::MoveToTarget, cv.active_container, std::move(t)});
  }
  return delta;
}

std::optional<AssignmentDelta> Supervisor::clear_dropoff_bay(const Job& job, double now) {
  auto idle_on = [&](CellIndex bay) -> AgvView* {
    for (auto& v : fleet_.agvs)
      if (available(v) && v.parked_cell == bay) return &v;
    return nullptr;
  };
  AgvView* blocker = idle_on(job.dropoff);
  if (!blocker || !idle_on(job.pickup)) return std::nullopt;

  std::vector<bool> taken(map_.cell_count(), false);
  for (const auto& v : fleet_.agvs) {
    taken[static_cast<std::size_t>(v.parked_cell)] = true;
    if (v.active && !v.active->path.empty())
      taken[static_cast<std::size_t>(v.active->path.back())] = true;
  }
  taken[static_cast<std::size_t>(job.pickup)] = true;

  std::optional<std::vector<CellIndex>> best;
  double best_cost = kForever;
  for (CellKind kind : {CellKind::QuayCrane, CellKind::StackLane})
    for (CellIndex bay : map_.cells_of_kind(kind)) {
      if (taken[static_cast<std::size_t>(bay)]) continue;
      try {
        auto path = plan_path(map_, blocker->parked_cell, bay, params_);
        const double cost = free_flight_cost(map_, path, params_);
        if (cost < best_cost - 1e-9 || (std::abs(cost - best_cost) <= 1e-9 && path.back() < best->back())) {
          best_cost = cost;
          best = std::move(path);
        }
      } catch (const Unreachable&) {
      }
    }
  if (!best) return std::nullopt;

  const double t0 = now + config_.command_lead_s;
  const ReservationTable snapshot = table_;
  Trajectory traj;
  traj.agv = blocker->id;
  traj.job = -1;
  traj.path = std::move(*best);
  traj.pieces = build_pieces(map_, traj.path, params_);
  traj.pickup_boundary = -1;
  traj.dwell_s = 0.0;
  table_.truncate_after(blocker->id, t0);
  ScheduleStart start;
  start.t = t0;
  start.min_departure = t0;
  try {
    traj.motion = schedule_motion(map_, traj.pieces, -1, 0.0, start, table_, blocker->id,
                                  params_, schedule_options());
  } catch (const Unschedulable&) {
    table_ = snapshot;
    return std::nullopt;
  }
  traj.revision = blocker->revision + 1;
  install(*blocker, traj, t0, false);
  blocker->active_container.reset();
  blocker->active_is_priority = false;
  blocker->priority_order = next_order_++;
  SupervisorEvent e{SupervisorEvent::Type::Reposition, now, blocker->id, job.id};
  e.path_hash = traj.path_hash();
  e.arrival = traj.arrival_time();
  events_.push_back(e);
  AssignmentDelta delta;
  delta.agv = blocker->id;
  delta.commands.push_back({blocker->id, Mode::MoveToTarget, std::nullopt, *blocker->active});
  return delta;
}

void Supervisor::on_status(std::int32_t agv, const StatusPayload& status, double now) {
  if (agv < 0 || static_cast<std::size_t>(agv) >= fleet_.agvs.size())
    throw UnknownVehicle("status from unknown AGV " + std::to_string(agv));
  AgvView& v = fleet_.agvs[static_cast<std::size_t>(agv)];
  v.last_status = status;
  v.last_heard = now;
  v.lost = false;
  v.battery_Wh = status.battery_Wh;
  table_.release_before(agv, now - config_.headway_s);

  if (v.active && status.revision == v.active->revision && status.mode == Mode::Standby &&
      status.path_progress >= v.active->length() - 1e-6 && now >= v.active->t_end() - 1e-6) {
    SupervisorEvent e{SupervisorEvent::Type::Complete, now, agv, v.active->job};
    e.path_hash = v.active->path_hash();
    e.arrival = v.active->arrival_time();
    events_.push_back(e);
    v.parked_cell = v.active->path.back();
    v.parked_since = v.active->t_end();
    v.active.reset();
    v.active_container.reset();
    v.active_is_priority = false;
    if (!v.mission_queue.empty()) v.mission_queue.pop_front();
  }
}

void Supervisor::tick(double now) {
  for (auto& v : fleet_.agvs)
    if (now - v.last_heard > config_.lost_timeout_s) v.lost = true;
}

}  // namespace quayfleet

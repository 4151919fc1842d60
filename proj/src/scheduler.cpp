#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <queue>

#include "quayfleet/errors.hpp"
#include "quayfleet/supervisor.hpp"

namespace quayfleet {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Run {
  std::vector<Phase> phases;
  double duration = 0.0;
  std::size_t first_piece = 0;
  std::vector<double> rel_enter;  // per piece from first_piece
  std::vector<double> rel_exit;
};

// Relative piece entry/exit times of a run; phases never straddle pieces.
Run make_run(std::vector<Phase> phases, const std::vector<double>& bs, std::size_t first_piece,
             std::size_t end_boundary) {
  Run run;
  run.first_piece = first_piece;
  run.duration = profile_duration(phases);
  double t = 0.0;
  std::size_t ph = 0;
  for (std::size_t k = first_piece; k < end_boundary; ++k) {
    run.rel_enter.push_back(t);
    while (ph < phases.size() && phases[ph].s1 <= bs[k + 1] + 1e-9) t += phases[ph++].duration;
    run.rel_exit.push_back(t);
  }
  run.phases = std::move(phases);
  return run;
}

class MotionSearch {
 public:
  MotionSearch(const TerminalMap& map, std::span<const Piece> pieces,
               std::int32_t pickup_boundary, double dwell, const ReservationTable& table,
               std::int32_t agv, const AgvParams& params, const ScheduleOptions& options)
      : map_(map), pieces_(pieces), pickup_(pickup_boundary), dwell_(dwell), table_(table),
        agv_(agv), params_(params), options_(options) {
    bs_.push_back(0.0);
    for (const auto& p : pieces_) {
      caps_.push_back({bs_.back(), bs_.back() + p.length, p.v_limit});
      bs_.push_back(bs_.back() + p.length);
      piece_fp_.push_back(piece_footprint(map_, p, options_.safety_radius));
    }
    n_ = static_cast<std::int32_t>(pieces_.size());
    bound_fp_.resize(static_cast<std::size_t>(n_) + 1);
  }

  std::vector<MotionSegment> solve(const ScheduleStart& start) {
    t_limit_ = start.t + options_.horizon_s;
    const auto nb = static_cast<std::size_t>(n_) + 1;
    best_.assign(nb, kInf);
    parent_.assign(nb, {});
    using Item = std::pair<double, std::int32_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> open;

    if (start.v <= 0.0) {
      const auto b = static_cast<std::size_t>(start.boundary);
      best_[b] = start.t;
      parent_[b] = Parent{-1, start.t, start.t, {}, true};
      start_boundary_ = start.boundary;
      start_min_dep_ = start.min_departure;
      open.push({start.t, start.boundary});
    } else {
      // In motion: the first run leaves immediately from (s, v).
      start_boundary_ = -1;
      const std::size_t first_piece = piece_at(start.s);
      for (std::int32_t b2 = static_cast<std::int32_t>(first_piece) + 1;
           b2 <= next_stop(static_cast<std::int32_t>(first_piece)); ++b2) {
        auto phases = plan_run(caps_, start.s, start.v, bs_[static_cast<std::size_t>(b2)],
                               params_.a_max);
        if (!phases) continue;
        Run run = make_run(std::move(*phases), bs_, first_piece, static_cast<std::size_t>(b2));
        if (!clear_at(run, b2, start.t)) continue;
        const double arr = start.t + run.duration;
        if (arr < best_[static_cast<std::size_t>(b2)]) {
          best_[static_cast<std::size_t>(b2)] = arr;
          parent_[static_cast<std::size_t>(b2)] = Parent{-2, start.t, start.t, std::move(run.phases), false};
          open.push({arr, b2});
        }
      }
    }

    while (!open.empty()) {
      const auto [a, b] = open.top();
      open.pop();
      if (a > best_[static_cast<std::size_t>(b)]) continue;
      if (b == n_) return reconstruct(start);
      const double min_dep = b == start_boundary_ && a == start.t
                                 ? std::max(a, start_min_dep_)
                                 : a + (b == pickup_ ? dwell_ : 0.0);
      for (std::int32_t b2 = b + 1; b2 <= next_stop(b); ++b2) {
        auto attempt = try_run(b, a, min_dep, b2);
        if (!attempt) continue;
        const double arr = attempt->first + attempt->second.duration;
        if (arr < best_[static_cast<std::size_t>(b2)] - 1e-9) {
          best_[static_cast<std::size_t>(b2)] = arr;
          parent_[static_cast<std::size_t>(b2)] =
              Parent{b, a, attempt->first, std::move(attempt->second.phases), false};
          open.push({arr, b2});
        }
      }
    }
    throw Unschedulable("no conflict-free timing for AGV " + std::to_string(agv_) +
                        " within the horizon");
  }

 private:
  struct Parent {
    std::int32_t from = -1;  // -1 start at rest, -2 start in motion
    double arrival = 0.0;    // rest arrival at `from`
    double departure = 0.0;
    std::vector<Phase> phases;
    bool is_start = false;
  };

  std::size_t piece_at(double s) const {
    for (std::size_t k = 0; k < pieces_.size(); ++k)
      if (s < bs_[k + 1] - 1e-9) return k;
    return pieces_.empty() ? 0 : pieces_.size() - 1;
  }

  std::int32_t next_stop(std::int32_t b) const {
    if (pickup_ > b && pickup_ < n_) return pickup_;
    return n_;
  }

  const std::vector<CellIndex>& bound_fp(std::int32_t b) {
    auto& fp = bound_fp_[static_cast<std::size_t>(b)];
    if (fp.empty()) {
      const Vec2 p = b < n_ ? pieces_[static_cast<std::size_t>(b)].start
                            : pieces_.back().end;
      fp = point_footprint(map_, p, options_.safety_radius);
    }
    return fp;
  }

  // Rest requirement after arriving at b2 (relative to arrival).
  double hold_after(std::int32_t b2) const {
    if (b2 == n_) return kInf;
    if (b2 == pickup_) return dwell_;
    return 0.0;
  }

  double shift_needed(const Run& run, std::int32_t b2, double dep) {
    double shift = 0.0;
    for (std::size_t i = 0; i < run.rel_enter.size(); ++i) {
      const double t0 = dep + run.rel_enter[i];
      const double t1 = dep + run.rel_exit[i];
      for (CellIndex c : piece_fp_[run.first_piece + i]) {
        shift = std::max(shift, table_.required_shift(c, agv_, t0, t1));
        if (shift == kInf) return kInf;
      }
    }
    const double arr = dep + run.duration;
    const double hold = hold_after(b2);
    for (CellIndex c : bound_fp(b2)) {
      shift = std::max(shift, table_.required_shift(c, agv_, arr, arr + hold));
      if (shift == kInf) return kInf;
    }
    return shift;
  }

  bool clear_at(const Run& run, std::int32_t b2, double dep) {
    return shift_needed(run, b2, dep) <= 0.0;
  }

  const Run& cached_run(std::int32_t b, std::int32_t b2) {
    const auto key = std::make_pair(b, b2);
    auto it = runs_.find(key);
    if (it == runs_.end()) {
      auto phases = plan_run(caps_, bs_[static_cast<std::size_t>(b)], 0.0,
                             bs_[static_cast<std::size_t>(b2)], params_.a_max);
      it = runs_.emplace(key, make_run(phases ? std::move(*phases) : std::vector<Phase>{}, bs_,
                                       static_cast<std::size_t>(b), static_cast<std::size_t>(b2)))
               .first;
    }
    return it->second;
  }

  std::optional<std::pair<double, Run>> try_run(std::int32_t b, double a, double min_dep,
                                                std::int32_t b2) {
    const Run& run = cached_run(b, b2);
    if (run.phases.empty()) return std::nullopt;
    double dep = min_dep;
    for (int iter = 0; iter < 100000; ++iter) {
      if (dep + run.duration > t_limit_) return std::nullopt;
      if (dep > a) {
        for (CellIndex c : bound_fp(b))
          if (table_.conflicts(c, agv_, a, dep)) return std::nullopt;
      }
      const double shift = shift_needed(run, b2, dep);
      if (shift == kInf) return std::nullopt;
      if (shift <= 0.0) return std::make_pair(dep, run);
      dep += shift + 1e-9;
    }
    return std::nullopt;
  }

  std::vector<MotionSegment> reconstruct(const ScheduleStart& start) {
    std::vector<std::int32_t> chain;
    for (std::int32_t b = n_; b >= 0;) {
      chain.push_back(b);
      const auto& p = parent_[static_cast<std::size_t>(b)];
      if (p.is_start || p.from < 0) break;
      b = p.from;
    }
    std::reverse(chain.begin(), chain.end());

    std::vector<MotionSegment> out;
    auto push_hold = [&](double t0, double t1, double s) {
      if (t1 - t0 > 1e-12) out.push_back({t0, t1, s, 0.0, 0.0});
    };
    for (std::int32_t b : chain) {
      const auto& p = parent_[static_cast<std::size_t>(b)];
      if (p.is_start) continue;
      if (p.from >= 0) push_hold(p.arrival, p.departure, bs_[static_cast<std::size_t>(p.from)]);
      double t = p.departure;
      for (const auto& ph : p.phases) {
        out.push_back({t, t + ph.duration, ph.s0, ph.v0, ph.accel});
        t += ph.duration;
      }
    }
    const double arr = best_[static_cast<std::size_t>(n_)];
    // A path with no pieces still needs its dwell at the (single) boundary.
    if (out.empty() && start.v <= 0.0) push_hold(start.t, std::max(start.t, start.min_departure), 0.0);
    push_hold(arr, arr + dwell_, bs_.back());
    if (out.empty()) out.push_back({arr, arr, bs_.back(), 0.0, 0.0});
    return out;
  }

  const TerminalMap& map_;
  std::span<const Piece> pieces_;
  std::int32_t pickup_;
  double dwell_;
  const ReservationTable& table_;
  std::int32_t agv_;
  const AgvParams& params_;
  ScheduleOptions options_;

  std::int32_t n_ = 0;
  std::vector<double> bs_;
  std::vector<SpeedCap> caps_;
  std::vector<std::vector<CellIndex>> piece_fp_;
  std::vector<std::vector<CellIndex>> bound_fp_;
  std::map<std::pair<std::int32_t, std::int32_t>, Run> runs_;
  std::vector<double> best_;
  std::vector<Parent> parent_;
  double t_limit_ = kInf;
  std::int32_t start_boundary_ = -1;
  double start_min_dep_ = 0.0;
};

}  // namespace

std::vector<MotionSegment> schedule_motion(const TerminalMap& map, std::span<const Piece> pieces,
                                           std::int32_t pickup_boundary, double dwell,
                                           const ScheduleStart& start,
                                           const ReservationTable& table, std::int32_t agv,
                                           const AgvParams& params,
                                           const ScheduleOptions& options) {
  if (pieces.empty()) {
    // Nothing to drive: dwell in place once the spot is free.
    std::vector<MotionSegment> out;
    const double t1 = std::max(start.t, start.min_departure) + dwell;
    out.push_back({start.t, std::max(t1, start.t), 0.0, 0.0, 0.0});
    return out;
  }
  MotionSearch search(map, pieces, pickup_boundary, dwell, table, agv, params, options);
  return search.solve(start);
}

Trajectory schedule_velocity(const TerminalMap& map, std::span<const CellIndex> path,
                             ReservationTable& table, const AgvParams& params,
                             std::int32_t agv, double t0, const ScheduleOptions& options) {
  Trajectory traj;
  traj.agv = agv;
  traj.path.assign(path.begin(), path.end());
  traj.pieces = build_pieces(map, path, params);
  traj.pickup_boundary = -1;
  traj.dwell_s = 0.0;
  ScheduleStart start;
  start.t = t0;
  start.min_departure = t0;
  traj.motion = schedule_motion(map, traj.pieces, -1, 0.0, start, table, agv, params, options);
  table.add(agv, trajectory_occupancy(map, traj, options.safety_radius, t0));
  return traj;
}

// ---------------------------------------------------------------------------

Vec2 AgvTimeline::position_at(double t) const {
  const Trajectory* current = nullptr;
  for (const auto& leg : legs) {
    if (leg.t_begin() <= t) current = &leg;
    else break;
  }
  return current ? current->position_at(t) : initial;
}

double AgvTimeline::t_end() const {
  double t = 0.0;
  for (const auto& leg : legs) t = std::max(t, leg.t_end());
  return t;
}

std::vector<Conflict> detect_conflicts(std::span<const AgvTimeline> timelines,
                                       const AgvParams& params, double step) {
  std::vector<Conflict> out;
  const std::size_t n = timelines.size();
  if (n < 2) return out;
  double t_lo = 0.0;
  double t_hi = 0.0;
  for (const auto& tl : timelines) {
    if (!tl.legs.empty()) t_lo = std::min(t_lo, tl.legs.front().t_begin());
    t_hi = std::max(t_hi, tl.t_end());
  }
  const double limit = 2.0 * params.safety_radius_m;
  std::vector<bool> reported(n * n, false);
  std::vector<Vec2> pos(n);
  const auto steps = static_cast<long long>(std::ceil((t_hi - t_lo) / step)) + 1;
  for (long long i = 0; i <= steps; ++i) {
    const double t = t_lo + static_cast<double>(i) * step;
    for (std::size_t k = 0; k < n; ++k) pos[k] = timelines[k].position_at(t);
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = a + 1; b < n; ++b) {
        if (reported[a * n + b]) continue;
        const double d = distance(pos[a], pos[b]);
        if (d < limit) {
          reported[a * n + b] = true;
          out.push_back({t, static_cast<std::int32_t>(a), static_cast<std::int32_t>(b), d});
        }
      }
  }
  std::sort(out.begin(), out.end(), [](const Conflict& x, const Conflict& y) { return x.t < y.t; });
  return out;
}

std::vector<Conflict> detect_conflicts(std::span<const Trajectory> trajectories,
                                       const AgvParams& params, double step) {
  std::vector<AgvTimeline> timelines;
  for (const auto& t : trajectories) {
    AgvTimeline tl;
    tl.initial = t.point_at_s(t.motion.empty() ? 0.0 : t.motion.front().s0);
    tl.legs.push_back(t);
    timelines.push_back(std::move(tl));
  }
  return detect_conflicts(timelines, params, step);
}

}  // namespace quayfleet

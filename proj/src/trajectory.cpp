#include "quayfleet/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace quayfleet {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kSampleSpacing = 0.1;  // m, footprint sampling

Vec2 midpoint(Vec2 a, Vec2 b) { return 0.5 * (a + b); }

double seg_end_s(const MotionSegment& m) { return m.s_at(m.t1); }

// Time within a moving segment at which arc length s is reached.
double seg_time_at_s(const MotionSegment& m, double s) {
  const double ds = std::max(0.0, s - m.s0);
  double tau;
  if (m.accel == 0.0) {
    tau = m.v0 > 0.0 ? ds / m.v0 : 0.0;
  } else {
    const double disc = std::max(0.0, m.v0 * m.v0 + 2.0 * m.accel * ds);
    tau = (-m.v0 + std::sqrt(disc)) / m.accel;
  }
  return std::clamp(m.t0 + tau, m.t0, m.t1);
}

double dist_to_square(Vec2 p, double x0, double y0, double size) {
  const double dx = std::max({x0 - p.x, 0.0, p.x - (x0 + size)});
  const double dy = std::max({y0 - p.y, 0.0, p.y - (y0 + size)});
  return std::hypot(dx, dy);
}

void add_cells_near(const TerminalMap& map, Vec2 p, double r,
                    std::vector<CellIndex>& out) {
  const double cs = map.cell_size();
  const int x_lo = std::max(0, static_cast<int>(std::floor((p.x - r) / cs)));
  const int x_hi = std::min(map.width() - 1, static_cast<int>(std::floor((p.x + r) / cs)));
  const int y_lo = std::max(0, static_cast<int>(std::floor((p.y - r) / cs)));
  const int y_hi = std::min(map.height() - 1, static_cast<int>(std::floor((p.y + r) / cs)));
  for (int y = y_lo; y <= y_hi; ++y)
    for (int x = x_lo; x <= x_hi; ++x)
      if (dist_to_square(p, x * cs, y * cs, cs) <= r) out.push_back(map.index(x, y));
}

void sort_unique(std::vector<CellIndex>& v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
}

}  // namespace

const char* to_string(SegmentKind k) {
  switch (k) {
    case SegmentKind::Straight: return "Straight";
    case SegmentKind::Curve: return "Curve";
    case SegmentKind::Crab: return "Crab";
  }
  return "?";
}

double speed_limit_for(SegmentKind kind, const AgvParams& params) {
  switch (kind) {
    case SegmentKind::Straight: return params.v_max_straight;
    case SegmentKind::Curve: return params.v_max_curve;
    case SegmentKind::Crab: return params.v_max_crab;
  }
  return params.v_max_crab;
}

Vec2 Piece::point_at(double u) const {
  const double f = length > 0.0 ? std::clamp(u / length, 0.0, 1.0) : 0.0;
  if (radius > 0.0) {
    const double a = start_angle + sweep * f;
    return {arc_center.x + radius * std::cos(a), arc_center.y + radius * std::sin(a)};
  }
  return start + f * (end - start);
}

double Piece::tangent_at(double u) const {
  if (radius > 0.0) {
    const double f = length > 0.0 ? std::clamp(u / length, 0.0, 1.0) : 0.0;
    const double a = start_angle + sweep * f;
    return normalize_angle(a + (sweep > 0.0 ? kPi / 2 : -kPi / 2));
  }
  return std::atan2(end.y - start.y, end.x - start.x);
}

std::vector<Piece> build_pieces(const TerminalMap& map,
                                std::span<const CellIndex> path,
                                const AgvParams& params) {
  std::vector<Piece> pieces;
  if (path.size() < 2) return pieces;
  const double cs = map.cell_size();
  const std::size_t m = path.size() - 1;

  std::vector<Direction> dirs;
  for (std::size_t i = 0; i < m; ++i) {
    const auto d = direction_between(map, path[i], path[i + 1]);
    if (!d) throw std::invalid_argument("build_pieces: path cells are not adjacent");
    dirs.push_back(*d);
  }

  for (std::size_t i = 0; i <= m; ++i) {
    Piece p;
    p.cell = path[i];
    const Vec2 c = map.center(path[i]);
    if (i == 0) {
      p.start = c;
      p.end = midpoint(c, map.center(path[1]));
      p.length = cs / 2;
    } else if (i == m) {
      p.start = midpoint(map.center(path[i - 1]), c);
      p.end = c;
      p.length = cs / 2;
    } else {
      p.start = midpoint(map.center(path[i - 1]), c);
      p.end = midpoint(c, map.center(path[i + 1]));
      if (dirs[i - 1] == dirs[i]) {
        p.length = cs;
      } else if (dirs[i - 1] == opposite(dirs[i])) {
        throw std::invalid_argument("build_pieces: path reverses inside a cell");
      } else {
        p.kind = SegmentKind::Curve;
        p.arc_center = p.start + p.end - c;
        p.radius = cs / 2;
        const Vec2 a = p.start - p.arc_center;
        const Vec2 b = p.end - p.arc_center;
        p.start_angle = std::atan2(a.y, a.x);
        p.sweep = normalize_angle(std::atan2(b.y, b.x) - p.start_angle);
        p.length = p.radius * std::abs(p.sweep);
      }
    }
    pieces.push_back(p);
  }

  // Bays entered or left sideways (the neighbouring road piece turns) are
  // driven in crab mode.
  if (is_dock(map.kind(path.front())) && m >= 2 && pieces[1].kind == SegmentKind::Curve)
    pieces.front().kind = SegmentKind::Crab;
  if (is_dock(map.kind(path.back())) && m >= 2 && pieces[m - 1].kind == SegmentKind::Curve)
    pieces.back().kind = SegmentKind::Crab;

  for (auto& p : pieces) p.v_limit = speed_limit_for(p.kind, params);
  return pieces;
}

std::optional<std::vector<Phase>> plan_run(std::span<const SpeedCap> caps,
                                           double s_a, double v_a, double s_b,
                                           double a_max) {
  std::vector<Phase> phases;
  if (!(s_b > s_a)) {
    if (v_a > 1e-9) return std::nullopt;
    return phases;
  }
  struct Sub {
    double p, q, u2;
  };
  std::vector<Sub> subs;
  for (const auto& c : caps) {
    const double p = std::max(c.from, s_a);
    const double q = std::min(c.to, s_b);
    if (q - p > 1e-12) subs.push_back({p, q, c.v_limit * c.v_limit});
  }
  if (subs.empty()) return std::nullopt;

  const double two_a = 2.0 * a_max;
  const std::size_t n = subs.size();
  std::vector<double> rise(n), fall(n);
  double acc = v_a * v_a - two_a * s_a;
  for (std::size_t i = 0; i < n; ++i) {
    rise[i] = acc;
    acc = std::min(acc, subs[i].u2 - two_a * subs[i].q);
  }
  acc = two_a * s_b;
  for (std::size_t i = n; i-- > 0;) {
    fall[i] = acc;
    acc = std::min(acc, subs[i].u2 + two_a * subs[i].p);
  }

  const double v2a = v_a * v_a;
  const double tol = 1e-9 * std::max(1.0, v2a);
  if (v2a > subs[0].u2 + tol || v2a > fall[0] - two_a * s_a + tol) return std::nullopt;

  for (std::size_t i = 0; i < n; ++i) {
    const auto& sub = subs[i];
    const double C = sub.u2;
    auto vsq = [&](double s) {
      return std::max(0.0, std::min({C, rise[i] + two_a * s, fall[i] - two_a * s}));
    };
    auto clampq = [&](double s) { return std::clamp(s, sub.p, sub.q); };
    const double s1 = (C - rise[i]) / two_a;
    const double s2 = (fall[i] - C) / two_a;
    struct Span {
      double a, b, accel;
    };
    std::vector<Span> spans;
    if (s1 <= s2) {
      spans = {{sub.p, clampq(s1), a_max}, {clampq(s1), clampq(s2), 0.0},
               {clampq(s2), sub.q, -a_max}};
    } else {
      const double sx = clampq((fall[i] - rise[i]) / (2.0 * two_a));
      spans = {{sub.p, sx, a_max}, {sx, sub.q, -a_max}};
    }
    for (const auto& sp : spans) {
      const double ds = sp.b - sp.a;
      if (ds <= 1e-12) continue;
      Phase ph;
      ph.s0 = sp.a;
      ph.s1 = sp.b;
      ph.accel = sp.accel;
      ph.v0 = std::sqrt(vsq(sp.a));
      if (sp.accel == 0.0) {
        if (ph.v0 <= 0.0) return std::nullopt;
        ph.duration = ds / ph.v0;
      } else {
        const double v1 = std::sqrt(std::max(0.0, ph.v0 * ph.v0 + 2.0 * sp.accel * ds));
        ph.duration = (v1 - ph.v0) / sp.accel;
      }
      phases.push_back(ph);
    }
  }
  return phases;
}

double profile_duration(std::span<const Phase> phases) {
  double t = 0.0;
  for (const auto& p : phases) t += p.duration;
  return t;
}

std::vector<double> Trajectory::boundary_s() const {
  std::vector<double> out{0.0};
  for (const auto& p : pieces) out.push_back(out.back() + p.length);
  return out;
}

double Trajectory::length() const {
  double l = 0.0;
  for (const auto& p : pieces) l += p.length;
  return l;
}

namespace {

const MotionSegment* segment_at(const std::vector<MotionSegment>& motion, double t) {
  auto it = std::upper_bound(motion.begin(), motion.end(), t,
                             [](double v, const MotionSegment& m) { return v < m.t1; });
  if (it == motion.end()) return nullptr;
  return &*it;
}

}  // namespace

double Trajectory::progress_at(double t) const {
  if (motion.empty()) return 0.0;
  if (t <= motion.front().t0) return motion.front().s0;
  const MotionSegment* m = segment_at(motion, t);
  if (!m) return std::min(seg_end_s(motion.back()), length());
  return std::clamp(m->s_at(std::max(t, m->t0)), 0.0, length());
}

double Trajectory::speed_at(double t) const {
  if (motion.empty() || t < motion.front().t0) return 0.0;
  const MotionSegment* m = segment_at(motion, t);
  return m ? std::max(0.0, m->v_at(std::max(t, m->t0))) : 0.0;
}

double Trajectory::accel_at(double t) const {
  if (motion.empty() || t < motion.front().t0) return 0.0;
  const MotionSegment* m = segment_at(motion, t);
  return m ? m->accel : 0.0;
}

std::size_t Trajectory::piece_index_at(double s) const {
  double acc = 0.0;
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    acc += pieces[i].length;
    if (s < acc) return i;
  }
  return pieces.empty() ? 0 : pieces.size() - 1;
}

Vec2 Trajectory::point_at_s(double s) const {
  if (pieces.empty()) return {};
  double base = 0.0;
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    if (s < base + pieces[i].length || i + 1 == pieces.size())
      return pieces[i].point_at(s - base);
    base += pieces[i].length;
  }
  return pieces.back().end;
}

double Trajectory::tangent_at_s(double s) const {
  if (pieces.empty()) return 0.0;
  double base = 0.0;
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    if (s < base + pieces[i].length || i + 1 == pieces.size())
      return pieces[i].tangent_at(s - base);
    base += pieces[i].length;
  }
  return pieces.back().tangent_at(pieces.back().length);
}

double Trajectory::time_reaching(double s) const {
  constexpr double eps = 1e-9;
  for (const auto& m : motion) {
    if (m.s0 >= s - eps) return m.t0;
    if (!m.is_hold() && seg_end_s(m) >= s - eps) return seg_time_at_s(m, s);
  }
  return t_end();
}

double Trajectory::arrival_time() const { return time_reaching(length()); }

double Trajectory::pickup_arrival_time() const {
  const auto bs = boundary_s();
  const auto b = static_cast<std::size_t>(std::max(0, pickup_boundary));
  return time_reaching(bs[std::min(b, bs.size() - 1)]);
}

std::vector<CellTiming> Trajectory::cell_timing() const {
  constexpr double eps = 1e-9;
  const auto bs = boundary_s();
  std::vector<CellTiming> out;
  for (std::size_t k = 0; k < pieces.size(); ++k) {
    // Departure from the entry boundary: the last instant at or before it.
    double enter = t_begin();
    for (const auto& m : motion) {
      if (m.s0 > bs[k] + eps) break;
      if (m.is_hold())
        enter = m.t1;
      else if (seg_end_s(m) > bs[k] + eps)
        enter = seg_time_at_s(m, bs[k]);
      else
        enter = m.t1;
    }
    out.push_back({pieces[k].cell, enter, time_reaching(bs[k + 1])});
  }
  return out;
}

std::uint64_t hash_path(std::span<const CellIndex> path) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (CellIndex c : path) {
    auto u = static_cast<std::uint32_t>(c);
    for (int b = 0; b < 4; ++b) {
      h ^= (u >> (8 * b)) & 0xffu;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

std::uint64_t Trajectory::path_hash() const { return hash_path(path); }

std::vector<CellIndex> piece_footprint(const TerminalMap& map, const Piece& piece,
                                       double radius) {
  std::vector<CellIndex> out;
  const int n = std::max(2, static_cast<int>(std::ceil(piece.length / kSampleSpacing)) + 1);
  const double h = piece.length / (n - 1);
  const double r = radius + 0.5 * h + 1e-9;
  for (int i = 0; i < n; ++i) add_cells_near(map, piece.point_at(i * h), r, out);
  sort_unique(out);
  return out;
}

std::vector<CellIndex> point_footprint(const TerminalMap& map, Vec2 p, double radius) {
  std::vector<CellIndex> out;
  add_cells_near(map, p, radius + 1e-9, out);
  sort_unique(out);
  return out;
}

std::vector<Occupancy> trajectory_occupancy(const TerminalMap& map,
                                            const Trajectory& traj, double radius,
                                            double from_t) {
  std::vector<Occupancy> raw;
  if (traj.motion.empty()) return raw;
  const auto bs = traj.boundary_s();
  std::vector<std::vector<CellIndex>> fps;
  fps.reserve(traj.pieces.size());
  for (const auto& p : traj.pieces) fps.push_back(piece_footprint(map, p, radius));

  auto emit = [&](const std::vector<CellIndex>& cells, double t0, double t1) {
    for (CellIndex c : cells) raw.push_back({c, t0, t1});
  };

  for (const auto& m : traj.motion) {
    if (m.t1 <= from_t) continue;
    const double ta = std::max(m.t0, from_t);
    if (m.is_hold()) {
      emit(point_footprint(map, traj.point_at_s(m.s0), radius), ta, m.t1);
      continue;
    }
    const double sa = m.s_at(ta);
    const double sb = seg_end_s(m);
    for (std::size_t k = 0; k < traj.pieces.size(); ++k) {
      if (!(bs[k] < sb - 1e-12 && bs[k + 1] > sa + 1e-12)) continue;
      const double t_in = sa >= bs[k] ? ta : seg_time_at_s(m, bs[k]);
      const double t_out = sb <= bs[k + 1] ? m.t1 : seg_time_at_s(m, bs[k + 1]);
      emit(fps[k], t_in, t_out);
    }
  }
  emit(point_footprint(map, traj.point_at_s(traj.length()), radius),
       std::max(traj.t_end(), from_t), kForever);

  std::sort(raw.begin(), raw.end(), [](const Occupancy& a, const Occupancy& b) {
    return a.cell != b.cell ? a.cell < b.cell : a.t0 < b.t0;
  });
  std::vector<Occupancy> merged;
  for (const auto& o : raw) {
    if (!merged.empty() && merged.back().cell == o.cell && o.t0 <= merged.back().t1 + 1e-9)
      merged.back().t1 = std::max(merged.back().t1, o.t1);
    else
      merged.push_back(o);
  }
  return merged;
}

}  // namespace quayfleet

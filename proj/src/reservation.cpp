#include "quayfleet/reservation.hpp"

#include <algorithm>
#include <limits>

namespace quayfleet {

namespace {

bool too_close(double a0, double a1, double b0, double b1, double h) {
  return a0 < b1 + h && b0 < a1 + h;
}

}  // namespace

void ReservationTable::add(CellIndex cell, std::int32_t agv, double t0, double t1) {
  auto& v = cells_[static_cast<std::size_t>(cell)];
  const Reservation r{agv, t0, t1};
  auto it = std::upper_bound(v.begin(), v.end(), r, [](const Reservation& a, const Reservation& b) {
    return a.t0 != b.t0 ? a.t0 < b.t0 : a.agv < b.agv;
  });
  v.insert(it, r);
}

void ReservationTable::add(std::int32_t agv, const std::vector<Occupancy>& occupancy) {
  for (const auto& o : occupancy) add(o.cell, agv, o.t0, o.t1);
}

void ReservationTable::remove_agv(std::int32_t agv) {
  for (auto& v : cells_)
    std::erase_if(v, [&](const Reservation& r) { return r.agv == agv; });
}

void ReservationTable::release_before(std::int32_t agv, double t) {
  for (auto& v : cells_)
    std::erase_if(v, [&](const Reservation& r) { return r.agv == agv && r.t1 < t; });
}

void ReservationTable::truncate_after(std::int32_t agv, double t) {
  for (auto& v : cells_) {
    std::erase_if(v, [&](const Reservation& r) { return r.agv == agv && r.t0 >= t; });
    for (auto& r : v)
      if (r.agv == agv && r.t1 > t) r.t1 = t;
  }
}

double ReservationTable::required_shift(CellIndex cell, std::int32_t agv, double t0,
                                        double t1) const {
  double shift = 0.0;
  for (const auto& r : cells_[static_cast<std::size_t>(cell)]) {
    if (r.agv == agv) continue;
    if (r.t0 >= t1 + headway_) break;  // sorted by start
    if (!too_close(t0, t1, r.t0, r.t1, headway_)) continue;
    if (r.t1 == kForever) return std::numeric_limits<double>::infinity();
    shift = std::max(shift, r.t1 + headway_ - t0);
  }
  return shift;
}

bool ReservationTable::conflicts(CellIndex cell, std::int32_t agv, double t0, double t1) const {
  for (const auto& r : cells_[static_cast<std::size_t>(cell)]) {
    if (r.agv == agv) continue;
    if (r.t0 >= t1 + headway_) break;
    if (too_close(t0, t1, r.t0, r.t1, headway_)) return true;
  }
  return false;
}

std::size_t ReservationTable::count() const {
  std::size_t n = 0;
  for (const auto& v : cells_) n += v.size();
  return n;
}

std::size_t ReservationTable::count_for(std::int32_t agv) const {
  std::size_t n = 0;
  for (const auto& v : cells_)
    n += static_cast<std::size_t>(std::count_if(v.begin(), v.end(),
                                                [&](const Reservation& r) { return r.agv == agv; }));
  return n;
}

std::vector<ReservationTable::Violation> ReservationTable::headway_violations() const {
  std::vector<Violation> out;
  // Tolerate round-off from the shift arithmetic.
  const double h = headway_ - 1e-6;
  for (std::size_t c = 0; c < cells_.size(); ++c) {
    const auto& v = cells_[c];
    for (std::size_t i = 0; i < v.size(); ++i)
      for (std::size_t j = i + 1; j < v.size(); ++j)
        if (v[i].agv != v[j].agv && too_close(v[i].t0, v[i].t1, v[j].t0, v[j].t1, h))
          out.push_back({static_cast<CellIndex>(c), v[i], v[j]});
  }
  return out;
}

}  // namespace quayfleet

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "quayfleet/terminal_map.hpp"
#include "quayfleet/trajectory.hpp"

namespace quayfleet {

struct Reservation {
  std::int32_t agv;
  double t0;
  double t1;
};

/// Per-cell ledger of timed occupancy. Intervals of different AGVs on one
/// cell must stay at least `headway` seconds apart.
class ReservationTable {
 public:
  ReservationTable(std::size_t cell_count, double headway)
      : cells_(cell_count), headway_(headway) {}

  double headway() const { return headway_; }
  std::size_t cell_count() const { return cells_.size(); }

  void add(CellIndex cell, std::int32_t agv, double t0, double t1);
  void add(std::int32_t agv, const std::vector<Occupancy>& occupancy);

  void remove_agv(std::int32_t agv);
  /// Drops every interval of `agv` that ended strictly before `t`.
  void release_before(std::int32_t agv, double t);
  /// Clips every interval of `agv` to end no later than `t`; intervals that
  /// start at or after `t` are removed.
  void truncate_after(std::int32_t agv, double t);

  const std::vector<Reservation>& at(CellIndex cell) const {
    return cells_[static_cast<std::size_t>(cell)];
  }

  /// Smallest shift d >= 0 such that [t0+d, t1+d] clears every interval of
  /// other AGVs on `cell` that it currently conflicts with. Returns 0 when
  /// there is no conflict and +inf if an open-ended interval blocks it.
  double required_shift(CellIndex cell, std::int32_t agv, double t0, double t1) const;
  bool conflicts(CellIndex cell, std::int32_t agv, double t0, double t1) const;

  std::size_t count() const;
  std::size_t count_for(std::int32_t agv) const;

  /// Pairs of intervals of different AGVs closer than the headway.
  struct Violation {
    CellIndex cell;
    Reservation a;
    Reservation b;
  };
  std::vector<Violation> headway_violations() const;

  friend bool operator==(const ReservationTable& a, const ReservationTable& b) {
    if (a.cells_.size() != b.cells_.size()) return false;
    for (std::size_t i = 0; i < a.cells_.size(); ++i) {
      if (a.cells_[i].size() != b.cells_[i].size()) return false;
      for (std::size_t j = 0; j < a.cells_[i].size(); ++j) {
        const auto& x = a.cells_[i][j];
        const auto& y = b.cells_[i][j];
        if (x.agv != y.agv || x.t0 != y.t0 || x.t1 != y.t1) return false;
      }
    }
    return true;
  }

 private:
  std::vector<std::vector<Reservation>> cells_;
  double headway_;
};

}  // namespace quayfleet

/**
 * @file terminal_map.hpp
 * @brief Grid workspace of a free-ranging container terminal and job generation.
 *
 * The terminal is a metric grid. Road cells carry a set of allowed exit
 * directions (one-way lanes); quay-crane and stack-lane cells are bays that
 * connect to every adjacent road cell in both directions.
 */
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "quayfleet/geometry.hpp"
#include "quayfleet/powertrain.hpp"

namespace quayfleet {

using CellIndex = std::int32_t;

enum class CellKind : std::uint8_t { Road, QuayCrane, StackLane, Obstacle };

enum class Direction : std::uint8_t { N = 0, E = 1, S = 2, W = 3 };

/// Bit set over {N, E, S, W}.
using DirectionSet = std::uint8_t;

constexpr DirectionSet dir_bit(Direction d) {
  return static_cast<DirectionSet>(1u << static_cast<unsigned>(d));
}
constexpr DirectionSet kAllDirections = 0x0f;

constexpr Direction opposite(Direction d) {
  return static_cast<Direction>((static_cast<unsigned>(d) + 2) % 4);
}

inline bool is_dock(CellKind k) {
  return k == CellKind::QuayCrane || k == CellKind::StackLane;
}

/// Textual map description, rows listed north to south.
///
///   '>' '<' '^' 'v'  one-way road (E, W, N, S)
///   '-' '|'          two-way road (E+W, N+S)
///   '+'              road open in all directions
///   'Q'              quay crane bay
///   'S'              stack lane bay
///   '#'              obstacle
///
/// `extra_directions` lets generators add exits to individual road cells
/// (crossovers between ring lanes) without inventing more glyphs.
struct MapSpec {
  std::vector<std::string> rows;
  double cell_size = 4.0;
  struct ExtraExit {
    int x;
    int y;
    Direction dir;
  };
  std::vector<ExtraExit> extra_directions;
};

class TerminalMap {
 public:
  int width() const { return width_; }
  int height() const { return height_; }
  double cell_size() const { return cell_size_; }
  std::size_t cell_count() const { return kinds_.size(); }

  bool in_grid(int x, int y) const {
    return x >= 0 && y >= 0 && x < width_ && y < height_;
  }
  CellIndex index(int x, int y) const { return y * width_ + x; }
  int x_of(CellIndex c) const { return c % width_; }
  int y_of(CellIndex c) const { return c / width_; }

  CellKind kind(CellIndex c) const { return kinds_[static_cast<std::size_t>(c)]; }
  DirectionSet allowed(CellIndex c) const {
    return allowed_[static_cast<std::size_t>(c)];
  }

  /// Metric centre of a cell; cell (0,0) spans [0, cell_size)^2.
  Vec2 center(CellIndex c) const {
    return {(x_of(c) + 0.5) * cell_size_, (y_of(c) + 0.5) * cell_size_};
  }
  /// Cell containing a metric point, if inside the grid.
  std::optional<CellIndex> cell_at(Vec2 p) const;

  /// Adjacent cell in direction `d`, if inside the grid.
  std::optional<CellIndex> step(CellIndex c, Direction d) const;

  std::vector<CellIndex> cells_of_kind(CellKind k) const;

  friend bool operator==(const TerminalMap&, const TerminalMap&) = default;

 private:
  friend TerminalMap build_map(const MapSpec& spec);

  int width_ = 0;
  int height_ = 0;
  double cell_size_ = 0.0;
  std::vector<CellKind> kinds_;
  std::vector<DirectionSet> allowed_;
};

/// Parses and validates a map. Throws InvalidMap when a bay has no road
/// access, the lanes are not strongly connected among bay access cells, or
/// the description is malformed.
TerminalMap build_map(const MapSpec& spec);

/// Cells reachable in one move. Roads follow their allowed exits (and may
/// always pull into an adjacent bay); bays exit to any adjacent road.
std::vector<CellIndex> neighbors(const TerminalMap& map, CellIndex cell);

/// Direction of the move a -> b for 4-adjacent cells.
std::optional<Direction> direction_between(const TerminalMap& map, CellIndex a,
                                           CellIndex b);

// ---------------------------------------------------------------------------
// Jobs

enum class FlowCategory : std::uint8_t { Export, Import, Transit };

const char* to_string(FlowCategory f);

struct Job {
  std::int32_t id = 0;
  FlowCategory flow = FlowCategory::Export;
  ContainerKind container = ContainerKind::Std20;
  CellIndex pickup = 0;
  CellIndex dropoff = 0;
  double release_time = 0.0;
  bool priority = false;

  friend bool operator==(const Job&, const Job&) = default;
};

/// Fractions of Export, Import and Transit jobs.
struct FlowMix {
  double export_share = 1.0 / 3.0;
  double import_share = 1.0 / 3.0;
  double transit_share = 1.0 / 3.0;
};

struct JobGenOptions {
  double release_window_s = 0.0;  ///< releases drawn uniformly in [0, window]
  double priority_fraction = 0.0;
};

/// Deterministic job stream: Export runs stack->quay, Import quay->stack,
/// Transit quay->quay. Category counts follow the mix by largest remainder.
/// Throws NoEndpoints when the map lacks the bays a requested category needs.
std::vector<Job> generate_jobs(const TerminalMap& map, const FlowMix& mix,
                               int count, std::uint64_t seed,
                               const JobGenOptions& options = {});

/// Two concentric counter-rotating ring roads with crossovers, quay bays on
/// the north edge and stack bays on the south edge and inside the inner ring.
struct RingLayoutOptions {
  int width = 20;
  int height = 20;
  double cell_size = 6.0;
  std::vector<int> quay_columns;          ///< x positions on the north edge
  std::vector<int> outer_stack_columns;   ///< x positions on the south edge
  std::vector<int> inner_stack_columns;   ///< x positions just inside the inner ring's south lane
};

MapSpec ring_terminal_spec(const RingLayoutOptions& options);

/// The reference 20x20 layout: 4 quay cranes, 6 stack lanes, two rings.
MapSpec default_terminal_spec();

}  // namespace quayfleet

#include <algorithm>
#include <map>
#include <numbers>
#include <queue>

#include "quayfleet/errors.hpp"
#include "quayfleet/supervisor.hpp"

namespace quayfleet {

namespace {

constexpr int kNoDir = 4;

struct Label {
  double cost = 0.0;
  int turns = 0;
  std::vector<CellIndex> path;
};

// Strict ordering: cost, then turns, then lexicographic path.
bool better(const Label& a, const Label& b) {
  if (std::abs(a.cost - b.cost) > 1e-9) return a.cost < b.cost;
  if (a.turns != b.turns) return a.turns < b.turns;
  return a.path < b.path;
}

}  // namespace

std::vector<CellIndex> plan_path(const TerminalMap& map, CellIndex start, CellIndex goal,
                                 const AgvParams& params) {
  const auto n_cells = static_cast<CellIndex>(map.cell_count());
  if (start < 0 || goal < 0 || start >= n_cells || goal >= n_cells)
    throw Unreachable("cell outside the grid");
  if (map.kind(start) == CellKind::Obstacle || map.kind(goal) == CellKind::Obstacle)
    throw Unreachable("start or goal is an obstacle");
  if (start == goal) return {start};

  const double cs = map.cell_size();
  const double half_straight = (cs / 2) / params.v_max_straight;
  const double half_crab = (cs / 2) / params.v_max_crab;
  const double full_straight = cs / params.v_max_straight;
  const double arc = (std::numbers::pi * cs / 4) / params.v_max_curve;
  const bool start_is_dock = is_dock(map.kind(start));
  const bool goal_is_dock = is_dock(map.kind(goal));

  auto key = [](CellIndex c, int din) { return static_cast<std::size_t>(c) * 5 + static_cast<std::size_t>(din); };
  std::vector<std::optional<Label>> best(map.cell_count() * 5);
  auto cmp = [](const std::pair<Label, std::size_t>& a, const std::pair<Label, std::size_t>& b) {
    return better(b.first, a.first);
  };
  std::priority_queue<std::pair<Label, std::size_t>, std::vector<std::pair<Label, std::size_t>>,
                      decltype(cmp)>
      open(cmp);

  Label init{0.0, 0, {start}};
  best[key(start, kNoDir)] = init;
  open.push({init, key(start, kNoDir)});

  while (!open.empty()) {
    auto [label, k] = open.top();
    open.pop();
    const auto& cur = best[k];
    if (!cur || better(*cur, label)) continue;
    const auto c = static_cast<CellIndex>(k / 5);
    const int din = static_cast<int>(k % 5);
    if (c == goal) return label.path;
    if (c != start && is_dock(map.kind(c))) continue;

    for (CellIndex n : neighbors(map, c)) {
      if (n != goal && is_dock(map.kind(n))) continue;
      if (std::find(label.path.begin(), label.path.end(), n) != label.path.end()) continue;
      const int dout = static_cast<int>(*direction_between(map, c, n));
      Label next = label;
      next.path.push_back(n);
      bool c_is_curve = false;
      if (din == kNoDir) {
        // Leaving the start: a bay's half piece is priced once its
        // neighbour's shape is known, unless the goal is next.
        if (!start_is_dock || n == goal) next.cost += half_straight;
      } else {
        if (din == dout) {
          next.cost += full_straight;
        } else if (static_cast<Direction>(din) == opposite(static_cast<Direction>(dout))) {
          continue;
        } else {
          next.cost += arc;
          next.turns += 1;
          c_is_curve = true;
        }
        const bool prev_is_start = label.path.size() == 2;
        if (prev_is_start && start_is_dock) next.cost += c_is_curve ? half_crab : half_straight;
      }
      if (n == goal) {
        const bool crab = goal_is_dock && din != kNoDir && c_is_curve;
        next.cost += crab ? half_crab : half_straight;
      }
      const std::size_t nk = key(n, dout);
      if (!best[nk] || better(next, *best[nk])) {
        best[nk] = next;
        open.push({std::move(next), nk});
      }
    }
  }
  throw Unreachable("no route from (" + std::to_string(map.x_of(start)) + "," +
                    std::to_string(map.y_of(start)) + ") to (" +
                    std::to_string(map.x_of(goal)) + "," + std::to_string(map.y_of(goal)) + ")");
}

double free_flight_cost(const TerminalMap& map, std::span<const CellIndex> path,
                        const AgvParams& params) {
  double t = 0.0;
  for (const auto& p : build_pieces(map, path, params)) t += p.length / p.v_limit;
  return t;
}

}  // namespace quayfleet

#include "quayfleet/terminal_map.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "quayfleet/errors.hpp"
#include "quayfleet/random.hpp"

namespace quayfleet {

namespace {

constexpr Direction kDirections[] = {Direction::N, Direction::E, Direction::S,
                                     Direction::W};

void offset(Direction d, int& dx, int& dy) {
  dx = 0;
  dy = 0;
  switch (d) {
    case Direction::N: dy = 1; break;
    case Direction::E: dx = 1; break;
    case Direction::S: dy = -1; break;
    case Direction::W: dx = -1; break;
  }
}

struct Glyph {
  CellKind kind;
  DirectionSet dirs;
};

std::optional<Glyph> parse_glyph(char c) {
  switch (c) {
    case '>': return Glyph{CellKind::Road, dir_bit(Direction::E)};
    case '<': return Glyph{CellKind::Road, dir_bit(Direction::W)};
    case '^': return Glyph{CellKind::Road, dir_bit(Direction::N)};
    case 'v': return Glyph{CellKind::Road, dir_bit(Direction::S)};
    case '-': return Glyph{CellKind::Road, DirectionSet(dir_bit(Direction::E) | dir_bit(Direction::W))};
    case '|': return Glyph{CellKind::Road, DirectionSet(dir_bit(Direction::N) | dir_bit(Direction::S))};
    case '+': return Glyph{CellKind::Road, kAllDirections};
    case 'Q': return Glyph{CellKind::QuayCrane, 0};
    case 'S': return Glyph{CellKind::StackLane, 0};
    case '#': return Glyph{CellKind::Obstacle, 0};
    default: return std::nullopt;
  }
}

// Road-to-road moves only; used for the lane connectivity check.
std::vector<CellIndex> road_successors(const TerminalMap& map, CellIndex c) {
  std::vector<CellIndex> out;
  for (Direction d : kDirections) {
    if (!(map.allowed(c) & dir_bit(d))) continue;
    if (auto n = map.step(c, d); n && map.kind(*n) == CellKind::Road)
      out.push_back(*n);
  }
  return out;
}

std::vector<bool> reach(const TerminalMap& map, CellIndex from, bool reverse) {
  std::vector<std::vector<CellIndex>> preds;
  if (reverse) {
    preds.resize(map.cell_count());
    for (CellIndex c = 0; c < static_cast<CellIndex>(map.cell_count()); ++c)
      if (map.kind(c) == CellKind::Road)
        for (CellIndex n : road_successors(map, c))
          preds[static_cast<std::size_t>(n)].push_back(c);
  }
  std::vector<bool> seen(map.cell_count(), false);
  std::vector<CellIndex> stack{from};
  seen[static_cast<std::size_t>(from)] = true;
  while (!stack.empty()) {
    const CellIndex c = stack.back();
    stack.pop_back();
    const auto next = reverse ? preds[static_cast<std::size_t>(c)]
                              : road_successors(map, c);
    for (CellIndex n : next) {
      if (!seen[static_cast<std::size_t>(n)]) {
        seen[static_cast<std::size_t>(n)] = true;
        stack.push_back(n);
      }
    }
  }
  return seen;
}

}  // namespace

std::optional<CellIndex> TerminalMap::step(CellIndex c, Direction d) const {
  int dx, dy;
  offset(d, dx, dy);
  const int x = x_of(c) + dx;
  const int y = y_of(c) + dy;
  if (!in_grid(x, y)) return std::nullopt;
  return index(x, y);
}

std::optional<CellIndex> TerminalMap::cell_at(Vec2 p) const {
  const int x = static_cast<int>(std::floor(p.x / cell_size_));
  const int y = static_cast<int>(std::floor(p.y / cell_size_));
  if (!in_grid(x, y)) return std::nullopt;
  return index(x, y);
}

std::vector<CellIndex> TerminalMap::cells_of_kind(CellKind k) const {
  std::vector<CellIndex> out;
  for (CellIndex c = 0; c < static_cast<CellIndex>(kinds_.size()); ++c)
    if (kind(c) == k) out.push_back(c);
  return out;
}

TerminalMap build_map(const MapSpec& spec) {
  if (!(spec.cell_size > 0.0)) throw InvalidMap("cell_size must be positive");
  if (spec.rows.empty()) throw InvalidMap("no rows");
  const int h = static_cast<int>(spec.rows.size());
  const int w = static_cast<int>(spec.rows.front().size());
  if (w == 0 || w * h < 2) throw InvalidMap("map needs at least two cells");

  TerminalMap map;
  map.width_ = w;
  map.height_ = h;
  map.cell_size_ = spec.cell_size;
  map.kinds_.assign(static_cast<std::size_t>(w * h), CellKind::Obstacle);
  map.allowed_.assign(static_cast<std::size_t>(w * h), 0);

  for (int r = 0; r < h; ++r) {
    const auto& row = spec.rows[static_cast<std::size_t>(r)];
    if (static_cast<int>(row.size()) != w)
      throw InvalidMap("row " + std::to_string(r) + " has inconsistent width");
    const int y = h - 1 - r;
    for (int x = 0; x < w; ++x) {
      const auto g = parse_glyph(row[static_cast<std::size_t>(x)]);
      if (!g) throw InvalidMap(std::string("unknown glyph '") + row[static_cast<std::size_t>(x)] + "'");
      const auto c = static_cast<std::size_t>(map.index(x, y));
      map.kinds_[c] = g->kind;
      map.allowed_[c] = g->dirs;
    }
  }
  for (const auto& extra : spec.extra_directions) {
    if (!map.in_grid(extra.x, extra.y)) throw InvalidMap("extra exit outside grid");
    const auto c = static_cast<std::size_t>(map.index(extra.x, extra.y));
    if (map.kinds_[c] != CellKind::Road) throw InvalidMap("extra exit on a non-road cell");
    map.allowed_[c] |= dir_bit(extra.dir);
  }

  // Every bay needs an adjacent road; collect those access cells.
  std::vector<CellIndex> access;
  for (CellIndex c = 0; c < static_cast<CellIndex>(map.cell_count()); ++c) {
    if (!is_dock(map.kind(c))) continue;
    bool has_road = false;
    for (Direction d : kDirections) {
      if (auto n = map.step(c, d); n && map.kind(*n) == CellKind::Road) {
        has_road = true;
        access.push_back(*n);
      }
    }
    if (!has_road)
      throw InvalidMap("bay at (" + std::to_string(map.x_of(c)) + "," +
                       std::to_string(map.y_of(c)) + ") has no road access");
  }
  std::sort(access.begin(), access.end());
  access.erase(std::unique(access.begin(), access.end()), access.end());

  if (!access.empty()) {
    const auto fwd = reach(map, access.front(), false);
    const auto bwd = reach(map, access.front(), true);
    for (CellIndex a : access) {
      if (!fwd[static_cast<std::size_t>(a)] || !bwd[static_cast<std::size_t>(a)])
        throw InvalidMap("lanes are not strongly connected at (" +
                         std::to_string(map.x_of(a)) + "," +
                         std::to_string(map.y_of(a)) + ")");
    }
  }
  return map;
}

std::vector<CellIndex> neighbors(const TerminalMap& map, CellIndex cell) {
  std::vector<CellIndex> out;
  const CellKind k = map.kind(cell);
  if (k == CellKind::Obstacle) return out;
  for (Direction d : kDirections) {
    const auto n = map.step(cell, d);
    if (!n) continue;
    const CellKind nk = map.kind(*n);
    if (k == CellKind::Road) {
      if (is_dock(nk) || (nk == CellKind::Road && (map.allowed(cell) & dir_bit(d))))
        out.push_back(*n);
    } else if (nk == CellKind::Road) {
      out.push_back(*n);
    }
  }
  return out;
}

std::optional<Direction> direction_between(const TerminalMap& map, CellIndex a,
                                           CellIndex b) {
  for (Direction d : kDirections)
    if (map.step(a, d) == b) return d;
  return std::nullopt;
}

const char* to_string(FlowCategory f) {
  switch (f) {
    case FlowCategory::Export: return "Export";
    case FlowCategory::Import: return "Import";
    case FlowCategory::Transit: return "Transit";
  }
  return "?";
}

std::vector<Job> generate_jobs(const TerminalMap& map, const FlowMix& mix,
                               int count, std::uint64_t seed,
                               const JobGenOptions& options) {
  const double shares[3] = {mix.export_share, mix.import_share, mix.transit_share};
  double sum = 0.0;
  for (double s : shares) {
    if (s < 0.0) throw std::invalid_argument("generate_jobs: negative share");
    sum += s;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw std::invalid_argument("generate_jobs: shares must sum to 1");
  if (count < 0) throw std::invalid_argument("generate_jobs: negative count");

  // Largest-remainder apportionment; ties go to the earlier category.
  int counts[3];
  double rem[3];
  int assigned = 0;
  for (int i = 0; i < 3; ++i) {
    const double exact = shares[i] * count;
    counts[i] = static_cast<int>(std::floor(exact + 1e-9));
    rem[i] = exact - counts[i];
    assigned += counts[i];
  }
  int order[3] = {0, 1, 2};
  std::stable_sort(order, order + 3, [&](int a, int b) { return rem[a] > rem[b]; });
  for (int i = 0; assigned < count; ++i, ++assigned) ++counts[order[i % 3]];

  const auto quays = map.cells_of_kind(CellKind::QuayCrane);
  const auto stacks = map.cells_of_kind(CellKind::StackLane);
  if ((counts[0] > 0 || counts[1] > 0) && (quays.empty() || stacks.empty()))
    throw NoEndpoints("export/import jobs need both quay and stack bays");
  if (counts[2] > 0 && quays.size() < 2)
    throw NoEndpoints("transit jobs need at least two quay bays");

  std::vector<FlowCategory> flows;
  for (int i = 0; i < 3; ++i)
    flows.insert(flows.end(), static_cast<std::size_t>(counts[i]),
                 static_cast<FlowCategory>(i));
  SeededRng rng(hash_key({seed, 0x6a6f6273ULL}));
  for (std::size_t i = flows.size(); i > 1; --i)  // Fisher-Yates
    std::swap(flows[i - 1], flows[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i) - 1))]);

  auto pick = [&](const std::vector<CellIndex>& cells) {
    return cells[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(cells.size()) - 1))];
  };

  std::vector<Job> jobs;
  jobs.reserve(flows.size());
  for (FlowCategory f : flows) {
    Job j;
    j.flow = f;
    j.container = static_cast<ContainerKind>(rng.uniform_int(0, 3));
    switch (f) {
      case FlowCategory::Export:
        j.pickup = pick(stacks);
        j.dropoff = pick(quays);
        break;
      case FlowCategory::Import:
        j.pickup = pick(quays);
        j.dropoff = pick(stacks);
        break;
      case FlowCategory::Transit:
        j.pickup = pick(quays);
        do { j.dropoff = pick(quays); } while (j.dropoff == j.pickup);
        break;
    }
    j.release_time = options.release_window_s > 0.0
                         ? rng.uniform() * options.release_window_s
                         : 0.0;
    j.priority = rng.uniform() < options.priority_fraction;
    jobs.push_back(j);
  }
  std::stable_sort(jobs.begin(), jobs.end(), [](const Job& a, const Job& b) {
    return a.release_time < b.release_time;
  });
  for (std::size_t i = 0; i < jobs.size(); ++i) jobs[i].id = static_cast<std::int32_t>(i);
  return jobs;
}

MapSpec ring_terminal_spec(const RingLayoutOptions& o) {
  const int w = o.width;
  const int h = o.height;
  if (w < 8 || h < 8) throw InvalidMap("ring terminal needs at least 8x8 cells");
  std::vector<std::string> grid(static_cast<std::size_t>(h), std::string(static_cast<std::size_t>(w), '#'));
  auto set = [&](int x, int y, char c) {
    grid[static_cast<std::size_t>(h - 1 - y)][static_cast<std::size_t>(x)] = c;
  };

  // Outer ring clockwise on [1, w-2] x [1, h-2].
  {
    const int x0 = 1, x1 = w - 2, y0 = 1, y1 = h - 2;
    for (int x = x0; x < x1; ++x) set(x, y1, '>');
    for (int y = y0 + 1; y <= y1; ++y) set(x1, y, 'v');
    for (int x = x0 + 1; x <= x1; ++x) set(x, y0, '<');
    for (int y = y0; y < y1; ++y) set(x0, y, '^');
  }
  // Inner ring counter-clockwise on [2, w-3] x [2, h-3].
  {
    const int x0 = 2, x1 = w - 3, y0 = 2, y1 = h - 3;
    for (int x = x0 + 1; x <= x1; ++x) set(x, y1, '<');
    for (int y = y0 + 1; y <= y1; ++y) set(x0, y, 'v');
    for (int x = x0; x < x1; ++x) set(x, y0, '>');
    for (int y = y0; y < y1; ++y) set(x1, y, '^');
  }
  for (int x : o.quay_columns) set(x, h - 1, 'Q');
  for (int x : o.outer_stack_columns) set(x, 0, 'S');
  for (int x : o.inner_stack_columns) set(x, 3, 'S');

  MapSpec spec;
  spec.rows = std::move(grid);
  spec.cell_size = o.cell_size;
  // Crossovers: outer->inner and inner->outer on both long sides.
  const int left = 3 + (w - 8) / 4;
  const int right = w - 4 - (w - 8) / 4;
  spec.extra_directions = {
      {left, h - 2, Direction::S},   // outer top -> inner top
      {right, h - 3, Direction::N},  // inner top -> outer top
      {right, 1, Direction::N},      // outer bottom -> inner bottom
      {left, 2, Direction::S},       // inner bottom -> outer bottom
  };
  return spec;
}

MapSpec default_terminal_spec() {
  RingLayoutOptions o;
  o.quay_columns = {4, 8, 12, 16};
  o.outer_stack_columns = {5, 10, 15};
  o.inner_stack_columns = {6, 10, 14};
  return ring_terminal_spec(o);
}

}  // namespace quayfleet

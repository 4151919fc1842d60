#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "quayfleet/errors.hpp"
#include "quayfleet/random.hpp"
#include "quayfleet/sim_engine.hpp"

namespace quayfleet {

using nlohmann::json;

namespace {

constexpr int kScenarioVersion = 1;

const char* dir_name(Direction d) {
  switch (d) {
    case Direction::N: return "N";
    case Direction::E: return "E";
    case Direction::S: return "S";
    case Direction::W: return "W";
  }
  return "?";
}

Direction parse_dir(const std::string& s) {
  if (s == "N") return Direction::N;
  if (s == "E") return Direction::E;
  if (s == "S") return Direction::S;
  if (s == "W") return Direction::W;
  throw ScenarioInvalid("unknown direction '" + s + "'");
}

FlowCategory parse_flow(const std::string& s) {
  if (s == "Export") return FlowCategory::Export;
  if (s == "Import") return FlowCategory::Import;
  if (s == "Transit") return FlowCategory::Transit;
  throw ScenarioInvalid("unknown flow '" + s + "'");
}

GridPoint parse_point(const json& j) {
  if (!j.is_array() || j.size() != 2) throw ScenarioInvalid("grid point must be [x, y]");
  return {j[0].get<int>(), j[1].get<int>()};
}

template <typename T>
void read_opt(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

MapSpec parse_map(const json& j) {
  if (j.contains("ring")) {
    const json& r = j.at("ring");
    RingLayoutOptions o;
    read_opt(r, "width", o.width);
    read_opt(r, "height", o.height);
    read_opt(r, "cell_size", o.cell_size);
    read_opt(r, "quay_columns", o.quay_columns);
    read_opt(r, "outer_stack_columns", o.outer_stack_columns);
    read_opt(r, "inner_stack_columns", o.inner_stack_columns);
    return ring_terminal_spec(o);
  }
  if (j.value("layout", "") == "default") return default_terminal_spec();
  MapSpec m;
  m.rows = j.at("rows").get<std::vector<std::string>>();
  read_opt(j, "cell_size", m.cell_size);
  if (j.contains("extra_exits"))
    for (const auto& e : j.at("extra_exits"))
      m.extra_directions.push_back(
          {e.at("x").get<int>(), e.at("y").get<int>(), parse_dir(e.at("dir").get<std::string>())});
  return m;
}

AgvParams parse_params(const json& j) {
  AgvParams p;
  read_opt(j, "dead_weight_kg", p.dead_weight_kg);
  read_opt(j, "wheel_radius_m", p.wheel_radius_m);
  read_opt(j, "v_max_straight", p.v_max_straight);
  read_opt(j, "v_max_curve", p.v_max_curve);
  read_opt(j, "v_max_crab", p.v_max_crab);
  read_opt(j, "a_max", p.a_max);
  read_opt(j, "rolling_coeff_c", p.rolling_coeff_c);
  read_opt(j, "gravity", p.gravity);
  read_opt(j, "wheelbase_d_m", p.wheelbase_d_m);
  read_opt(j, "safety_radius_m", p.safety_radius_m);
  return p;
}

NoiseModel parse_noise(const json& j) {
  if (j.is_string()) {
    if (j.get<std::string>() == "none") return NoiseModel::noiseless();
    if (j.get<std::string>() == "default") return NoiseModel{};
    throw ScenarioInvalid("noise must be an object, \"none\" or \"default\"");
  }
  NoiseModel n;
  read_opt(j, "gps_sigma", n.gps_sigma);
  read_opt(j, "base_sigma", n.base_sigma);
  if (j.contains("gps_bias_mean")) {
    const auto p = j.at("gps_bias_mean").get<std::vector<double>>();
    if (p.size() != 2) throw ScenarioInvalid("gps_bias_mean must be [x, y]");
    n.gps_bias_mean = {p[0], p[1]};
  }
  read_opt(j, "gps_bias_sigma", n.gps_bias_sigma);
  read_opt(j, "gps_bias_tau_s", n.gps_bias_tau_s);
  read_opt(j, "compass_sigma", n.compass_sigma);
  read_opt(j, "encoder_dropout", n.encoder_dropout);
  read_opt(j, "wheel_radius_sigma", n.wheel_radius_sigma);
  read_opt(j, "wheel_slip_sigma", n.wheel_slip_sigma);
  read_opt(j, "odometry_drift", n.odometry_drift);
  read_opt(j, "heading_drift", n.heading_drift);
  return n;
}

json noise_to_json(const NoiseModel& n) {
  return {{"gps_sigma", n.gps_sigma},
          {"base_sigma", n.base_sigma},
          {"gps_bias_mean", {n.gps_bias_mean.x, n.gps_bias_mean.y}},
          {"gps_bias_sigma", n.gps_bias_sigma},
          {"gps_bias_tau_s", n.gps_bias_tau_s},
          {"compass_sigma", n.compass_sigma},
          {"encoder_dropout", n.encoder_dropout},
          {"wheel_radius_sigma", n.wheel_radius_sigma},
          {"wheel_slip_sigma", n.wheel_slip_sigma},
          {"odometry_drift", n.odometry_drift},
          {"heading_drift", n.heading_drift}};
}

}  // namespace

Scenario parse_scenario(const std::string& json_text) {
  try {
    const json doc = json::parse(json_text);
    if (doc.value("version", 0) != kScenarioVersion)
      throw ScenarioInvalid("unsupported scenario version (expected 1)");
    Scenario s;
    s.map = parse_map(doc.at("map"));
    const json& fleet = doc.at("fleet");
    for (const auto& p : fleet.at("starts")) s.starts.push_back(parse_point(p));
    if (fleet.contains("params")) s.params = parse_params(fleet.at("params"));
    if (fleet.contains("battery")) {
      const json& b = fleet.at("battery");
      if (b.contains("chemistry")) {
        const auto c = parse_chemistry(b.at("chemistry").get<std::string>());
        if (!c) throw ScenarioInvalid("unknown chemistry");
        s.battery.chemistry = *c;
      }
      read_opt(b, "voltage_V", s.battery.bus_voltage_V);
      read_opt(b, "energy_Wh", s.battery.energy_Wh);
    }
    if (doc.contains("jobs")) {
      const json& jobs = doc.at("jobs");
      if (jobs.is_object()) {
        JobGeneration g;
        const json& gj = jobs.at("generate");
        read_opt(gj, "count", g.count);
        if (gj.contains("mix")) {
          const auto m = gj.at("mix").get<std::vector<double>>();
          if (m.size() != 3) throw ScenarioInvalid("mix must be [export, import, transit]");
          g.mix = {m[0], m[1], m[2]};
        }
        read_opt(gj, "release_window_s", g.options.release_window_s);
        read_opt(gj, "priority_fraction", g.options.priority_fraction);
        if (gj.contains("seed")) g.seed = gj.at("seed").get<std::uint64_t>();
        s.generate = g;
      } else {
        for (const auto& j : jobs) {
          JobSpec js;
          if (j.contains("flow")) js.flow = parse_flow(j.at("flow").get<std::string>());
          if (j.contains("container")) {
            const auto c = parse_container(j.at("container").get<std::string>());
            if (!c) throw ScenarioInvalid("unknown container class");
            js.container = *c;
          }
          js.pickup = parse_point(j.at("pickup"));
          js.dropoff = parse_point(j.at("dropoff"));
          read_opt(j, "release_s", js.release_time);
          read_opt(j, "priority", js.priority);
          s.jobs.push_back(js);
        }
      }
    }
    if (doc.contains("noise")) s.noise = parse_noise(doc.at("noise"));
    if (doc.contains("channel")) {
      const json& c = doc.at("channel");
      read_opt(c, "latency_s", s.channel.latency);
      read_opt(c, "loss_rate", s.channel.loss_rate);
    }
    if (doc.contains("engine")) {
      const json& e = doc.at("engine");
      read_opt(e, "dt", s.engine.dt);
      read_opt(e, "horizon_s", s.engine.horizon_s);
      read_opt(e, "dwell_s", s.engine.dwell_s);
      read_opt(e, "headway_s", s.engine.headway_s);
      read_opt(e, "retry_s", s.engine.retry_s);
      read_opt(e, "status_period_s", s.engine.status_period_s);
      read_opt(e, "gps_period_s", s.engine.gps_period_s);
      read_opt(e, "ack_timeout_s", s.engine.ack_timeout_s);
      read_opt(e, "dgps", s.engine.use_dgps);
    }
    read_opt(doc, "seed", s.seed);
    return s;
  } catch (const json::exception& e) {
    throw ScenarioInvalid(std::string("malformed scenario: ") + e.what());
  } catch (const InvalidMap& e) {
    throw ScenarioInvalid(e.what());
  }
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioInvalid("cannot read scenario file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

std::string scenario_to_json(const Scenario& s) {
  json doc;
  doc["version"] = kScenarioVersion;
  json map{{"rows", s.map.rows}, {"cell_size", s.map.cell_size}};
  json extra = json::array();
  for (const auto& e : s.map.extra_directions)
    extra.push_back({{"x", e.x}, {"y", e.y}, {"dir", dir_name(e.dir)}});
  map["extra_exits"] = extra;
  doc["map"] = map;

  json starts = json::array();
  for (const auto& p : s.starts) starts.push_back({p.x, p.y});
  const AgvParams& a = s.params;
  doc["fleet"] = {
      {"starts", starts},
      {"params",
       {{"dead_weight_kg", a.dead_weight_kg}, {"wheel_radius_m", a.wheel_radius_m},
        {"v_max_straight", a.v_max_straight}, {"v_max_curve", a.v_max_curve},
        {"v_max_crab", a.v_max_crab}, {"a_max", a.a_max},
        {"rolling_coeff_c", a.rolling_coeff_c}, {"gravity", a.gravity},
        {"wheelbase_d_m", a.wheelbase_d_m}, {"safety_radius_m", a.safety_radius_m}}},
      {"battery",
       {{"chemistry", std::string(battery_cell(s.battery.chemistry).name)},
        {"voltage_V", s.battery.bus_voltage_V},
        {"energy_Wh", s.battery.energy_Wh}}}};

  if (s.generate) {
    const auto& g = *s.generate;
    json gj{{"count", g.count},
            {"mix", {g.mix.export_share, g.mix.import_share, g.mix.transit_share}},
            {"release_window_s", g.options.release_window_s},
            {"priority_fraction", g.options.priority_fraction}};
    if (g.seed) gj["seed"] = *g.seed;
    doc["jobs"] = {{"generate", gj}};
  } else {
    json jobs = json::array();
    for (const auto& j : s.jobs)
      jobs.push_back({{"flow", to_string(j.flow)},
                      {"container", std::string(container_class(j.container).name)},
                      {"pickup", {j.pickup.x, j.pickup.y}},
                      {"dropoff", {j.dropoff.x, j.dropoff.y}},
                      {"release_s", j.release_time},
                      {"priority", j.priority}});
    doc["jobs"] = jobs;
  }
  doc["noise"] = noise_to_json(s.noise);
  doc["channel"] = {{"latency_s", s.channel.latency}, {"loss_rate", s.channel.loss_rate}};
  const EngineConfig& e = s.engine;
  doc["engine"] = {{"dt", e.dt},
                   {"horizon_s", e.horizon_s},
                   {"dwell_s", e.dwell_s},
                   {"headway_s", e.headway_s},
                   {"retry_s", e.retry_s},
                   {"status_period_s", e.status_period_s},
                   {"gps_period_s", e.gps_period_s},
                   {"ack_timeout_s", e.ack_timeout_s},
                   {"dgps", e.use_dgps}};
  doc["seed"] = s.seed;
  return doc.dump(2);
}

void validate_scenario(const Scenario& s, const TerminalMap& map) {
  const EngineConfig& e = s.engine;
  if (!(e.dt > 0.0)) throw ScenarioInvalid("dt must be > 0");
  if (!(e.horizon_s > 0.0)) throw ScenarioInvalid("horizon must be > 0");
  if (e.dwell_s < 0.0 || e.headway_s < 0.0 || !(e.retry_s > 0.0) ||
      !(e.status_period_s > 0.0) || !(e.gps_period_s > 0.0) || !(e.ack_timeout_s > 0.0))
    throw ScenarioInvalid("engine periods must be positive");
  try {
    s.params.validate();
  } catch (const std::invalid_argument& ex) {
    throw ScenarioInvalid(ex.what());
  }
  if (!(s.battery.bus_voltage_V > 0.0) || !(s.battery.energy_Wh > 0.0))
    throw ScenarioInvalid("battery voltage and energy must be > 0");
  if (s.channel.latency < 0.0 || s.channel.loss_rate < 0.0 || s.channel.loss_rate >= 1.0)
    throw ScenarioInvalid("channel latency must be >= 0 and loss in [0, 1)");
  if (s.starts.empty() && (!s.jobs.empty() || (s.generate && s.generate->count > 0)))
    throw ScenarioInvalid("jobs need at least one AGV");

  auto cell_of = [&](const GridPoint& p, const char* what) {
    if (!map.in_grid(p.x, p.y))
      throw ScenarioInvalid(std::string(what) + " outside the map");
    return map.index(p.x, p.y);
  };
  std::vector<CellIndex> cells;
  for (const auto& p : s.starts) {
    const CellIndex c = cell_of(p, "start cell");
    if (map.kind(c) == CellKind::Obstacle) throw ScenarioInvalid("start cell on an obstacle");
    if (std::find(cells.begin(), cells.end(), c) != cells.end())
      throw ScenarioInvalid("start cells must be distinct");
    for (CellIndex o : cells)
      if (distance(map.center(o), map.center(c)) < 2.0 * s.params.safety_radius_m)
        throw ScenarioInvalid("start cells closer than two safety radii");
    cells.push_back(c);
  }
  for (const auto& j : s.jobs) {
    const CellIndex a = cell_of(j.pickup, "pickup");
    const CellIndex b = cell_of(j.dropoff, "dropoff");
    if (!is_dock(map.kind(a)) || !is_dock(map.kind(b)))
      throw ScenarioInvalid("job endpoints must be quay or stack bays");
    if (a == b) throw ScenarioInvalid("pickup and dropoff must differ");
    if (j.release_time < 0.0) throw ScenarioInvalid("release time must be >= 0");
  }
}

Scenario random_scenario(std::uint64_t seed) {
  SeededRng rng(hash_key({seed, 0x5ce7a110}));
  Scenario s;
  s.seed = seed;
  RingLayoutOptions o;
  o.width = rng.uniform_int(12, 30);
  o.height = rng.uniform_int(12, 30);
  o.cell_size = 6.0;
  for (int x = 2; x <= o.width - 3; x += 2) o.quay_columns.push_back(x);
  for (int x = 2; x <= o.width - 3; x += 2) o.outer_stack_columns.push_back(x);
  for (int x = 3; x <= o.width - 4; x += 2) o.inner_stack_columns.push_back(x);
  s.map = ring_terminal_spec(o);

  std::vector<GridPoint> bays;
  for (int x : o.quay_columns) bays.push_back({x, o.height - 1});
  for (int x : o.outer_stack_columns) bays.push_back({x, 0});
  for (int x : o.inner_stack_columns) bays.push_back({x, 3});
  for (std::size_t i = bays.size(); i > 1; --i)
    std::swap(bays[i - 1], bays[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i) - 1))]);

  // Starts and drop-offs get bays of their own so parked AGVs never sit on a
  // bay a later job needs; pick-ups share the remainder.
  const int n_bays = static_cast<int>(bays.size());
  const int n_agv = rng.uniform_int(2, std::min(8, n_bays / 3));
  const int n_jobs = rng.uniform_int(1, std::min(20, n_bays - n_agv - 2));
  for (int i = 0; i < n_agv; ++i) s.starts.push_back(bays[static_cast<std::size_t>(i)]);
  const auto first_pickup = static_cast<std::size_t>(n_agv + n_jobs);
  const int n_pickup = n_bays - static_cast<int>(first_pickup);

  const int n_priority = n_jobs >= 2 ? rng.uniform_int(1, std::max(1, n_jobs / 3)) : 0;
  for (int k = 0; k < n_jobs; ++k) {
    JobSpec j;
    j.dropoff = bays[static_cast<std::size_t>(n_agv + k)];
    j.pickup = bays[first_pickup + static_cast<std::size_t>(rng.uniform_int(0, n_pickup - 1))];
    const bool from_quay = j.pickup.y == o.height - 1;
    const bool to_quay = j.dropoff.y == o.height - 1;
    j.flow = from_quay && to_quay ? FlowCategory::Transit
             : from_quay          ? FlowCategory::Import
                                  : (to_quay ? FlowCategory::Export : FlowCategory::Transit);
    j.container = static_cast<ContainerKind>(rng.uniform_int(0, 3));
    j.release_time = std::round(rng.uniform() * 1200.0) / 10.0;
    j.priority = k < n_priority;
    s.jobs.push_back(j);
  }
  std::sort(s.jobs.begin(), s.jobs.end(),
            [](const JobSpec& a, const JobSpec& b) { return a.release_time < b.release_time; });
  s.channel = {0.05, 0.0, 0};
  s.engine.horizon_s = 2400.0;
  return s;
}

}  // namespace quayfleet

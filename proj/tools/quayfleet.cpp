// Command-line front end: drivetrain sizing, battery packs, simulation runs,
// determinism checks and trace reports.
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <future>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "quayfleet/errors.hpp"
#include "quayfleet/powertrain.hpp"
#include "quayfleet/sim_engine.hpp"

namespace qf = quayfleet;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitScenario = 3;
constexpr int kExitInvariant = 4;

/// QUAYFLEET_LOG: quiet, info (default) or debug.
int log_level() {
  const char* v = std::getenv("QUAYFLEET_LOG");
  if (!v) return 1;
  const std::string s(v);
  if (s == "quiet" || s == "0") return 0;
  if (s == "debug" || s == "2") return 2;
  return 1;
}

void info(const std::string& msg) {
  if (log_level() >= 1) std::cerr << msg << '\n';
}

struct InvariantBroken : std::runtime_error {
  using std::runtime_error::runtime_error;
};

double deviation_pct(double computed, double reference) {
  return (computed - reference) / reference * 100.0;
}

// Published drivetrain figures per container class, in table order.
constexpr double kRefPowerKw[] = {700.0, 789.0, 820.0, 809.0};
constexpr double kRefTorqueKnm[] = {30.0, 33.0, 35.0, 34.0};
constexpr double kRefWheelRpm = 228.0;
constexpr double kRefGearedRpm = 462.0;

int cmd_size(const std::string& format) {
  const auto rows = qf::agv_spec_table(qf::AgvParams{});
  if (format == "csv") {
    std::printf("class,force_N,torque_Nm,power_W,rpm,ref_torque_Nm,torque_dev_pct,ref_power_W,"
                "power_dev_pct,ref_rpm,rpm_dev_pct,per_wheel_torque_Nm,per_wheel_power_W,"
                "geared_torque_Nm,geared_rpm,ref_geared_rpm,geared_rpm_dev_pct\n");
  } else if (format == "table") {
    std::printf("%-11s %9s %9s %19s %19s %17s %21s %19s\n", "class", "force kN", "mass t",
                "torque kNm (ref)", "power kW (ref)", "wheel rpm (ref)", "per wheel kNm / kW",
                "geared kNm / rpm");
  }
  std::string json = "[";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    const double tq = r.total.torque_Nm / 1000.0;
    const double pw = r.total.power_W / 1000.0;
    const double rpm = r.total.speed_rpm;
    const double grpm = r.single_geared_motor.speed_rpm;
    const double mass = qf::AgvParams{}.dead_weight_kg + r.container.total_kg;
    if (format == "csv") {
      std::printf("%s,%.3f,%.3f,%.3f,%.4f,%.0f,%.3f,%.0f,%.3f,%.0f,%.3f,%.3f,%.3f,%.3f,%.4f,%.0f,%.3f\n",
                  std::string(r.container.name).c_str(), r.force_N, r.total.torque_Nm,
                  r.total.power_W, rpm, kRefTorqueKnm[i] * 1000.0,
                  deviation_pct(tq, kRefTorqueKnm[i]), kRefPowerKw[i] * 1000.0,
                  deviation_pct(pw, kRefPowerKw[i]), kRefWheelRpm,
                  deviation_pct(rpm, kRefWheelRpm), r.per_wheel_motor.torque_Nm,
                  r.per_wheel_motor.power_W, r.single_geared_motor.torque_Nm, grpm, kRefGearedRpm,
                  deviation_pct(grpm, kRefGearedRpm));
    } else if (format == "json") {
      char buf[512];
      std::snprintf(buf, sizeof buf,
                    "%s{\"class\":\"%s\",\"force_kN\":%.3f,\"torque_kNm\":%.4f,\"torque_dev_pct\":%.3f,"
                    "\"power_kW\":%.4f,\"power_dev_pct\":%.3f,\"wheel_rpm\":%.3f,\"wheel_rpm_dev_pct\":%.3f,"
                    "\"geared_rpm\":%.3f,\"geared_rpm_dev_pct\":%.3f}",
                    i ? "," : "", std::string(r.container.name).c_str(), r.force_N / 1000.0, tq,
                    deviation_pct(tq, kRefTorqueKnm[i]), pw, deviation_pct(pw, kRefPowerKw[i]), rpm,
                    deviation_pct(rpm, kRefWheelRpm), grpm, deviation_pct(grpm, kRefGearedRpm));
      json += buf;
    } else {
      char tqs[32], pws[32], rpms[32], pwh[32], ger[32];
      std::snprintf(tqs, sizeof tqs, "%.2f (%.0f, %+.2f%%)", tq, kRefTorqueKnm[i],
                    deviation_pct(tq, kRefTorqueKnm[i]));
      std::snprintf(pws, sizeof pws, "%.2f (%.0f, %+.2f%%)", pw, kRefPowerKw[i],
                    deviation_pct(pw, kRefPowerKw[i]));
      std::snprintf(rpms, sizeof rpms, "%.2f (%.0f, %+.2f%%)", rpm, kRefWheelRpm,
                    deviation_pct(rpm, kRefWheelRpm));
      std::snprintf(pwh, sizeof pwh, "%.2f / %.2f", r.per_wheel_motor.torque_Nm / 1000.0,
                    r.per_wheel_motor.power_W / 1000.0);
      std::snprintf(ger, sizeof ger, "%.2f / %.1f", r.single_geared_motor.torque_Nm / 1000.0, grpm);
      std::printf("%-11s %9.2f %9.2f %19s %19s %17s %21s %19s\n",
                  std::string(r.container.name).c_str(), r.force_N / 1000.0, mass / 1000.0, tqs,
                  pws, rpms, pwh, ger);
    }
  }
  if (format == "json") std::printf("%s]\n", json.c_str());
  if (format == "table")
    std::printf("single geared motor reference speed %.0f rpm; deviation %+.2f%%\n", kRefGearedRpm,
                deviation_pct(rows[0].single_geared_motor.speed_rpm, kRefGearedRpm));
  return 0;
}

int cmd_battery(const std::string& chem, double voltage, double energy) {
  const auto c = qf::parse_chemistry(chem);
  if (!c) {
    std::cerr << "error: unknown chemistry '" << chem << "'\n";
    return kExitUsage;
  }
  if (!(voltage > 0.0) || !(energy > 0.0)) {
    std::cerr << "error: voltage and energy must be > 0\n";
    return kExitUsage;
  }
  const auto p = qf::size_battery_pack(qf::battery_cell(*c), voltage, energy);
  std::printf("%dS%dP, %.1f kWh, %.1f V\n", p.series_count, p.parallel_count,
              p.capacity_Wh / 1000.0, p.voltage_V);
  return 0;
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

/// Run-level invariants every accepted run must satisfy.
void check_run(const qf::Scenario& sc, const qf::RunResult& r) {
  if (!r.violations.empty()) {
    const auto& v = r.violations.front();
    throw InvariantBroken("collision at t=" + std::to_string(v.t) + " between AGV " +
                          std::to_string(v.agv_a) + " and " + std::to_string(v.agv_b));
  }
  if (!qf::detect_conflicts(r.timelines, sc.params).empty())
    throw InvariantBroken("planned trajectories violate the safety distance");
  for (std::size_t i = 0; i < r.energy_from_power_Wh.size(); ++i) {
    const double a = r.energy_from_power_Wh[i];
    const double b = r.battery_drain_Wh[i];
    if (std::abs(a - b) > 1e-9 * std::max({1.0, std::abs(a), std::abs(b)}))
      throw InvariantBroken("energy bookkeeping mismatch on AGV " + std::to_string(i));
  }
}

void print_metrics(const qf::Metrics& m, const std::string& format) {
  if (format == "json") {
    std::cout << qf::metrics_to_json(m) << '\n';
    return;
  }
  std::printf("jobs completed    %d\n", m.jobs_completed);
  std::printf("jobs failed       %d\n", m.jobs_failed);
  std::printf("makespan          %.3f s\n", m.makespan_s);
  std::printf("throughput        %.3f containers/h\n", m.throughput_per_h);
  std::printf("total distance    %.3f m\n", m.total_distance_m);
  std::printf("total energy      %.3f Wh\n", m.total_energy_Wh);
  std::printf("mean job wait     %.3f s\n", m.mean_job_wait_s);
  std::printf("collisions        %d\n", m.collision_count);
  for (std::size_t i = 0; i < m.priority_delay_s.size(); ++i)
    std::printf("priority delay %zu  %.3f s\n", i, m.priority_delay_s[i]);
}

struct SimArgs {
  std::string scenario;
  std::string out;
  std::string metrics_out;
  std::string frames_out;
  std::string format = "table";
  std::optional<std::uint64_t> seed;
  int batch = 1;
};

int cmd_simulate(const SimArgs& a) {
  qf::Scenario base = qf::load_scenario(a.scenario);
  if (a.seed) base.seed = *a.seed;
  if (a.batch > 1) {
    std::vector<std::future<std::pair<qf::Scenario, qf::RunResult>>> runs;
    for (int i = 0; i < a.batch; ++i) {
      qf::Scenario sc = base;
      sc.seed = base.seed + static_cast<std::uint64_t>(i);
      runs.push_back(std::async(std::launch::async, [sc] { return std::make_pair(sc, qf::run(sc)); }));
    }
    std::printf("seed,jobs_completed,makespan_s,throughput_per_h,total_energy_Wh,trace_hash\n");
    for (auto& f : runs) {
      auto [sc, r] = f.get();
      check_run(sc, r);
      std::printf("%llu,%d,%.3f,%.3f,%.3f,%016llx\n", static_cast<unsigned long long>(sc.seed),
                  r.metrics.jobs_completed, r.metrics.makespan_s, r.metrics.throughput_per_h,
                  r.metrics.total_energy_Wh, static_cast<unsigned long long>(r.trace_hash));
    }
    return 0;
  }
  qf::RunOptions opts;
  opts.dump_frames = !a.frames_out.empty();
  const qf::RunResult r = qf::run(base, opts);
  if (log_level() >= 2)
    for (const auto& e : r.events)
      std::cerr << "t=" << e.t << ' ' << qf::to_string(e.type) << " agv=" << e.agv
                << " job=" << e.job << '\n';
  if (!a.out.empty()) write_file(a.out, r.trace);
  if (!a.metrics_out.empty()) write_file(a.metrics_out, qf::metrics_to_json(r.metrics) + "\n");
  if (opts.dump_frames) {
    std::string text;
    for (const auto& f : r.frames) text += f + '\n';
    write_file(a.frames_out, text);
  }
  check_run(base, r);
  print_metrics(r.metrics, a.format);
  info("trace hash " + [&] {
    char b[24];
    std::snprintf(b, sizeof b, "%016llx", static_cast<unsigned long long>(r.trace_hash));
    return std::string(b);
  }());
  return 0;
}

int cmd_replay(const std::string& path, std::optional<std::uint64_t> seed) {
  qf::Scenario sc = qf::load_scenario(path);
  if (seed) sc.seed = *seed;
  const auto a = qf::run(sc);
  const auto b = qf::run(sc);
  if (a.trace_hash == b.trace_hash && a.trace == b.trace) {
    std::printf("IDENTICAL\n");
    return 0;
  }
  std::printf("DIFFERENT %016llx %016llx\n", static_cast<unsigned long long>(a.trace_hash),
              static_cast<unsigned long long>(b.trace_hash));
  return kExitInvariant;
}

int cmd_report(const std::string& path, const std::string& format) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  print_metrics(qf::compute_metrics(buf.str()), format);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Container-terminal AGV fleet toolkit"};
  app.require_subcommand(1);

  std::string format = "table";
  auto* size = app.add_subcommand("size", "Drivetrain sizing table with reference deviations");
  size->add_option("--format", format)->check(CLI::IsMember({"table", "csv", "json"}));

  std::string chem;
  double voltage = 0.0;
  double energy = 0.0;
  auto* battery = app.add_subcommand("battery", "Series/parallel battery pack sizing");
  battery->add_option("chemistry", chem)->required();
  battery->add_option("voltage_V", voltage)->required();
  battery->add_option("energy_Wh", energy)->required();

  SimArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Run a scenario");
  simulate->add_option("scenario", sim.scenario)->required()->check(CLI::ExistingFile);
  simulate->add_option("--out", sim.out, "Trace CSV output path");
  simulate->add_option("--metrics", sim.metrics_out, "Metrics JSON output path");
  simulate->add_option("--dump-frames", sim.frames_out, "Hex dump of every radio frame");
  simulate->add_option("--format", sim.format)->check(CLI::IsMember({"table", "json"}));
  simulate->add_option("--seed", sim.seed);
  simulate->add_option("--batch", sim.batch, "Run N consecutive seeds in parallel")
      ->check(CLI::PositiveNumber);

  std::string replay_path;
  std::optional<std::uint64_t> replay_seed;
  auto* replay = app.add_subcommand("replay-check", "Run a scenario twice and compare traces");
  replay->add_option("scenario", replay_path)->required()->check(CLI::ExistingFile);
  replay->add_option("--seed", replay_seed);

  std::string trace_path;
  std::string report_format = "table";
  auto* report = app.add_subcommand("report", "Metrics of a trace file");
  report->add_option("trace", trace_path)->required()->check(CLI::ExistingFile);
  report->add_option("--format", report_format)->check(CLI::IsMember({"table", "json"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (*size) return cmd_size(format);
    if (*battery) return cmd_battery(chem, voltage, energy);
    if (*simulate) return cmd_simulate(sim);
    if (*replay) return cmd_replay(replay_path, replay_seed);
    if (*report) return cmd_report(trace_path, report_format);
  } catch (const qf::ScenarioInvalid& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitScenario;
  } catch (const InvariantBroken& e) {
    std::cerr << "invariant violated: " << e.what() << '\n';
    return kExitInvariant;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kExitInvariant;
  }
  return kExitUsage;
}

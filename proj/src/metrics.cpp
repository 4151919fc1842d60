#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include <json.hpp>

#include "quayfleet/sim_engine.hpp"

namespace quayfleet {

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

Metrics compute_metrics(const std::string& trace) {
  Metrics m;
  std::istringstream in(trace);
  std::string line;
  std::map<int, double> release;
  std::map<int, bool> priority;
  std::map<int, double> assigned;
  std::map<int, double> completed;
  struct Last {
    double x, y, energy;
  };
  std::map<int, Last> last;

  while (std::getline(in, line)) {
    if (line.empty() || line.rfind("t,", 0) == 0) continue;
    const auto f = split(line, ',');
    if (f.size() != 12) continue;
    const double t = std::stod(f[0]);
    const int id = std::stoi(f[2]);
    if (f[1] == "agv") {
      const double x = std::stod(f[3]);
      const double y = std::stod(f[4]);
      const double e = std::stod(f[8]);
      auto it = last.find(id);
      if (it != last.end()) m.total_distance_m += std::hypot(x - it->second.x, y - it->second.y);
      last[id] = {x, y, e};
      continue;
    }
    const auto what = split(f[7], '|');
    if (what.size() < 2) continue;
    const std::string& type = what[0];
    const int job = std::stoi(what[1]);
    if (type == "release") {
      release[job] = t;
      priority[job] = what.size() > 2 && what[2] == "priority";
    } else if (type == "assign" || type == "priority_assign") {
      if (!assigned.count(job)) assigned[job] = t;
    } else if (type == "complete") {
      completed[job] = t;
    } else if (type == "abandon") {
      ++m.jobs_failed;
    } else if (type == "collision") {
      ++m.collision_count;
    }
  }

  for (const auto& [id, l] : last) m.total_energy_Wh += l.energy;
  m.jobs_completed = static_cast<int>(completed.size());
  if (!completed.empty() && !release.empty()) {
    double first = release.begin()->second;
    for (const auto& [j, t] : release) first = std::min(first, t);
    double end = first;
    for (const auto& [j, t] : completed) end = std::max(end, t);
    m.makespan_s = end - first;
  }
  if (m.makespan_s > 0.0) m.throughput_per_h = m.jobs_completed / m.makespan_s * 3600.0;
  double wait = 0.0;
  for (const auto& [j, t] : assigned) {
    const double w = t - release[j];
    wait += w;
    if (priority[j]) m.priority_delay_s.push_back(w);
  }
  if (!assigned.empty()) m.mean_job_wait_s = wait / static_cast<double>(assigned.size());
  return m;
}

std::string metrics_to_json(const Metrics& m) {
  nlohmann::json j{{"jobs_completed", m.jobs_completed},
                   {"jobs_failed", m.jobs_failed},
                   {"makespan_s", m.makespan_s},
                   {"throughput_per_h", m.throughput_per_h},
                   {"total_distance_m", m.total_distance_m},
                   {"total_energy_Wh", m.total_energy_Wh},
                   {"mean_job_wait_s", m.mean_job_wait_s},
                   {"collision_count", m.collision_count},
                   {"priority_delay_s", m.priority_delay_s}};
  return j.dump(2);
}

}  // namespace quayfleet

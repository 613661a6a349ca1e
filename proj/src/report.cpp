#include "dcr/report.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "dcr/errors.hpp"

namespace dcr::report {

namespace {

struct Stats {
  double mean = 0, stddev = 0;
};

Stats stats_of(const std::vector<double>& v) {
  Stats s;
  if (v.empty()) return s;
  double sum = 0;
  for (double x : v) sum += x;
  s.mean = sum / double(v.size());
  double var = 0;
  for (double x : v) var += (x - s.mean) * (x - s.mean);
  s.stddev = v.size() > 1 ? std::sqrt(var / double(v.size() - 1)) : 0;
  return s;
}

std::vector<std::string> canonical_stages(const std::string& role,
                                          const std::set<std::string>& present) {
  std::vector<std::string> order;
  if (role == "checkpoint") {
    for (const char* s : kCkptStages) order.push_back(s);
    if (present.count("sync")) order.push_back("sync");
  } else if (role == "restart") {
    for (const char* s : kRestartStages) order.push_back(s);
  } else {
    fail(Errc::MalformedTrace, "unknown role " + role);
  }
  return order;
}

}  // namespace

Breakdown breakdown(const std::vector<StageTiming>& rows, const std::string& role) {
  std::map<std::string, std::vector<double>> by_stage;
  std::map<std::pair<uint32_t, uint32_t>, double> totals;  // (epoch, vpid) -> stage sum
  std::set<std::string> present;
  for (const auto& r : rows) {
    if (r.role != role) continue;
    by_stage[r.stage].push_back(r.seconds);
    totals[{r.epoch, r.vpid}] += r.seconds;
    present.insert(r.stage);
  }
  if (by_stage.empty()) fail(Errc::MalformedTrace, "no timing rows for role " + role);
  for (const auto& s : present) {
    auto canon = canonical_stages(role, present);
    if (std::find(canon.begin(), canon.end(), s) == canon.end())
      fail(Errc::MalformedTrace, "unexpected stage name '" + s + "'");
  }

  Breakdown b;
  b.role = role;
  for (const auto& stage : canonical_stages(role, present)) {
    auto it = by_stage.find(stage);
    if (it == by_stage.end()) continue;
    Stats s = stats_of(it->second);
    b.rows.push_back({stage, s.mean, s.stddev, it->second.size()});
  }
  std::vector<double> tot;
  for (const auto& [_, v] : totals) tot.push_back(v);
  Stats s = stats_of(tot);
  b.rows.push_back({"total", s.mean, s.stddev, tot.size()});
  return b;
}

std::vector<ScalingPoint> scaling(const std::vector<StageTiming>& rows) {
  // per epoch: process count and mean per-process total
  std::map<uint32_t, std::map<uint32_t, double>> per_epoch;  // epoch -> vpid -> total
  for (const auto& r : rows) {
    if (r.role != "checkpoint") continue;
    per_epoch[r.epoch][r.vpid] += r.seconds;
  }
  std::map<size_t, std::vector<double>> by_n;
  for (const auto& [epoch, vp] : per_epoch) {
    double sum = 0;
    for (const auto& [_, v] : vp) sum += v;
    by_n[vp.size()].push_back(sum / double(vp.size()));
  }
  std::vector<ScalingPoint> out;
  for (const auto& [n, vals] : by_n) {
    Stats s = stats_of(vals);
    out.push_back({n, vals.size(), s.mean, s.stddev});
  }
  return out;
}

std::string breakdown_text(const Breakdown& b) {
  std::ostringstream out;
  out << "stage breakdown (" << b.role << "), seconds\n";
  for (const auto& r : b.rows) {
    out.setf(std::ios::fixed);
    out.precision(4);
    out << "  " << r.stage;
    for (size_t i = r.stage.size(); i < 26; i++) out << ' ';
    out << r.mean << "  +/- " << r.stddev << "  (n=" << r.samples << ")\n";
  }
  return out.str();
}

std::string breakdown_csv(const Breakdown& b) {
  std::ostringstream out;
  out << "role,stage,mean,stddev,samples\n";
  for (const auto& r : b.rows)
    out << b.role << "," << r.stage << "," << r.mean << "," << r.stddev << "," << r.samples
        << "\n";
  return out.str();
}

std::string scaling_text(const std::vector<ScalingPoint>& pts) {
  std::ostringstream out;
  out << "checkpoint time vs process count\n";
  for (const auto& p : pts) {
    out.setf(std::ios::fixed);
    out.precision(4);
    out << "  n=" << p.processes << "  mean=" << p.mean_total << "  +/- " << p.stddev
        << "  (epochs=" << p.epochs << ")\n";
  }
  return out.str();
}

std::string scaling_csv(const std::vector<ScalingPoint>& pts) {
  std::ostringstream out;
  out << "processes,epochs,mean_total,stddev\n";
  for (const auto& p : pts)
    out << p.processes << "," << p.epochs << "," << p.mean_total << "," << p.stddev << "\n";
  return out.str();
}

}  // namespace dcr::report

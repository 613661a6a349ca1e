#pragma once

#include <string>
#include <vector>

#include "dcr/trace.hpp"

namespace dcr::report {

struct BreakdownRow {
  std::string stage;
  double mean = 0;
  double stddev = 0;
  size_t samples = 0;
};

struct Breakdown {
  std::string role;  // "checkpoint" or "restart"
  std::vector<BreakdownRow> rows;  // canonical stage order, then "total"
};

// Per-stage mean and standard deviation across repetitions. One repetition is
// one (epoch, vpid) pair; the total row aggregates per-repetition stage sums.
Breakdown breakdown(const std::vector<StageTiming>& rows, const std::string& role);

struct ScalingPoint {
  size_t processes = 0;
  size_t epochs = 0;
  double mean_total = 0;
  double stddev = 0;
};

// Checkpoint-time-versus-process-count series: epochs grouped by how many
// processes participated.
std::vector<ScalingPoint> scaling(const std::vector<StageTiming>& rows);

std::string breakdown_text(const Breakdown& b);
std::string breakdown_csv(const Breakdown& b);
std::string scaling_text(const std::vector<ScalingPoint>& pts);
std::string scaling_csv(const std::vector<ScalingPoint>& pts);

}  // namespace dcr::report

#pragma once

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

namespace dcr {

using Json = nlohmann::ordered_json;

// Append-only event log, one JSON object per line. Determinism tests compare
// two logs bitwise, so every field an event carries must itself be
// deterministic under (seed, command schedule).
class TraceLog {
 public:
  void event(uint64_t tick, const std::string& kind, Json fields = Json::object()) {
    Json j;
    j["tick"] = tick;
    j["event"] = kind;
    for (auto& [k, v] : fields.items()) j[k] = v;
    lines_.push_back(j.dump());
  }

  const std::vector<std::string>& lines() const { return lines_; }
  std::string text() const {
    std::string out;
    for (const auto& l : lines_) {
      out += l;
      out += '\n';
    }
    return out;
  }
  size_t count(const std::string& kind) const {
    size_t n = 0;
    for (const auto& l : lines_)
      if (l.find("\"event\":\"" + kind + "\"") != std::string::npos) n++;
    return n;
  }

 private:
  std::vector<std::string> lines_;
};

// One row of the per-stage breakdown (Table-1-shaped). `seconds` holds
// logical ticks in simulator mode and wall-clock seconds in real mode.
struct StageTiming {
  std::string role;   // "checkpoint" or "restart"
  uint32_t epoch = 0;
  uint32_t vpid = 0;
  std::string stage;  // suspend | elect | drain | write | refill | sync, or restart rows
  double seconds = 0;
};

inline constexpr const char* kCkptStages[] = {"suspend", "elect", "drain", "write", "refill"};
inline constexpr const char* kRestartStages[] = {"restore files", "reconnect sockets",
                                                 "restore memory/threads", "refill"};

class TimingLog {
 public:
  void add(StageTiming t) { rows_.push_back(std::move(t)); }
  const std::vector<StageTiming>& rows() const { return rows_; }

  std::string to_jsonl() const;
  static std::vector<StageTiming> from_jsonl(const std::string& text);

 private:
  std::vector<StageTiming> rows_;
};

}  // namespace dcr

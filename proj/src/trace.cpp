#include "dcr/trace.hpp"

#include <sstream>

#include "dcr/errors.hpp"

namespace dcr {

std::string TimingLog::to_jsonl() const {
  std::string out;
  for (const auto& r : rows_) {
    Json j;
    j["role"] = r.role;
    j["epoch"] = r.epoch;
    j["vpid"] = r.vpid;
    j["stage"] = r.stage;
    j["seconds"] = r.seconds;
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::vector<StageTiming> TimingLog::from_jsonl(const std::string& text) {
  std::vector<StageTiming> rows;
  std::istringstream in(text);
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    lineno++;
    if (line.empty()) continue;
    Json j = Json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.contains("stage") || !j.contains("seconds") || !j.contains("role"))
      fail(Errc::MalformedTrace, "timing line " + std::to_string(lineno));
    StageTiming t;
    t.role = j["role"].get<std::string>();
    t.epoch = j.value("epoch", 0u);
    t.vpid = j.value("vpid", 0u);
    t.stage = j["stage"].get<std::string>();
    t.seconds = j["seconds"].get<double>();
    rows.push_back(std::move(t));
  }
  return rows;
}

}  // namespace dcr

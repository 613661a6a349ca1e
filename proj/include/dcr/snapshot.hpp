#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "dcr/core.hpp"

namespace dcr {

// Runtime-agnostic single-process state. Both the simulator and the
// real-socket runtime keep their application state in this shape, so one
// snapshot substrate serves both modes.
struct ThreadCore {
  uint32_t tid = 0;
  std::string script;     // workload name, resolved through the WorkloadLibrary
  uint32_t pc = 0;        // next step index
  uint64_t progress = 0;  // bytes moved / ticks burned inside the current step
  bool done = false;
};

struct ProcessCore {
  VirtualPid id;
  uint32_t host = 0;
  Bytes heap;
  std::vector<ThreadCore> threads;
  std::map<std::string, uint32_t> fd_labels;
  std::map<std::string, std::string> seg_labels;  // label -> backing path
  std::map<GlobalSocketId, Bytes> recv_streams;   // delivered bytes, this side
  std::map<GlobalSocketId, uint64_t> send_offsets;
  std::vector<Vpid> children;
  uint64_t sock_seq = 0;    // per-process connection counter; never resets
  uint64_t ts_counter = 0;  // socket-id timestamp ticks
  uint32_t next_fd = 3;

  friend bool operator==(const ProcessCore&, const ProcessCore&) = default;
};

struct SegmentState {
  std::string path;
  bool writable = false;
  Bytes contents;  // as of capture time

  friend bool operator==(const SegmentState&, const SegmentState&) = default;
};

struct ProcessSnapshot {
  ProcessCore core;
  std::vector<SegmentState> segments;

  friend bool operator==(const ProcessSnapshot&, const ProcessSnapshot&) = default;
};

// The pluggable single-process snapshot layer. The distributed engine only
// ever sees opaque blobs; this interface is the seam where a raw
// memory-dumping implementation would slot in.
class SnapshotSubstrate {
 public:
  virtual ~SnapshotSubstrate() = default;
  virtual Bytes capture(const ProcessSnapshot& s) = 0;
  // Throws CorruptSnapshot on damaged input.
  virtual ProcessSnapshot restore(const Bytes& blob) = 0;
  virtual std::string name() const = 0;
};

std::unique_ptr<SnapshotSubstrate> make_scripted_substrate();

}  // namespace dcr

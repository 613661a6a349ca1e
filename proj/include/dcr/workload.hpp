#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "dcr/bytes.hpp"

namespace dcr {

// Workload scripts drive every process in both simulator and real-socket
// mode. Line format: `<step#> <op> <args...>`, '#' starts a comment.
//
//   listen <fd-label> <port>
//   accept <fd-label> <listener-fd-label>
//   connect <fd-label> <host> <port>
//   send <fd-label> <nbytes>
//   recv <fd-label> <nbytes>
//   close <fd-label>
//   pipe <read-fd-label> <write-fd-label>
//   fork <child-label> <script-name>
//   spawn <child-label> <host> <script-name>
//   open <fd-label> <path>
//   fwrite <fd-label> <nbytes>
//   fread <fd-label> <nbytes>
//   fseek <fd-label> <offset>
//   mapshm <seg-label> <path> <length> <rw|ro>
//   shmwrite <seg-label> <offset> <nbytes>
//   shmread <seg-label> <offset> <nbytes>
//   compute <ticks>
//   poke <offset> <nbytes>
//   delay_begin
//   delay_end
//   request_ckpt
//   thread <script-name>
//   exit
//
// send/recv/fread/fwrite transfer exactly <nbytes>, looping over partial
// transfers, so a workload's control flow depends only on cumulative byte
// counts and never on chunk boundaries. Payload contents are derived from
// (socket id, stream offset), never stored in scripts.

enum class OpCode : uint8_t {
  Listen, Accept, Connect, Send, Recv, Close, Pipe, Fork, Spawn,
  Open, Fwrite, Fread, Fseek, MapShm, ShmWrite, ShmRead,
  Compute, Poke, DelayBegin, DelayEnd, RequestCkpt, Thread, Exit,
};

const char* op_name(OpCode op);

struct Step {
  uint32_t num = 0;
  OpCode op = OpCode::Compute;
  std::string lab1;  // primary label
  std::string lab2;  // secondary label
  std::string path;  // file path / script name
  uint64_t n1 = 0;   // port / nbytes / offset / ticks / host
  uint64_t n2 = 0;   // length (mapshm), nbytes (shm ops)
  bool writable = false;
};

struct Workload {
  std::string name;
  std::vector<Step> steps;
};

Workload parse_workload(const std::string& name, const std::string& text);
std::string format_workload(const Workload& w);

// Shared registry so fork/spawn/thread can reference programs by name and a
// restored snapshot can resolve them again.
class WorkloadLibrary {
 public:
  void add(Workload w) { map_[w.name] = std::make_shared<Workload>(std::move(w)); }
  std::shared_ptr<const Workload> get(const std::string& name) const;
  bool has(const std::string& name) const { return map_.count(name) != 0; }
  std::vector<std::string> names() const;

 private:
  std::map<std::string, std::shared_ptr<Workload>> map_;
};

// Deterministic payload generator: byte at `offset` of the stream identified
// by `key`. Replay after restart regenerates identical bytes.
inline uint8_t payload_byte(uint64_t key, uint64_t offset) {
  uint64_t x = key + 0x9e3779b97f4a7c15ULL * (offset + 1);
  x ^= x >> 33;
  x *= 0xff51afd7ed558ccdULL;
  x ^= x >> 29;
  return uint8_t(x);
}

// Folds received/observed bytes into a process heap so final heaps witness
// the full delivered streams. Order-sensitive by construction.
void mix_into_heap(Bytes& heap, uint64_t base_key, uint64_t stream_offset, const uint8_t* p,
                   size_t n);

uint64_t path_key(const std::string& path);

}  // namespace dcr

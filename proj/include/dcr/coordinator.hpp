#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dcr/core.hpp"
#include "dcr/trace.hpp"

namespace dcr {

enum class CoordinatorMode : uint8_t { Running = 0, Checkpointing = 1, Restarting = 2 };
const char* mode_name(CoordinatorMode m);

// Wire protocol message tags (length-prefixed frames: u32 length LE, u8 tag,
// payload). ElectSet is an extension: the election register lives in the
// coordinator, so the writes need a carrier; winners ride back in the
// election-completed BarrierRelease payload.
enum class MsgTag : uint8_t {
  Register = 1,
  CkptRequest = 2,
  BarrierReport = 3,
  BarrierRelease = 4,
  Abort = 5,
  Advertise = 6,
  Lookup = 7,
  LookupReply = 8,
  Status = 9,
  ElectSet = 10,
  RestartBegin = 11,
  Ack = 12,
  Error = 13,
  Quit = 14,
};

// Things the transport must push to clients as a result of one core call.
// `to` is an opaque client token; for registered processes it equals the vpid.
struct Delivery {
  enum class Kind : uint8_t { RegisterAck, CkptRequestRelease, BarrierRelease, Abort, LookupReply };
  Kind kind;
  uint64_t to = 0;
  uint32_t epoch = 0;
  std::string barrier;  // BarrierRelease only
  // election winners, attached to the election-completed release
  std::vector<std::tuple<GlobalSocketId, SocketRole, Vpid>> winners;
  // LookupReply
  GlobalSocketId sid;
  std::string address;
  uint32_t port = 0;
};
using Deliveries = std::vector<Delivery>;

// The centralized checkpoint coordinator: process registry, cluster-wide
// barrier service, election register, restart-time discovery service, and
// interval scheduling. Single logical event loop; every mutation goes
// through one of these calls, and the caller (in-process world or TCP
// server) dispatches the returned deliveries.
class CoordinatorCore {
 public:
  struct ProcessInfo {
    uint64_t host_id = 0;
    std::string address;
    bool restarting = false;
  };

  explicit CoordinatorCore(TraceLog* trace = nullptr) : trace_(trace) {}

  void set_interval(uint64_t interval) { interval_ = interval; }
  void set_clock(uint64_t now) { now_ = now; }

  // Opaque tokens for clients that are not processes (restart orchestrators,
  // CLI commands). Process tokens are their vpids.
  uint64_t new_client_token() { return next_token_++; }

  Deliveries register_process(Vpid vpid, uint64_t host_id, const std::string& address,
                              bool restarting);
  Deliveries deregister(Vpid vpid);

  Deliveries request_checkpoint(uint32_t* epoch_out = nullptr);
  // On a protocol violation the epoch aborts: the returned deliveries carry
  // the abort broadcast and *out_of_order is set for the reporter's error.
  Deliveries barrier_report(Vpid vpid, BarrierName barrier, bool* out_of_order = nullptr);

  void elect_set(const GlobalSocketId& sid, SocketRole side, Vpid writer);
  std::optional<Vpid> leader_of(const GlobalSocketId& sid, SocketRole side) const;

  Deliveries advertise(const GlobalSocketId& sid, const std::string& address, uint32_t port);
  Deliveries lookup(uint64_t client, const GlobalSocketId& sid);

  // Restart orchestration: declares the expected restored vpid set and the
  // generation being restored. First call flips mode to Restarting and pins
  // the epoch counter so the next checkpoint gets generation+1.
  Deliveries restart_begin(const std::vector<Vpid>& expected, uint32_t generation);

  Deliveries tick(uint64_t now);

  CoordinatorMode mode() const { return mode_; }
  uint32_t epoch() const { return epoch_; }
  size_t live_count() const { return registry_.size(); }
  std::vector<Vpid> live_vpids() const;
  const std::map<Vpid, ProcessInfo>& registry() const { return registry_; }
  Json status_json() const;

 private:
  Deliveries abort_epoch(const std::string& why);
  void release_barrier(BarrierName b, Deliveries& out);
  void finish_epoch();
  void trace_event(const std::string& kind, Json fields);

  TraceLog* trace_;
  CoordinatorMode mode_ = CoordinatorMode::Running;
  uint32_t epoch_ = 0;
  uint64_t now_ = 0;
  uint64_t interval_ = 0;
  uint64_t next_due_ = 0;
  uint64_t next_token_ = 1ULL << 32;

  std::map<Vpid, ProcessInfo> registry_;
  std::vector<std::pair<Vpid, ProcessInfo>> deferred_registrations_;

  // active epoch state
  std::set<Vpid> expected_;
  std::map<Vpid, std::optional<BarrierName>> progress_;  // last barrier reported
  std::map<std::pair<GlobalSocketId, SocketRole>, Vpid> elections_;

  // discovery (restarting mode only)
  std::map<GlobalSocketId, std::pair<std::string, uint32_t>> advertisements_;
  std::map<GlobalSocketId, std::vector<uint64_t>> pending_lookups_;
};

}  // namespace dcr

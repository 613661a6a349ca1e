#pragma once

#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dcr/aware.hpp"
#include "dcr/ckpt_manager.hpp"
#include "dcr/coordinator.hpp"
#include "dcr/core.hpp"
#include "dcr/snapshot.hpp"
#include "dcr/storage.hpp"
#include "dcr/trace.hpp"
#include "dcr/workload.hpp"

namespace dcr {
class SimRestarter;
}

namespace dcr::sim {

// Byte FIFO standing in for one direction of a kernel socket buffer.
class FifoBuffer {
 public:
  size_t size() const { return data_.size() - head_; }
  bool empty() const { return size() == 0; }
  void push(const uint8_t* p, size_t n);
  void push_front(const Bytes& b);
  size_t pop(uint8_t* out, size_t max);
  Bytes snapshot() const { return Bytes(data_.begin() + std::ptrdiff_t(head_), data_.end()); }
  void clear() {
    data_.clear();
    head_ = 0;
  }

 private:
  Bytes data_;
  size_t head_ = 0;
};

struct ChannelSide {
  std::vector<std::pair<Vpid, uint32_t>> holders;  // (vpid, fd)
  bool open() const { return !holders.empty(); }
  bool has(Vpid v) const;
  void add(Vpid v, uint32_t fd);
  void remove(Vpid v, uint32_t fd);
};

// One connection. Directions are named by the receiving side: to_acceptor
// carries connector->acceptor traffic. A promoted pipe uses to_acceptor only
// (write end = connector, read end = acceptor).
struct SimChannel {
  GlobalSocketId sid;
  bool pipe = false;
  uint64_t capacity = 64 * 1024;
  FifoBuffer to_acceptor, to_connector;
  // drain token markers: bytes still in front of the token, per direction
  std::optional<uint64_t> token_to_acceptor, token_to_connector;
  ChannelSide connector, acceptor;
  uint64_t sent_to_acceptor = 0, rcvd_to_acceptor = 0;
  uint64_t sent_to_connector = 0, rcvd_to_connector = 0;

  FifoBuffer& dir_to(SocketRole receiver) {
    return receiver == SocketRole::Acceptor ? to_acceptor : to_connector;
  }
  std::optional<uint64_t>& token_to(SocketRole receiver) {
    return receiver == SocketRole::Acceptor ? token_to_acceptor : token_to_connector;
  }
  ChannelSide& side(SocketRole role) {
    return role == SocketRole::Connector ? connector : acceptor;
  }
  uint64_t& sent_ctr(SocketRole receiver) {
    return receiver == SocketRole::Acceptor ? sent_to_acceptor : sent_to_connector;
  }
  uint64_t& rcvd_ctr(SocketRole receiver) {
    return receiver == SocketRole::Acceptor ? rcvd_to_acceptor : rcvd_to_connector;
  }
};

inline SocketRole other_side(SocketRole r) {
  return r == SocketRole::Connector ? SocketRole::Acceptor : SocketRole::Connector;
}

// --- checkpoint manager ------------------------------------------------------

enum class MgrPhase : uint8_t {
  Idle,
  Suspending,
  AwaitSuspended,
  Electing,
  AwaitElection,
  Draining,
  AwaitDrained,
  Writing,
  AwaitCheckpointed,
  Refilling,
  AwaitRefilled,
  Resuming,
  RestartReport,  // restored process entering the protocol at barrier "checkpointed"
};

struct MgrMsg {
  enum class Kind : uint8_t { Request, Release, Abort } kind = Kind::Request;
  uint32_t epoch = 0;
  std::string barrier;
  std::vector<std::tuple<GlobalSocketId, SocketRole, Vpid>> winners;
  std::vector<Vpid> quorum;
};

struct ManagerState {
  MgrPhase phase = MgrPhase::Idle;
  uint32_t epoch = 0;
  bool restart_path = false;
  std::deque<MgrMsg> mailbox;
  ElectionView winners;
  DrainBuffer drain;
  ConnectionInfoTable frozen_table;
  std::vector<LedEndpoint> led;
  size_t flush_ix = 0;
  std::vector<Vpid> vpid_map;
  std::map<DrainKey, Bytes> handback_inbox;
  std::set<DrainKey> awaiting;
  bool handbacks_sent = false;
  uint64_t write_ticks = 0;
  std::string image_file;       // filename only, for trace determinism
  std::string image_path_full;  // where finish_write lands it
  Bytes pending_image;
  uint64_t stage_mark = 0;
};

struct SimProcess {
  ProcessCore core;
  std::map<uint32_t, DescriptorRecord> fds;
  ManagerState mgr;
  AwareState aware;
  bool exited = false;
  size_t thread_cursor = 0;  // round-robin position over this process's threads
};

// --- world --------------------------------------------------------------------

struct SimConfig {
  uint32_t hosts = 1;
  uint64_t seed = 1;
  uint64_t channel_capacity = 64 * 1024;
  WriteMode write_mode = WriteMode::Plain;
  storage::SyncPolicy sync_policy = storage::SyncPolicy::None;
  std::string ckpt_dir = "ckpt";
  std::string basename = "image";
  uint64_t interval = 0;
  uint64_t forked_write_delay = 8;  // ticks until the snapshot child finishes
};

// In-simulation filesystem: workload files and shared-memory backing files.
// Cluster-global (NFS model) so relocated processes see the same paths, and
// carried across kill/restart by the harness.
struct SimFs {
  struct File {
    Bytes data;
    bool writable = true;
  };
  std::map<std::string, File> files;
  std::set<std::string> readonly_dirs;

  static std::string dirname(const std::string& path);
  bool dir_writable(const std::string& path) const {
    return !readonly_dirs.count(dirname(path));
  }
};

// Deterministic simulated cluster. Single-threaded; one step() is a scheduler
// round over every process in vpid order. Two worlds with equal (seed,
// command schedule) produce bitwise-equal traces.
class SimWorld {
 public:
  SimWorld(SimConfig cfg, std::shared_ptr<WorkloadLibrary> lib,
           std::shared_ptr<storage::StableDir> dir = nullptr);

  // topology & command surface
  Vpid spawn_process(uint32_t host, const std::string& script);
  Vpid fork_process(Vpid parent, const std::string& script);
  Vpid exec_remote(Vpid src, uint32_t host, const std::string& script);
  uint32_t request_checkpoint();

  // driver
  void step();
  bool idle() const;
  uint64_t now() const { return clock_; }
  bool run(uint64_t max_rounds = 2000000);  // true if idle reached

  // interception surface (used by workload threads and unit tests)
  uint32_t listen_on(Vpid p, uint32_t port);
  uint32_t connect_to(Vpid p, Vpid dst_vpid, uint32_t dst_fd);  // direct form; rendezvous-completed
  std::optional<uint32_t> try_accept(Vpid p, uint32_t listener_fd);
  size_t try_send(Vpid p, uint32_t fd, const uint8_t* data, size_t n);
  size_t try_recv(Vpid p, uint32_t fd, uint8_t* out, size_t max);
  std::pair<uint32_t, uint32_t> promote_pipe(Vpid p);  // (read_fd, write_fd)
  void map_shared_segment(Vpid p, const std::string& label, const std::string& path, uint64_t len,
                          bool writable);
  void close_fd(Vpid p, uint32_t fd);
  void exit_process(Vpid p);

  // aware api attachment
  AwareClient& aware(Vpid p);

  // state access
  SimProcess& process(Vpid p);
  const SimProcess* find_process(Vpid p) const;
  std::vector<Vpid> live_vpids() const;
  SimChannel* find_channel(const GlobalSocketId& sid);
  const std::map<GlobalSocketId, SimChannel>& channels() const { return channels_; }
  SimFs& fs() { return fs_; }
  CoordinatorCore& coordinator() { return coord_; }
  TraceLog& trace() { return trace_; }
  TimingLog& timings() { return timings_; }
  storage::StableDir& dir() { return *dir_; }
  std::shared_ptr<storage::StableDir> dir_ptr() { return dir_; }
  std::shared_ptr<WorkloadLibrary> library() { return lib_; }
  const SimConfig& config() const { return cfg_; }
  uint32_t last_completed_epoch() const { return last_completed_epoch_; }
  std::vector<std::string> epoch_image_paths(uint32_t epoch) const;
  std::string host_label(uint32_t host) const;
  uint64_t host_id(uint32_t host) const;

  // oracle support
  struct ProcessOutcome {
    Bytes heap;
    std::map<GlobalSocketId, Bytes> recv_streams;
    bool exited = false;
  };
  std::map<Vpid, ProcessOutcome> outcomes() const;
  // (sid, receiver side) -> queued bytes, for the drain-exactness oracle
  std::map<DrainKey, Bytes> queue_snapshot() const;
  void check_conservation() const;

  // test seams
  void inject_in_flight(const GlobalSocketId& sid, SocketRole receiver, const Bytes& bytes);
  std::function<uint32_t()> pid_allocator;  // overridable for conflict tests

 private:
  friend class dcr::SimRestarter;

  struct DeferredWrite {
    uint64_t due = 0;
    std::string path;
    Bytes bytes;
    uint32_t epoch = 0;
  };

  Vpid create_process(uint32_t host, const std::string& script, std::optional<Vpid> parent);
  void dispatch(const Deliveries& ds);
  void fire_pending_request();
  void step_thread(SimProcess& p, ThreadCore& t);
  bool exec_step(SimProcess& p, ThreadCore& t, const Step& s);  // true when step completed
  void step_manager(SimProcess& p);
  void manager_consume_release(SimProcess& p, const MgrMsg& m);
  void manager_abort(SimProcess& p);
  void begin_suspension(SimProcess& p, const MgrMsg& req);
  void finish_suspension(SimProcess& p);
  void do_elect(SimProcess& p);
  bool drain_step(SimProcess& p);  // true when drain finished
  void freeze_conn_table(SimProcess& p);
  void begin_write(SimProcess& p);
  void finish_write(SimProcess& p);
  void begin_refill(SimProcess& p);
  bool refill_step(SimProcess& p);
  void do_resume(SimProcess& p);
  void record_stage(SimProcess& p, const std::string& stage);
  uint32_t alloc_fd(SimProcess& p);
  DescriptorRecord& fd_record(SimProcess& p, uint32_t fd);
  void run_hook(SimProcess& p, const std::function<void()>& hook);
  void complete_epoch_bookkeeping(uint32_t epoch);
  void maybe_generate_script();
  uint64_t write_cost_ticks(size_t bytes) const;

  SimConfig cfg_;
  std::shared_ptr<WorkloadLibrary> lib_;
  std::shared_ptr<storage::StableDir> dir_;
  std::unique_ptr<SnapshotSubstrate> substrate_;
  TraceLog trace_;
  TimingLog timings_;
  CoordinatorCore coord_;
  SimFs fs_;
  uint64_t clock_ = 0;
  uint32_t next_real_pid_ = 100;

  std::map<Vpid, SimProcess> procs_;
  std::map<GlobalSocketId, SimChannel> channels_;
  // listener name (original host, port) -> holders; survives relocation
  std::map<std::pair<uint32_t, uint32_t>, ChannelSide> listeners_;
  std::map<std::pair<uint32_t, uint32_t>, std::deque<std::pair<Vpid, uint32_t>>> pending_connects_;
  std::map<std::string, int> segment_mappers_;

  std::vector<DeferredWrite> deferred_;
  std::vector<std::pair<Vpid, uint32_t>> app_requests_;  // (vpid, tid) awaiting epoch
  bool pending_request_ = false;
  uint32_t last_completed_epoch_ = 0;
  std::map<uint32_t, std::vector<std::pair<Vpid, std::string>>> epoch_images_;  // epoch -> (vpid, path)
  std::set<uint32_t> script_pending_;
  std::map<uint32_t, std::vector<std::pair<Vpid, std::string>>> epoch_hosts_;  // epoch -> (vpid, host label)
  std::map<Vpid, std::unique_ptr<AwareClient>> aware_clients_;
  std::map<uint64_t, std::deque<Delivery>> client_inbox_;  // non-process clients (restart)
};

}  // namespace dcr::sim

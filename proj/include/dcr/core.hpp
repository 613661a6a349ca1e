#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "dcr/bytes.hpp"

namespace dcr {

using Vpid = uint32_t;  // virtual pid value; positive, stable across restarts

// Process identity. vpid is assigned at first creation and never changes;
// real_pid is whatever the current incarnation happens to run as.
struct VirtualPid {
  Vpid vpid = 0;
  uint32_t real_pid = 0;

  friend bool operator==(const VirtualPid&, const VirtualPid&) = default;
};

// Identity of one socket connection, unique cluster-wide for the lifetime of
// a computation and immutable after creation. Both endpoints of a connection
// hold the same id after the connect/accept handshake (the acceptor side
// mints it).
struct GlobalSocketId {
  uint64_t host_id = 0;   // minting host
  Vpid creator = 0;       // minting process
  uint64_t timestamp = 0; // minting process's monotonic creation tick
  uint64_t conn_seq = 0;  // per-process connection counter, never reused

  auto operator<=>(const GlobalSocketId&) const = default;

  uint64_t mix() const {  // stable 64-bit digest, used for trace keys and heap addressing
    uint64_t h = host_id * 0x9e3779b97f4a7c15ULL;
    h ^= (uint64_t(creator) << 32) + timestamp * 0xc2b2ae3d27d4eb4fULL;
    h ^= conn_seq + (h >> 29);
    h *= 0xff51afd7ed558ccdULL;
    return h ^ (h >> 33);
  }

  std::string str() const;
};

// Mints the next socket id for a creating process. seq_counter strictly
// increases per process, which is what makes the tuple unique.
GlobalSocketId make_socket_id(uint64_t host_id, const VirtualPid& creator, uint64_t tick,
                              uint64_t& seq_counter);

// vpid assignment at fork: the child's real pid becomes its vpid unless that
// value is already live as some process's vpid, in which case the caller must
// terminate the child and fork again (see restart_engine::fork_until_no_conflict).
std::optional<VirtualPid> assign_virtual_pid(const VirtualPid& parent, uint32_t real_pid,
                                             const std::set<Vpid>& live_vpids);

// host_id is never defined by the protocol itself; we derive it from the
// hostname hash (top 32 bits) and a coordinator-assigned host index (low 32
// bits) so colliding hostnames still get distinct ids.
uint64_t derive_host_id(const std::string& hostname, uint32_t host_index);

enum class DescriptorKind : uint8_t {
  TcpListener = 0,
  TcpConnected = 1,
  UnixDomain = 2,
  PromotedPipe = 3,
  RegularFile = 4,
  ShmBacking = 5,
};

enum class SocketRole : uint8_t {
  None = 0,
  Connector = 1,  // for promoted pipes: the write end
  Acceptor = 2,   // for promoted pipes: the read end
};

const char* kind_name(DescriptorKind k);
const char* role_name(SocketRole r);

// Restart-time reopen data. The protocol fields of DescriptorRecord say what
// a descriptor is; this says how to rebuild it.
struct ListenerDetail {
  uint32_t port = 0;
  uint32_t bound_host = 0;  // host index the name (host, port) was first bound on
  friend bool operator==(const ListenerDetail&, const ListenerDetail&) = default;
};
struct FileDetail {
  std::string path;
  uint64_t offset = 0;
  friend bool operator==(const FileDetail&, const FileDetail&) = default;
};
struct ShmDetail {
  std::string path;
  bool writable = false;
  uint64_t length = 0;
  friend bool operator==(const ShmDetail&, const ShmDetail&) = default;
};
using DescriptorDetail = std::variant<std::monostate, ListenerDetail, FileDetail, ShmDetail>;

struct DescriptorRecord {
  uint32_t fd_num = 0;
  DescriptorKind kind = DescriptorKind::RegularFile;
  std::optional<GlobalSocketId> socket_id;  // present iff tcp-connected or promoted-pipe
  SocketRole role = SocketRole::None;
  std::optional<Vpid> owner_election;  // set by the election stage, cleared on resume
  DescriptorDetail detail;

  friend bool operator==(const DescriptorRecord&, const DescriptorRecord&) = default;
};

struct PeerInfo {
  Vpid remote_vpid = 0;
  uint64_t remote_host = 0;
  friend bool operator==(const PeerInfo&, const PeerInfo&) = default;
};

// Per-process record of descriptors, peers and election results, written at
// checkpoint time after the drain stage and consumed by the restart engine.
struct ConnectionInfoTable {
  Vpid owner = 0;
  std::vector<DescriptorRecord> records;  // ordered by fd_num
  std::map<GlobalSocketId, PeerInfo> peers;

  const DescriptorRecord* find_fd(uint32_t fd) const;
  friend bool operator==(const ConnectionInfoTable&, const ConnectionInfoTable&) = default;
};

// The ordered protocol barriers. A process may only report barrier k+1 after
// the coordinator released barrier k; the step-1 checkpoint-request barrier
// is handled separately (it is released by the request itself).
enum class BarrierName : uint8_t {
  Suspended = 2,
  ElectionCompleted = 3,
  Drained = 4,
  Checkpointed = 5,
  Refilled = 6,
};

const char* barrier_label(BarrierName b);
std::optional<BarrierName> next_barrier(std::optional<BarrierName> current);

enum class SnapshotCodec : uint8_t { None = 0, Gzip = 1 };

struct ImageHeader {
  Vpid vpid = 0;
  uint64_t host_id = 0;
  uint32_t generation = 0;  // cluster-wide checkpoint number, starts at 1
  SnapshotCodec codec = SnapshotCodec::None;
  friend bool operator==(const ImageHeader&, const ImageHeader&) = default;
};

// Everything restart needs for one process: snapshot blob from the substrate,
// the connection table, the bytes this process drained as a receiver, and the
// cluster-wide live vpid set at the epoch.
struct CheckpointImage {
  ImageHeader header;
  ConnectionInfoTable conn_table;
  std::map<GlobalSocketId, Bytes> drained_data;
  Bytes snapshot_blob;
  std::vector<Vpid> vpid_map;

  friend bool operator==(const CheckpointImage&, const CheckpointImage&) = default;
};

}  // namespace dcr

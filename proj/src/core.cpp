#include "dcr/core.hpp"

#include <functional>

namespace dcr {

const char* errc_name(Errc c) {
  switch (c) {
    case Errc::UnknownHost: return "UnknownHost";
    case Errc::DeadParent: return "DeadParent";
    case Errc::NotListening: return "NotListening";
    case Errc::BadDescriptor: return "BadDescriptor";
    case Errc::ReadOnlySegment: return "ReadOnlySegment";
    case Errc::DuplicateVpid: return "DuplicateVpid";
    case Errc::CheckpointInProgress: return "CheckpointInProgress";
    case Errc::OutOfOrderBarrier: return "OutOfOrderBarrier";
    case Errc::WrongMode: return "WrongMode";
    case Errc::CoordinatorLost: return "CoordinatorLost";
    case Errc::CoordinatorUnreachable: return "CoordinatorUnreachable";
    case Errc::ThreadUnresponsive: return "ThreadUnresponsive";
    case Errc::TokenTimeout: return "TokenTimeout";
    case Errc::StorageFull: return "StorageFull";
    case Errc::CompressionFailure: return "CompressionFailure";
    case Errc::PeerGone: return "PeerGone";
    case Errc::MissingImage: return "MissingImage";
    case Errc::VersionMismatch: return "VersionMismatch";
    case Errc::BindFailure: return "BindFailure";
    case Errc::HandshakeMismatch: return "HandshakeMismatch";
    case Errc::LookupTimeout: return "LookupTimeout";
    case Errc::ForkFailure: return "ForkFailure";
    case Errc::FdCollisionUnresolvable: return "FdCollisionUnresolvable";
    case Errc::CorruptSnapshot: return "CorruptSnapshot";
    case Errc::RetryBudgetExhausted: return "RetryBudgetExhausted";
    case Errc::DirectoryNotWritable: return "DirectoryNotWritable";
    case Errc::BadMagic: return "BadMagic";
    case Errc::TruncatedSection: return "TruncatedSection";
    case Errc::ChecksumMismatch: return "ChecksumMismatch";
    case Errc::CodecFailure: return "CodecFailure";
    case Errc::SyncFailure: return "SyncFailure";
    case Errc::IncompleteEpoch: return "IncompleteEpoch";
    case Errc::NotAttached: return "NotAttached";
    case Errc::UnbalancedExit: return "UnbalancedExit";
    case Errc::NotAllowedInHook: return "NotAllowedInHook";
    case Errc::BadProgramSpec: return "BadProgramSpec";
    case Errc::MalformedTrace: return "MalformedTrace";
    case Errc::BadWorkloadScript: return "BadWorkloadScript";
  }
  return "UnknownError";
}

std::string GlobalSocketId::str() const {
  return "sid{" + std::to_string(host_id) + "," + std::to_string(creator) + "," +
         std::to_string(timestamp) + "," + std::to_string(conn_seq) + "}";
}

GlobalSocketId make_socket_id(uint64_t host_id, const VirtualPid& creator, uint64_t tick,
                              uint64_t& seq_counter) {
  GlobalSocketId id;
  id.host_id = host_id;
  id.creator = creator.vpid;
  id.timestamp = tick;
  id.conn_seq = seq_counter++;
  return id;
}

std::optional<VirtualPid> assign_virtual_pid(const VirtualPid& parent, uint32_t real_pid,
                                             const std::set<Vpid>& live_vpids) {
  (void)parent;
  if (live_vpids.count(real_pid)) return std::nullopt;  // conflict: caller re-forks
  return VirtualPid{real_pid, real_pid};
}

uint64_t derive_host_id(const std::string& hostname, uint32_t host_index) {
  uint64_t h = 1469598103934665603ULL;  // FNV-1a, stable across platforms
  for (unsigned char c : hostname) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return (h << 32) | host_index;
}

const char* kind_name(DescriptorKind k) {
  switch (k) {
    case DescriptorKind::TcpListener: return "tcp-listener";
    case DescriptorKind::TcpConnected: return "tcp-connected";
    case DescriptorKind::UnixDomain: return "unix-domain";
    case DescriptorKind::PromotedPipe: return "promoted-pipe";
    case DescriptorKind::RegularFile: return "regular-file";
    case DescriptorKind::ShmBacking: return "shm-backing";
  }
  return "?";
}

const char* role_name(SocketRole r) {
  switch (r) {
    case SocketRole::None: return "none";
    case SocketRole::Connector: return "connector";
    case SocketRole::Acceptor: return "acceptor";
  }
  return "?";
}

const DescriptorRecord* ConnectionInfoTable::find_fd(uint32_t fd) const {
  for (const auto& r : records)
    if (r.fd_num == fd) return &r;
  return nullptr;
}

const char* barrier_label(BarrierName b) {
  switch (b) {
    case BarrierName::Suspended: return "suspended";
    case BarrierName::ElectionCompleted: return "election-completed";
    case BarrierName::Drained: return "drained";
    case BarrierName::Checkpointed: return "checkpointed";
    case BarrierName::Refilled: return "refilled";
  }
  return "?";
}

std::optional<BarrierName> next_barrier(std::optional<BarrierName> current) {
  if (!current) return BarrierName::Suspended;
  if (*current == BarrierName::Refilled) return std::nullopt;
  return BarrierName(uint8_t(*current) + 1);
}

}  // namespace dcr

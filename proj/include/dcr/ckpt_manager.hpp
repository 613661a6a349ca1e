#pragma once

#include <map>
#include <optional>
#include <set>
#include <vector>

#include "dcr/core.hpp"

namespace dcr {

enum class WriteMode : uint8_t { Plain = 0, Compressed = 1, ForkedCompressed = 2 };
const char* write_mode_name(WriteMode m);
WriteMode parse_write_mode(const std::string& s);

// Election results for one epoch, as broadcast with the election-completed
// release: (socket id, endpoint side) -> last writer. Elections are per side
// of a connection; the two endpoints of one socket elect independently, and
// among the processes sharing one endpoint exactly one wins.
class ElectionView {
 public:
  void set(const GlobalSocketId& sid, SocketRole side, Vpid winner) {
    winners_[{sid, side}] = winner;
  }
  bool is_leader(const GlobalSocketId& sid, SocketRole side, Vpid self) const {
    auto it = winners_.find({sid, side});
    return it != winners_.end() && it->second == self;
  }
  std::optional<Vpid> winner(const GlobalSocketId& sid, SocketRole side) const {
    auto it = winners_.find({sid, side});
    if (it == winners_.end()) return std::nullopt;
    return it->second;
  }
  const std::map<std::pair<GlobalSocketId, SocketRole>, Vpid>& all() const { return winners_; }
  void clear() { winners_.clear(); }

 private:
  std::map<std::pair<GlobalSocketId, SocketRole>, Vpid> winners_;
};

// Drained in-flight bytes, keyed by (socket id, receiving side of the
// direction). Two entries can exist for one sid when a single process holds
// both ends (loopback).
using DrainKey = std::pair<GlobalSocketId, SocketRole>;
using DrainBuffer = std::map<DrainKey, Bytes>;

// Image encoding of the drain buffer: the on-disk map is sid -> byte
// sequence, so the value packs up to two directions.
std::map<GlobalSocketId, Bytes> encode_drained(const DrainBuffer& buf);
DrainBuffer decode_drained(const std::map<GlobalSocketId, Bytes>& data);

// One endpoint this process leads in the current epoch. For a TCP socket the
// side leader both flushes its outgoing direction and drains its incoming
// one; a promoted pipe's write end only flushes and its read end only drains.
struct LedEndpoint {
  GlobalSocketId sid;
  SocketRole side = SocketRole::None;
  uint32_t fd = 0;
  bool flushes = false;
  bool drains = false;
};

std::vector<LedEndpoint> plan_led_endpoints(const std::map<uint32_t, DescriptorRecord>& fds,
                                            const ElectionView& winners, Vpid self);

// The set of (sid, side) pairs this process must write election entries for:
// every connected socket or promoted pipe it holds.
std::vector<std::pair<GlobalSocketId, SocketRole>> election_writes(
    const std::map<uint32_t, DescriptorRecord>& fds);

CheckpointImage build_image(Vpid vpid, uint64_t host_id, uint32_t generation, SnapshotCodec codec,
                            ConnectionInfoTable conn_table, const DrainBuffer& drained,
                            Bytes snapshot_blob, std::vector<Vpid> vpid_map);

}  // namespace dcr

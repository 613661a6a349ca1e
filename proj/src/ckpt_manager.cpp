#include "dcr/ckpt_manager.hpp"

#include <algorithm>

namespace dcr {

const char* write_mode_name(WriteMode m) {
  switch (m) {
    case WriteMode::Plain: return "plain";
    case WriteMode::Compressed: return "compressed";
    case WriteMode::ForkedCompressed: return "forked-compressed";
  }
  return "?";
}

WriteMode parse_write_mode(const std::string& s) {
  if (s == "plain" || s == "none") return WriteMode::Plain;
  if (s == "compressed" || s == "gzip") return WriteMode::Compressed;
  if (s == "forked" || s == "forked-compressed") return WriteMode::ForkedCompressed;
  fail(Errc::BadProgramSpec, "write mode must be plain|gzip|forked, got " + s);
}

std::map<GlobalSocketId, Bytes> encode_drained(const DrainBuffer& buf) {
  std::map<GlobalSocketId, Bytes> out;
  for (const auto& [key, bytes] : buf) {
    const auto& [sid, receiver] = key;
    Bytes& v = out[sid];
    if (v.empty()) v.push_back(0);  // flags byte
    uint8_t bit = receiver == SocketRole::Connector ? 1 : 2;
    v[0] |= bit;
    ByteWriter w;
    w.u8(bit);
    w.blob(bytes);
    v.insert(v.end(), w.data().begin(), w.data().end());
  }
  return out;
}

DrainBuffer decode_drained(const std::map<GlobalSocketId, Bytes>& data) {
  DrainBuffer out;
  for (const auto& [sid, v] : data) {
    if (v.empty()) fail(Errc::TruncatedSection, "empty drained entry");
    ByteReader r(v.data() + 1, v.size() - 1);
    while (!r.done()) {
      uint8_t bit = r.u8();
      SocketRole receiver = bit == 1 ? SocketRole::Connector : SocketRole::Acceptor;
      out[{sid, receiver}] = r.blob();
    }
  }
  return out;
}

std::vector<std::pair<GlobalSocketId, SocketRole>> election_writes(
    const std::map<uint32_t, DescriptorRecord>& fds) {
  std::vector<std::pair<GlobalSocketId, SocketRole>> out;
  for (const auto& [fd, rec] : fds) {
    if (!rec.socket_id) continue;
    if (rec.kind != DescriptorKind::TcpConnected && rec.kind != DescriptorKind::PromotedPipe &&
        rec.kind != DescriptorKind::UnixDomain)
      continue;
    out.emplace_back(*rec.socket_id, rec.role);
  }
  return out;
}

std::vector<LedEndpoint> plan_led_endpoints(const std::map<uint32_t, DescriptorRecord>& fds,
                                            const ElectionView& winners, Vpid self) {
  std::vector<LedEndpoint> out;
  std::set<std::pair<GlobalSocketId, SocketRole>> seen;  // dup fds of one endpoint act once
  for (const auto& [fd, rec] : fds) {
    if (!rec.socket_id) continue;
    if (rec.kind != DescriptorKind::TcpConnected && rec.kind != DescriptorKind::PromotedPipe &&
        rec.kind != DescriptorKind::UnixDomain)
      continue;
    if (!winners.is_leader(*rec.socket_id, rec.role, self)) continue;
    if (!seen.insert({*rec.socket_id, rec.role}).second) continue;
    LedEndpoint ep;
    ep.sid = *rec.socket_id;
    ep.side = rec.role;
    ep.fd = fd;
    if (rec.kind == DescriptorKind::PromotedPipe) {
      ep.flushes = rec.role == SocketRole::Connector;  // write end
      ep.drains = rec.role == SocketRole::Acceptor;    // read end
    } else {
      ep.flushes = true;
      ep.drains = true;
    }
    out.push_back(ep);
  }
  return out;
}

CheckpointImage build_image(Vpid vpid, uint64_t host_id, uint32_t generation, SnapshotCodec codec,
                            ConnectionInfoTable conn_table, const DrainBuffer& drained,
                            Bytes snapshot_blob, std::vector<Vpid> vpid_map) {
  CheckpointImage img;
  img.header.vpid = vpid;
  img.header.host_id = host_id;
  img.header.generation = generation;
  img.header.codec = codec;
  img.conn_table = std::move(conn_table);
  img.drained_data = encode_drained(drained);
  img.snapshot_blob = std::move(snapshot_blob);
  img.vpid_map = std::move(vpid_map);
  std::sort(img.vpid_map.begin(), img.vpid_map.end());
  return img;
}

}  // namespace dcr

#include "dcr/snapshot.hpp"

#include "dcr/storage.hpp"

namespace dcr {

namespace {

void put_sid(ByteWriter& w, const GlobalSocketId& id) {
  w.u64(id.host_id);
  w.u32(id.creator);
  w.u64(id.timestamp);
  w.u64(id.conn_seq);
}

GlobalSocketId get_sid(ByteReader& r) {
  GlobalSocketId id;
  id.host_id = r.u64();
  id.creator = r.u32();
  id.timestamp = r.u64();
  id.conn_seq = r.u64();
  return id;
}

class ScriptedSubstrate : public SnapshotSubstrate {
 public:
  std::string name() const override { return "scripted-state"; }

  Bytes capture(const ProcessSnapshot& s) override {
    ByteWriter w;
    const ProcessCore& c = s.core;
    w.u32(c.id.vpid);
    w.u32(c.id.real_pid);
    w.u32(c.host);
    w.blob(c.heap);
    w.u32(uint32_t(c.threads.size()));
    for (const auto& t : c.threads) {
      w.u32(t.tid);
      w.str(t.script);
      w.u32(t.pc);
      w.u64(t.progress);
      w.u8(t.done ? 1 : 0);
    }
    w.u32(uint32_t(c.fd_labels.size()));
    for (const auto& [k, v] : c.fd_labels) {
      w.str(k);
      w.u32(v);
    }
    w.u32(uint32_t(c.seg_labels.size()));
    for (const auto& [k, v] : c.seg_labels) {
      w.str(k);
      w.str(v);
    }
    w.u32(uint32_t(c.recv_streams.size()));
    for (const auto& [sid, bytes] : c.recv_streams) {
      put_sid(w, sid);
      w.blob(bytes);
    }
    w.u32(uint32_t(c.send_offsets.size()));
    for (const auto& [sid, off] : c.send_offsets) {
      put_sid(w, sid);
      w.u64(off);
    }
    w.u32(uint32_t(c.children.size()));
    for (Vpid v : c.children) w.u32(v);
    w.u64(c.sock_seq);
    w.u64(c.ts_counter);
    w.u32(c.next_fd);

    w.u32(uint32_t(s.segments.size()));
    for (const auto& seg : s.segments) {
      w.str(seg.path);
      w.u8(seg.writable ? 1 : 0);
      w.blob(seg.contents);
    }
    // trailing checksum over everything above
    uint32_t crc = storage::crc32_of(w.data().data(), w.data().size());
    w.u32(crc);
    return w.take();
  }

  ProcessSnapshot restore(const Bytes& blob) override {
    if (blob.size() < 4) fail(Errc::CorruptSnapshot, "blob shorter than checksum");
    uint32_t stored = uint32_t(blob[blob.size() - 4]) | uint32_t(blob[blob.size() - 3]) << 8 |
                      uint32_t(blob[blob.size() - 2]) << 16 | uint32_t(blob[blob.size() - 1]) << 24;
    if (stored != storage::crc32_of(blob.data(), blob.size() - 4))
      fail(Errc::CorruptSnapshot, "snapshot checksum mismatch");
    try {
      ByteReader r(blob.data(), blob.size() - 4);
      ProcessSnapshot s;
      ProcessCore& c = s.core;
      c.id.vpid = r.u32();
      c.id.real_pid = r.u32();
      c.host = r.u32();
      c.heap = r.blob();
      uint32_t nthreads = r.u32();
      for (uint32_t i = 0; i < nthreads; i++) {
        ThreadCore t;
        t.tid = r.u32();
        t.script = r.str();
        t.pc = r.u32();
        t.progress = r.u64();
        t.done = r.u8() != 0;
        c.threads.push_back(std::move(t));
      }
      uint32_t n = r.u32();
      for (uint32_t i = 0; i < n; i++) {
        std::string k = r.str();
        c.fd_labels[k] = r.u32();
      }
      n = r.u32();
      for (uint32_t i = 0; i < n; i++) {
        std::string k = r.str();
        c.seg_labels[k] = r.str();
      }
      n = r.u32();
      for (uint32_t i = 0; i < n; i++) {
        GlobalSocketId sid = get_sid(r);
        c.recv_streams[sid] = r.blob();
      }
      n = r.u32();
      for (uint32_t i = 0; i < n; i++) {
        GlobalSocketId sid = get_sid(r);
        c.send_offsets[sid] = r.u64();
      }
      n = r.u32();
      for (uint32_t i = 0; i < n; i++) c.children.push_back(r.u32());
      c.sock_seq = r.u64();
      c.ts_counter = r.u64();
      c.next_fd = r.u32();

      n = r.u32();
      for (uint32_t i = 0; i < n; i++) {
        SegmentState seg;
        seg.path = r.str();
        seg.writable = r.u8() != 0;
        seg.contents = r.blob();
        s.segments.push_back(std::move(seg));
      }
      if (!r.done()) fail(Errc::CorruptSnapshot, "trailing bytes in snapshot");
      return s;
    } catch (const Error& e) {
      if (e.code() == Errc::TruncatedSection)
        fail(Errc::CorruptSnapshot, "snapshot blob truncated");
      throw;
    }
  }
};

}  // namespace

std::unique_ptr<SnapshotSubstrate> make_scripted_substrate() {
  return std::make_unique<ScriptedSubstrate>();
}

}  // namespace dcr

#include "dcr/storage.hpp"

#include <fcntl.h>
#include <unistd.h>
#include <zlib.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace dcr::storage {

namespace fs = std::filesystem;

uint32_t crc32_of(const uint8_t* p, size_t n) {
  return uint32_t(::crc32(0L, p, uInt(n)));
}

// --- section framing -------------------------------------------------------

static void put_section(ByteWriter& w, const Bytes& payload) {
  w.u64(payload.size());
  w.raw(payload);
  w.u32(crc32_of(payload.data(), payload.size()));
}

static Bytes get_section(ByteReader& r, const char* what) {
  uint64_t len = r.u64();
  if (r.remaining() < len + 4)
    fail(Errc::TruncatedSection, std::string(what) + " section cut short");
  Bytes payload = r.raw(size_t(len));
  uint32_t stored = r.u32();
  if (stored != crc32_of(payload.data(), payload.size()))
    fail(Errc::ChecksumMismatch, std::string(what) + " section checksum");
  return payload;
}

// --- field codecs -----------------------------------------------------------

static void put_socket_id(ByteWriter& w, const GlobalSocketId& id) {
  w.u64(id.host_id);
  w.u32(id.creator);
  w.u64(id.timestamp);
  w.u64(id.conn_seq);
}

static GlobalSocketId get_socket_id(ByteReader& r) {
  GlobalSocketId id;
  id.host_id = r.u64();
  id.creator = r.u32();
  id.timestamp = r.u64();
  id.conn_seq = r.u64();
  return id;
}

static void put_record(ByteWriter& w, const DescriptorRecord& rec) {
  w.u32(rec.fd_num);
  w.u8(uint8_t(rec.kind));
  w.u8(rec.socket_id ? 1 : 0);
  if (rec.socket_id) put_socket_id(w, *rec.socket_id);
  w.u8(uint8_t(rec.role));
  w.u8(rec.owner_election ? 1 : 0);
  if (rec.owner_election) w.u32(*rec.owner_election);
  w.u8(uint8_t(rec.detail.index()));
  if (const auto* l = std::get_if<ListenerDetail>(&rec.detail)) {
    w.u32(l->port);
    w.u32(l->bound_host);
  } else if (const auto* f = std::get_if<FileDetail>(&rec.detail)) {
    w.str(f->path);
    w.u64(f->offset);
  } else if (const auto* s = std::get_if<ShmDetail>(&rec.detail)) {
    w.str(s->path);
    w.u8(s->writable ? 1 : 0);
    w.u64(s->length);
  }
}

static DescriptorRecord get_record(ByteReader& r) {
  DescriptorRecord rec;
  rec.fd_num = r.u32();
  rec.kind = DescriptorKind(r.u8());
  if (r.u8()) rec.socket_id = get_socket_id(r);
  rec.role = SocketRole(r.u8());
  if (r.u8()) rec.owner_election = r.u32();
  switch (r.u8()) {
    case 0: break;
    case 1: {
      ListenerDetail l;
      l.port = r.u32();
      l.bound_host = r.u32();
      rec.detail = l;
      break;
    }
    case 2: {
      FileDetail f;
      f.path = r.str();
      f.offset = r.u64();
      rec.detail = f;
      break;
    }
    case 3: {
      ShmDetail s;
      s.path = r.str();
      s.writable = r.u8() != 0;
      s.length = r.u64();
      rec.detail = s;
      break;
    }
    default: fail(Errc::TruncatedSection, "unknown descriptor detail tag");
  }
  return rec;
}

Bytes serialize_conn_table(const ConnectionInfoTable& t) {
  ByteWriter w;
  w.u32(t.owner);
  w.u32(uint32_t(t.records.size()));
  for (const auto& rec : t.records) put_record(w, rec);
  w.u32(uint32_t(t.peers.size()));
  for (const auto& [sid, peer] : t.peers) {
    put_socket_id(w, sid);
    w.u32(peer.remote_vpid);
    w.u64(peer.remote_host);
  }
  return w.take();
}

ConnectionInfoTable parse_conn_table(ByteReader& r) {
  ConnectionInfoTable t;
  t.owner = r.u32();
  uint32_t nrec = r.u32();
  for (uint32_t i = 0; i < nrec; i++) t.records.push_back(get_record(r));
  uint32_t npeer = r.u32();
  for (uint32_t i = 0; i < npeer; i++) {
    GlobalSocketId sid = get_socket_id(r);
    PeerInfo p;
    p.remote_vpid = r.u32();
    p.remote_host = r.u64();
    t.peers.emplace(sid, p);
  }
  return t;
}

// --- image -------------------------------------------------------------------

Bytes serialize_image(const CheckpointImage& image) {
  ByteWriter w;
  w.raw(reinterpret_cast<const uint8_t*>(kMagic), 4);
  w.u32(kFormatVersion);

  ByteWriter hdr;
  hdr.u32(image.header.vpid);
  hdr.u64(image.header.host_id);
  hdr.u32(image.header.generation);
  hdr.u8(uint8_t(image.header.codec));
  hdr.u32(uint32_t(image.vpid_map.size()));
  for (Vpid v : image.vpid_map) hdr.u32(v);
  put_section(w, hdr.data());

  put_section(w, serialize_conn_table(image.conn_table));

  ByteWriter drained;
  drained.u32(uint32_t(image.drained_data.size()));
  for (const auto& [sid, bytes] : image.drained_data) {
    put_socket_id(drained, sid);
    drained.blob(bytes);
  }
  put_section(w, drained.data());

  put_section(w, image.snapshot_blob);
  return w.take();
}

CheckpointImage parse_image(const Bytes& bytes) {
  ByteReader r(bytes);
  if (r.remaining() < 8) fail(Errc::BadMagic, "file shorter than preamble");
  Bytes magic = r.raw(4);
  if (::memcmp(magic.data(), kMagic, 4) != 0) fail(Errc::BadMagic, "not a checkpoint image");
  uint32_t version = r.u32();
  if (version != kFormatVersion)
    fail(Errc::VersionMismatch,
         "format version " + std::to_string(version) + ", engine reads " +
             std::to_string(kFormatVersion));

  CheckpointImage img;
  {
    Bytes payload = get_section(r, "header");
    ByteReader h(payload);
    img.header.vpid = h.u32();
    img.header.host_id = h.u64();
    img.header.generation = h.u32();
    img.header.codec = SnapshotCodec(h.u8());
    uint32_t n = h.u32();
    for (uint32_t i = 0; i < n; i++) img.vpid_map.push_back(h.u32());
  }
  {
    Bytes payload = get_section(r, "conn_table");
    ByteReader c(payload);
    img.conn_table = parse_conn_table(c);
  }
  {
    Bytes payload = get_section(r, "drained_data");
    ByteReader d(payload);
    uint32_t n = d.u32();
    for (uint32_t i = 0; i < n; i++) {
      GlobalSocketId sid = get_socket_id(d);
      img.drained_data.emplace(sid, d.blob());
    }
  }
  img.snapshot_blob = get_section(r, "snapshot_blob");
  return img;
}

// --- compression -------------------------------------------------------------

Bytes compress_stream(const Bytes& in, Codec codec) {
  if (codec == Codec::None) return in;
  z_stream zs{};
  // windowBits 15+16 selects the gzip container
  if (deflateInit2(&zs, Z_DEFAULT_COMPRESSION, Z_DEFLATED, 15 + 16, 8, Z_DEFAULT_STRATEGY) != Z_OK)
    fail(Errc::CompressionFailure, "deflateInit2");
  Bytes out;
  out.resize(deflateBound(&zs, uLong(in.size())) + 32);
  zs.next_in = const_cast<Bytef*>(in.data());
  zs.avail_in = uInt(in.size());
  zs.next_out = out.data();
  zs.avail_out = uInt(out.size());
  int rc = deflate(&zs, Z_FINISH);
  if (rc != Z_STREAM_END) {
    deflateEnd(&zs);
    fail(Errc::CompressionFailure, "deflate rc=" + std::to_string(rc));
  }
  out.resize(zs.total_out);
  deflateEnd(&zs);
  return out;
}

Bytes decompress_stream(const Bytes& in, Codec codec) {
  if (codec == Codec::None) return in;
  z_stream zs{};
  if (inflateInit2(&zs, 15 + 16) != Z_OK) fail(Errc::CodecFailure, "inflateInit2");
  Bytes out;
  out.resize(std::max<size_t>(in.size() * 4, 4096));
  zs.next_in = const_cast<Bytef*>(in.data());
  zs.avail_in = uInt(in.size());
  size_t written = 0;
  int rc;
  do {
    if (written == out.size()) out.resize(out.size() * 2);
    zs.next_out = out.data() + written;
    zs.avail_out = uInt(out.size() - written);
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&zs);
      fail(Errc::CodecFailure, "inflate rc=" + std::to_string(rc));
    }
    written = zs.total_out;
  } while (rc != Z_STREAM_END);
  out.resize(written);
  inflateEnd(&zs);
  return out;
}

// --- paths -------------------------------------------------------------------

std::string image_filename(const std::string& basename, Vpid vpid, uint32_t epoch) {
  return basename + "_" + std::to_string(vpid) + "_" + std::to_string(epoch) + ".ckpt";
}

fs::path epoch_dir(const fs::path& dir, uint32_t epoch) { return dir / std::to_string(epoch); }

fs::path image_path(const fs::path& dir, const std::string& basename, Vpid vpid, uint32_t epoch) {
  return epoch_dir(dir, epoch) / image_filename(basename, vpid, epoch);
}

// --- stable dir ---------------------------------------------------------------

namespace {

class FsDir : public StableDir {
 public:
  void write_file(const fs::path& p, const Bytes& data) override {
    fs::create_directories(p.parent_path());
    std::ofstream f(p, std::ios::binary | std::ios::trunc);
    if (!f) fail(Errc::StorageFull, "cannot open " + p.string());
    f.write(reinterpret_cast<const char*>(data.data()), std::streamsize(data.size()));
    if (!f) fail(Errc::StorageFull, "short write to " + p.string());
  }
  Bytes read_file(const fs::path& p) override {
    std::ifstream f(p, std::ios::binary);
    if (!f) fail(Errc::MissingImage, p.string());
    return Bytes(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
  }
  bool exists(const fs::path& p) override { return fs::exists(p); }
  std::vector<std::string> list_dir(const fs::path& p) override {
    std::vector<std::string> out;
    std::error_code ec;
    if (!fs::exists(p, ec)) return out;
    for (const auto& entry : fs::directory_iterator(p))
      if (entry.is_regular_file()) out.push_back(entry.path().string());
    std::sort(out.begin(), out.end());
    return out;
  }
  void sync_path(const fs::path& p) override {
    int fd = ::open(p.c_str(), O_RDONLY);
    if (fd < 0) fail(Errc::SyncFailure, p.string());
    int rc = ::fsync(fd);
    ::close(fd);
    if (rc != 0) fail(Errc::SyncFailure, "fsync " + p.string());
  }
};

}  // namespace

std::unique_ptr<StableDir> make_fs_dir() { return std::make_unique<FsDir>(); }

void CrashSimDir::write_file(const fs::path& p, const Bytes& data) { dirty_[p.string()] = data; }

Bytes CrashSimDir::read_file(const fs::path& p) {
  if (auto it = dirty_.find(p.string()); it != dirty_.end()) return it->second;
  if (auto it = synced_.find(p.string()); it != synced_.end()) return it->second;
  fail(Errc::MissingImage, p.string());
}

bool CrashSimDir::exists(const fs::path& p) {
  return dirty_.count(p.string()) || synced_.count(p.string());
}

std::vector<std::string> CrashSimDir::list_dir(const fs::path& p) {
  std::vector<std::string> out;
  std::string prefix = p.string();
  if (!prefix.empty() && prefix.back() != '/') prefix += '/';
  for (const auto& [name, _] : synced_)
    if (name.rfind(prefix, 0) == 0) out.push_back(name);
  for (const auto& [name, _] : dirty_)
    if (name.rfind(prefix, 0) == 0) out.push_back(name);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

void CrashSimDir::sync_path(const fs::path& p) {
  auto it = dirty_.find(p.string());
  if (it != dirty_.end()) {
    synced_[it->first] = it->second;
    dirty_.erase(it);
  }
}

void CrashSimDir::crash() { dirty_.clear(); }

SyncPolicy parse_sync_policy(const std::string& s) {
  if (s == "none") return SyncPolicy::None;
  if (s == "current") return SyncPolicy::SyncCurrent;
  if (s == "previous") return SyncPolicy::SyncPrevious;
  fail(Errc::BadProgramSpec, "sync policy must be none|current|previous, got " + s);
}

const char* sync_policy_name(SyncPolicy p) {
  switch (p) {
    case SyncPolicy::None: return "none";
    case SyncPolicy::SyncCurrent: return "current";
    case SyncPolicy::SyncPrevious: return "previous";
  }
  return "?";
}

size_t apply_sync_policy(StableDir& dir, const fs::path& ckpt_dir, SyncPolicy policy,
                         uint32_t epoch) {
  if (policy == SyncPolicy::None) return 0;
  uint32_t target = epoch;
  if (policy == SyncPolicy::SyncPrevious) {
    if (epoch <= 1) return 0;  // nothing before the first checkpoint
    target = epoch - 1;
  }
  fs::path ed = epoch_dir(ckpt_dir, target);
  size_t n = 0;
  for (const auto& name : dir.list_dir(ed)) {
    dir.sync_path(name);
    n++;
  }
  return n;
}

// --- restart script ------------------------------------------------------------

std::string generate_restart_script(const ClusterManifest& manifest, StableDir& dir) {
  for (const auto& h : manifest.hosts)
    for (const auto& p : h.image_paths)
      if (!dir.exists(p))
        fail(Errc::IncompleteEpoch, "missing image " + p + " for host " + h.host);

  std::vector<HostManifest> hosts = manifest.hosts;
  std::sort(hosts.begin(), hosts.end(),
            [](const HostManifest& a, const HostManifest& b) { return a.host < b.host; });

  std::ostringstream s;
  s << "#!/bin/sh\n";
  s << "# restart script for checkpoint generation " << manifest.epoch << "\n";
  s << "# one restart invocation per host\n";
  for (const auto& h : hosts) {
    s << manifest.restart_command << " --coordinator " << manifest.coordinator_address;
    for (const auto& p : h.image_paths) s << " " << p;
    s << " &\n";
  }
  s << "wait\n";
  return s.str();
}

fs::path write_restart_script(const ClusterManifest& manifest, const fs::path& ckpt_dir,
                              StableDir& dir) {
  std::string text = generate_restart_script(manifest, dir);
  fs::path final_path = epoch_dir(ckpt_dir, manifest.epoch) / kRestartScriptName;
  fs::path tmp = final_path;
  tmp += ".tmp";
  dir.write_file(tmp, to_bytes(text));
  // atomic replace when backed by a real filesystem
  std::error_code ec;
  if (fs::exists(tmp, ec)) {
    fs::rename(tmp, final_path, ec);
    if (ec) fail(Errc::StorageFull, "rename restart script: " + ec.message());
    fs::permissions(final_path,
                    fs::perms::owner_all | fs::perms::group_read | fs::perms::group_exec |
                        fs::perms::others_read | fs::perms::others_exec,
                    ec);
  } else {
    dir.write_file(final_path, to_bytes(text));
  }
  return final_path;
}

std::vector<ScriptLine> parse_restart_script(const std::string& text) {
  std::vector<ScriptLine> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    auto pos = line.find("--coordinator ");
    if (pos == std::string::npos) continue;
    ScriptLine sl;
    std::istringstream ls(line.substr(pos + 14));
    ls >> sl.coordinator_address;
    std::string tok;
    while (ls >> tok) {
      if (tok == "&") break;
      sl.image_paths.push_back(tok);
    }
    out.push_back(std::move(sl));
  }
  return out;
}

}  // namespace dcr::storage

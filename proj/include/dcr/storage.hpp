#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "dcr/core.hpp"

namespace dcr::storage {

// .ckpt file layout: magic "CKP1", u32 version, then four length-prefixed
// sections in order: header, conn_table, drained_data, snapshot_blob.
// Integers little-endian, section lengths u64. Each section payload is
// followed by a u32 CRC32 of the payload (the length does not cover the CRC).
inline constexpr char kMagic[4] = {'C', 'K', 'P', '1'};
inline constexpr uint32_t kFormatVersion = 1;

Bytes serialize_image(const CheckpointImage& image);
CheckpointImage parse_image(const Bytes& bytes);

Bytes serialize_conn_table(const ConnectionInfoTable& t);
ConnectionInfoTable parse_conn_table(ByteReader& r);

enum class Codec { None, Deflate };

// DEFLATE stream in the gzip container format, so images interoperate with
// command-line gzip. Codec::None is the identity.
Bytes compress_stream(const Bytes& in, Codec codec);
Bytes decompress_stream(const Bytes& in, Codec codec);

uint32_t crc32_of(const uint8_t* p, size_t n);

// ---------------------------------------------------------------------------
// Checkpoint directory: <dir>/<epoch>/<basename>_<vpid>_<epoch>.ckpt
// plus the restart script for that epoch.

std::string image_filename(const std::string& basename, Vpid vpid, uint32_t epoch);
std::filesystem::path epoch_dir(const std::filesystem::path& dir, uint32_t epoch);
std::filesystem::path image_path(const std::filesystem::path& dir, const std::string& basename,
                                 Vpid vpid, uint32_t epoch);
inline constexpr const char* kRestartScriptName = "dcr_restart_script.sh";

// Durable-write seam. The real implementation writes straight through; the
// crash-simulating one holds written bytes in memory until synced so tests
// can model a host dying with dirty page cache.
class StableDir {
 public:
  virtual ~StableDir() = default;
  virtual void write_file(const std::filesystem::path& p, const Bytes& data) = 0;
  virtual Bytes read_file(const std::filesystem::path& p) = 0;
  virtual bool exists(const std::filesystem::path& p) = 0;
  virtual std::vector<std::string> list_dir(const std::filesystem::path& p) = 0;
  virtual void sync_path(const std::filesystem::path& p) = 0;
};

std::unique_ptr<StableDir> make_fs_dir();

class CrashSimDir : public StableDir {
 public:
  void write_file(const std::filesystem::path& p, const Bytes& data) override;
  Bytes read_file(const std::filesystem::path& p) override;
  bool exists(const std::filesystem::path& p) override;
  std::vector<std::string> list_dir(const std::filesystem::path& p) override;
  void sync_path(const std::filesystem::path& p) override;

  void crash();  // drop everything not yet synced

 private:
  std::map<std::string, Bytes> synced_;
  std::map<std::string, Bytes> dirty_;
};

enum class SyncPolicy { None, SyncCurrent, SyncPrevious };

SyncPolicy parse_sync_policy(const std::string& s);
const char* sync_policy_name(SyncPolicy p);

// Durability barrier after an epoch's images are written. SyncCurrent syncs
// this epoch's files before resuming; SyncPrevious syncs epoch-1 (a no-op at
// epoch 1), guaranteeing consistency of all but the last checkpoint.
// Returns the number of files synced.
size_t apply_sync_policy(StableDir& dir, const std::filesystem::path& ckpt_dir, SyncPolicy policy,
                         uint32_t epoch);

// ---------------------------------------------------------------------------
// Restart script

struct HostManifest {
  std::string host;                     // sort key; one script line per host
  std::vector<std::string> image_paths; // all images for processes on this host
};

struct ClusterManifest {
  std::string coordinator_address;  // "host:port", or "sim://local" in simulator mode
  uint32_t epoch = 0;
  std::vector<HostManifest> hosts;
  std::string restart_command = "dcr restart";
};

// One restart invocation per host, hosts sorted lexicographically. Throws
// IncompleteEpoch if any listed image is absent from `dir`.
std::string generate_restart_script(const ClusterManifest& manifest, StableDir& dir);

// Writes the script atomically (tmp file + rename) under the epoch directory.
std::filesystem::path write_restart_script(const ClusterManifest& manifest,
                                           const std::filesystem::path& ckpt_dir, StableDir& dir);

// Parses the restart invocations back out of a generated script: one entry
// per host line, (coordinator_address, image paths).
struct ScriptLine {
  std::string coordinator_address;
  std::vector<std::string> image_paths;
};
std::vector<ScriptLine> parse_restart_script(const std::string& text);

}  // namespace dcr::storage

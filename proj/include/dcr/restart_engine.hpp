#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dcr/ckpt_manager.hpp"
#include "dcr/core.hpp"
#include "dcr/snapshot.hpp"

namespace dcr::sim {
class SimWorld;
struct SimFs;
}  // namespace dcr::sim

namespace dcr {

// Forks until the child's real pid does not collide with a live vpid,
// terminating conflicting children (on_conflict is told about each one).
// When preserve_vpid is set the resulting process keeps that vpid regardless
// of its real pid; the collision check still applies so the vpid table stays
// unambiguous. Throws RetryBudgetExhausted.
VirtualPid fork_until_no_conflict(const std::function<uint32_t()>& next_real_pid,
                                  const VirtualPid& parent, const std::set<Vpid>& live,
                                  std::optional<Vpid> preserve_vpid,
                                  const std::function<void(uint32_t)>& on_conflict = {},
                                  uint32_t budget = 1024);

// Identity of a descriptor for restart-time matching. Sockets and listeners
// are shared resources (same key across the images of fork relatives); files
// and shm mappings are per-process.
std::string descriptor_match_key(const DescriptorRecord& rec, Vpid owner);

// dup2/close rearrangement: moves each pooled descriptor to the fd number the
// connection table records, closing pool entries this process does not own.
// Cycles are broken through a temporary slot above the highest fd in play;
// max_fd caps the usable fd space (FdCollisionUnresolvable when a temp slot
// cannot be allocated). `oplog`, when given, receives the dup2/close steps.
std::map<uint32_t, DescriptorRecord> rearrange_descriptors(
    const std::map<uint32_t, DescriptorRecord>& pool, const ConnectionInfoTable& target,
    Vpid owner, uint32_t max_fd = UINT32_MAX, std::vector<std::string>* oplog = nullptr);

enum class ShmRestoreCase : uint8_t {
  CreatedFromImage,    // backing file missing, directory writable
  OverwroteWithImage,  // file present and writable
  KeptCurrentFile,     // no write access: current file data wins
};
const char* shm_restore_case_name(ShmRestoreCase c);

// The three-case shared-memory restore rule. Throws DirectoryNotWritable when
// the backing file is missing and cannot be created.
ShmRestoreCase restore_shared_memory(sim::SimFs& fs, const SegmentState& seg);

// --- simulator restart -----------------------------------------------------

struct RestartAssignment {
  std::string image_path;
  uint32_t new_host = 0;
};

// Per-host unified-restart orchestration over a fresh world: reopen files and
// listeners, reconnect sockets through the discovery service, fork into user
// processes, rearrange descriptors, restore snapshots, then let the managers
// run refill and resume. One orchestrator per target host; they interleave
// round-robin so advertise/lookup arrival order is exercised.
class SimRestarter {
 public:
  SimRestarter(sim::SimWorld& world, std::vector<RestartAssignment> assignments,
               uint64_t shuffle_seed = 0);
  ~SimRestarter();

  // called right after each process is restored, before refill runs
  std::function<void(sim::SimWorld&, Vpid)> on_process_restored;

  void run();

  uint32_t generation() const;

 private:
  struct Impl;
  Impl* impl_;
};

}  // namespace dcr

#include "dcr/restart_engine.hpp"

#include <algorithm>
#include <random>

#include "dcr/simnet.hpp"
#include "dcr/storage.hpp"

namespace dcr {

VirtualPid fork_until_no_conflict(const std::function<uint32_t()>& next_real_pid,
                                  const VirtualPid& parent, const std::set<Vpid>& live,
                                  std::optional<Vpid> preserve_vpid,
                                  const std::function<void(uint32_t)>& on_conflict,
                                  uint32_t budget) {
  for (uint32_t attempt = 0; attempt < budget; attempt++) {
    uint32_t real = next_real_pid();
    auto assigned = assign_virtual_pid(parent, real, live);
    if (!assigned) {
      // conflicting virtual pid: terminate this child and fork again
      if (on_conflict) on_conflict(real);
      continue;
    }
    if (preserve_vpid) assigned->vpid = *preserve_vpid;
    return *assigned;
  }
  fail(Errc::RetryBudgetExhausted,
       "no conflict-free pid after " + std::to_string(budget) + " forks");
}

std::string descriptor_match_key(const DescriptorRecord& rec, Vpid owner) {
  switch (rec.kind) {
    case DescriptorKind::TcpConnected:
    case DescriptorKind::UnixDomain:
    case DescriptorKind::PromotedPipe:
      return "sock:" + (rec.socket_id ? rec.socket_id->str() : "pending") + ":" +
             role_name(rec.role);
    case DescriptorKind::TcpListener: {
      const auto& l = std::get<ListenerDetail>(rec.detail);
      return "lsn:" + std::to_string(l.bound_host) + ":" + std::to_string(l.port);
    }
    case DescriptorKind::RegularFile: {
      const auto& f = std::get<FileDetail>(rec.detail);
      return "file:" + f.path + ":" + std::to_string(owner);
    }
    case DescriptorKind::ShmBacking: {
      const auto& s = std::get<ShmDetail>(rec.detail);
      return "shm:" + s.path + ":" + std::to_string(owner);
    }
  }
  return "?";
}

std::map<uint32_t, DescriptorRecord> rearrange_descriptors(
    const std::map<uint32_t, DescriptorRecord>& pool, const ConnectionInfoTable& target,
    Vpid owner, uint32_t max_fd, std::vector<std::string>* oplog) {
  auto log = [&](const std::string& s) {
    if (oplog) oplog->push_back(s);
  };

  // where each needed key currently lives
  std::map<std::string, uint32_t> loc;
  std::map<uint32_t, std::string> at;  // fd -> key it currently holds
  for (const auto& [fd, rec] : pool) {
    std::string key = descriptor_match_key(rec, owner);
    loc[key] = fd;
    at[fd] = key;
  }

  std::map<std::string, uint32_t> want;  // key -> target fd
  uint32_t high = 0;
  for (const auto& rec : target.records) {
    std::string key = descriptor_match_key(rec, owner);
    if (!loc.count(key))
      fail(Errc::MissingImage,
           "pool lacks descriptor " + key + " for vpid " + std::to_string(owner));
    want[key] = rec.fd_num;
    high = std::max(high, rec.fd_num);
  }
  for (const auto& [fd, _] : pool) high = std::max(high, fd);

  // close pool descriptors belonging to other processes
  for (auto it = at.begin(); it != at.end();) {
    if (!want.count(it->second)) {
      log("close " + std::to_string(it->first));
      loc.erase(it->second);
      it = at.erase(it);
    } else {
      ++it;
    }
  }

  uint32_t next_temp = high + 1;
  std::set<std::string> done;
  while (done.size() < want.size()) {
    bool moved = false;
    for (const auto& [key, dst] : want) {
      if (done.count(key)) continue;
      uint32_t src = loc.at(key);
      if (src == dst) {
        done.insert(key);
        moved = true;
        continue;
      }
      if (at.count(dst)) continue;  // destination still occupied
      log("dup2 " + std::to_string(src) + " " + std::to_string(dst));
      at.erase(src);
      at[dst] = key;
      loc[key] = dst;
      done.insert(key);
      moved = true;
    }
    if (!moved) {
      // pure cycle: park one descriptor in a temporary high slot
      if (next_temp > max_fd)
        fail(Errc::FdCollisionUnresolvable, "no free slot above fd " + std::to_string(max_fd));
      for (const auto& [key, dst] : want) {
        if (done.count(key)) continue;
        uint32_t src = loc.at(key);
        uint32_t tmp = next_temp++;
        log("dup2 " + std::to_string(src) + " " + std::to_string(tmp) + " # temp");
        at.erase(src);
        at[tmp] = key;
        loc[key] = tmp;
        break;
      }
    }
  }

  std::map<uint32_t, DescriptorRecord> result;
  for (const auto& rec : target.records) result[rec.fd_num] = rec;
  return result;
}

const char* shm_restore_case_name(ShmRestoreCase c) {
  switch (c) {
    case ShmRestoreCase::CreatedFromImage: return "created-from-image";
    case ShmRestoreCase::OverwroteWithImage: return "overwrote-with-image";
    case ShmRestoreCase::KeptCurrentFile: return "kept-current-file";
  }
  return "?";
}

ShmRestoreCase restore_shared_memory(sim::SimFs& fs, const SegmentState& seg) {
  auto it = fs.files.find(seg.path);
  if (it == fs.files.end()) {
    if (!fs.dir_writable(seg.path))
      fail(Errc::DirectoryNotWritable, "cannot recreate backing file " + seg.path);
    fs.files[seg.path] = sim::SimFs::File{seg.contents, true};
    return ShmRestoreCase::CreatedFromImage;
  }
  if (it->second.writable && seg.writable) {
    // concurrent restore by two sharers is safe: both write identical data
    it->second.data = seg.contents;
    return ShmRestoreCase::OverwroteWithImage;
  }
  // no write access: the current file contents win
  return ShmRestoreCase::KeptCurrentFile;
}

// --- SimRestarter ---------------------------------------------------------------

struct SimRestarter::Impl {
  sim::SimWorld& w;
  std::vector<RestartAssignment> assignments;
  uint64_t shuffle_seed;
  uint32_t generation = 0;
  std::vector<Vpid> expected;
  ElectionView global_winners;

  struct RestoredImage {
    CheckpointImage image;
    uint32_t new_host = 0;
  };
  std::vector<RestoredImage> loaded;

  struct AccSide {
    GlobalSocketId sid;
    std::vector<std::pair<Vpid, uint32_t>> holders;
    bool pipe = false;
  };
  std::map<uint32_t, AccSide> ports;  // restart listener port -> acceptor side
  uint32_t next_port = 40000;

  struct Action {
    bool advertise = false;
    GlobalSocketId sid;
  };
  struct Orchestrator {
    uint32_t host = 0;
    uint64_t token = 0;
    std::vector<RestoredImage*> images;
    enum class Phase { Files, Reconnect, Processes, Done } phase = Phase::Files;
    size_t image_ix = 0;
    std::vector<Action> worklist;
    size_t work_ix = 0;
    std::set<GlobalSocketId> outstanding_lookups;
    size_t proc_ix = 0;
    uint64_t phase_mark = 0;
  };
  std::vector<Orchestrator> orchs;

  Impl(sim::SimWorld& world, std::vector<RestartAssignment> a, uint64_t seed)
      : w(world), assignments(std::move(a)), shuffle_seed(seed) {}
};

SimRestarter::SimRestarter(sim::SimWorld& world, std::vector<RestartAssignment> assignments,
                           uint64_t shuffle_seed)
    : impl_(new Impl(world, std::move(assignments), shuffle_seed)) {}

SimRestarter::~SimRestarter() { delete impl_; }

uint32_t SimRestarter::generation() const { return impl_->generation; }

void SimRestarter::run() {
  Impl& im = *impl_;
  sim::SimWorld& w = im.w;
  using Orch = Impl::Orchestrator;

  // ---- load and validate every image
  for (const auto& a : im.assignments) {
    if (!w.dir().exists(a.image_path)) fail(Errc::MissingImage, a.image_path);
    Impl::RestoredImage ri;
    ri.image = storage::parse_image(w.dir().read_file(a.image_path));
    ri.new_host = a.new_host;
    if (a.new_host >= w.config().hosts) fail(Errc::UnknownHost, "restart target host");
    im.loaded.push_back(std::move(ri));
  }
  if (im.loaded.empty()) fail(Errc::IncompleteEpoch, "no images to restart");
  im.generation = im.loaded.front().image.header.generation;
  im.expected = im.loaded.front().image.vpid_map;
  {
    std::set<Vpid> have;
    for (const auto& ri : im.loaded) {
      if (ri.image.header.generation != im.generation)
        fail(Errc::IncompleteEpoch, "images from mixed generations");
      have.insert(ri.image.header.vpid);
      // persisted election results drive restart-time refill leadership
      for (const auto& rec : ri.image.conn_table.records)
        if (rec.socket_id && rec.owner_election)
          im.global_winners.set(*rec.socket_id, rec.role, *rec.owner_election);
    }
    for (Vpid v : im.expected)
      if (!have.count(v)) fail(Errc::IncompleteEpoch, "missing image for vpid " + std::to_string(v));
  }

  w.coordinator().restart_begin(im.expected, im.generation);
  w.trace().event(w.now(), "restart_start",
                  {{"generation", im.generation}, {"processes", im.expected.size()}});

  std::map<uint32_t, std::vector<Impl::RestoredImage*>> by_host;
  for (auto& ri : im.loaded) by_host[ri.new_host].push_back(&ri);
  for (auto& [host, imgs] : by_host) {
    Orch o;
    o.host = host;
    o.token = w.coordinator().new_client_token();
    o.images = imgs;
    o.phase_mark = w.now();
    im.orchs.push_back(std::move(o));
  }

  std::mt19937_64 rng(im.shuffle_seed ^ 0x5e5e5e5eULL);

  auto record_restart_stage = [&](Orch& o, const std::string& stage) {
    double seconds = double(w.now() - o.phase_mark);
    for (auto* ri : o.images) {
      StageTiming t;
      t.role = "restart";
      t.epoch = im.generation;
      t.vpid = ri->image.header.vpid;
      t.stage = stage;
      t.seconds = seconds;
      w.timings().add(t);
    }
    o.phase_mark = w.now();
  };

  // ---- step 1: reopen files and listeners (one image per step)
  auto step_files = [&](Orch& o) {
    if (o.image_ix >= o.images.size()) {
      record_restart_stage(o, "restore files");
      // build the reconnect worklist: dedup per socket id across this host
      std::set<GlobalSocketId> adv, look;
      for (auto* ri : o.images) {
        for (const auto& rec : ri->image.conn_table.records) {
          if (!rec.socket_id) continue;
          if (rec.kind != DescriptorKind::TcpConnected &&
              rec.kind != DescriptorKind::PromotedPipe && rec.kind != DescriptorKind::UnixDomain)
            continue;
          if (rec.role == SocketRole::Acceptor)
            adv.insert(*rec.socket_id);
          else
            look.insert(*rec.socket_id);
        }
      }
      for (const auto& sid : adv) o.worklist.push_back({true, sid});
      for (const auto& sid : look) o.worklist.push_back({false, sid});
      std::shuffle(o.worklist.begin(), o.worklist.end(), rng);
      o.phase = Orch::Phase::Reconnect;
      return;
    }
    Impl::RestoredImage& ri = *o.images[o.image_ix++];
    const CheckpointImage& img = ri.image;
    for (const auto& rec : img.conn_table.records) {
      if (rec.kind == DescriptorKind::RegularFile) {
        const auto& det = std::get<FileDetail>(rec.detail);
        if (!w.fs_.files.count(det.path))
          fail(Errc::MissingImage, "backing file gone: " + det.path);
        // offset restored with the record itself at rearrange time
      } else if (rec.kind == DescriptorKind::TcpListener) {
        const auto& det = std::get<ListenerDetail>(rec.detail);
        auto key = std::make_pair(det.bound_host, det.port);
        auto& side = w.listeners_[key];
        bool foreign = false;
        for (const auto& [hv, hf] : side.holders)
          if (!std::count(im.expected.begin(), im.expected.end(), hv)) foreign = true;
        if (foreign)
          fail(Errc::BindFailure, "port " + std::to_string(det.port) + " taken");
        side.add(img.header.vpid, rec.fd_num);
        w.trace_.event(w.now(), "rebind_listener",
                       {{"vpid", img.header.vpid}, {"port", det.port}});
      }
    }
  };

  // ---- step 2: reconnect sockets through the discovery service
  auto finalize_channel = [&](Orch& o, const GlobalSocketId& sid, uint32_t port) {
    auto pit = im.ports.find(port);
    if (pit == im.ports.end() || !(pit->second.sid == sid))
      fail(Errc::HandshakeMismatch, "socket ids disagree for " + sid.str());
    // collect connector-side holders from this host's images
    sim::SimChannel ch;
    ch.sid = sid;
    ch.capacity = w.config().channel_capacity;
    ch.pipe = pit->second.pipe;
    for (auto* ri : o.images)
      for (const auto& rec : ri->image.conn_table.records)
        if (rec.socket_id && *rec.socket_id == sid && rec.role == SocketRole::Connector)
          ch.connector.add(ri->image.header.vpid, rec.fd_num);
    for (const auto& [hv, hf] : pit->second.holders) ch.acceptor.add(hv, hf);
    w.channels_.insert_or_assign(sid, std::move(ch));
  };

  auto step_reconnect = [&](Orch& o) -> bool {
    // consume lookup replies first
    auto& inbox = w.client_inbox_[o.token];
    if (!inbox.empty()) {
      Delivery d = inbox.front();
      inbox.pop_front();
      finalize_channel(o, d.sid, d.port);
      o.outstanding_lookups.erase(d.sid);
      w.trace_.event(w.now(), "reconnect", {{"sid", d.sid.str()}, {"host", o.host}});
      return true;
    }
    if (o.work_ix < o.worklist.size()) {
      const Impl::Action& act = o.worklist[o.work_ix++];
      if (act.advertise) {
        uint32_t port = im.next_port++;
        Impl::AccSide side;
        side.sid = act.sid;
        for (auto* ri : o.images)
          for (const auto& rec : ri->image.conn_table.records)
            if (rec.socket_id && *rec.socket_id == act.sid && rec.role == SocketRole::Acceptor) {
              side.holders.emplace_back(ri->image.header.vpid, rec.fd_num);
              side.pipe = rec.kind == DescriptorKind::PromotedPipe;
            }
        im.ports[port] = std::move(side);
        w.dispatch(w.coordinator().advertise(act.sid, w.host_label(o.host), port));
      } else {
        Deliveries ds = w.coordinator().lookup(o.token, act.sid);
        if (ds.empty()) {
          o.outstanding_lookups.insert(act.sid);  // parked until the acceptor advertises
        } else {
          finalize_channel(o, ds.front().sid, ds.front().port);
          w.trace_.event(w.now(), "reconnect", {{"sid", act.sid.str()}, {"host", o.host}});
        }
      }
      return true;
    }
    if (o.outstanding_lookups.empty()) {
      record_restart_stage(o, "reconnect sockets");
      o.phase = Orch::Phase::Processes;
      return true;
    }
    return false;  // waiting on discovery
  };

  // ---- steps 3-5: fork, rearrange descriptors, restore memory and threads
  auto step_processes = [&](Orch& o) {
    if (o.proc_ix >= o.images.size()) {
      record_restart_stage(o, "restore memory/threads");
      o.phase = Orch::Phase::Done;
      return;
    }
    // the unified process's descriptor pool, shared entries pooled once
    std::map<std::string, DescriptorRecord> pool_by_key;
    for (auto* ri : o.images)
      for (const auto& rec : ri->image.conn_table.records)
        pool_by_key.emplace(descriptor_match_key(rec, ri->image.header.vpid), rec);

    Impl::RestoredImage& ri = *o.images[o.proc_ix++];
    const CheckpointImage& img = ri.image;
    Vpid vpid = img.header.vpid;

    std::set<Vpid> live(im.expected.begin(), im.expected.end());
    live.erase(vpid);
    for (Vpid v : w.live_vpids()) live.insert(v);
    VirtualPid id = fork_until_no_conflict(
        w.pid_allocator, VirtualPid{}, live, vpid,
        [&](Vpid dead) { w.trace_.event(w.now(), "fork_conflict", {{"real_pid", dead}}); });

    // pool fds are sequential; rearrange moves them to the recorded numbers
    std::map<uint32_t, DescriptorRecord> pool;
    uint32_t pool_fd = 3;
    for (const auto& [key, rec] : pool_by_key) pool[pool_fd++] = rec;
    std::map<uint32_t, DescriptorRecord> table =
        rearrange_descriptors(pool, img.conn_table, vpid);

    // restore memory and threads via the snapshot substrate
    Bytes blob = img.snapshot_blob;
    if (img.header.codec == SnapshotCodec::Gzip) {
      try {
        blob = storage::decompress_stream(blob, storage::Codec::Deflate);
      } catch (const Error&) {
        fail(Errc::CorruptSnapshot, "snapshot decompression failed");
      }
    }
    ProcessSnapshot snap = w.substrate_->restore(blob);
    if (snap.core.id.vpid != vpid) fail(Errc::CorruptSnapshot, "snapshot vpid mismatch");

    sim::SimProcess p;
    p.core = std::move(snap.core);
    p.core.id = id;
    p.core.host = o.host;
    p.fds = std::move(table);

    // attach to restored channels and listeners
    for (const auto& [fd, rec] : p.fds) {
      if (rec.socket_id) {
        auto cit = w.channels_.find(*rec.socket_id);
        if (cit != w.channels_.end()) cit->second.side(rec.role).add(vpid, fd);
      }
      if (rec.kind == DescriptorKind::TcpListener) {
        const auto& det = std::get<ListenerDetail>(rec.detail);
        w.listeners_[{det.bound_host, det.port}].add(vpid, fd);
      }
      if (rec.kind == DescriptorKind::ShmBacking) {
        const auto& det = std::get<ShmDetail>(rec.detail);
        w.segment_mappers_[det.path]++;
      }
    }

    // shared-memory three-case rule
    for (const auto& seg : snap.segments) {
      ShmRestoreCase c = restore_shared_memory(w.fs_, seg);
      w.trace_.event(w.now(), "shm_restore",
                     {{"vpid", vpid}, {"path", seg.path}, {"case", shm_restore_case_name(c)}});
    }

    // a thread parked inside connect re-enters the pending queue
    for (const auto& t : p.core.threads) {
      if (t.done) continue;
      auto wl = w.lib_->get(t.script);
      if (t.pc < wl->steps.size()) {
        const Step& s = wl->steps[t.pc];
        if (s.op == OpCode::Connect && t.progress == 1) {
          auto lit = p.core.fd_labels.find(s.lab1);
          if (lit != p.core.fd_labels.end() && !p.fds.at(lit->second).socket_id)
            w.pending_connects_[{uint32_t(s.n1), uint32_t(s.n2)}].push_back(
                {vpid, lit->second});
        }
      }
    }

    // manager enters the protocol at barrier "checkpointed"
    p.mgr.phase = sim::MgrPhase::RestartReport;
    p.mgr.epoch = im.generation;
    p.mgr.restart_path = true;
    p.mgr.winners = im.global_winners;
    p.mgr.vpid_map = img.vpid_map;
    p.mgr.drain = decode_drained(img.drained_data);
    p.mgr.led = plan_led_endpoints(p.fds, p.mgr.winners, vpid);
    p.mgr.flush_ix = p.mgr.led.size();  // nothing to flush on the restart path
    p.mgr.stage_mark = w.now();

    w.procs_.insert_or_assign(vpid, std::move(p));
    w.dispatch(w.coordinator().register_process(vpid, w.host_id(o.host), w.host_label(o.host),
                                                true));
    w.trace_.event(w.now(), "process_restored",
                   {{"vpid", vpid}, {"host", o.host}, {"real_pid", id.real_pid}});
    if (on_process_restored) on_process_restored(w, vpid);
  };

  size_t stall = 0;
  while (true) {
    bool all_done = true;
    bool progress = false;
    for (auto& o : im.orchs) {
      switch (o.phase) {
        case Orch::Phase::Files:
          step_files(o);
          progress = true;
          break;
        case Orch::Phase::Reconnect:
          if (step_reconnect(o)) progress = true;
          break;
        case Orch::Phase::Processes:
          step_processes(o);
          progress = true;
          break;
        case Orch::Phase::Done: break;
      }
      if (o.phase != Orch::Phase::Done) all_done = false;
    }
    w.clock_++;
    if (all_done) break;
    stall = progress ? 0 : stall + 1;
    if (stall > im.expected.size() * 64 + 1024)
      fail(Errc::LookupTimeout, "restart reconnection stalled; acceptor never advertised");
  }

  // refill and resume through the ordinary manager path
  if (!w.run(4000000)) fail(Errc::LookupTimeout, "restart refill did not complete");
  w.trace().event(w.now(), "restart_done", {{"generation", im.generation}});
}

}  // namespace dcr

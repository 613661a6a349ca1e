#include "dcr/simnet.hpp"

#include <algorithm>
#include <cassert>

#include "dcr/restart_engine.hpp"

namespace dcr::sim {

// --- FifoBuffer ---------------------------------------------------------------

void FifoBuffer::push(const uint8_t* p, size_t n) {
  if (head_ > 0 && head_ == data_.size()) {
    data_.clear();
    head_ = 0;
  }
  data_.insert(data_.end(), p, p + n);
}

void FifoBuffer::push_front(const Bytes& b) {
  if (b.empty()) return;
  if (head_ >= b.size()) {
    std::copy(b.begin(), b.end(), data_.begin() + std::ptrdiff_t(head_ - b.size()));
    head_ -= b.size();
  } else {
    Bytes rest(data_.begin() + std::ptrdiff_t(head_), data_.end());
    data_ = b;
    data_.insert(data_.end(), rest.begin(), rest.end());
    head_ = 0;
  }
}

size_t FifoBuffer::pop(uint8_t* out, size_t max) {
  size_t n = std::min(max, size());
  std::copy(data_.begin() + std::ptrdiff_t(head_), data_.begin() + std::ptrdiff_t(head_ + n), out);
  head_ += n;
  if (head_ == data_.size()) {
    data_.clear();
    head_ = 0;
  }
  return n;
}

// --- ChannelSide ----------------------------------------------------------------

bool ChannelSide::has(Vpid v) const {
  for (const auto& [vp, fd] : holders)
    if (vp == v) return true;
  return false;
}

void ChannelSide::add(Vpid v, uint32_t fd) {
  for (const auto& [vp, f] : holders)
    if (vp == v && f == fd) return;
  holders.emplace_back(v, fd);
}

void ChannelSide::remove(Vpid v, uint32_t fd) {
  holders.erase(std::remove(holders.begin(), holders.end(), std::make_pair(v, fd)),
                holders.end());
}

// --- SimFs ------------------------------------------------------------------------

std::string SimFs::dirname(const std::string& path) {
  auto pos = path.find_last_of('/');
  if (pos == std::string::npos) return ".";
  if (pos == 0) return "/";
  return path.substr(0, pos);
}

// --- aware client -------------------------------------------------------------------

namespace {

class SimAwareClient : public AwareClient {
 public:
  SimAwareClient(SimWorld& w, Vpid v) : w_(w), v_(v) {}

  bool is_under_ckpt() const override { return true; }

  Json status() const override {
    Json j = w_.coordinator().status_json();
    j["attached"] = true;
    return j;
  }

  uint32_t request_checkpoint() override {
    SimProcess& p = w_.process(v_);
    if (p.aware.in_hook) fail(Errc::NotAllowedInHook, "checkpoint request from inside a hook");
    uint32_t epoch = w_.request_checkpoint();  // CheckpointInProgress propagates
    // blocking call: drive the world until this process resumed
    for (uint64_t i = 0; i < 1000000; i++) {
      const SimProcess& q = w_.process(v_);
      if (w_.coordinator().mode() == CoordinatorMode::Running &&
          q.mgr.phase == MgrPhase::Idle && q.mgr.mailbox.empty() &&
          w_.coordinator().epoch() == epoch)
        return epoch;
      w_.step();
    }
    fail(Errc::ThreadUnresponsive, "epoch did not complete");
  }

  void delay_enter(uint32_t tid) override { w_.process(v_).aware.enter(tid); }
  void delay_exit(uint32_t tid) override { w_.process(v_).aware.exit(tid); }
  void register_hooks(AwareHooks hooks) override { w_.process(v_).aware.hooks = std::move(hooks); }

 private:
  SimWorld& w_;
  Vpid v_;
};

constexpr uint64_t kSendKeyConnector = 0x636f6e6e11111111ULL;
constexpr uint64_t kSendKeyAcceptor = 0x6163637022222222ULL;

uint64_t payload_key(const GlobalSocketId& sid, SocketRole sender_side) {
  return sid.mix() ^ (sender_side == SocketRole::Connector ? kSendKeyConnector : kSendKeyAcceptor);
}

}  // namespace

// --- world construction ---------------------------------------------------------------

SimWorld::SimWorld(SimConfig cfg, std::shared_ptr<WorkloadLibrary> lib,
                   std::shared_ptr<storage::StableDir> dir)
    : cfg_(std::move(cfg)),
      lib_(std::move(lib)),
      dir_(dir ? std::move(dir) : std::make_shared<storage::CrashSimDir>()),
      substrate_(make_scripted_substrate()),
      coord_(&trace_) {
  coord_.set_interval(cfg_.interval);
  pid_allocator = [this] { return next_real_pid_++; };
}

std::string SimWorld::host_label(uint32_t host) const { return "host" + std::to_string(host); }
uint64_t SimWorld::host_id(uint32_t host) const { return derive_host_id(host_label(host), host); }

SimProcess& SimWorld::process(Vpid p) {
  auto it = procs_.find(p);
  if (it == procs_.end()) fail(Errc::BadDescriptor, "no such process " + std::to_string(p));
  return it->second;
}

const SimProcess* SimWorld::find_process(Vpid p) const {
  auto it = procs_.find(p);
  return it == procs_.end() ? nullptr : &it->second;
}

std::vector<Vpid> SimWorld::live_vpids() const {
  std::vector<Vpid> out;
  for (const auto& [v, p] : procs_)
    if (!p.exited) out.push_back(v);
  return out;
}

SimChannel* SimWorld::find_channel(const GlobalSocketId& sid) {
  auto it = channels_.find(sid);
  return it == channels_.end() ? nullptr : &it->second;
}

AwareClient& SimWorld::aware(Vpid p) {
  auto it = aware_clients_.find(p);
  if (it == aware_clients_.end())
    it = aware_clients_.emplace(p, std::make_unique<SimAwareClient>(*this, p)).first;
  return *it->second;
}

// --- process creation -------------------------------------------------------------------

Vpid SimWorld::create_process(uint32_t host, const std::string& script,
                              std::optional<Vpid> parent) {
  if (host >= cfg_.hosts) fail(Errc::UnknownHost, "host " + std::to_string(host));
  lib_->get(script);  // validate early

  std::set<Vpid> live;
  for (Vpid v : live_vpids()) live.insert(v);
  VirtualPid id = fork_until_no_conflict(
      pid_allocator, parent ? VirtualPid{*parent, *parent} : VirtualPid{}, live, std::nullopt,
      [this](Vpid dead) { trace_.event(clock_, "fork_conflict", {{"real_pid", dead}}); });

  SimProcess p;
  p.core.id = id;
  p.core.host = host;
  ThreadCore t;
  t.tid = 0;
  t.script = script;
  p.core.threads.push_back(t);
  procs_.emplace(id.vpid, std::move(p));
  if (parent) procs_.at(*parent).core.children.push_back(id.vpid);
  dispatch(coord_.register_process(id.vpid, host_id(host), host_label(host), false));
  trace_.event(clock_, "spawn",
               {{"vpid", id.vpid}, {"host", host}, {"script", script},
                {"parent", parent ? Json(*parent) : Json(nullptr)}});
  return id.vpid;
}

Vpid SimWorld::spawn_process(uint32_t host, const std::string& script) {
  return create_process(host, script, std::nullopt);
}

Vpid SimWorld::exec_remote(Vpid src, uint32_t host, const std::string& script) {
  SimProcess& parent = process(src);
  if (parent.exited) fail(Errc::DeadParent, "spawner exited");
  return create_process(host, script, src);
}

Vpid SimWorld::fork_process(Vpid parent_vpid, const std::string& script) {
  SimProcess& parent = process(parent_vpid);
  if (parent.exited) fail(Errc::DeadParent, "fork from exited process");
  Vpid child = create_process(parent.core.host, script, parent_vpid);
  SimProcess& cp = procs_.at(child);
  SimProcess& pp = procs_.at(parent_vpid);

  // all open descriptors become shared with the child
  cp.fds = pp.fds;
  cp.core.heap = pp.core.heap;
  cp.core.fd_labels = pp.core.fd_labels;
  cp.core.seg_labels = pp.core.seg_labels;
  cp.core.send_offsets = pp.core.send_offsets;
  cp.core.sock_seq = pp.core.sock_seq;
  cp.core.ts_counter = pp.core.ts_counter;
  cp.core.next_fd = pp.core.next_fd;
  for (const auto& [fd, rec] : cp.fds) {
    if (rec.socket_id) {
      auto it = channels_.find(*rec.socket_id);
      if (it != channels_.end()) it->second.side(rec.role).add(child, fd);
    }
    if (rec.kind == DescriptorKind::TcpListener) {
      const auto* l = std::get_if<ListenerDetail>(&rec.detail);
      if (l) listeners_[{l->bound_host, l->port}].add(child, fd);
    }
    if (rec.kind == DescriptorKind::ShmBacking) {
      const auto* s = std::get_if<ShmDetail>(&rec.detail);
      if (s) segment_mappers_[s->path]++;
    }
  }
  return child;
}

// --- descriptor helpers -------------------------------------------------------------------

uint32_t SimWorld::alloc_fd(SimProcess& p) {
  while (p.fds.count(p.core.next_fd)) p.core.next_fd++;
  return p.core.next_fd++;
}

DescriptorRecord& SimWorld::fd_record(SimProcess& p, uint32_t fd) {
  auto it = p.fds.find(fd);
  if (it == p.fds.end())
    fail(Errc::BadDescriptor,
         "vpid " + std::to_string(p.core.id.vpid) + " fd " + std::to_string(fd));
  return it->second;
}

// --- interception surface --------------------------------------------------------------------

uint32_t SimWorld::listen_on(Vpid pv, uint32_t port) {
  SimProcess& p = process(pv);
  auto key = std::make_pair(p.core.host, port);
  auto it = listeners_.find(key);
  if (it != listeners_.end() && it->second.open())
    fail(Errc::BindFailure,
         "port " + std::to_string(port) + " already bound on " + host_label(p.core.host));
  uint32_t fd = alloc_fd(p);
  DescriptorRecord rec;
  rec.fd_num = fd;
  rec.kind = DescriptorKind::TcpListener;
  rec.detail = ListenerDetail{port, p.core.host};
  p.fds[fd] = rec;
  listeners_[key].add(pv, fd);
  trace_.event(clock_, "listen", {{"vpid", pv}, {"port", port}, {"host", p.core.host}});
  return fd;
}

uint32_t SimWorld::connect_to(Vpid pv, Vpid dst_vpid, uint32_t dst_fd) {
  SimProcess& dst = process(dst_vpid);
  const DescriptorRecord& lrec = fd_record(dst, dst_fd);
  if (lrec.kind != DescriptorKind::TcpListener)
    fail(Errc::NotListening, "fd " + std::to_string(dst_fd) + " is " + kind_name(lrec.kind));
  const auto& det = std::get<ListenerDetail>(lrec.detail);
  SimProcess& p = process(pv);
  uint32_t fd = alloc_fd(p);
  DescriptorRecord rec;
  rec.fd_num = fd;
  rec.kind = DescriptorKind::TcpConnected;
  rec.role = SocketRole::Connector;
  p.fds[fd] = rec;
  pending_connects_[{det.bound_host, det.port}].push_back({pv, fd});
  // rendezvous: completed by the acceptor
  auto acc = try_accept(dst_vpid, dst_fd);
  if (!acc) fail(Errc::NotListening, "accept failed after connect");
  return fd;
}

std::optional<uint32_t> SimWorld::try_accept(Vpid pv, uint32_t listener_fd) {
  SimProcess& p = process(pv);
  DescriptorRecord& lrec = fd_record(p, listener_fd);
  if (lrec.kind != DescriptorKind::TcpListener)
    fail(Errc::NotListening, "accept on " + std::string(kind_name(lrec.kind)));
  const auto& det = std::get<ListenerDetail>(lrec.detail);
  auto key = std::make_pair(det.bound_host, det.port);
  auto qit = pending_connects_.find(key);
  if (qit == pending_connects_.end() || qit->second.empty()) return std::nullopt;
  auto [src_vpid, src_fd] = qit->second.front();
  qit->second.pop_front();

  SimProcess& src = process(src_vpid);
  GlobalSocketId sid = make_socket_id(host_id(p.core.host), p.core.id, p.core.ts_counter++,
                                      p.core.sock_seq);
  uint32_t afd = alloc_fd(p);
  DescriptorRecord arec;
  arec.fd_num = afd;
  arec.kind = DescriptorKind::TcpConnected;
  arec.role = SocketRole::Acceptor;
  arec.socket_id = sid;
  p.fds[afd] = arec;
  // handshake copies the acceptor-side id to the connector's record
  DescriptorRecord& crec = fd_record(src, src_fd);
  crec.socket_id = sid;

  SimChannel ch;
  ch.sid = sid;
  ch.capacity = cfg_.channel_capacity;
  ch.connector.add(src_vpid, src_fd);
  ch.acceptor.add(pv, afd);
  channels_.emplace(sid, std::move(ch));
  trace_.event(clock_, "connect",
               {{"sid", sid.str()}, {"connector", src_vpid}, {"acceptor", pv}});
  return afd;
}

size_t SimWorld::try_send(Vpid pv, uint32_t fd, const uint8_t* data, size_t n) {
  SimProcess& p = process(pv);
  DescriptorRecord& rec = fd_record(p, fd);
  if (rec.kind != DescriptorKind::TcpConnected && rec.kind != DescriptorKind::PromotedPipe)
    fail(Errc::BadDescriptor, "send on " + std::string(kind_name(rec.kind)));
  if (!rec.socket_id) return 0;  // connect not yet completed
  if (rec.kind == DescriptorKind::PromotedPipe && rec.role != SocketRole::Connector)
    fail(Errc::BadDescriptor, "send on pipe read end");
  SimChannel& c = channels_.at(*rec.socket_id);
  SocketRole receiver = other_side(rec.role);
  FifoBuffer& q = c.dir_to(receiver);
  size_t free = size_t(c.capacity) - std::min<size_t>(q.size(), size_t(c.capacity));
  size_t take = std::min(free, n);
  if (take == 0) return 0;
  q.push(data, take);
  c.sent_ctr(receiver) += take;
  return take;
}

size_t SimWorld::try_recv(Vpid pv, uint32_t fd, uint8_t* out, size_t max) {
  SimProcess& p = process(pv);
  DescriptorRecord& rec = fd_record(p, fd);
  if (rec.kind != DescriptorKind::TcpConnected && rec.kind != DescriptorKind::PromotedPipe)
    fail(Errc::BadDescriptor, "recv on " + std::string(kind_name(rec.kind)));
  if (!rec.socket_id) return 0;
  if (rec.kind == DescriptorKind::PromotedPipe && rec.role != SocketRole::Acceptor)
    fail(Errc::BadDescriptor, "recv on pipe write end");
  SimChannel& c = channels_.at(*rec.socket_id);
  FifoBuffer& q = c.dir_to(rec.role);
  size_t got = q.pop(out, max);
  c.rcvd_ctr(rec.role) += got;
  return got;
}

std::pair<uint32_t, uint32_t> SimWorld::promote_pipe(Vpid pv) {
  SimProcess& p = process(pv);
  GlobalSocketId sid = make_socket_id(host_id(p.core.host), p.core.id, p.core.ts_counter++,
                                      p.core.sock_seq);
  uint32_t rfd = alloc_fd(p);
  uint32_t wfd = alloc_fd(p);
  DescriptorRecord rrec;
  rrec.fd_num = rfd;
  rrec.kind = DescriptorKind::PromotedPipe;
  rrec.role = SocketRole::Acceptor;  // read end
  rrec.socket_id = sid;
  DescriptorRecord wrec;
  wrec.fd_num = wfd;
  wrec.kind = DescriptorKind::PromotedPipe;
  wrec.role = SocketRole::Connector;  // write end
  wrec.socket_id = sid;
  p.fds[rfd] = rrec;
  p.fds[wfd] = wrec;
  SimChannel ch;
  ch.sid = sid;
  ch.pipe = true;
  ch.capacity = cfg_.channel_capacity;
  ch.connector.add(pv, wfd);
  ch.acceptor.add(pv, rfd);
  channels_.emplace(sid, std::move(ch));
  trace_.event(clock_, "pipe", {{"sid", sid.str()}, {"vpid", pv}});
  return {rfd, wfd};
}

void SimWorld::map_shared_segment(Vpid pv, const std::string& label, const std::string& path,
                                  uint64_t len, bool writable) {
  SimProcess& p = process(pv);
  auto fit = fs_.files.find(path);
  if (fit == fs_.files.end()) {
    if (!fs_.dir_writable(path))
      fail(Errc::DirectoryNotWritable, "cannot create backing file " + path);
    fs_.files[path] = SimFs::File{Bytes(len, 0), true};
  } else if (fit->second.data.size() < len) {
    fit->second.data.resize(len, 0);
  }
  uint32_t fd = alloc_fd(p);
  DescriptorRecord rec;
  rec.fd_num = fd;
  rec.kind = DescriptorKind::ShmBacking;
  rec.detail = ShmDetail{path, writable, len};
  p.fds[fd] = rec;
  p.core.seg_labels[label] = path;
  segment_mappers_[path]++;
  trace_.event(clock_, "mapshm",
               {{"vpid", pv}, {"path", path}, {"len", len}, {"rw", writable}});
}

void SimWorld::close_fd(Vpid pv, uint32_t fd) {
  SimProcess& p = process(pv);
  DescriptorRecord rec = fd_record(p, fd);
  if (rec.socket_id) {
    auto it = channels_.find(*rec.socket_id);
    if (it != channels_.end()) {
      it->second.side(rec.role).remove(pv, fd);
      if (!it->second.connector.open() && !it->second.acceptor.open()) channels_.erase(it);
    }
  }
  if (rec.kind == DescriptorKind::TcpListener) {
    const auto& det = std::get<ListenerDetail>(rec.detail);
    auto key = std::make_pair(det.bound_host, det.port);
    auto it = listeners_.find(key);
    if (it != listeners_.end()) {
      it->second.remove(pv, fd);
      if (!it->second.open()) listeners_.erase(it);
    }
  }
  if (rec.kind == DescriptorKind::ShmBacking) {
    const auto& det = std::get<ShmDetail>(rec.detail);
    if (--segment_mappers_[det.path] <= 0) segment_mappers_.erase(det.path);
    for (auto it = p.core.seg_labels.begin(); it != p.core.seg_labels.end();)
      it = it->second == det.path ? p.core.seg_labels.erase(it) : std::next(it);
  }
  p.fds.erase(fd);
}

void SimWorld::exit_process(Vpid pv) {
  SimProcess& p = process(pv);
  if (p.exited) return;
  std::vector<uint32_t> fds;
  for (const auto& [fd, _] : p.fds) fds.push_back(fd);
  for (uint32_t fd : fds) close_fd(pv, fd);
  p.exited = true;
  for (auto& t : p.core.threads) t.done = true;
  trace_.event(clock_, "exit", {{"vpid", pv}});
  dispatch(coord_.deregister(pv));
}

// --- scheduler --------------------------------------------------------------------------------

uint32_t SimWorld::request_checkpoint() {
  uint32_t epoch = 0;
  Deliveries d = coord_.request_checkpoint(&epoch);
  dispatch(d);
  return epoch;
}

void SimWorld::dispatch(const Deliveries& ds) {
  for (const Delivery& d : ds) {
    if (d.to >= (1ULL << 32)) {
      client_inbox_[d.to].push_back(d);
      continue;
    }
    auto it = procs_.find(Vpid(d.to));
    if (it == procs_.end()) continue;
    ManagerState& m = it->second.mgr;
    switch (d.kind) {
      case Delivery::Kind::CkptRequestRelease: {
        MgrMsg msg;
        msg.kind = MgrMsg::Kind::Request;
        msg.epoch = d.epoch;
        msg.quorum = coord_.live_vpids();
        m.mailbox.push_back(std::move(msg));
        break;
      }
      case Delivery::Kind::BarrierRelease: {
        MgrMsg msg;
        msg.kind = MgrMsg::Kind::Release;
        msg.epoch = d.epoch;
        msg.barrier = d.barrier;
        msg.winners = d.winners;
        m.mailbox.push_back(std::move(msg));
        if (d.barrier == barrier_label(BarrierName::Refilled)) {
          last_completed_epoch_ = d.epoch;
          script_pending_.insert(d.epoch);
        }
        break;
      }
      case Delivery::Kind::Abort: {
        MgrMsg msg;
        msg.kind = MgrMsg::Kind::Abort;
        m.mailbox.push_back(std::move(msg));
        break;
      }
      case Delivery::Kind::RegisterAck:
      case Delivery::Kind::LookupReply: break;  // in-process callers see returns directly
    }
  }
}

void SimWorld::fire_pending_request() {
  if (!pending_request_) return;
  if (coord_.mode() != CoordinatorMode::Running) {
    // an epoch is already active; waiting threads join it
    pending_request_ = false;
    return;
  }
  pending_request_ = false;
  try {
    request_checkpoint();
  } catch (const Error&) {
    // lost the race; the active epoch serves the request
  }
}

void SimWorld::step() {
  clock_++;
  dispatch(coord_.tick(clock_));
  fire_pending_request();

  std::vector<Vpid> order;
  for (const auto& [v, p] : procs_)
    if (!p.exited) order.push_back(v);

  for (Vpid v : order) {
    auto it = procs_.find(v);
    if (it == procs_.end() || it->second.exited) continue;
    SimProcess& p = it->second;
    bool mgr_busy = p.mgr.phase != MgrPhase::Idle || !p.mgr.mailbox.empty();
    if (mgr_busy) {
      step_manager(p);
      // critical-section threads run on until they leave the delay region
      if (p.mgr.phase == MgrPhase::Suspending && p.aware.delay_depth > 0) {
        for (auto& t : p.core.threads) {
          auto d = p.aware.thread_depth.find(t.tid);
          if (!t.done && d != p.aware.thread_depth.end() && d->second > 0) step_thread(p, t);
        }
      }
    } else if (coord_.mode() == CoordinatorMode::Running) {
      // round-robin over this process's threads, one quantum
      auto& threads = p.core.threads;
      for (size_t k = 0; k < threads.size(); k++) {
        ThreadCore& t = threads[p.thread_cursor++ % threads.size()];
        if (t.done) continue;
        step_thread(p, t);
        break;
      }
    }
  }

  // forked checkpoint children finishing their writes
  for (auto it = deferred_.begin(); it != deferred_.end();) {
    if (it->due <= clock_) {
      dir_->write_file(it->path, it->bytes);
      storage::apply_sync_policy(*dir_, cfg_.ckpt_dir, cfg_.sync_policy, it->epoch);
      trace_.event(clock_, "forked_write_done", {{"epoch", it->epoch}});
      it = deferred_.erase(it);
    } else {
      ++it;
    }
  }
  maybe_generate_script();
}

bool SimWorld::idle() const {
  if (coord_.mode() != CoordinatorMode::Running) return false;
  if (!deferred_.empty() || pending_request_ || !app_requests_.empty()) return false;
  if (!script_pending_.empty()) return false;
  for (const auto& [v, p] : procs_) {
    if (p.exited) continue;
    if (p.mgr.phase != MgrPhase::Idle || !p.mgr.mailbox.empty()) return false;
    for (const auto& t : p.core.threads)
      if (!t.done) return false;
  }
  return true;
}

bool SimWorld::run(uint64_t max_rounds) {
  for (uint64_t i = 0; i < max_rounds; i++) {
    if (idle()) return true;
    step();
  }
  return idle();
}

// --- thread engine ------------------------------------------------------------------------------

void SimWorld::step_thread(SimProcess& p, ThreadCore& t) {
  const auto wl = lib_->get(t.script);
  if (t.pc >= wl->steps.size()) {
    t.done = true;  // end of script: park, stay live
    return;
  }
  const Step& s = wl->steps[t.pc];
  if (exec_step(p, t, s)) {
    t.pc++;
    t.progress = 0;
  }
}

bool SimWorld::exec_step(SimProcess& p, ThreadCore& t, const Step& s) {
  Vpid self = p.core.id.vpid;
  auto fd_of = [&](const std::string& label) -> uint32_t {
    auto it = p.core.fd_labels.find(label);
    if (it == p.core.fd_labels.end())
      fail(Errc::BadWorkloadScript, "unknown fd label '" + label + "' in " + t.script);
    return it->second;
  };

  switch (s.op) {
    case OpCode::Listen: {
      p.core.fd_labels[s.lab1] = listen_on(self, uint32_t(s.n1));
      return true;
    }
    case OpCode::Connect: {
      if (s.n1 >= cfg_.hosts) fail(Errc::UnknownHost, "connect to host " + std::to_string(s.n1));
      if (t.progress == 0) {
        uint32_t fd = alloc_fd(p);
        DescriptorRecord rec;
        rec.fd_num = fd;
        rec.kind = DescriptorKind::TcpConnected;
        rec.role = SocketRole::Connector;
        p.fds[fd] = rec;
        p.core.fd_labels[s.lab1] = fd;
        pending_connects_[{uint32_t(s.n1), uint32_t(s.n2)}].push_back({self, fd});
        t.progress = 1;
        return false;
      }
      return fd_record(p, fd_of(s.lab1)).socket_id.has_value();
    }
    case OpCode::Accept: {
      auto fd = try_accept(self, fd_of(s.lab2));
      if (!fd) return false;
      p.core.fd_labels[s.lab1] = *fd;
      return true;
    }
    case OpCode::Send: {
      uint32_t fd = fd_of(s.lab1);
      DescriptorRecord& rec = fd_record(p, fd);
      if (!rec.socket_id) return false;
      uint64_t remaining = s.n1 - t.progress;
      if (remaining == 0) return true;
      size_t chunk = size_t(std::min<uint64_t>(remaining, 65536));
      uint64_t key = payload_key(*rec.socket_id, rec.role);
      uint64_t& off = p.core.send_offsets[*rec.socket_id];
      Bytes buf(chunk);
      for (size_t i = 0; i < chunk; i++) buf[i] = payload_byte(key, off + i);
      size_t took = try_send(self, fd, buf.data(), chunk);
      off += took;
      t.progress += took;
      return t.progress == s.n1;
    }
    case OpCode::Recv: {
      uint32_t fd = fd_of(s.lab1);
      DescriptorRecord& rec = fd_record(p, fd);
      if (!rec.socket_id) return false;
      uint64_t remaining = s.n1 - t.progress;
      if (remaining == 0) return true;
      Bytes buf(size_t(std::min<uint64_t>(remaining, 65536)));
      size_t got = try_recv(self, fd, buf.data(), buf.size());
      if (got == 0) return false;
      Bytes& stream = p.core.recv_streams[*rec.socket_id];
      mix_into_heap(p.core.heap, rec.socket_id->mix(), stream.size(), buf.data(), got);
      stream.insert(stream.end(), buf.begin(), buf.begin() + std::ptrdiff_t(got));
      t.progress += got;
      return t.progress == s.n1;
    }
    case OpCode::Close: {
      close_fd(self, fd_of(s.lab1));
      p.core.fd_labels.erase(s.lab1);
      return true;
    }
    case OpCode::Pipe: {
      auto [rfd, wfd] = promote_pipe(self);
      p.core.fd_labels[s.lab1] = rfd;
      p.core.fd_labels[s.lab2] = wfd;
      return true;
    }
    case OpCode::Fork: {
      fork_process(self, s.path);
      return true;
    }
    case OpCode::Spawn: {
      exec_remote(self, uint32_t(s.n1), s.path);
      return true;
    }
    case OpCode::Open: {
      auto fit = fs_.files.find(s.path);
      if (fit == fs_.files.end()) {
        if (!fs_.dir_writable(s.path)) fail(Errc::DirectoryNotWritable, s.path);
        fs_.files[s.path] = SimFs::File{{}, true};
      }
      uint32_t fd = alloc_fd(p);
      DescriptorRecord rec;
      rec.fd_num = fd;
      rec.kind = DescriptorKind::RegularFile;
      rec.detail = FileDetail{s.path, 0};
      p.fds[fd] = rec;
      p.core.fd_labels[s.lab1] = fd;
      return true;
    }
    case OpCode::Fwrite: {
      DescriptorRecord& rec = fd_record(p, fd_of(s.lab1));
      auto& det = std::get<FileDetail>(rec.detail);
      auto& file = fs_.files.at(det.path);
      if (!file.writable) fail(Errc::ReadOnlySegment, det.path);
      uint64_t remaining = s.n1 - t.progress;
      size_t chunk = size_t(std::min<uint64_t>(remaining, 65536));
      if (file.data.size() < det.offset + chunk) file.data.resize(det.offset + chunk);
      for (size_t i = 0; i < chunk; i++)
        file.data[det.offset + i] = payload_byte(path_key(det.path), det.offset + i);
      det.offset += chunk;
      t.progress += chunk;
      return t.progress == s.n1;
    }
    case OpCode::Fread: {
      DescriptorRecord& rec = fd_record(p, fd_of(s.lab1));
      auto& det = std::get<FileDetail>(rec.detail);
      const auto& file = fs_.files.at(det.path);
      uint64_t remaining = s.n1 - t.progress;
      size_t chunk = size_t(std::min<uint64_t>(remaining, 65536));
      if (det.offset + chunk > file.data.size())
        fail(Errc::BadWorkloadScript, "fread past EOF of " + det.path);
      mix_into_heap(p.core.heap, path_key(det.path), det.offset, file.data.data() + det.offset,
                    chunk);
      det.offset += chunk;
      t.progress += chunk;
      return t.progress == s.n1;
    }
    case OpCode::Fseek: {
      DescriptorRecord& rec = fd_record(p, fd_of(s.lab1));
      std::get<FileDetail>(rec.detail).offset = s.n1;
      return true;
    }
    case OpCode::MapShm: {
      map_shared_segment(self, s.lab1, s.path, s.n2, s.writable);
      return true;
    }
    case OpCode::ShmWrite: {
      auto pit = p.core.seg_labels.find(s.lab1);
      if (pit == p.core.seg_labels.end())
        fail(Errc::BadWorkloadScript, "unknown segment label " + s.lab1);
      const std::string& path = pit->second;
      bool writable = false;
      for (const auto& [fd, rec] : p.fds)
        if (const auto* d = std::get_if<ShmDetail>(&rec.detail))
          if (d->path == path) writable = d->writable;
      if (!writable) fail(Errc::ReadOnlySegment, path);
      auto& file = fs_.files.at(path);
      if (file.data.size() < s.n1 + s.n2) file.data.resize(s.n1 + s.n2);
      for (uint64_t i = 0; i < s.n2; i++)
        file.data[s.n1 + i] = payload_byte(path_key(path) ^ (uint64_t(self) << 20), s.n1 + i);
      return true;
    }
    case OpCode::ShmRead: {
      auto pit = p.core.seg_labels.find(s.lab1);
      if (pit == p.core.seg_labels.end())
        fail(Errc::BadWorkloadScript, "unknown segment label " + s.lab1);
      const auto& file = fs_.files.at(pit->second);
      if (s.n1 + s.n2 > file.data.size())
        fail(Errc::BadWorkloadScript, "shmread past segment end");
      mix_into_heap(p.core.heap, path_key(pit->second), s.n1, file.data.data() + s.n1,
                    size_t(s.n2));
      return true;
    }
    case OpCode::Compute: {
      if (t.progress >= s.n1) return true;
      t.progress++;
      if (p.core.heap.size() < 16) p.core.heap.resize(16, 0);
      uint64_t h = 0;
      for (int i = 0; i < 8; i++) h |= uint64_t(p.core.heap[i]) << (8 * i);
      h = h * 6364136223846793005ULL + t.progress + p.core.id.vpid;
      for (int i = 0; i < 8; i++) p.core.heap[i] = uint8_t(h >> (8 * i));
      return t.progress == s.n1;
    }
    case OpCode::Poke: {
      if (p.core.heap.size() < s.n1 + s.n2) p.core.heap.resize(s.n1 + s.n2);
      for (uint64_t i = 0; i < s.n2; i++)
        p.core.heap[s.n1 + i] = payload_byte(uint64_t(self) ^ 0x706F6B65ULL, s.n1 + i);
      return true;
    }
    case OpCode::DelayBegin: {
      p.aware.enter(t.tid);
      return true;
    }
    case OpCode::DelayEnd: {
      p.aware.exit(t.tid);
      return true;
    }
    case OpCode::RequestCkpt: {
      if (t.progress == 0) {
        app_requests_.emplace_back(self, t.tid);
        if (coord_.mode() == CoordinatorMode::Running) pending_request_ = true;
        t.progress = 1;
        return false;
      }
      return t.progress == 2;  // completed by do_resume
    }
    case OpCode::Thread: {
      ThreadCore nt;
      nt.tid = uint32_t(p.core.threads.size());
      nt.script = s.path;
      p.core.threads.push_back(nt);
      return true;
    }
    case OpCode::Exit: {
      exit_process(self);
      return true;
    }
  }
  return true;
}

// --- checkpoint manager -----------------------------------------------------------------------

void SimWorld::record_stage(SimProcess& p, const std::string& stage) {
  StageTiming t;
  t.role = p.mgr.restart_path && stage == "refill" ? "restart" : "checkpoint";
  t.epoch = p.mgr.epoch;
  t.vpid = p.core.id.vpid;
  t.stage = stage;
  t.seconds = double(clock_ - p.mgr.stage_mark);
  timings_.add(t);
  p.mgr.stage_mark = clock_;
}

void SimWorld::run_hook(SimProcess& p, const std::function<void()>& hook) {
  if (!hook) return;
  p.aware.in_hook = true;
  hook();
  p.aware.in_hook = false;
}

void SimWorld::step_manager(SimProcess& p) {
  ManagerState& m = p.mgr;
  while (!m.mailbox.empty()) {
    MgrMsg msg = std::move(m.mailbox.front());
    m.mailbox.pop_front();
    if (msg.kind == MgrMsg::Kind::Abort) {
      manager_abort(p);
    } else if (msg.kind == MgrMsg::Kind::Request) {
      if (m.phase == MgrPhase::Idle) begin_suspension(p, msg);
    } else {
      manager_consume_release(p, msg);
    }
  }
  switch (m.phase) {
    case MgrPhase::Suspending:
      if (p.aware.delay_depth == 0) finish_suspension(p);
      break;
    case MgrPhase::Electing: do_elect(p); break;
    case MgrPhase::Draining:
      if (drain_step(p)) {
        freeze_conn_table(p);
        dispatch(coord_.barrier_report(p.core.id.vpid, BarrierName::Drained));
        m.phase = MgrPhase::AwaitDrained;
      }
      break;
    case MgrPhase::Writing:
      if (m.write_ticks > 0) m.write_ticks--;
      if (m.write_ticks == 0) finish_write(p);
      break;
    case MgrPhase::Refilling:
      if (refill_step(p)) {
        dispatch(coord_.barrier_report(p.core.id.vpid, BarrierName::Refilled));
        m.phase = MgrPhase::AwaitRefilled;
      }
      break;
    case MgrPhase::Resuming: do_resume(p); break;
    case MgrPhase::RestartReport:
      m.stage_mark = clock_;
      dispatch(coord_.barrier_report(p.core.id.vpid, BarrierName::Checkpointed));
      m.phase = MgrPhase::AwaitCheckpointed;
      break;
    default: break;
  }
}

void SimWorld::begin_suspension(SimProcess& p, const MgrMsg& req) {
  ManagerState& m = p.mgr;
  m.epoch = req.epoch;
  m.vpid_map = req.quorum;
  m.restart_path = false;
  m.stage_mark = clock_;
  m.phase = MgrPhase::Suspending;
  trace_.event(clock_, "suspend_begin", {{"vpid", p.core.id.vpid}, {"epoch", m.epoch}});
}

void SimWorld::finish_suspension(SimProcess& p) {
  // every user thread is parked at a safe point and no delay region is open
  run_hook(p, p.aware.hooks.pre_ckpt);
  trace_.event(clock_, "suspended", {{"vpid", p.core.id.vpid}});
  dispatch(coord_.barrier_report(p.core.id.vpid, BarrierName::Suspended));
  p.mgr.phase = MgrPhase::AwaitSuspended;
}

void SimWorld::do_elect(SimProcess& p) {
  for (const auto& [sid, side] : election_writes(p.fds))
    coord_.elect_set(sid, side, p.core.id.vpid);
  dispatch(coord_.barrier_report(p.core.id.vpid, BarrierName::ElectionCompleted));
  p.mgr.phase = MgrPhase::AwaitElection;
}

void SimWorld::manager_consume_release(SimProcess& p, const MgrMsg& msg) {
  ManagerState& m = p.mgr;
  const std::string& b = msg.barrier;
  if (b == barrier_label(BarrierName::Suspended)) {
    record_stage(p, "suspend");
    m.phase = MgrPhase::Electing;
  } else if (b == barrier_label(BarrierName::ElectionCompleted)) {
    record_stage(p, "elect");
    m.winners.clear();
    for (const auto& [sid, side, w] : msg.winners) m.winners.set(sid, side, w);
    for (auto& [fd, rec] : p.fds)
      if (rec.socket_id) rec.owner_election = m.winners.winner(*rec.socket_id, rec.role);
    m.led = plan_led_endpoints(p.fds, m.winners, p.core.id.vpid);
    m.flush_ix = 0;
    m.drain.clear();
    m.phase = MgrPhase::Draining;
  } else if (b == barrier_label(BarrierName::Drained)) {
    record_stage(p, "drain");
    begin_write(p);
    m.phase = MgrPhase::Writing;
  } else if (b == barrier_label(BarrierName::Checkpointed)) {
    if (!m.restart_path) record_stage(p, "write");
    begin_refill(p);
    m.phase = MgrPhase::Refilling;
  } else if (b == barrier_label(BarrierName::Refilled)) {
    record_stage(p, "refill");
    m.phase = MgrPhase::Resuming;
  }
}

bool SimWorld::drain_step(SimProcess& p) {
  ManagerState& m = p.mgr;
  // flush: one token per quantum
  while (m.flush_ix < m.led.size() && !m.led[m.flush_ix].flushes) m.flush_ix++;
  if (m.flush_ix < m.led.size()) {
    const LedEndpoint& ep = m.led[m.flush_ix++];
    SimChannel& c = channels_.at(ep.sid);
    SocketRole receiver = other_side(ep.side);
    c.token_to(receiver) = c.dir_to(receiver).size();
    trace_.event(clock_, "flush_token", {{"sid", ep.sid.str()}, {"vpid", p.core.id.vpid}});
    return false;
  }
  // drain: capture every direction whose token has arrived
  bool all = true;
  for (const LedEndpoint& ep : m.led) {
    if (!ep.drains) continue;
    DrainKey key{ep.sid, ep.side};
    if (m.drain.count(key)) continue;
    SimChannel& c = channels_.at(ep.sid);
    bool peer_open = c.side(other_side(ep.side)).open();
    auto& tok = c.token_to(ep.side);
    if (!peer_open) {
      Bytes b = c.dir_to(ep.side).snapshot();
      c.dir_to(ep.side).clear();
      c.rcvd_ctr(ep.side) += b.size();
      trace_.event(clock_, "drain",
                   {{"sid", ep.sid.str()}, {"vpid", p.core.id.vpid}, {"bytes", b.size()},
                    {"eof", true}});
      m.drain[key] = std::move(b);
      continue;
    }
    if (!tok) {
      all = false;  // peer leader has not flushed yet
      continue;
    }
    Bytes b(static_cast<size_t>(*tok));
    size_t got = c.dir_to(ep.side).pop(b.data(), b.size());
    assert(got == b.size());
    (void)got;
    c.rcvd_ctr(ep.side) += b.size();
    tok.reset();
    trace_.event(clock_, "drain",
                 {{"sid", ep.sid.str()}, {"vpid", p.core.id.vpid}, {"bytes", b.size()}});
    m.drain[key] = std::move(b);
  }
  return all;
}

void SimWorld::freeze_conn_table(SimProcess& p) {
  ManagerState& m = p.mgr;
  ConnectionInfoTable t;
  t.owner = p.core.id.vpid;
  for (const auto& [fd, rec] : p.fds) {
    t.records.push_back(rec);
    if (rec.socket_id && rec.kind != DescriptorKind::TcpListener) {
      auto w = m.winners.winner(*rec.socket_id, other_side(rec.role));
      if (w) {
        // handshake: exchange ids with the peer leader
        const auto& reg = coord_.registry();
        auto rit = reg.find(*w);
        uint64_t peer_host = rit != reg.end() ? rit->second.host_id : 0;
        t.peers[*rec.socket_id] = PeerInfo{*w, peer_host};
      }
    }
  }
  m.frozen_table = std::move(t);
  trace_.event(clock_, "conn_table_persisted",
               {{"vpid", p.core.id.vpid}, {"records", m.frozen_table.records.size()}});
}

uint64_t SimWorld::write_cost_ticks(size_t bytes) const {
  return 1 + uint64_t(bytes) / 65536;
}

void SimWorld::begin_write(SimProcess& p) {
  ManagerState& m = p.mgr;
  ProcessSnapshot snap;
  snap.core = p.core;
  std::set<std::string> seen;
  for (const auto& [label, path] : p.core.seg_labels) {
    if (!seen.insert(path).second) continue;
    bool writable = false;
    for (const auto& [fd, rec] : p.fds)
      if (const auto* d = std::get_if<ShmDetail>(&rec.detail))
        if (d->path == path) writable = d->writable;
    SegmentState seg;
    seg.path = path;
    seg.writable = writable;
    auto fit = fs_.files.find(path);
    if (fit != fs_.files.end()) seg.contents = fit->second.data;
    snap.segments.push_back(std::move(seg));
  }
  Bytes blob = substrate_->capture(snap);
  SnapshotCodec codec =
      cfg_.write_mode == WriteMode::Plain ? SnapshotCodec::None : SnapshotCodec::Gzip;
  if (codec == SnapshotCodec::Gzip) blob = storage::compress_stream(blob, storage::Codec::Deflate);
  CheckpointImage img = build_image(p.core.id.vpid, host_id(p.core.host), m.epoch, codec,
                                    m.frozen_table, m.drain, std::move(blob), m.vpid_map);
  m.pending_image = storage::serialize_image(img);
  m.image_file = storage::image_filename(cfg_.basename, p.core.id.vpid, m.epoch);
  m.image_path_full =
      storage::image_path(cfg_.ckpt_dir, cfg_.basename, p.core.id.vpid, m.epoch).string();

  if (cfg_.write_mode == WriteMode::ForkedCompressed) {
    // snapshot child does the compression and write in parallel
    uint64_t cost = write_cost_ticks(m.pending_image.size()) * 4;
    deferred_.push_back({clock_ + cfg_.forked_write_delay + cost, m.image_path_full,
                         std::move(m.pending_image), m.epoch});
    m.pending_image.clear();
    m.write_ticks = 1;
  } else {
    m.write_ticks = write_cost_ticks(m.pending_image.size());
    if (cfg_.write_mode == WriteMode::Compressed) m.write_ticks *= 4;
  }
  trace_.event(clock_, "write_begin",
               {{"vpid", p.core.id.vpid}, {"file", m.image_file},
                {"mode", write_mode_name(cfg_.write_mode)}});
}

void SimWorld::finish_write(SimProcess& p) {
  ManagerState& m = p.mgr;
  if (!m.pending_image.empty()) {
    dir_->write_file(m.image_path_full, m.pending_image);
    m.pending_image.clear();
    if (cfg_.sync_policy != storage::SyncPolicy::None) {
      uint64_t mark = clock_;
      size_t synced = storage::apply_sync_policy(*dir_, cfg_.ckpt_dir, cfg_.sync_policy, m.epoch);
      if (synced > 0) {
        StageTiming st;
        st.role = "checkpoint";
        st.epoch = m.epoch;
        st.vpid = p.core.id.vpid;
        st.stage = "sync";
        st.seconds = double(clock_ - mark) + 1;  // logical cost of the durability barrier
        timings_.add(st);
      }
    }
  }
  epoch_images_[m.epoch].emplace_back(p.core.id.vpid, m.image_path_full);
  epoch_hosts_[m.epoch].emplace_back(p.core.id.vpid, host_label(p.core.host));
  trace_.event(clock_, "write_done", {{"vpid", p.core.id.vpid}, {"file", m.image_file}});
  dispatch(coord_.barrier_report(p.core.id.vpid, BarrierName::Checkpointed));
  m.phase = MgrPhase::AwaitCheckpointed;
}

void SimWorld::begin_refill(SimProcess& p) {
  ManagerState& m = p.mgr;
  m.handbacks_sent = false;
  m.awaiting.clear();
  for (const LedEndpoint& ep : m.led) {
    if (!ep.flushes) continue;
    SocketRole drainer_side = other_side(ep.side);
    if (m.winners.winner(ep.sid, drainer_side))
      m.awaiting.insert({ep.sid, drainer_side});
  }
}

bool SimWorld::refill_step(SimProcess& p) {
  ManagerState& m = p.mgr;
  if (!m.handbacks_sent) {
    for (const LedEndpoint& ep : m.led) {
      if (!ep.drains) continue;
      DrainKey key{ep.sid, ep.side};
      Bytes bytes = m.drain.count(key) ? m.drain.at(key) : Bytes{};
      auto peer = m.winners.winner(ep.sid, other_side(ep.side));
      if (peer && procs_.count(*peer) && !procs_.at(*peer).exited) {
        procs_.at(*peer).mgr.handback_inbox[key] = bytes;
        trace_.event(clock_, "handback",
                     {{"sid", ep.sid.str()}, {"to", *peer}, {"bytes", bytes.size()}});
      } else {
        // peer side gone: restore the receive queue directly
        SimChannel& c = channels_.at(ep.sid);
        c.dir_to(ep.side).push(bytes.data(), bytes.size());
        c.sent_ctr(ep.side) += bytes.size();
        trace_.event(clock_, "refill_local",
                     {{"sid", ep.sid.str()}, {"bytes", bytes.size()}});
      }
    }
    m.handbacks_sent = true;
  }
  for (auto it = m.handback_inbox.begin(); it != m.handback_inbox.end();) {
    const auto& [key, bytes] = *it;
    SimChannel& c = channels_.at(key.first);
    c.dir_to(key.second).push(bytes.data(), bytes.size());
    c.sent_ctr(key.second) += bytes.size();
    trace_.event(clock_, "refill",
                 {{"sid", key.first.str()}, {"vpid", p.core.id.vpid}, {"bytes", bytes.size()}});
    m.awaiting.erase(key);
    it = m.handback_inbox.erase(it);
  }
  return m.awaiting.empty();
}

void SimWorld::do_resume(SimProcess& p) {
  ManagerState& m = p.mgr;
  bool restart_path = m.restart_path;
  for (auto& [fd, rec] : p.fds) rec.owner_election.reset();  // original owner restored
  for (auto it = app_requests_.begin(); it != app_requests_.end();) {
    if (it->first == p.core.id.vpid) {
      for (auto& t : p.core.threads)
        if (t.tid == it->second) t.progress = 2;
      it = app_requests_.erase(it);
    } else {
      ++it;
    }
  }
  uint32_t epoch = m.epoch;
  p.mgr = ManagerState{};
  trace_.event(clock_, "resume", {{"vpid", p.core.id.vpid}, {"epoch", epoch}});
  run_hook(p, restart_path ? p.aware.hooks.post_restart : p.aware.hooks.post_ckpt);
}

void SimWorld::manager_abort(SimProcess& p) {
  ManagerState& m = p.mgr;
  // undo partial drains so no in-flight byte is lost
  for (const auto& [key, bytes] : m.drain) {
    auto it = channels_.find(key.first);
    if (it == channels_.end()) continue;
    it->second.dir_to(key.second).push_front(bytes);
    it->second.rcvd_ctr(key.second) -= bytes.size();
  }
  for (const LedEndpoint& ep : m.led) {
    auto it = channels_.find(ep.sid);
    if (it == channels_.end()) continue;
    it->second.token_to_acceptor.reset();
    it->second.token_to_connector.reset();
  }
  for (auto& [fd, rec] : p.fds) rec.owner_election.reset();
  p.mgr = ManagerState{};
  trace_.event(clock_, "abort_recovered", {{"vpid", p.core.id.vpid}});
}

// --- epoch bookkeeping --------------------------------------------------------------------------

std::vector<std::string> SimWorld::epoch_image_paths(uint32_t epoch) const {
  std::vector<std::string> out;
  auto it = epoch_images_.find(epoch);
  if (it == epoch_images_.end()) return out;
  for (const auto& [vpid, path] : it->second) out.push_back(path);
  std::sort(out.begin(), out.end());
  return out;
}

void SimWorld::maybe_generate_script() {
  for (auto it = script_pending_.begin(); it != script_pending_.end();) {
    uint32_t epoch = *it;
    auto imgs = epoch_images_.find(epoch);
    if (imgs == epoch_images_.end()) {
      ++it;
      continue;
    }
    bool complete = true;
    for (const auto& [vpid, path] : imgs->second)
      if (!dir_->exists(path)) complete = false;
    if (!complete) {
      ++it;  // forked child still writing
      continue;
    }
    storage::ClusterManifest mf;
    mf.coordinator_address = "sim://local";
    mf.epoch = epoch;
    mf.restart_command = "dcr restart --mode sim";
    std::map<std::string, std::vector<std::string>> by_host;
    auto hosts = epoch_hosts_.find(epoch);
    for (size_t i = 0; i < imgs->second.size(); i++) {
      const std::string& host = hosts->second[i].second;
      by_host[host].push_back(imgs->second[i].second);
    }
    for (auto& [host, paths] : by_host) {
      std::sort(paths.begin(), paths.end());
      mf.hosts.push_back({host, paths});
    }
    storage::write_restart_script(mf, cfg_.ckpt_dir, *dir_);
    trace_.event(clock_, "restart_script", {{"epoch", epoch}, {"hosts", by_host.size()}});
    it = script_pending_.erase(it);
  }
}

// --- oracle support -------------------------------------------------------------------------------

std::map<Vpid, SimWorld::ProcessOutcome> SimWorld::outcomes() const {
  std::map<Vpid, ProcessOutcome> out;
  for (const auto& [v, p] : procs_) {
    ProcessOutcome o;
    o.heap = p.core.heap;
    o.recv_streams = p.core.recv_streams;
    o.exited = p.exited;
    out[v] = std::move(o);
  }
  return out;
}

std::map<DrainKey, Bytes> SimWorld::queue_snapshot() const {
  std::map<DrainKey, Bytes> out;
  for (const auto& [sid, c] : channels_) {
    out[{sid, SocketRole::Acceptor}] = c.to_acceptor.snapshot();
    if (!c.pipe) out[{sid, SocketRole::Connector}] = c.to_connector.snapshot();
  }
  return out;
}

void SimWorld::check_conservation() const {
  for (const auto& [sid, c] : channels_) {
    if (c.sent_to_acceptor != c.rcvd_to_acceptor + c.to_acceptor.size())
      fail(Errc::MalformedTrace, "conservation violated toward acceptor on " + sid.str());
    if (c.sent_to_connector != c.rcvd_to_connector + c.to_connector.size())
      fail(Errc::MalformedTrace, "conservation violated toward connector on " + sid.str());
  }
}

void SimWorld::inject_in_flight(const GlobalSocketId& sid, SocketRole receiver,
                                const Bytes& bytes) {
  SimChannel& c = channels_.at(sid);
  c.dir_to(receiver).push(bytes.data(), bytes.size());
  c.sent_ctr(receiver) += bytes.size();
}

}  // namespace dcr::sim

#include "dcr/coordinator.hpp"

#include <algorithm>

namespace dcr {

const char* mode_name(CoordinatorMode m) {
  switch (m) {
    case CoordinatorMode::Running: return "running";
    case CoordinatorMode::Checkpointing: return "checkpointing";
    case CoordinatorMode::Restarting: return "restarting";
  }
  return "?";
}

void CoordinatorCore::trace_event(const std::string& kind, Json fields) {
  if (trace_) trace_->event(now_, kind, std::move(fields));
}

std::vector<Vpid> CoordinatorCore::live_vpids() const {
  std::vector<Vpid> v;
  for (const auto& [vpid, _] : registry_) v.push_back(vpid);
  return v;
}

Deliveries CoordinatorCore::register_process(Vpid vpid, uint64_t host_id,
                                             const std::string& address, bool restarting) {
  if (registry_.count(vpid))
    fail(Errc::DuplicateVpid, "vpid " + std::to_string(vpid) + " already live");
  ProcessInfo info{host_id, address, restarting};
  Deliveries out;
  if (mode_ == CoordinatorMode::Checkpointing) {
    // joins the cluster once the active epoch finishes; not part of its quorum
    deferred_registrations_.emplace_back(vpid, info);
    trace_event("register_deferred", {{"vpid", vpid}});
    return out;
  }
  registry_[vpid] = info;
  if (restarting && mode_ == CoordinatorMode::Restarting) {
    // restored processes re-enter the protocol at barrier "checkpointed"
    progress_[vpid] = BarrierName::Drained;
  }
  trace_event("register", {{"vpid", vpid}, {"host_id", host_id}, {"restarting", restarting}});
  out.push_back({Delivery::Kind::RegisterAck, vpid, epoch_, "", {}, {}, "", 0});
  return out;
}

Deliveries CoordinatorCore::deregister(Vpid vpid) {
  Deliveries out;
  if (!registry_.count(vpid)) return out;
  registry_.erase(vpid);
  trace_event("deregister", {{"vpid", vpid}});
  if (mode_ != CoordinatorMode::Running && expected_.count(vpid)) {
    expected_.erase(vpid);
    progress_.erase(vpid);
    return abort_epoch("process " + std::to_string(vpid) + " lost mid-epoch");
  }
  return out;
}

Deliveries CoordinatorCore::request_checkpoint(uint32_t* epoch_out) {
  if (mode_ == CoordinatorMode::Checkpointing)
    fail(Errc::CheckpointInProgress, "epoch " + std::to_string(epoch_) + " still active");
  if (mode_ == CoordinatorMode::Restarting) fail(Errc::WrongMode, "cluster is restarting");
  mode_ = CoordinatorMode::Checkpointing;
  epoch_++;
  expected_.clear();
  progress_.clear();
  elections_.clear();
  for (const auto& [vpid, _] : registry_) {
    expected_.insert(vpid);
    progress_[vpid] = std::nullopt;
  }
  if (epoch_out) *epoch_out = epoch_;
  trace_event("ckpt_request", {{"epoch", epoch_}, {"quorum", expected_.size()}});
  trace_event("barrier_release", {{"epoch", epoch_}, {"barrier", "request"}});
  Deliveries out;
  for (Vpid v : expected_)
    out.push_back({Delivery::Kind::CkptRequestRelease, v, epoch_, "", {}, {}, "", 0});
  return out;
}

void CoordinatorCore::release_barrier(BarrierName b, Deliveries& out) {
  trace_event("barrier_release", {{"epoch", epoch_}, {"barrier", barrier_label(b)}});
  std::vector<std::tuple<GlobalSocketId, SocketRole, Vpid>> winners;
  if (b == BarrierName::ElectionCompleted)
    for (const auto& [key, vpid] : elections_) winners.emplace_back(key.first, key.second, vpid);
  for (Vpid v : expected_) {
    Delivery d{Delivery::Kind::BarrierRelease, v, epoch_, barrier_label(b), {}, {}, "", 0};
    d.winners = winners;
    out.push_back(std::move(d));
  }
  if (b == BarrierName::Refilled) finish_epoch();
}

void CoordinatorCore::finish_epoch() {
  bool was_restart = mode_ == CoordinatorMode::Restarting;
  mode_ = CoordinatorMode::Running;
  expected_.clear();
  progress_.clear();
  elections_.clear();
  if (was_restart) {
    advertisements_.clear();
    pending_lookups_.clear();
  }
  trace_event("mode", {{"mode", "running"}});
  for (auto& [vpid, info] : deferred_registrations_) registry_[vpid] = info;
  deferred_registrations_.clear();
}

Deliveries CoordinatorCore::barrier_report(Vpid vpid, BarrierName barrier, bool* out_of_order) {
  if (out_of_order) *out_of_order = false;
  if (!registry_.count(vpid)) fail(Errc::CoordinatorLost, "report from unknown vpid");
  auto flag_violation = [&] {
    if (out_of_order) *out_of_order = true;
    trace_event("out_of_order", {{"vpid", vpid}, {"reported", barrier_label(barrier)}});
    return abort_epoch("out-of-order barrier from " + std::to_string(vpid));
  };
  if (mode_ == CoordinatorMode::Running) return flag_violation();
  auto it = progress_.find(vpid);
  std::optional<BarrierName> expect =
      it == progress_.end() ? BarrierName::Suspended : next_barrier(it->second);
  if (!expect || barrier != *expect) return flag_violation();
  progress_[vpid] = barrier;
  trace_event("barrier_report",
              {{"epoch", epoch_}, {"vpid", vpid}, {"barrier", barrier_label(barrier)}});
  Deliveries out;
  bool all = std::all_of(expected_.begin(), expected_.end(), [&](Vpid v) {
    auto p = progress_.find(v);
    return p != progress_.end() && p->second && *p->second >= barrier;
  });
  if (all) release_barrier(barrier, out);
  return out;
}

Deliveries CoordinatorCore::abort_epoch(const std::string& why) {
  trace_event("abort", {{"epoch", epoch_}, {"why", why}});
  Deliveries out;
  for (Vpid v : expected_) out.push_back({Delivery::Kind::Abort, v, epoch_, "", {}, {}, "", 0});
  finish_epoch();
  return out;
}

void CoordinatorCore::elect_set(const GlobalSocketId& sid, SocketRole side, Vpid writer) {
  // last writer wins
  elections_[{sid, side}] = writer;
  trace_event("elect_set", {{"sid", sid.str()}, {"side", role_name(side)}, {"vpid", writer}});
}

std::optional<Vpid> CoordinatorCore::leader_of(const GlobalSocketId& sid, SocketRole side) const {
  auto it = elections_.find({sid, side});
  if (it == elections_.end()) return std::nullopt;
  return it->second;
}

Deliveries CoordinatorCore::advertise(const GlobalSocketId& sid, const std::string& address,
                                      uint32_t port) {
  if (mode_ != CoordinatorMode::Restarting)
    fail(Errc::WrongMode, "advertise outside restarting mode");
  advertisements_[sid] = {address, port};
  trace_event("advertise", {{"sid", sid.str()}, {"address", address}, {"port", port}});
  Deliveries out;
  auto it = pending_lookups_.find(sid);
  if (it != pending_lookups_.end()) {
    for (uint64_t client : it->second)
      out.push_back({Delivery::Kind::LookupReply, client, epoch_, "", {}, sid, address, port});
    pending_lookups_.erase(it);
  }
  return out;
}

Deliveries CoordinatorCore::lookup(uint64_t client, const GlobalSocketId& sid) {
  if (mode_ != CoordinatorMode::Restarting)
    fail(Errc::WrongMode, "lookup outside restarting mode");
  trace_event("lookup", {{"sid", sid.str()}});
  Deliveries out;
  auto it = advertisements_.find(sid);
  if (it != advertisements_.end()) {
    out.push_back({Delivery::Kind::LookupReply, client, epoch_, "", {}, sid, it->second.first,
                   it->second.second});
  } else {
    pending_lookups_[sid].push_back(client);  // parked until the acceptor advertises
  }
  return out;
}

Deliveries CoordinatorCore::restart_begin(const std::vector<Vpid>& expected, uint32_t generation) {
  if (mode_ == CoordinatorMode::Checkpointing)
    fail(Errc::WrongMode, "restart during active checkpoint");
  if (mode_ == CoordinatorMode::Running) {
    mode_ = CoordinatorMode::Restarting;
    epoch_ = generation;
    trace_event("restart_begin", {{"generation", generation}, {"expected", expected.size()}});
  }
  for (Vpid v : expected) {
    expected_.insert(v);
    if (registry_.count(v) && !progress_.count(v)) progress_[v] = BarrierName::Drained;
  }
  return {};
}

Deliveries CoordinatorCore::tick(uint64_t now) {
  now_ = now;
  Deliveries out;
  if (interval_ == 0) return out;
  if (next_due_ == 0) next_due_ = interval_;
  bool fired = false;
  while (next_due_ <= now) {
    // a due tick falling inside an active epoch is skipped, not queued
    if (!fired && mode_ == CoordinatorMode::Running && !registry_.empty()) {
      out = request_checkpoint();
      fired = true;
    }
    next_due_ += interval_;
  }
  return out;
}

Json CoordinatorCore::status_json() const {
  Json j;
  j["mode"] = mode_name(mode_);
  j["epoch"] = epoch_;
  j["processes"] = registry_.size();
  Json vp = Json::array();
  for (const auto& [vpid, info] : registry_) vp.push_back(vpid);
  j["vpids"] = vp;
  return j;
}

}  // namespace dcr

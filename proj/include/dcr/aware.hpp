#pragma once

#include <functional>
#include <map>
#include <memory>

#include "dcr/errors.hpp"
#include "dcr/trace.hpp"

namespace dcr {

struct AwareHooks {
  std::function<void()> pre_ckpt;      // after suspension, before election
  std::function<void()> post_ckpt;     // after resume on the checkpoint path
  std::function<void()> post_restart;  // after resume on the restart path
};

struct AwareState {
  int delay_depth = 0;                   // process-wide nesting counter
  std::map<uint32_t, int> thread_depth;  // per-thread balance, for UnbalancedExit
  AwareHooks hooks;
  bool in_hook = false;

  void enter(uint32_t tid) {
    delay_depth++;
    thread_depth[tid]++;
  }
  void exit(uint32_t tid) {
    if (thread_depth[tid] <= 0) fail(Errc::UnbalancedExit, "delay_exit without matching enter");
    thread_depth[tid]--;
    delay_depth--;
  }
};

// The in-process programming interface. The base class is the standalone
// (unattached) behavior; a runtime hands workloads an attached subclass.
class AwareClient {
 public:
  virtual ~AwareClient() = default;

  virtual bool is_under_ckpt() const { return false; }
  virtual Json status() const {
    Json j;
    j["attached"] = false;
    j["mode"] = "running";
    j["epoch"] = 0;
    j["processes"] = 0;
    return j;
  }
  // Returns after the requesting process has resumed; the epoch number.
  virtual uint32_t request_checkpoint() {
    fail(Errc::NotAttached, "no checkpoint manager attached");
  }
  virtual void delay_enter(uint32_t tid = 0) { (void)tid; }
  virtual void delay_exit(uint32_t tid = 0) { (void)tid; }
  virtual void register_hooks(AwareHooks hooks) { (void)hooks; }
};

inline std::unique_ptr<AwareClient> make_unattached_aware() {
  return std::make_unique<AwareClient>();
}

}  // namespace dcr

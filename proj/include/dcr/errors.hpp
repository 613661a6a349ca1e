#pragma once

#include <stdexcept>
#include <string>

namespace dcr {

// Every failure surfaced by the engine carries one of these codes so tests
// and the CLI can match on the condition rather than on message text.
enum class Errc {
  // simulated cluster
  UnknownHost,
  DeadParent,
  NotListening,
  BadDescriptor,
  ReadOnlySegment,
  // coordinator protocol
  DuplicateVpid,
  CheckpointInProgress,
  OutOfOrderBarrier,
  WrongMode,
  CoordinatorLost,
  CoordinatorUnreachable,
  // checkpoint manager
  ThreadUnresponsive,
  TokenTimeout,
  StorageFull,
  CompressionFailure,
  PeerGone,
  // restart engine
  MissingImage,
  VersionMismatch,
  BindFailure,
  HandshakeMismatch,
  LookupTimeout,
  ForkFailure,
  FdCollisionUnresolvable,
  CorruptSnapshot,
  RetryBudgetExhausted,
  DirectoryNotWritable,
  // storage
  BadMagic,
  TruncatedSection,
  ChecksumMismatch,
  CodecFailure,
  SyncFailure,
  IncompleteEpoch,
  // aware api
  NotAttached,
  UnbalancedExit,
  NotAllowedInHook,
  // cli
  BadProgramSpec,
  MalformedTrace,
  BadWorkloadScript,
};

const char* errc_name(Errc c);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

}  // namespace dcr

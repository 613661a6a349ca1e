#include "dcr/workload.hpp"

#include <algorithm>
#include <sstream>

namespace dcr {

const char* op_name(OpCode op) {
  switch (op) {
    case OpCode::Listen: return "listen";
    case OpCode::Accept: return "accept";
    case OpCode::Connect: return "connect";
    case OpCode::Send: return "send";
    case OpCode::Recv: return "recv";
    case OpCode::Close: return "close";
    case OpCode::Pipe: return "pipe";
    case OpCode::Fork: return "fork";
    case OpCode::Spawn: return "spawn";
    case OpCode::Open: return "open";
    case OpCode::Fwrite: return "fwrite";
    case OpCode::Fread: return "fread";
    case OpCode::Fseek: return "fseek";
    case OpCode::MapShm: return "mapshm";
    case OpCode::ShmWrite: return "shmwrite";
    case OpCode::ShmRead: return "shmread";
    case OpCode::Compute: return "compute";
    case OpCode::Poke: return "poke";
    case OpCode::DelayBegin: return "delay_begin";
    case OpCode::DelayEnd: return "delay_end";
    case OpCode::RequestCkpt: return "request_ckpt";
    case OpCode::Thread: return "thread";
    case OpCode::Exit: return "exit";
  }
  return "?";
}

namespace {

uint64_t num_arg(const std::vector<std::string>& toks, size_t i, const std::string& line) {
  if (i >= toks.size()) fail(Errc::BadWorkloadScript, "missing argument in: " + line);
  try {
    return std::stoull(toks[i]);
  } catch (const std::exception&) {
    fail(Errc::BadWorkloadScript, "expected number, got '" + toks[i] + "' in: " + line);
  }
}

const std::string& str_arg(const std::vector<std::string>& toks, size_t i,
                           const std::string& line) {
  if (i >= toks.size()) fail(Errc::BadWorkloadScript, "missing argument in: " + line);
  return toks[i];
}

}  // namespace

Workload parse_workload(const std::string& name, const std::string& text) {
  Workload w;
  w.name = name;
  std::istringstream in(text);
  std::string line;
  int last_num = -1;
  while (std::getline(in, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::vector<std::string> toks;
    std::string tok;
    while (ls >> tok) toks.push_back(tok);
    if (toks.empty()) continue;

    Step s;
    s.num = uint32_t(num_arg(toks, 0, line));
    if (int(s.num) <= last_num)
      fail(Errc::BadWorkloadScript, "step numbers must increase: " + line);
    last_num = int(s.num);

    const std::string& op = str_arg(toks, 1, line);
    if (op == "listen") {
      s.op = OpCode::Listen;
      s.lab1 = str_arg(toks, 2, line);
      s.n1 = num_arg(toks, 3, line);
    } else if (op == "accept") {
      s.op = OpCode::Accept;
      s.lab1 = str_arg(toks, 2, line);
      s.lab2 = str_arg(toks, 3, line);
    } else if (op == "connect") {
      s.op = OpCode::Connect;
      s.lab1 = str_arg(toks, 2, line);
      s.n1 = num_arg(toks, 3, line);
      s.n2 = num_arg(toks, 4, line);
    } else if (op == "send" || op == "recv" || op == "fwrite" || op == "fread") {
      s.op = op == "send"     ? OpCode::Send
             : op == "recv"   ? OpCode::Recv
             : op == "fwrite" ? OpCode::Fwrite
                              : OpCode::Fread;
      s.lab1 = str_arg(toks, 2, line);
      s.n1 = num_arg(toks, 3, line);
    } else if (op == "close") {
      s.op = OpCode::Close;
      s.lab1 = str_arg(toks, 2, line);
    } else if (op == "pipe") {
      s.op = OpCode::Pipe;
      s.lab1 = str_arg(toks, 2, line);
      s.lab2 = str_arg(toks, 3, line);
    } else if (op == "fork") {
      s.op = OpCode::Fork;
      s.lab1 = str_arg(toks, 2, line);
      s.path = str_arg(toks, 3, line);
    } else if (op == "spawn") {
      s.op = OpCode::Spawn;
      s.lab1 = str_arg(toks, 2, line);
      s.n1 = num_arg(toks, 3, line);
      s.path = str_arg(toks, 4, line);
    } else if (op == "open") {
      s.op = OpCode::Open;
      s.lab1 = str_arg(toks, 2, line);
      s.path = str_arg(toks, 3, line);
    } else if (op == "fseek") {
      s.op = OpCode::Fseek;
      s.lab1 = str_arg(toks, 2, line);
      s.n1 = num_arg(toks, 3, line);
    } else if (op == "mapshm") {
      s.op = OpCode::MapShm;
      s.lab1 = str_arg(toks, 2, line);
      s.path = str_arg(toks, 3, line);
      s.n2 = num_arg(toks, 4, line);
      const std::string& mode = str_arg(toks, 5, line);
      if (mode != "rw" && mode != "ro")
        fail(Errc::BadWorkloadScript, "mapshm mode must be rw|ro: " + line);
      s.writable = mode == "rw";
    } else if (op == "shmwrite" || op == "shmread") {
      s.op = op == "shmwrite" ? OpCode::ShmWrite : OpCode::ShmRead;
      s.lab1 = str_arg(toks, 2, line);
      s.n1 = num_arg(toks, 3, line);
      s.n2 = num_arg(toks, 4, line);
    } else if (op == "compute") {
      s.op = OpCode::Compute;
      s.n1 = num_arg(toks, 2, line);
    } else if (op == "poke") {
      s.op = OpCode::Poke;
      s.n1 = num_arg(toks, 2, line);
      s.n2 = num_arg(toks, 3, line);
    } else if (op == "delay_begin") {
      s.op = OpCode::DelayBegin;
    } else if (op == "delay_end") {
      s.op = OpCode::DelayEnd;
    } else if (op == "request_ckpt") {
      s.op = OpCode::RequestCkpt;
    } else if (op == "thread") {
      s.op = OpCode::Thread;
      s.path = str_arg(toks, 2, line);
    } else if (op == "exit") {
      s.op = OpCode::Exit;
    } else {
      fail(Errc::BadWorkloadScript, "unknown op '" + op + "' in: " + line);
    }
    w.steps.push_back(std::move(s));
  }
  return w;
}

std::string format_workload(const Workload& w) {
  std::ostringstream out;
  for (const auto& s : w.steps) {
    out << s.num << " " << op_name(s.op);
    switch (s.op) {
      case OpCode::Listen: out << " " << s.lab1 << " " << s.n1; break;
      case OpCode::Accept: out << " " << s.lab1 << " " << s.lab2; break;
      case OpCode::Connect: out << " " << s.lab1 << " " << s.n1 << " " << s.n2; break;
      case OpCode::Send:
      case OpCode::Recv:
      case OpCode::Fwrite:
      case OpCode::Fread: out << " " << s.lab1 << " " << s.n1; break;
      case OpCode::Close: out << " " << s.lab1; break;
      case OpCode::Pipe: out << " " << s.lab1 << " " << s.lab2; break;
      case OpCode::Fork: out << " " << s.lab1 << " " << s.path; break;
      case OpCode::Spawn: out << " " << s.lab1 << " " << s.n1 << " " << s.path; break;
      case OpCode::Open: out << " " << s.lab1 << " " << s.path; break;
      case OpCode::Fseek: out << " " << s.lab1 << " " << s.n1; break;
      case OpCode::MapShm:
        out << " " << s.lab1 << " " << s.path << " " << s.n2 << " " << (s.writable ? "rw" : "ro");
        break;
      case OpCode::ShmWrite:
      case OpCode::ShmRead: out << " " << s.lab1 << " " << s.n1 << " " << s.n2; break;
      case OpCode::Compute: out << " " << s.n1; break;
      case OpCode::Poke: out << " " << s.n1 << " " << s.n2; break;
      case OpCode::Thread: out << " " << s.path; break;
      case OpCode::DelayBegin:
      case OpCode::DelayEnd:
      case OpCode::RequestCkpt:
      case OpCode::Exit: break;
    }
    out << "\n";
  }
  return out.str();
}

std::shared_ptr<const Workload> WorkloadLibrary::get(const std::string& name) const {
  auto it = map_.find(name);
  if (it == map_.end()) fail(Errc::BadWorkloadScript, "unknown workload: " + name);
  return it->second;
}

std::vector<std::string> WorkloadLibrary::names() const {
  std::vector<std::string> out;
  for (const auto& [k, _] : map_) out.push_back(k);
  return out;
}

void mix_into_heap(Bytes& heap, uint64_t base_key, uint64_t stream_offset, const uint8_t* p,
                   size_t n) {
  if (heap.size() < 4096) heap.resize(4096, 0);
  size_t base = size_t(base_key % 3968);
  for (size_t i = 0; i < n; i++) {
    size_t slot = base + size_t((stream_offset + i) & 63);
    heap[slot] = uint8_t(heap[slot] * 31u + p[i] + 1u);
  }
}

uint64_t path_key(const std::string& path) {
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : path) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace dcr

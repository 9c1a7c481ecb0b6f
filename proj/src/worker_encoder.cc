#include "psd/worker_encoder.h"

#include <fcntl.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <filesystem>

#include "json.hpp"
#include "psd/errors.h"

#ifndef PSD_TOOLS_DIR
#define PSD_TOOLS_DIR "tools"
#endif

namespace psd {

using nlohmann::json;

std::vector<std::string> DefaultWorkerCommand(const std::string& model) {
  std::string script = PSD_TOOLS_DIR "/hf_encoder_worker.py";
  if (const char* env = std::getenv("PSD_WORKER_SCRIPT"); env && *env) {
    script = env;
  }
  const char* python = std::getenv("PSD_PYTHON");
  return {python && *python ? python : "python3", script, "--model", model};
}

WorkerEncoder::WorkerEncoder(std::vector<std::string> argv, int max_tokens) {
  if (argv.empty()) throw ValidationError("empty worker command");
  int in_pipe[2];
  int out_pipe[2];
  if (pipe2(in_pipe, O_CLOEXEC) != 0 || pipe2(out_pipe, O_CLOEXEC) != 0) {
    throw StageError(std::string("pipe: ") + std::strerror(errno));
  }
  std::vector<char*> cargv;
  for (auto& a : argv) cargv.push_back(a.data());
  cargv.push_back(nullptr);
  pid_ = fork();
  if (pid_ < 0) throw StageError(std::string("fork: ") + std::strerror(errno));
  if (pid_ == 0) {
    dup2(in_pipe[0], STDIN_FILENO);
    dup2(out_pipe[1], STDOUT_FILENO);
    execvp(cargv[0], cargv.data());
    _exit(127);
  }
  close(in_pipe[0]);
  close(out_pipe[1]);
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];
  // A dead worker must surface as an error, not SIGPIPE.
  signal(SIGPIPE, SIG_IGN);

  json hello;
  try {
    hello = json::parse(ReadLine());
    info_.model_id = hello.at("model_id").get<std::string>();
    info_.num_layers = hello.at("num_layers").get<int>();
    info_.hidden_dim = hello.at("hidden_dim").get<int>();
    info_.max_tokens = hello.at("max_tokens").get<int>();
    info_.fingerprint = hello.at("fingerprint").get<std::string>();
  } catch (const json::exception& e) {
    throw StageError(std::string("bad worker handshake: ") + e.what());
  }
  if (max_tokens > 0) info_.max_tokens = std::min(info_.max_tokens, max_tokens);
}

WorkerEncoder::~WorkerEncoder() {
  if (to_child_ >= 0) close(to_child_);
  if (from_child_ >= 0) close(from_child_);
  if (pid_ > 0) {
    int status = 0;
    waitpid(pid_, &status, 0);
  }
}

void WorkerEncoder::Send(const std::string& line) {
  std::string msg = line + "\n";
  size_t off = 0;
  while (off < msg.size()) {
    const ssize_t n = write(to_child_, msg.data() + off, msg.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw StageError(std::string("encoder worker write: ") + std::strerror(errno));
    }
    off += static_cast<size_t>(n);
  }
}

std::string WorkerEncoder::ReadLine() {
  while (true) {
    if (const auto nl = buffer_.find('\n'); nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      return line;
    }
    char chunk[4096];
    const ssize_t n = read(from_child_, chunk, sizeof(chunk));
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) throw StageError("encoder worker exited unexpectedly");
    buffer_.append(chunk, static_cast<size_t>(n));
  }
}

void WorkerEncoder::ReadExact(char* dst, size_t n) {
  const size_t from_buffer = std::min(n, buffer_.size());
  std::memcpy(dst, buffer_.data(), from_buffer);
  buffer_.erase(0, from_buffer);
  size_t off = from_buffer;
  while (off < n) {
    const ssize_t got = read(from_child_, dst + off, n - off);
    if (got < 0 && errno == EINTR) continue;
    if (got <= 0) throw StageError("encoder worker exited mid-message");
    off += static_cast<size_t>(got);
  }
}

LayerMatrix WorkerEncoder::Encode(const LabeledInstance& instance) {
  const json request = {{"op", "encode"},
                        {"id", instance.id},
                        {"tokens", instance.tokens},
                        {"head", {instance.head.start, instance.head.end}},
                        {"max_tokens", info_.max_tokens}};
  Send(request.dump());
  const json reply = json::parse(ReadLine());
  if (!reply.value("ok", false)) {
    throw StageError("instance " + instance.id + ": " +
                     reply.value("error", std::string("worker error")));
  }
  const int rows = reply.at("rows").get<int>();
  const int cols = reply.at("cols").get<int>();
  if (rows != info_.num_layers + 1 || cols != info_.hidden_dim) {
    throw StageError("worker returned a " + std::to_string(rows) + "x" +
                     std::to_string(cols) + " matrix");
  }
  LayerMatrix m;
  m.instance_id = instance.id;
  m.encoder_fingerprint = info_.fingerprint;
  m.values.resize(rows, cols);
  ReadExact(reinterpret_cast<char*>(m.values.data()),
            static_cast<size_t>(rows) * cols * sizeof(float));
  if (!m.values.allFinite()) {
    throw StageError("instance " + instance.id + ": non-finite activation");
  }
  return m;
}

std::string WorkerEncoder::ComputeFingerprint() {
  Send(json{{"op", "fingerprint"}}.dump());
  const json reply = json::parse(ReadLine());
  if (!reply.value("ok", false)) throw StageError("worker fingerprint failed");
  return reply.at("fingerprint").get<std::string>();
}

}  // namespace psd

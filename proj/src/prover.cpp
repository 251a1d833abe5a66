#include "isobench/prover.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <filesystem>
#include <mutex>
#include <sstream>

#include "isobench/error.hpp"
#include "isobench/mock_prover.hpp"
#include "isobench/text.hpp"

extern char** environ;

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace isobench {

const char* to_string(VerifyStatus s) noexcept {
  switch (s) {
    case VerifyStatus::Success: return "success";
    case VerifyStatus::Failure: return "failure";
    case VerifyStatus::Timeout: return "timeout";
  }
  return "failure";
}

VerifyStatus parse_verify_status(const std::string& s) {
  if (s == "success") return VerifyStatus::Success;
  if (s == "timeout") return VerifyStatus::Timeout;
  if (s == "failure") return VerifyStatus::Failure;
  throw Error(ErrorCode::IoError, "unknown verify status " + s);
}

namespace {

std::string locate_executable(const std::string& configured) {
  std::string exe = configured;
  if (exe.empty()) {
    const char* env = std::getenv("ISOBENCH_ISABELLE");
    exe = env && *env ? env : "isabelle";
  }
  if (exe.find('/') != std::string::npos) {
    if (::access(exe.c_str(), X_OK) == 0) return exe;
    throw Error(ErrorCode::ExecutableNotFound, exe);
  }
  const char* path = std::getenv("PATH");
  std::stringstream dirs(path ? path : "");
  std::string dir;
  while (std::getline(dirs, dir, ':')) {
    fs::path cand = fs::path(dir.empty() ? "." : dir) / exe;
    if (::access(cand.c_str(), X_OK) == 0) return cand.string();
  }
  throw Error(ErrorCode::ExecutableNotFound, exe + " not found on PATH");
}

/// First error block of an Isabelle build log: lines starting with `*** `.
std::string first_error(const std::string& log) {
  std::string out;
  bool in_block = false;
  for (auto line : split_lines(log)) {
    if (line.substr(0, 4) == "*** ") {
      if (!out.empty()) out += "\n";
      out += std::string(line.substr(4));
      in_block = true;
    } else if (in_block) {
      break;
    }
  }
  if (out.empty()) {
    auto lines = split_lines(log);
    for (auto it = lines.rbegin(); it != lines.rend(); ++it)
      if (!is_blank(*it)) return std::string(trim(*it));
    return "build failed";
  }
  return out;
}

/// Bounds concurrent subprocesses.
class Semaphore {
 public:
  explicit Semaphore(int n) : n_(n < 1 ? 1 : n) {}
  void acquire() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return n_ > 0; });
    --n_;
  }
  void release() {
    {
      std::lock_guard lock(mu_);
      ++n_;
    }
    cv_.notify_one();
  }

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  int n_;
};

class ExternalProver final : public ProverDriver {
 public:
  explicit ExternalProver(ProverConfig config)
      : config_(std::move(config)), exe_(locate_executable(config_.executable)), slots_(config_.pool_size) {
    if (config_.timeout_seconds <= 0) throw Error(ErrorCode::ConfigError, "timeout_seconds must be positive");
  }

  VerifyResult build_session(const std::string& root_dir, const std::string& session) override {
    return build_session(root_dir, session, config_.timeout_seconds);
  }

  VerifyResult build_session(const std::string& root_dir, const std::string& session, double timeout) override {
    std::vector<std::string> args{exe_, "build", "-d", root_dir};
    for (const auto& d : config_.include_dirs) {
      args.push_back("-d");
      args.push_back(d);
    }
    if (!config_.cache_dir.empty()) {
      args.push_back("-o");
      args.push_back("document=false");
    }
    args.push_back(session);
    slots_.acquire();
    VerifyResult r = run(args, timeout);
    slots_.release();
    return r;
  }

  const ProverConfig& config() const override { return config_; }

 private:
  VerifyResult run(const std::vector<std::string>& args, double timeout) {
    auto start = Clock::now();
    VerifyResult out;
    int pipefd[2];
    if (::pipe(pipefd) != 0) throw Error(ErrorCode::IoError, "pipe failed");
    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_adddup2(&actions, pipefd[1], STDOUT_FILENO);
    posix_spawn_file_actions_adddup2(&actions, pipefd[1], STDERR_FILENO);
    posix_spawn_file_actions_addclose(&actions, pipefd[0]);
    posix_spawnattr_t attr;
    posix_spawnattr_init(&attr);
    posix_spawnattr_setflags(&attr, POSIX_SPAWN_SETPGROUP);
    posix_spawnattr_setpgroup(&attr, 0);
    if (!config_.cache_dir.empty()) {
      fs::create_directories(config_.cache_dir);
      ::setenv("ISABELLE_HEAPS", config_.cache_dir.c_str(), 0);
    }
    std::vector<char*> argv;
    for (const auto& a : args) argv.push_back(const_cast<char*>(a.c_str()));
    argv.push_back(nullptr);
    pid_t pid = 0;
    int rc = posix_spawn(&pid, argv[0], &actions, &attr, argv.data(), environ);
    posix_spawn_file_actions_destroy(&actions);
    posix_spawnattr_destroy(&attr);
    ::close(pipefd[1]);
    if (rc != 0) {
      ::close(pipefd[0]);
      throw Error(ErrorCode::ExecutableNotFound, args[0]);
    }
    auto deadline = start + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(timeout));
    std::string log;
    bool timed_out = false;
    char buf[4096];
    while (true) {
      auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now()).count();
      if (left <= 0) {
        timed_out = true;
        break;
      }
      pollfd p{pipefd[0], POLLIN, 0};
      int n = ::poll(&p, 1, static_cast<int>(std::min<long long>(left, 200)));
      if (n > 0) {
        ssize_t got = ::read(pipefd[0], buf, sizeof buf);
        if (got <= 0) break;
        log.append(buf, static_cast<std::size_t>(got));
      }
    }
    if (timed_out) ::kill(-pid, SIGKILL);
    ::close(pipefd[0]);
    int status = 0;
    ::waitpid(pid, &status, 0);
    out.elapsed_seconds = std::chrono::duration<double>(Clock::now() - start).count();
    if (timed_out) {
      out.status = VerifyStatus::Timeout;
      out.message = "Timeout";
    } else if (WIFEXITED(status) && WEXITSTATUS(status) == 0) {
      out.status = VerifyStatus::Success;
    } else {
      out.status = VerifyStatus::Failure;
      out.message = first_error(log);
    }
    return out;
  }

  ProverConfig config_;
  std::string exe_;
  Semaphore slots_;
};

}  // namespace

std::unique_ptr<ProverDriver> make_prover(const ProverConfig& config) {
  if (config.kind == ProverConfig::Kind::Mock) return std::make_unique<MockProver>(config);
  return std::make_unique<ExternalProver>(config);
}

}  // namespace isobench

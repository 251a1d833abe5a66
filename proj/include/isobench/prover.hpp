#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace isobench {

enum class VerifyStatus { Success, Failure, Timeout };
const char* to_string(VerifyStatus s) noexcept;
VerifyStatus parse_verify_status(const std::string& s);

struct VerifyResult {
  VerifyStatus status = VerifyStatus::Success;
  std::string message;  // first prover error; empty on success
  double elapsed_seconds = 0.0;
  std::optional<int> rebuilt_theories;  // mock prover only
};

struct ProverConfig {
  enum class Kind { Mock, External };
  Kind kind = Kind::Mock;
  std::string executable;  // external: prover launcher; empty = $ISOBENCH_ISABELLE or `isabelle` on PATH
  std::string cache_dir;   // persistent build artifacts
  double timeout_seconds = 600.0;
  std::vector<std::string> include_dirs;  // extra ROOT directories (the corpus)
  int pool_size = 4;  // concurrent external builds
};

class ProverDriver {
 public:
  virtual ~ProverDriver() = default;
  /// Builds `session` declared in a ROOT file under `root_dir`, building any
  /// session it depends on first. Never throws for prover-side failures;
  /// those come back as Failure/Timeout.
  virtual VerifyResult build_session(const std::string& root_dir, const std::string& session) = 0;
  /// Same, with a per-call time limit overriding the configured one.
  virtual VerifyResult build_session(const std::string& root_dir, const std::string& session, double timeout_seconds) = 0;
  virtual const ProverConfig& config() const = 0;
};

/// Throws ExecutableNotFound for an external prover that cannot be located.
std::unique_ptr<ProverDriver> make_prover(const ProverConfig& config);

}  // namespace isobench

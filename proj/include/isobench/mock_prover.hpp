#pragma once

#include <chrono>
#include <map>
#include <mutex>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "isobench/prover.hpp"

namespace isobench {

/// fact name -> goal tags it discharges
using FactTable = std::map<std::string, std::set<std::string>>;

/// Goal tags in a statement: lowercase-letter runs followed by digits (`k12`).
std::set<std::string> goal_tags(std::string_view statement);

/// Method names the mock prover accepts inside `apply`/`by`.
bool is_mock_method(std::string_view name);

struct MockCheck {
  VerifyResult result;
  FactTable exported;  // facts declared by the theory (valid only on success)
};

/// Checks one theory text against the facts of its imports. Rules:
///  - a fact name not in scope fails with `Undefined fact: "<name>"`;
///  - an unknown method fails with `Undefined method: "<name>"`;
///  - a goal whose tags are not covered by the applied facts fails with
///    `Failed to finish proof`; facts covering nothing fail with
///    `Failed to apply proof method`;
///  - anything outside the grammar fails with `Outer syntax error`.
/// `mock_delay N` inside a proof sleeps N seconds (timeout injection).
MockCheck check_theory(std::string_view text, std::string_view display_name, const FactTable& scope,
                       std::chrono::steady_clock::time_point deadline = std::chrono::steady_clock::time_point::max());

/// check_theory with an unbounded deadline.
VerifyResult mock_verify(std::string_view text, const FactTable& scope);

/// Session builder over check_theory. Results are cached on disk under
/// cache_dir, keyed by session, theory and a digest of the theory text plus
/// the digests of its imports, so unchanged theories are never rechecked.
class MockProver final : public ProverDriver {
 public:
  explicit MockProver(ProverConfig config);
  VerifyResult build_session(const std::string& root_dir, const std::string& session) override;
  VerifyResult build_session(const std::string& root_dir, const std::string& session, double timeout_seconds) override;
  const ProverConfig& config() const override { return config_; }

  /// Theories checked (not served from cache) over this object's lifetime.
  long total_rebuilt() const;

 private:
  struct SessionInfo;
  struct BuildState;
  struct TheoryResult {
    std::string digest;
    FactTable facts;
  };
  using SessionResult = std::map<std::string, TheoryResult>;  // by absolute theory path

  std::map<std::string, SessionInfo> load_sessions(const std::string& root_dir) const;
  bool build_one(const std::map<std::string, SessionInfo>& sessions, const std::string& name, BuildState& state);
  std::mutex& session_lock(const std::string& name);

  ProverConfig config_;
  mutable std::mutex mu_;
  std::map<std::string, std::unique_ptr<std::mutex>> session_locks_;
  long total_rebuilt_ = 0;
};

}  // namespace isobench

#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "isobench/corpus.hpp"
#include "isobench/corpus_loader.hpp"
#include "isobench/graph.hpp"
#include "isobench/prover.hpp"

namespace isobench {

inline constexpr std::string_view kProofPlaceholder = "(*@@PROOF@@*)";

enum class BenchStatus { Unchecked, Verified, Broken };
const char* to_string(BenchStatus s) noexcept;

struct IsolatedBench {
  std::string lemma_id;
  std::string key;  // short digest of the lemma id
  SessionSpec dep_session;
  SessionSpec target_session;
  std::string dep_theory_name;     // <Theory>_DEP
  std::string target_theory_name;  // <Theory>_TGT
  std::string dep_theory_text;
  std::string target_theory_template;
  std::string workspace;           // absolute bench directory holding ROOT
  std::string dep_theory_path;     // absolute
  std::string target_theory_path;  // absolute
  BenchStatus status = BenchStatus::Unchecked;
  std::string broken_reason;
};

std::string lemma_key(std::string_view lemma_id);

/// Directory of the bench for `lemma_id` under a workspace root.
std::string bench_dir(const std::string& workspace_root, std::string_view lemma_id);

/// Builds the bench for one lemma and writes its ROOT and theory files under
/// `<workspace_root>/benches/<key>/`. Closure theories stay in the corpus and
/// are imported from there. Throws LemmaExcluded or TheoryNotInGraph.
IsolatedBench isolate(const Corpus& corpus, const DependencyGraph& graph, const Lemma& lemma,
                      const std::string& workspace_root);

/// The `_DEP` and `_TGT` stanzas.
std::string emit_root(const IsolatedBench& bench);

/// Replaces the placeholder with `proof`. Throws MissingPlaceholder when the
/// template has none and SpliceCollision when one is still present afterwards.
std::string splice_proof(const IsolatedBench& bench, std::string_view proof);

/// Writes the spliced target theory and builds the target session.
/// Splice errors come back as a Failure result.
VerifyResult verify_proof(const IsolatedBench& bench, ProverDriver& prover, std::string_view proof,
                          std::optional<double> timeout_seconds = std::nullopt);

/// Builds the dependency session, then verifies the groundtruth proof.
/// Updates bench.status and persists it next to the bench files.
BenchStatus check_correctness(IsolatedBench& bench, ProverDriver& prover, const Lemma& lemma);

/// Status persisted by an earlier check_correctness, if any.
std::optional<std::pair<BenchStatus, std::string>> load_bench_status(const std::string& workspace_root,
                                                                     std::string_view lemma_id);

}  // namespace isobench

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "isobench/corpus.hpp"

namespace isobench {

struct SyntheticParams {
  std::uint64_t seed = 7;
  int sessions = 3;
  int theories_per_session = 4;
  int lemmas_per_theory = 7;  // benchmark lemmas; one excluded lemma is added per theory
};

/// What the generator intended for one lemma, independent of the parser.
struct GoldenLemma {
  std::string id;
  Style style;
  Category category;
  int proof_line_count;
};

struct SyntheticCorpus {
  std::map<std::string, std::string> files;  // corpus-relative path -> contents
  std::vector<GoldenLemma> golden;
  /// JSON lines: one record per lemma, then a summary with category counts.
  std::string golden_manifest() const;
};

inline constexpr const char* kGoldenManifestName = "golden_manifest.jsonl";

/// Deterministic multi-session corpus in ROOT/theory syntax whose proofs the
/// mock prover can check: a top-level ROOT plus proof/ROOT, cross-session
/// imports (qualified, bare and by relative path), lemmas in all four
/// benchmark categories plus excluded ones (locale target, context block,
/// over-long proof, sorry). Throws ConfigError for sizes below 1.
SyntheticCorpus generate_synthetic(const SyntheticParams& params);

/// Writes the files and the golden manifest under `dir`.
void write_synthetic(const SyntheticCorpus& corpus, const std::string& dir);

std::vector<GoldenLemma> read_golden_manifest(const std::string& path);

}  // namespace isobench

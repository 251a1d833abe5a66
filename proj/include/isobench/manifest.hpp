#pragma once

#include <string>

#include "isobench/corpus_loader.hpp"

namespace isobench {

inline constexpr int kManifestVersion = 1;

/// One JSON record per line: a `corpus` header, then `session`, `theory`,
/// `lemma` and `issue` records, then a `summary` with per-category counts.
std::string render_manifest(const Corpus& corpus);
void write_manifest(const Corpus& corpus, const std::string& path);

/// Rebuilds a Corpus from a manifest. Theory texts are re-read from the
/// corpus directory recorded in the header and checked against the stored
/// digest; a mismatch throws IoError (the corpus changed since ingest).
Corpus read_manifest(const std::string& path);

}  // namespace isobench

#pragma once

#include <map>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "isobench/corpus.hpp"
#include "isobench/graph.hpp"
#include "isobench/isolation.hpp"

namespace isobench {

/// A blank-line-delimited run of lines in one theory file.
struct Chunk {
  int id = 0;  // position in the library
  std::string theory_id;
  LineSpan line_span;  // 1-based, inclusive
  std::string text;    // lines joined by '\n', no blank line inside

  friend bool operator==(const Chunk&, const Chunk&) = default;
};

/// Lowercased runs of [a-z0-9_].
std::vector<std::string> tokenize_terms(std::string_view text);

struct ChunkLibrary {
  std::vector<Chunk> chunks;
  std::map<std::string, int> doc_freq;
  std::vector<std::map<std::string, int>> term_counts;  // parallel to chunks
  std::vector<int> lengths;                            // tokens per chunk
  double avg_length = 0.0;

  /// Computes the statistics for `chunks` (ids must equal positions).
  static ChunkLibrary from_chunks(std::vector<Chunk> chunks);

  friend bool operator==(const ChunkLibrary&, const ChunkLibrary&) = default;
};

/// Splits every theory on blank lines; chunk ids follow the input order.
ChunkLibrary build_chunks(const std::vector<TheoryFile>& theories);

inline constexpr int kIndexVersion = 1;
/// Structured-text index with a format/version header.
void save_library(const ChunkLibrary& lib, const std::string& path);
/// Throws IoError on a version mismatch or when stored statistics disagree
/// with the ones recomputed from the stored chunks.
ChunkLibrary load_library(const std::string& path);

struct Bm25Params {
  double k1 = 1.2;
  double b = 0.75;
};

/// BM25 score of every chunk, indexed by chunk id. Throws EmptyQuery.
std::vector<double> bm25_scores(const ChunkLibrary& lib, std::string_view query, const Bm25Params& params = {});

/// Top `top_n` (chunk id, score), descending, ties by chunk id.
/// Throws ConfigError for top_n < 1 and EmptyQuery.
std::vector<std::pair<int, double>> bm25_rank(const ChunkLibrary& lib, std::string_view query, std::size_t top_n,
                                              const Bm25Params& params = {});

/// Chunks of the lemma's own theory that overlap its span.
bool chunk_holds_lemma(const Chunk& chunk, const Lemma& lemma);

inline constexpr int kSimilarLines = 10;
inline constexpr int kDependencyLines = 5;

/// `<sim>` block with the first 10 lines of the best chunk for the lemma's
/// statement, never the chunk holding the lemma itself. Throws NoCandidate.
std::string similar_augment(const ChunkLibrary& lib, const Lemma& lemma);

/// Names of tactic/keyword tokens that are never facts.
std::set<std::string> default_fact_stoplist();
/// One word per line, `#` comments. Throws IoError.
std::set<std::string> load_fact_stoplist(const std::string& path);

/// Fact names used by a proof script, first occurrence order.
std::vector<std::string> extract_applied_facts(std::string_view proof, const std::set<std::string>& stoplist);
std::vector<std::string> extract_applied_facts(std::string_view proof);

struct DependencyAugmentation {
  std::string text;  // `<dep>` blocks joined by '\n'
  std::vector<int> chunk_ids;
  int located = 0;  // facts whose declaration was found
  int skipped = 0;  // facts with no declaration in scope
};

/// For every fact in the groundtruth proof, the declaring chunk inside the
/// lemma's import closure or earlier in its own theory, first 5 lines each.
DependencyAugmentation dependency_augment(const ChunkLibrary& lib, const DependencyGraph& graph, const Lemma& lemma,
                                          const std::set<std::string>& stoplist);
DependencyAugmentation dependency_augment(const ChunkLibrary& lib, const DependencyGraph& graph,
                                          const IsolatedBench& bench, const Lemma& lemma,
                                          const std::set<std::string>& stoplist);

}  // namespace isobench

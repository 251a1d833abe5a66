#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "isobench/corpus.hpp"
#include "isobench/error.hpp"

namespace isobench {

/// Parses the `theory NAME imports ... begin` header and locates the closing
/// `end`. Lemmas are not extracted here (see extract_lemmas).
///
/// Throws MissingHeader, UnterminatedTheory or SelfImport.
TheoryFile parse_theory(std::string_view text, std::string_view id, std::string path = {});

struct ExtractionIssue {
  ErrorCode code;
  int line;
  std::string message;
};

struct Extraction {
  std::vector<Lemma> lemmas;
  std::vector<ExtractionIssue> issues;  // lemmas whose proof never terminated
};

/// Keyword-driven lemma extraction.
///
/// A lemma opens at a line whose first token is `lemma` or `theorem` and its
/// proof runs to the first `done` or `qed` at proof depth zero, or to the end
/// of a complete `by` statement. Comments, strings and cartouches are masked
/// before scanning, and bracket balance is tracked so a multi-line
/// `by (...)` is taken whole. A lemma without a terminator is reported in
/// `issues` and scanning resumes at the command that interrupted it.
Extraction extract_lemmas(const TheoryFile& theory);

/// Convenience: parse_theory followed by extract_lemmas, issues discarded.
TheoryFile parse_theory_with_lemmas(std::string_view text, std::string_view id, std::string path = {});

/// declarative iff the first proof token is `proof`.
Style classify_style(std::string_view proof_text);
inline Style classify_style(const Lemma& lemma) { return classify_style(lemma.proof_text); }

/// Non-blank lines of a proof text.
int count_proof_lines(std::string_view proof_text);

/// Outer-syntax commands that open a new theory-level element.
bool is_theory_command(std::string_view word);
/// Isar proof commands (apply, by, have, qed, ...).
bool is_proof_command(std::string_view word);

}  // namespace isobench

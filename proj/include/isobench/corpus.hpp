#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace isobench {

enum class Style { Procedural, Declarative };
enum class Category { P1, P2, P3, D, Excluded };

const char* to_string(Style s) noexcept;
const char* to_string(Category c) noexcept;
Style parse_style(std::string_view s);
Category parse_category(std::string_view s);

/// The four categories that make up the benchmark proper.
inline constexpr Category kBenchCategories[] = {Category::P1, Category::P2, Category::P3, Category::D};

/// Inclusive 1-based line range.
struct LineSpan {
  int first = 0;
  int last = 0;

  bool overlaps(const LineSpan& o) const { return first <= o.last && o.first <= last; }
  bool contains(int line) const { return first <= line && line <= last; }
  friend bool operator==(const LineSpan&, const LineSpan&) = default;
};

struct SessionSpec {
  std::string name;
  std::string directory;  // corpus-relative, "." for the corpus root
  std::optional<std::string> parent;
  std::vector<std::string> imported_sessions;
  std::vector<std::string> entry_theories;
  std::optional<std::string> description;  // cartouche payload, verbatim
  std::vector<std::string> other_directives;  // `options`, `directories`, ... verbatim
  std::string raw_stanza;

  /// parent followed by imported sessions, the session-level dependency edges.
  std::vector<std::string> dependencies() const;

  friend bool operator==(const SessionSpec&, const SessionSpec&) = default;
};

struct Lemma {
  std::string id;         // Session.Theory.name, `#k` appended for repeats
  std::string theory_id;  // Session.Theory
  std::string keyword;    // lemma | theorem
  std::string name;       // declared name, or anon#k
  std::vector<std::string> attributes;  // bracket payloads, e.g. "wp", "simp"
  std::string spec_text;
  std::string proof_text;
  int proof_line_count = 0;
  Style style = Style::Procedural;
  Category category = Category::Excluded;
  LineSpan span;
  int proof_first_line = 0;
  bool proof_on_spec_line = false;  // `lemma x: "P" by simp`
  bool in_locale = false;
  bool uses_sorry = false;  // `sorry` or `oops` anywhere in the proof

  /// spec and proof joined the way they appeared: a space when the proof
  /// starts on the statement's last line, a newline otherwise.
  std::string source_text() const;

  friend bool operator==(const Lemma&, const Lemma&) = default;
};

struct TheoryFile {
  std::string id;       // Session.Theory
  std::string session;  // owning session
  std::string name;     // theory name from the header
  std::string path;     // corpus-relative path of the .thy file
  std::vector<std::string> imports;
  std::string text;     // full file text
  std::size_t header_begin = 0;  // byte offset of the `theory` keyword
  std::size_t header_end = 0;    // one past the header's `begin`
  std::size_t end_offset = 0;    // byte offset of the closing `end`
  LineSpan body;                 // lines strictly between header and closing end
  std::vector<Lemma> lemmas;
};

/// Category assignment: pure function of style, non-blank proof line count and
/// whether the lemma sits inside a local theory target.
Category categorize(Style style, int proof_line_count, bool in_locale) noexcept;

/// As above, additionally excluding proofs that contain `sorry`/`oops`.
Category categorize(const Lemma& lemma) noexcept;

}  // namespace isobench

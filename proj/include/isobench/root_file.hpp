#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "isobench/corpus.hpp"

namespace isobench {

struct ByteSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
  friend bool operator==(const ByteSpan&, const ByteSpan&) = default;
};

/// A parsed ROOT file. Stanzas and unparsed regions partition the file, so
/// `reconstruct()` gives back the original bytes.
struct RootFile {
  struct Region {
    ByteSpan span;
    std::string text;
  };

  std::string path;
  std::vector<SessionSpec> stanzas;
  std::vector<ByteSpan> stanza_spans;  // parallel to `stanzas`
  std::vector<Region> unparsed_regions;

  std::string reconstruct() const;
};

/// Parses ROOT syntax. `root_dir` is the corpus-relative directory holding the
/// file; session directories are resolved against it and default to it when a
/// stanza has no `in` clause.
RootFile parse_root(std::string_view text, std::string_view root_dir = ".", std::string path = "ROOT");

/// Canonical stanza text: `session`, `in`, `=`, parent `+`, then the
/// `description`, `sessions` and `theories` blocks, one entry per line.
/// Only these fields are emitted; `other_directives` are not.
std::string emit_stanza(const SessionSpec& spec);

/// Joins `root_dir` and `dir` lexically; "." for the corpus root.
std::string join_relative(std::string_view root_dir, std::string_view dir);

}  // namespace isobench

#pragma once

#include <map>
#include <string>
#include <vector>

#include "isobench/corpus.hpp"
#include "isobench/error.hpp"
#include "isobench/graph.hpp"
#include "isobench/root_file.hpp"

namespace isobench {

struct CorpusIssue {
  std::string path;  // corpus-relative
  ErrorCode code;
  std::string message;
};

/// A loaded corpus: sessions from every ROOT file, the theories reachable from
/// their entry theories, and the extracted lemmas.
struct Corpus {
  std::string root;  // absolute path of the corpus directory
  std::vector<SessionSpec> sessions;
  std::vector<TheoryFile> theories;  // sorted by id
  std::vector<CorpusIssue> issues;

  const TheoryFile* find_theory(const std::string& id) const;
  const SessionSpec* find_session(const std::string& name) const;
  const Lemma* find_lemma(const std::string& id) const;
  std::vector<const Lemma*> lemmas() const;
  std::map<Category, int> category_counts() const;

  DependencyGraph graph() const { return DependencyGraph::build(sessions, theories); }
};

/// All files named ROOT below `dir`, as corpus-relative paths in sorted order.
std::vector<std::string> find_root_files(const std::string& dir);

/// Loads a corpus directory. Per-file parse failures are collected in
/// `issues` rather than thrown; a corpus without ROOT files throws IoError.
Corpus load_corpus(const std::string& dir);

}  // namespace isobench

#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "isobench/corpus.hpp"

namespace isobench {

/// Sessions and theories that come with the prover itself (HOL, Main, ...).
/// They may be named as parents or imports but are never graph nodes.
bool is_builtin_session(std::string_view name);
bool is_builtin_theory(std::string_view import);

/// Session- and theory-level import graph of a corpus. Immutable once built.
class DependencyGraph {
 public:
  /// Throws UnresolvedSession, UnresolvedImport (with the importing theory as
  /// the site) or DependencyCycle (with the offending path).
  static DependencyGraph build(const std::vector<SessionSpec>& sessions, const std::vector<TheoryFile>& theories);

  const std::set<std::string>& session_nodes() const { return session_nodes_; }
  const std::set<std::string>& theory_nodes() const { return theory_nodes_; }
  const std::vector<std::string>& session_deps(const std::string& session) const;
  const std::vector<std::string>& theory_imports(const std::string& theory) const;
  const std::string& owner(const std::string& theory) const;
  bool has_theory(const std::string& theory) const { return theory_nodes_.count(theory) > 0; }
  std::size_t theory_edge_count() const;
  std::size_t session_edge_count() const;

  /// Every session reachable through parent/`sessions` edges, excluding `session`.
  std::set<std::string> session_ancestors(const std::string& session) const;

  /// Transitive imports of `theory` (itself excluded), topologically ordered
  /// with imports first; ties go to the lexicographically smaller id.
  /// Throws UnknownTheory.
  std::vector<std::string> theory_closure(const std::string& theory) const;

  /// Resolves an import as written in `importer` to a theory id, or nullopt
  /// for builtin theories. Throws UnresolvedImport.
  std::optional<std::string> resolve_import(const TheoryFile& importer, const std::string& import) const;

 private:
  std::set<std::string> session_nodes_;
  std::set<std::string> theory_nodes_;
  std::map<std::string, std::vector<std::string>> session_deps_;
  std::map<std::string, std::vector<std::string>> theory_imports_;
  std::map<std::string, std::string> membership_;
  std::map<std::string, std::string> theory_by_path_;
};

}  // namespace isobench

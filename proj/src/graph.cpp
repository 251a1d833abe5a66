#include "isobench/graph.hpp"

#include <algorithm>
#include <deque>
#include <filesystem>
#include <functional>

#include "isobench/error.hpp"
#include "isobench/root_file.hpp"

namespace isobench {
namespace {

const std::vector<std::string> kEmpty;

std::string parent_dir(const std::string& path) {
  auto p = std::filesystem::path(path).parent_path().generic_string();
  return p.empty() ? "." : p;
}

std::string cycle_text(const std::vector<std::string>& path) {
  std::string s = "[";
  for (std::size_t i = 0; i < path.size(); ++i) s += (i ? "," : "") + path[i];
  return s + "]";
}

/// DFS cycle check over an adjacency map; reports the first cycle found in
/// lexicographic visiting order.
void check_acyclic(const std::map<std::string, std::vector<std::string>>& adj) {
  enum class Mark { None, Active, Done };
  std::map<std::string, Mark> mark;
  std::vector<std::string> stack;
  std::function<void(const std::string&)> visit = [&](const std::string& u) {
    mark[u] = Mark::Active;
    stack.push_back(u);
    if (auto it = adj.find(u); it != adj.end()) {
      for (const auto& v : it->second) {
        if (mark[v] == Mark::Active) {
          auto from = std::find(stack.begin(), stack.end(), v);
          std::vector<std::string> cyc(from, stack.end());
          cyc.push_back(v);
          throw Error(ErrorCode::DependencyCycle, cycle_text(cyc));
        }
        if (mark[v] == Mark::None) visit(v);
      }
    }
    stack.pop_back();
    mark[u] = Mark::Done;
  };
  for (const auto& [u, _] : adj)
    if (mark[u] == Mark::None) visit(u);
}

}  // namespace

bool is_builtin_session(std::string_view name) {
  return name == "Pure" || name == "HOL" || name == "Main" || name.substr(0, 4) == "HOL-";
}

bool is_builtin_theory(std::string_view import) {
  if (import == "Main" || import == "Complex_Main" || import == "Pure") return true;
  auto dot = import.find('.');
  return dot != std::string_view::npos && is_builtin_session(import.substr(0, dot));
}

DependencyGraph DependencyGraph::build(const std::vector<SessionSpec>& sessions,
                                       const std::vector<TheoryFile>& theories) {
  DependencyGraph g;
  for (const auto& s : sessions) {
    if (!g.session_nodes_.insert(s.name).second) throw Error(ErrorCode::DuplicateSession, s.name);
  }
  for (const auto& s : sessions) {
    auto& deps = g.session_deps_[s.name];
    for (const auto& d : s.dependencies()) {
      if (is_builtin_session(d)) continue;
      if (!g.session_nodes_.count(d))
        throw Error(ErrorCode::UnresolvedSession, d + " (referenced by session " + s.name + ")");
      deps.push_back(d);
    }
  }
  check_acyclic(g.session_deps_);

  for (const auto& th : theories) {
    g.theory_nodes_.insert(th.id);
    g.membership_[th.id] = th.session;
    if (!th.path.empty()) g.theory_by_path_[th.path] = th.id;
  }
  for (const auto& th : theories) {
    auto& imports = g.theory_imports_[th.id];
    for (const auto& imp : th.imports) {
      auto resolved = g.resolve_import(th, imp);
      if (resolved && std::find(imports.begin(), imports.end(), *resolved) == imports.end())
        imports.push_back(*resolved);
    }
  }
  check_acyclic(g.theory_imports_);
  return g;
}

std::optional<std::string> DependencyGraph::resolve_import(const TheoryFile& importer,
                                                           const std::string& import) const {
  if (is_builtin_theory(import)) return std::nullopt;
  auto fail = [&]() -> std::optional<std::string> {
    throw Error(ErrorCode::UnresolvedImport, import + " (imported by " + importer.id + ")");
  };
  const std::string owner_session = importer.session;
  auto reachable = session_ancestors(owner_session);
  auto visible = [&](const std::string& id) {
    auto it = membership_.find(id);
    return it != membership_.end() && (it->second == owner_session || reachable.count(it->second));
  };

  // file-relative resolution (quoted paths and same-directory bare names)
  if (!importer.path.empty()) {
    std::string rel = join_relative(parent_dir(importer.path), import + ".thy");
    if (auto it = theory_by_path_.find(rel); it != theory_by_path_.end()) {
      if (visible(it->second)) return it->second;
    }
  }
  if (import.find('/') != std::string::npos) return fail();

  if (auto dot = import.find('.'); dot != std::string::npos) {
    std::string session = import.substr(0, dot);
    if (session_nodes_.count(session)) {
      if (theory_nodes_.count(import) && visible(import)) return import;
      return fail();
    }
  }
  if (std::string own = owner_session + "." + import; theory_nodes_.count(own)) return own;

  // breadth-first over session dependencies, parent first
  std::deque<std::string> queue(session_deps(owner_session).begin(), session_deps(owner_session).end());
  std::set<std::string> seen(queue.begin(), queue.end());
  while (!queue.empty()) {
    std::string s = queue.front();
    queue.pop_front();
    if (std::string cand = s + "." + import; theory_nodes_.count(cand)) return cand;
    for (const auto& d : session_deps(s))
      if (seen.insert(d).second) queue.push_back(d);
  }
  return fail();
}

const std::vector<std::string>& DependencyGraph::session_deps(const std::string& session) const {
  auto it = session_deps_.find(session);
  return it == session_deps_.end() ? kEmpty : it->second;
}

const std::vector<std::string>& DependencyGraph::theory_imports(const std::string& theory) const {
  auto it = theory_imports_.find(theory);
  if (it == theory_imports_.end()) throw Error(ErrorCode::UnknownTheory, theory);
  return it->second;
}

const std::string& DependencyGraph::owner(const std::string& theory) const {
  auto it = membership_.find(theory);
  if (it == membership_.end()) throw Error(ErrorCode::UnknownTheory, theory);
  return it->second;
}

std::size_t DependencyGraph::theory_edge_count() const {
  std::size_t n = 0;
  for (const auto& [_, v] : theory_imports_) n += v.size();
  return n;
}

std::size_t DependencyGraph::session_edge_count() const {
  std::size_t n = 0;
  for (const auto& [_, v] : session_deps_) n += v.size();
  return n;
}

std::set<std::string> DependencyGraph::session_ancestors(const std::string& session) const {
  std::set<std::string> out;
  std::vector<std::string> todo = session_deps(session);
  while (!todo.empty()) {
    std::string s = todo.back();
    todo.pop_back();
    if (!out.insert(s).second) continue;
    for (const auto& d : session_deps(s)) todo.push_back(d);
  }
  return out;
}

std::vector<std::string> DependencyGraph::theory_closure(const std::string& theory) const {
  if (!theory_nodes_.count(theory)) throw Error(ErrorCode::UnknownTheory, theory);
  std::set<std::string> members;
  std::vector<std::string> todo = theory_imports(theory);
  while (!todo.empty()) {
    std::string t = todo.back();
    todo.pop_back();
    if (!members.insert(t).second) continue;
    for (const auto& d : theory_imports(t)) todo.push_back(d);
  }
  // Kahn's algorithm restricted to the closure; the ready set is ordered so
  // ties resolve lexicographically.
  std::map<std::string, int> pending;
  std::map<std::string, std::vector<std::string>> dependents;
  for (const auto& t : members) {
    pending[t] = static_cast<int>(theory_imports(t).size());
    for (const auto& d : theory_imports(t)) dependents[d].push_back(t);
  }
  std::set<std::string> ready;
  for (const auto& [t, n] : pending)
    if (n == 0) ready.insert(t);
  std::vector<std::string> order;
  while (!ready.empty()) {
    std::string t = *ready.begin();
    ready.erase(ready.begin());
    order.push_back(t);
    for (const auto& u : dependents[t])
      if (--pending[u] == 0) ready.insert(u);
  }
  return order;
}

}  // namespace isobench

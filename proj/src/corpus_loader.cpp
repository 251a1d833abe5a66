#include "isobench/corpus_loader.hpp"

#include <algorithm>
#include <deque>
#include <filesystem>
#include <set>

#include "isobench/text.hpp"
#include "isobench/theory.hpp"

namespace fs = std::filesystem;

namespace isobench {
namespace {

std::string parent_of(const std::string& rel) {
  auto p = fs::path(rel).parent_path().generic_string();
  return p.empty() ? "." : p;
}

std::string base_name(const std::string& import) {
  auto slash = import.find_last_of('/');
  return slash == std::string::npos ? import : import.substr(slash + 1);
}

}  // namespace

const TheoryFile* Corpus::find_theory(const std::string& id) const {
  auto it = std::lower_bound(theories.begin(), theories.end(), id,
                             [](const TheoryFile& t, const std::string& k) { return t.id < k; });
  return it != theories.end() && it->id == id ? &*it : nullptr;
}

const SessionSpec* Corpus::find_session(const std::string& name) const {
  for (const auto& s : sessions)
    if (s.name == name) return &s;
  return nullptr;
}

const Lemma* Corpus::find_lemma(const std::string& id) const {
  for (const auto& th : theories) {
    if (id.compare(0, th.id.size(), th.id) != 0) continue;
    for (const auto& l : th.lemmas)
      if (l.id == id) return &l;
  }
  return nullptr;
}

std::vector<const Lemma*> Corpus::lemmas() const {
  std::vector<const Lemma*> out;
  for (const auto& th : theories)
    for (const auto& l : th.lemmas) out.push_back(&l);
  return out;
}

std::map<Category, int> Corpus::category_counts() const {
  std::map<Category, int> counts{{Category::P1, 0}, {Category::P2, 0}, {Category::P3, 0}, {Category::D, 0},
                                 {Category::Excluded, 0}};
  for (const auto* l : lemmas()) ++counts[l->category];
  return counts;
}

std::vector<std::string> find_root_files(const std::string& dir) {
  std::vector<std::string> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().filename() == "ROOT")
      out.push_back(fs::relative(entry.path(), dir).generic_string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

Corpus load_corpus(const std::string& dir) {
  Corpus corpus;
  corpus.root = fs::absolute(dir).lexically_normal().generic_string();
  auto roots = find_root_files(dir);
  if (roots.empty()) throw Error(ErrorCode::IoError, "no ROOT file under " + dir);

  for (const auto& rel : roots) {
    try {
      auto root = parse_root(read_file((fs::path(dir) / rel).string()), parent_of(rel), rel);
      for (auto& s : root.stanzas) corpus.sessions.push_back(std::move(s));
    } catch (const Error& e) {
      corpus.issues.push_back({rel, e.code(), e.what()});
    }
  }

  std::set<std::string> session_names;
  for (const auto& s : corpus.sessions) session_names.insert(s.name);
  std::set<std::string> claimed;  // theory paths already owned by a session

  for (const auto& session : corpus.sessions) {
    // (relative path without .thy, directory it was named from)
    std::deque<std::pair<std::string, std::string>> todo;
    for (const auto& t : session.entry_theories) todo.emplace_back(t, session.directory);
    while (!todo.empty()) {
      auto [name, from_dir] = todo.front();
      todo.pop_front();
      std::string rel = join_relative(from_dir, name + ".thy");
      if (!fs::is_regular_file(fs::path(dir) / rel)) {
        if (from_dir == session.directory && name.find('/') == std::string::npos &&
            std::find(session.entry_theories.begin(), session.entry_theories.end(), name) !=
                session.entry_theories.end())
          corpus.issues.push_back({rel, ErrorCode::UnknownTheory, "entry theory " + name + " not found"});
        continue;
      }
      if (!claimed.insert(rel).second) continue;
      std::string id = session.name + "." + base_name(name);
      try {
        TheoryFile th = parse_theory(read_file((fs::path(dir) / rel).string()), id, rel);
        th.session = session.name;
        auto extraction = extract_lemmas(th);
        th.lemmas = std::move(extraction.lemmas);
        for (const auto& issue : extraction.issues) corpus.issues.push_back({rel, issue.code, issue.message});
        for (const auto& imp : th.imports) {
          if (is_builtin_theory(imp)) continue;
          auto dot = imp.find('.');
          if (imp.find('/') == std::string::npos && dot != std::string::npos &&
              session_names.count(imp.substr(0, dot)))
            continue;  // session-qualified: owned elsewhere
          todo.emplace_back(imp, parent_of(rel));
        }
        corpus.theories.push_back(std::move(th));
      } catch (const Error& e) {
        corpus.issues.push_back({rel, e.code(), e.what()});
      }
    }
  }
  std::sort(corpus.theories.begin(), corpus.theories.end(),
            [](const TheoryFile& a, const TheoryFile& b) { return a.id < b.id; });
  return corpus;
}

}  // namespace isobench

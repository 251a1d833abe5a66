#include "isobench/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <json.hpp>

#include "isobench/error.hpp"
#include "isobench/text.hpp"

namespace isobench {

std::vector<std::string> tokenize_terms(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char raw : text) {
    char c = static_cast<char>(std::tolower(static_cast<unsigned char>(raw)));
    if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_') {
      cur += c;
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

ChunkLibrary ChunkLibrary::from_chunks(std::vector<Chunk> chunks) {
  ChunkLibrary lib;
  lib.chunks = std::move(chunks);
  long total = 0;
  for (const auto& c : lib.chunks) {
    std::map<std::string, int> tf;
    auto terms = tokenize_terms(c.text);
    for (const auto& t : terms) ++tf[t];
    for (const auto& [t, n] : tf) ++lib.doc_freq[t];
    lib.term_counts.push_back(std::move(tf));
    lib.lengths.push_back(static_cast<int>(terms.size()));
    total += static_cast<long>(terms.size());
  }
  lib.avg_length = lib.chunks.empty() ? 0.0 : static_cast<double>(total) / static_cast<double>(lib.chunks.size());
  return lib;
}

ChunkLibrary build_chunks(const std::vector<TheoryFile>& theories) {
  std::vector<Chunk> chunks;
  for (const auto& th : theories) {
    auto lines = split_lines(th.text);
    Chunk cur;
    auto flush = [&] {
      if (cur.text.empty() && cur.line_span.first == 0) return;
      cur.id = static_cast<int>(chunks.size());
      chunks.push_back(std::move(cur));
      cur = Chunk{};
    };
    for (std::size_t i = 0; i < lines.size(); ++i) {
      int line = static_cast<int>(i) + 1;
      if (is_blank(lines[i])) {
        flush();
        continue;
      }
      if (cur.line_span.first == 0) {
        cur.theory_id = th.id;
        cur.line_span.first = line;
      } else {
        cur.text += '\n';
      }
      cur.text += std::string(lines[i]);
      cur.line_span.last = line;
    }
    flush();
  }
  return ChunkLibrary::from_chunks(std::move(chunks));
}

void save_library(const ChunkLibrary& lib, const std::string& path) {
  nlohmann::ordered_json j;
  j["format"] = "isobench-chunks";
  j["version"] = kIndexVersion;
  j["avg_length"] = lib.avg_length;
  j["doc_freq"] = lib.doc_freq;
  auto& arr = j["chunks"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < lib.chunks.size(); ++i) {
    const auto& c = lib.chunks[i];
    arr.push_back({{"id", c.id},
                   {"theory_id", c.theory_id},
                   {"span", {c.line_span.first, c.line_span.last}},
                   {"length", lib.lengths[i]},
                   {"text", c.text}});
  }
  write_file(path, j.dump() + "\n");
}

ChunkLibrary load_library(const std::string& path) {
  auto j = nlohmann::json::parse(read_file(path), nullptr, false);
  if (j.is_discarded() || j.value("format", "") != "isobench-chunks")
    throw Error(ErrorCode::IoError, path + ": not a chunk index");
  if (j.value("version", 0) != kIndexVersion)
    throw Error(ErrorCode::IoError, path + ": index version " + std::to_string(j.value("version", 0)) +
                                        ", expected " + std::to_string(kIndexVersion));
  std::vector<Chunk> chunks;
  for (const auto& c : j.at("chunks")) {
    Chunk ch;
    ch.id = c.at("id");
    ch.theory_id = c.at("theory_id");
    ch.line_span = {c.at("span")[0], c.at("span")[1]};
    ch.text = c.at("text");
    chunks.push_back(std::move(ch));
  }
  ChunkLibrary lib = ChunkLibrary::from_chunks(std::move(chunks));
  bool consistent = j.at("doc_freq").get<std::map<std::string, int>>() == lib.doc_freq;
  for (std::size_t i = 0; consistent && i < lib.chunks.size(); ++i)
    consistent = lib.chunks[i].id == static_cast<int>(i) && j["chunks"][i].at("length") == lib.lengths[i];
  if (!consistent) throw Error(ErrorCode::IoError, path + ": stored statistics do not match chunks");
  return lib;
}

std::vector<double> bm25_scores(const ChunkLibrary& lib, std::string_view query, const Bm25Params& p) {
  auto terms = tokenize_terms(query);
  if (terms.empty()) throw Error(ErrorCode::EmptyQuery, std::string(query.substr(0, 60)));
  const double n = static_cast<double>(lib.chunks.size());
  std::vector<double> scores(lib.chunks.size(), 0.0);
  for (const auto& t : terms) {
    auto df_it = lib.doc_freq.find(t);
    if (df_it == lib.doc_freq.end()) continue;
    const double df = df_it->second;
    const double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
    for (std::size_t i = 0; i < lib.chunks.size(); ++i) {
      auto tf_it = lib.term_counts[i].find(t);
      if (tf_it == lib.term_counts[i].end()) continue;
      const double tf = tf_it->second;
      const double norm = lib.avg_length > 0 ? lib.lengths[i] / lib.avg_length : 0.0;
      scores[i] += idf * tf * (p.k1 + 1.0) / (tf + p.k1 * (1.0 - p.b + p.b * norm));
    }
  }
  return scores;
}

namespace {

std::vector<std::pair<int, double>> order(const std::vector<double>& scores, const std::vector<int>& ids) {
  std::vector<std::pair<int, double>> out;
  for (int id : ids) out.emplace_back(id, scores[static_cast<std::size_t>(id)]);
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  return out;
}

std::string first_lines(const std::string& text, int n) {
  std::string out;
  int taken = 0;
  for (auto line : split_lines(text)) {
    if (taken++ == n) break;
    if (!out.empty()) out += '\n';
    out += std::string(line);
  }
  return out;
}

}  // namespace

std::vector<std::pair<int, double>> bm25_rank(const ChunkLibrary& lib, std::string_view query, std::size_t top_n,
                                              const Bm25Params& params) {
  if (top_n < 1) throw Error(ErrorCode::ConfigError, "top_n must be >= 1");
  auto scores = bm25_scores(lib, query, params);
  std::vector<int> ids(lib.chunks.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<int>(i);
  auto ranked = order(scores, ids);
  if (ranked.size() > top_n) ranked.resize(top_n);
  return ranked;
}

bool chunk_holds_lemma(const Chunk& chunk, const Lemma& lemma) {
  return chunk.theory_id == lemma.theory_id && chunk.line_span.overlaps(lemma.span);
}

std::string similar_augment(const ChunkLibrary& lib, const Lemma& lemma) {
  std::vector<int> ids;
  for (const auto& c : lib.chunks)
    if (!chunk_holds_lemma(c, lemma)) ids.push_back(c.id);
  if (ids.empty()) throw Error(ErrorCode::NoCandidate, lemma.id);
  auto ranked = order(bm25_scores(lib, lemma.spec_text), ids);
  const Chunk& best = lib.chunks[static_cast<std::size_t>(ranked.front().first)];
  return "<sim>\n" + first_lines(best.text, kSimilarLines) + "\n</sim>";
}

// ---------------------------------------------------------------------------
// applied facts

std::set<std::string> default_fact_stoplist() {
  static const char* kWords[] = {
      // methods
      "simp", "simp_all", "auto", "clarsimp", "fastforce", "force", "blast", "metis", "meson", "rule", "erule",
      "drule", "frule", "intro", "elim", "dest", "wp", "wpsimp", "wpc", "cases", "case_tac", "induct", "induct_tac",
      "fact", "assumption", "unfold", "fold", "subst", "arith", "linarith", "presburger", "rule_tac", "erule_tac",
      "drule_tac", "frule_tac", "subgoal_tac", "cut_tac", "insert", "safe", "clarify", "standard", "this", "iprover",
      "argo", "eval", "smt", "rules", "fastsimp", "intro_classes", "transfer", "coinduct", "atomize", "succeed",
      "fail", "simp_tac", "corres", "corressimp", "wpfix", "rename_tac", "thin_tac", "case", "auto_tac", "fold_subgoals",
      "elim_tac", "fastforce_tac", "clarsimp_tac", "split", "iff", "cong", "add", "del", "only", "arbitrary", "taking",
      "rule_format", "no_asm", "no_asm_use", "no_asm_simp", "asm", "OF", "THEN", "of", "where", "in", "symmetric",
      "simplified", "unfolded", "folded", "rotated", "elim_format", "subgoal", "unfolding", "using", "from", "with",
      "then", "by", "apply", "done", "proof", "qed", "have", "show", "hence", "thus", "next", "fix", "assume",
      "obtain", "and", "moreover", "ultimately", "also", "finally", "note", "let", "is", "sorry", "oops", "prems",
      "assms", "that", "thesis", "True", "False", "prefer", "defer", "back", "supply",
  };
  return {std::begin(kWords), std::end(kWords)};
}

std::set<std::string> load_fact_stoplist(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open stop-list " + path);
  std::set<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto w = trim(line);
    if (!w.empty()) out.insert(std::string(w));
  }
  return out;
}

namespace {

using lex::Kind;

const std::set<std::string_view> kMethodCommands = {"by", "apply", "proof", "qed", "apply_end"};
const std::set<std::string_view> kFactCommands = {"using", "unfolding", "from", "with", "note"};
const std::set<std::string_view> kOtherCommands = {
    "done",     "have",    "show",   "hence",      "thus",  "then",  "next",     "fix",   "assume",  "obtain",
    "moreover", "ultimately", "also", "finally",  "let",   "case",  "sorry",    "oops",  "defer",   "prefer",
    "subgoal",  "define",  "consider", "interpret", "supply", "presume", "guess", "back",  "including"};
const std::set<std::string_view> kTermMethods = {"case_tac", "cases", "induct", "induct_tac", "rule_tac",
                                                 "erule_tac", "drule_tac", "frule_tac", "subgoal_tac", "cut_tac",
                                                 "coinduct", "subst", "rename_tac", "thin_tac", "induction"};
const std::set<std::string_view> kTermModifiers = {"arbitrary", "taking", "rule_format"};

class FactScanner {
 public:
  FactScanner(std::string_view src, const std::set<std::string>& stop)
      : src_(src), toks_(lex::tokenize(src)), stop_(stop) {}

  std::vector<std::string> run() {
    std::size_t i = 0;
    while (i < toks_.size()) {
      std::string_view w = word(i);
      if (kMethodCommands.count(w)) {
        i = methods(i + 1);
      } else if (kFactCommands.count(w)) {
        i = fact_list(i + 1);
      } else {
        ++i;
      }
    }
    return out_;
  }

 private:
  std::string_view word(std::size_t i) const {
    return i < toks_.size() && toks_[i].kind == Kind::Name ? toks_[i].text(src_) : std::string_view();
  }
  bool sym(std::size_t i, std::string_view s) const {
    return i < toks_.size() && toks_[i].kind == Kind::Symbol && toks_[i].text(src_) == s;
  }
  bool is_command(std::size_t i) const {
    auto w = word(i);
    return kMethodCommands.count(w) || kFactCommands.count(w) || kOtherCommands.count(w);
  }
  std::size_t matching(std::size_t open, std::string_view o, std::string_view c) const {
    int depth = 0;
    for (std::size_t i = open; i < toks_.size(); ++i) {
      if (sym(i, o)) ++depth;
      if (sym(i, c) && --depth == 0) return i;
    }
    return toks_.size();
  }

  void add(std::string_view name) {
    if (name.empty() || name == "_" || name.front() == '?') return;
    std::string s(name);
    if (stop_.count(s)) return;
    if (std::find(out_.begin(), out_.end(), s) == out_.end()) out_.push_back(std::move(s));
  }

  // `[OF a b]` / `[THEN x]` name facts; other attributes take terms or flags.
  std::size_t attributes(std::size_t open) {
    std::size_t close = matching(open, "[", "]");
    bool facts = false;
    for (std::size_t i = open + 1; i < close; ++i) {
      if (sym(i, ",")) {
        facts = false;
        continue;
      }
      if (sym(i, "[")) {
        if (facts) i = attributes(i);
        else i = matching(i, "[", "]");
        continue;
      }
      auto w = word(i);
      if (w == "OF" || w == "THEN") {
        facts = true;
      } else if (facts && !w.empty()) {
        add(w);
      }
    }
    return close;
  }

  // A fact reference: name with optional attributes.
  std::size_t fact_at(std::size_t i) {
    add(word(i));
    if (sym(i + 1, "[")) return attributes(i + 1) + 1;
    return i + 1;
  }

  std::size_t fact_list(std::size_t i) {
    while (i < toks_.size() && !is_command(i)) {
      if (toks_[i].kind == Kind::Name) {
        i = fact_at(i);
      } else if (sym(i, "(") || sym(i, "[")) {
        i = matching(i, sym(i, "(") ? "(" : "[", sym(i, "(") ? ")" : "]") + 1;
      } else {
        ++i;
      }
    }
    return i;
  }

  // One or more method expressions after by/apply/proof/qed.
  std::size_t methods(std::size_t i) {
    while (i < toks_.size()) {
      if (sym(i, "(")) {
        std::size_t close = matching(i, "(", ")");
        paren_method(i, close);
        i = close + 1;
        while (sym(i, "+") || sym(i, "?")) ++i;
        if (sym(i, "[")) i = matching(i, "[", "]") + 1;
      } else if (sym(i, "-")) {
        ++i;
      } else if (toks_[i].kind == Kind::Name && !is_command(i)) {
        ++i;  // bare method name
        if (sym(i, "[")) i = matching(i, "[", "]") + 1;
      } else {
        break;
      }
    }
    return i;
  }

  void paren_method(std::size_t open, std::size_t close) {
    bool expect_method = true;
    bool term_args = false;
    for (std::size_t i = open + 1; i < close; ++i) {
      const auto& t = toks_[i];
      if (t.kind == Kind::Symbol) {
        auto s = t.text(src_);
        if (s == "(" || s == "|" || s == "," || s == ";") {
          expect_method = true;
          term_args = false;
        } else if (s == "[") {
          i = term_args ? matching(i, "[", "]") : attributes(i);
        }
        continue;
      }
      if (t.kind != Kind::Name) continue;
      auto w = t.text(src_);
      if (expect_method) {
        expect_method = false;
        term_args = kTermMethods.count(w) > 0;
      } else if (sym(i + 1, ":")) {
        term_args = kTermModifiers.count(w) > 0;
        ++i;
      } else if (toks_.size() > i + 2 && toks_[i + 1].kind == Kind::Name && sym(i + 2, ":") &&
                 (word(i + 1) == "add" || word(i + 1) == "del" || word(i + 1) == "only")) {
        term_args = false;
        i += 2;
      } else if (w == "in") {
        term_args = false;
      } else if (!term_args) {
        add(w);
      }
    }
  }

  std::string_view src_;
  std::vector<lex::Token> toks_;
  const std::set<std::string>& stop_;
  std::vector<std::string> out_;
};

const std::set<std::string_view> kDeclKeywords = {
    "lemma",     "theorem",  "corollary", "proposition", "lemmas",    "definition",  "abbreviation",
    "fun",       "function", "primrec",   "inductive",   "inductive_set", "datatype", "record",
    "type_synonym", "typedecl", "locale",  "consts",      "axiomatization", "crunch",  "crunches",
    "schematic_goal", "coinductive", "nonterminal", "class", "instantiation", "specification"};

/// Names declared in a chunk, in order.
std::vector<std::string> declared_names(const Chunk& c) {
  std::vector<std::string> out;
  std::string_view src = c.text;
  auto toks = lex::tokenize(src);
  for (std::size_t i = 0; i < toks.size(); ++i) {
    if (toks[i].kind != Kind::Name || !kDeclKeywords.count(toks[i].text(src))) continue;
    std::size_t j = i + 1;
    if (j < toks.size() && toks[j].kind == Kind::Symbol && toks[j].text(src) == "(") {
      while (j < toks.size() && !(toks[j].kind == Kind::Symbol && toks[j].text(src) == ")")) ++j;
      ++j;
    }
    if (j < toks.size() && toks[j].kind == Kind::Name) out.emplace_back(toks[j].text(src));
  }
  return out;
}

/// Candidate declaration names for a fact: itself, then without the
/// conventional suffixes (`f_def`, `f.simps`, `t.splits`, `x(2)`).
std::vector<std::string> declaration_candidates(const std::string& fact) {
  std::vector<std::string> out{fact};
  auto base = fact;
  if (auto par = base.find('('); par != std::string::npos) base.erase(par);
  if (base.size() > 4 && base.compare(base.size() - 4, 4, "_def") == 0) out.push_back(base.substr(0, base.size() - 4));
  if (auto dot = base.find('.'); dot != std::string::npos) out.push_back(base.substr(0, dot));
  return out;
}

}  // namespace

std::vector<std::string> extract_applied_facts(std::string_view proof, const std::set<std::string>& stoplist) {
  try {
    return FactScanner(proof, stoplist).run();
  } catch (const Error&) {
    return {};
  }
}

std::vector<std::string> extract_applied_facts(std::string_view proof) {
  static const std::set<std::string> stop = default_fact_stoplist();
  return extract_applied_facts(proof, stop);
}

DependencyAugmentation dependency_augment(const ChunkLibrary& lib, const DependencyGraph& graph, const Lemma& lemma,
                                          const std::set<std::string>& stoplist) {
  DependencyAugmentation out;
  // import distance from the lemma's theory; the theory itself is 0
  std::map<std::string, int> distance{{lemma.theory_id, 0}};
  if (graph.has_theory(lemma.theory_id)) {
    std::deque<std::string> todo{lemma.theory_id};
    while (!todo.empty()) {
      auto t = todo.front();
      todo.pop_front();
      for (const auto& imp : graph.theory_imports(t))
        if (distance.emplace(imp, distance[t] + 1).second) todo.push_back(imp);
    }
  }
  // declared name -> in-scope chunks
  std::map<std::string, std::vector<const Chunk*>> decls;
  for (const auto& c : lib.chunks) {
    auto d = distance.find(c.theory_id);
    if (d == distance.end()) continue;
    if (d->second == 0 && c.line_span.last >= lemma.span.first) continue;
    for (auto& name : declared_names(c)) decls[name].push_back(&c);
  }
  auto nearer = [&](const Chunk* a, const Chunk* b) {
    int da = distance.at(a->theory_id), db = distance.at(b->theory_id);
    if (da != db) return da < db;
    if (a->theory_id != b->theory_id) return a->theory_id < b->theory_id;
    return da == 0 ? a->line_span.first > b->line_span.first : a->line_span.first < b->line_span.first;
  };
  std::vector<std::string> blocks;
  for (const auto& fact : extract_applied_facts(lemma.proof_text, stoplist)) {
    const Chunk* best = nullptr;
    for (const auto& cand : declaration_candidates(fact)) {
      auto it = decls.find(cand);
      if (it == decls.end()) continue;
      for (const Chunk* c : it->second)
        if (!best || nearer(c, best)) best = c;
      if (best) break;
    }
    if (!best) {
      ++out.skipped;
      continue;
    }
    ++out.located;
    if (std::find(out.chunk_ids.begin(), out.chunk_ids.end(), best->id) != out.chunk_ids.end()) continue;
    out.chunk_ids.push_back(best->id);
    blocks.push_back("<dep>\n" + first_lines(best->text, kDependencyLines) + "\n</dep>");
  }
  out.text = join(blocks, "\n");
  return out;
}

DependencyAugmentation dependency_augment(const ChunkLibrary& lib, const DependencyGraph& graph,
                                          const IsolatedBench& bench, const Lemma& lemma,
                                          const std::set<std::string>& stoplist) {
  if (bench.lemma_id != lemma.id) throw Error(ErrorCode::ConfigError, "bench " + bench.lemma_id + " is not for " + lemma.id);
  return dependency_augment(lib, graph, lemma, stoplist);
}

}  // namespace isobench

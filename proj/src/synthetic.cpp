#include "isobench/synthetic.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <random>
#include <set>

#include "isobench/error.hpp"
#include "isobench/text.hpp"

namespace fs = std::filesystem;

namespace isobench {
namespace {

struct Rng {
  explicit Rng(std::uint64_t seed) : g(seed) {}
  // modulo keeps the sequence identical across standard libraries
  std::uint64_t below(std::uint64_t n) { return g() % n; }
  int range(int lo, int hi) { return lo + static_cast<int>(below(static_cast<std::uint64_t>(hi - lo + 1))); }
  bool chance(int pct) { return below(100) < static_cast<std::uint64_t>(pct); }
  std::mt19937_64 g;
};

struct Fact {
  std::string name;
  std::vector<std::string> tags;  // sorted
  bool is_lemma = false;
};

struct TheoryPlan {
  std::string name;
  std::string path;  // corpus-relative
  std::vector<std::string> imports;  // as written in the header
  std::vector<int> deps;             // indices of imported theories
  std::string session;
  std::string prefix;  // lowercase fact prefix
};

struct SessionPlan {
  std::string name;
  std::string prefix;
  std::string corpus_dir;
  std::string root_file;
  std::string dir_in_root;  // empty when the session sits next to its ROOT
  std::string parent;
  std::vector<std::string> sessions;
  std::string description;
  std::vector<int> theories;
  std::string entry;
};

class Generator {
 public:
  explicit Generator(const SyntheticParams& p) : p_(p), rng_(p.seed) {}

  SyntheticCorpus run() {
    plan();
    for (std::size_t t = 0; t < theories_.size(); ++t) emit_theory(static_cast<int>(t));
    emit_roots();
    return std::move(out_);
  }

 private:
  // -- layout --
  void plan() {
    const int n = p_.sessions;
    for (int s = 0; s < n; ++s) {
      SessionPlan sp;
      bool last = s == n - 1 && n >= 2;
      if (s == 0) {
        sp.name = "SynLib", sp.prefix = "Lib", sp.corpus_dir = "lib";
        sp.description = "Synthetic base library.";
      } else if (last) {
        sp.name = "SynProof", sp.prefix = "Proof", sp.corpus_dir = "proof";
      } else if (s == 1) {
        sp.name = "SynSpec", sp.prefix = "Spec", sp.corpus_dir = "spec";
        sp.description = "Synthetic specifications\n    built on the base library.";
      } else {
        sp.name = "SynExt" + std::to_string(s), sp.prefix = "Ext" + std::to_string(s);
        sp.corpus_dir = "ext" + std::to_string(s);
      }
      sp.root_file = last ? "proof/ROOT" : "ROOT";
      sp.dir_in_root = last ? "" : sp.corpus_dir;
      sp.parent = s == 0 ? "HOL" : sessions_[s - 1].name;
      if (last && n >= 3) sp.sessions.push_back(sessions_[0].name);
      sessions_.push_back(sp);
      plan_theories(s);
    }
  }

  void plan_theories(int s) {
    SessionPlan& sp = sessions_[s];
    const int T = p_.theories_per_session;
    const bool last = sp.name == "SynProof";
    auto add = [&](const std::string& name, const std::string& rel_dir) {
      TheoryPlan tp;
      tp.name = name;
      tp.path = sp.corpus_dir + "/" + (rel_dir.empty() ? "" : rel_dir + "/") + name + ".thy";
      tp.session = sp.name;
      tp.prefix = to_lower(name);
      tp.prefix.erase(std::remove(tp.prefix.begin(), tp.prefix.end(), '_'), tp.prefix.end());
      theories_.push_back(tp);
      int idx = static_cast<int>(theories_.size()) - 1;
      sp.theories.push_back(idx);
      by_name_[sp.name + "." + name] = idx;
      return idx;
    };
    auto import = [&](int idx, const std::string& written, const std::string& qualified) {
      theories_[idx].imports.push_back(written);
      theories_[idx].deps.push_back(by_name_.at(qualified));
    };
    const SessionPlan* prev = s > 0 ? &sessions_[s - 1] : nullptr;
    auto prev_theory = [&](int k) { return prev->prefix + "_" + std::to_string(k); };
    int extra = -1;
    if (last) {
      extra = add(sp.prefix + "_Extra", "sub");
      import(extra, "\"" + prev->name + "." + prev_theory(1) + "\"", prev->name + "." + prev_theory(1));
    }
    for (int t = 1; t <= T; ++t) {
      std::string name = sp.prefix + "_" + std::to_string(t);
      int idx = add(name, "");
      auto own = [&](int k) { return sp.name + "." + sp.prefix + "_" + std::to_string(k); };
      if (t == 1) {
        if (!prev) {
          theories_[idx].imports.push_back("Main");
        } else {
          import(idx, "\"" + prev->name + "." + prev_theory(T) + "\"", prev->name + "." + prev_theory(T));
        }
        if (extra >= 0) import(idx, "\"sub/" + sp.prefix + "_Extra\"", sp.name + "." + sp.prefix + "_Extra");
      } else {
        import(idx, sp.prefix + "_" + std::to_string(t - 1), own(t - 1));
        if (t == 2 && prev) import(idx, prev_theory(std::min(2, T)), prev->name + "." + prev_theory(std::min(2, T)));
        if (t == T && T >= 4) import(idx, "\"" + sp.prefix + "_" + std::to_string(t - 2) + "\"", own(t - 2));
      }
    }
    sp.entry = sp.prefix + "_" + std::to_string(T);
  }

  void emit_roots() {
    std::map<std::string, std::string> roots;
    roots["ROOT"] = "(* Synthetic benchmark corpus. *)\n\nchapter Synthetic\n";
    for (const auto& sp : sessions_) {
      std::string& r = roots[sp.root_file];
      if (!r.empty()) r += "\n";
      r += "session " + sp.name;
      if (!sp.dir_in_root.empty()) r += " in \"" + sp.dir_in_root + "\"";
      r += " = " + sp.parent + " +\n";
      if (!sp.description.empty()) r += "  description \\<open>" + sp.description + "\\<close>\n";
      if (sp.name == "SynLib") r += "  options [timeout = 600]\n";
      if (!sp.sessions.empty()) {
        r += "  sessions\n";
        for (const auto& s : sp.sessions) r += "    " + s + "\n";
      }
      r += "  theories\n    " + sp.entry + "\n";
    }
    for (auto& [path, text] : roots) out_.files[path] = text;
  }

  // -- facts --
  std::set<int> closure(int t) const {
    std::set<int> out;
    std::vector<int> todo = theories_[t].deps;
    while (!todo.empty()) {
      int d = todo.back();
      todo.pop_back();
      if (!out.insert(d).second) continue;
      for (int e : theories_[d].deps) todo.push_back(e);
    }
    return out;
  }

  Fact fresh_definition() {
    Fact f;
    f.name = cur_->prefix + "_a" + std::to_string(++atoms_[cur_->prefix]);
    f.tags = {"k" + std::to_string(++tag_counter_)};
    pending_ += "definition " + f.name + " :: \"bool\" where\n  \"" + f.name + " = " + f.tags[0] + "\"\n\n";
    Fact exported = f;
    exported.name += "_def";
    own_.push_back(exported);
    return exported;
  }

  bool disjoint(const Fact& f, const std::set<std::string>& used) const {
    return std::none_of(f.tags.begin(), f.tags.end(), [&](const auto& t) { return used.count(t); });
  }

  /// `m` facts with pairwise disjoint tags, mixing reuse and fresh atoms.
  std::vector<Fact> pick(int m, std::set<std::string>& used, bool lemmas_only = false) {
    std::vector<Fact> out;
    for (int i = 0; i < m; ++i) {
      std::vector<const Fact*> pool;
      for (const auto* f : visible_)
        if (disjoint(*f, used) && (!lemmas_only || f->is_lemma)) pool.push_back(f);
      for (const auto& f : own_)
        if (disjoint(f, used) && (!lemmas_only || f.is_lemma)) pool.push_back(&f);
      Fact chosen;
      if (!pool.empty() && (lemmas_only || rng_.chance(35)))
        chosen = *pool[rng_.below(pool.size())];
      else if (lemmas_only)
        break;
      else
        chosen = fresh_definition();
      used.insert(chosen.tags.begin(), chosen.tags.end());
      out.push_back(chosen);
    }
    return out;
  }

  static std::string statement(const std::set<std::string>& tags) {
    std::string s = "\"";
    int i = 0;
    for (const auto& t : tags) {
      if (i) s += (i % 4 == 0) ? " \\<and>\n    " : " \\<and> ";
      s += t;
      ++i;
    }
    return s + "\"";
  }

  std::string apply_line(const Fact& f) {
    static const char* kTemplates[] = {"apply (simp add: %s)", "apply (rule %s)", "apply (clarsimp simp: %s)",
                                       "apply (wp %s)", "apply (auto simp add: %s)", "apply (erule %s)"};
    char buf[256];
    std::snprintf(buf, sizeof buf, kTemplates[rng_.below(6)], f.name.c_str());
    return buf;
  }

  // -- lemmas --
  struct Built {
    std::string proof;  // without indentation of the first line
    Style style;
    int lines;
    std::set<std::string> tags;
  };

  Built procedural(int n_lines) {
    std::set<std::string> used;
    Built b{"", Style::Procedural, n_lines, {}};
    if (n_lines == 1) {
      std::vector<Fact> facts;
      if (rng_.chance(30)) facts = pick(1, used, true);
      if (!facts.empty()) {
        b.proof = "by (rule " + facts[0].name + ")";
      } else {
        facts = pick(rng_.range(1, 3), used);
        std::string names;
        for (const auto& f : facts) names += (names.empty() ? "" : " ") + f.name;
        b.proof = rng_.chance(50) ? "by (simp add: " + names + ")" : "by (clarsimp simp: " + names + ")";
      }
      for (const auto& f : facts) b.tags.insert(f.tags.begin(), f.tags.end());
      return b;
    }
    auto facts = pick(n_lines - 1, used);
    for (std::size_t i = 0; i < facts.size(); ++i) {
      b.proof += (i ? "\n  " : "") + apply_line(facts[i]);
      b.tags.insert(facts[i].tags.begin(), facts[i].tags.end());
    }
    b.proof += "\n  done";
    return b;
  }

  Built declarative(int haves) {
    std::set<std::string> used;
    Built b{"proof -", Style::Declarative, 4, {}};
    std::string names;
    for (int h = 1; h <= haves; ++h) {
      auto f = pick(1, used)[0];
      std::set<std::string> tags(f.tags.begin(), f.tags.end());
      b.tags.insert(tags.begin(), tags.end());
      std::string hn = "h" + std::to_string(h);
      names += " " + hn;
      std::string have = "\n  have " + hn + ": " + statement(tags);
      std::string by = "by (simp add: " + f.name + ")";
      if (rng_.chance(50)) {
        b.proof += have + "\n    " + by;
        b.lines += 2;
      } else {
        b.proof += have + " " + by;
        b.lines += 1;
      }
    }
    b.proof += "\n  show ?thesis\n    using" + names + " by simp\nqed";
    return b;
  }

  void lemma(Category cat, const std::string& excluded_kind) {
    Built b;
    if (!excluded_kind.empty()) {
      b = excluded_kind == "long" ? procedural(rng_.range(21, 24)) : procedural(excluded_kind == "context" ? 2 : 1);
      if (excluded_kind == "sorry") b.proof = "sorry";
    } else if (cat == Category::P1) {
      b = procedural(1);
    } else if (cat == Category::P2) {
      b = procedural(rng_.range(2, 6));
    } else if (cat == Category::P3) {
      b = procedural(rng_.range(7, 20));
    } else {
      b = declarative(rng_.range(1, 4));
    }
    const TheoryPlan& th = *cur_;
    const bool anon = excluded_kind.empty() && cat == Category::P1 && !anon_done_ && rng_.chance(25);
    std::string name = anon ? "" : th.prefix + "_l" + std::to_string(++lemma_counter_);
    std::string keyword = rng_.chance(10) ? "theorem" : "lemma";
    std::string head = keyword;
    if (excluded_kind == "locale") head += " (in syn_locale)";
    if (!anon) {
      head += " " + name;
      int a = static_cast<int>(rng_.below(4));
      if (a == 1) head += "[simp]";
      if (a == 2) head += " [wp]";
      head += ":";
    }
    std::string text;
    if (b.lines == 1 && excluded_kind.empty() && rng_.chance(20) && b.tags.size() <= 3) {
      text = head + " " + statement(b.tags) + " " + b.proof;
    } else {
      text = head + "\n  " + statement(b.tags) + (b.style == Style::Declarative ? "\n" : "\n  ") + b.proof;
    }
    if (excluded_kind == "context") text = "context\nbegin\n\n" + text + "\n\nend";
    body_ += pending_ + text + "\n\n";
    pending_.clear();

    std::string id_name = name;
    if (anon) {
      anon_done_ = true;
      id_name = "anon#1";
    }
    GoldenLemma g;
    g.id = th.session + "." + th.name + "." + id_name;
    g.style = b.style;
    g.proof_line_count = b.lines;
    g.category = excluded_kind.empty() ? categorize(b.style, b.lines, false) : Category::Excluded;
    out_.golden.push_back(g);
    if (!anon && excluded_kind.empty()) {
      Fact f{name, std::vector<std::string>(b.tags.begin(), b.tags.end()), true};
      own_.push_back(f);
    }
  }

  void emit_theory(int t) {
    cur_ = &theories_[t];
    own_.clear();
    visible_.clear();
    for (int d : closure(t))
      for (const auto& f : exported_[d]) visible_.push_back(&f);
    body_.clear();
    pending_.clear();
    anon_done_ = false;

    static const Category kCycle[] = {Category::P1, Category::P2, Category::D, Category::P3, Category::P1,
                                      Category::P2, Category::D};
    static const char* kExcluded[] = {"locale", "context", "long", "sorry"};
    const int L = p_.lemmas_per_theory;
    const int excluded_at = static_cast<int>(rng_.below(static_cast<std::uint64_t>(L + 1)));
    const int comment_at = static_cast<int>(rng_.below(static_cast<std::uint64_t>(L + 1)));
    for (int j = 0; j <= L; ++j) {
      if (j == comment_at)
        body_ += "(* lemma " + cur_->prefix + "_fake: \"k0\" by simp\n   is commented out and must not be extracted *)\n\n";
      if (j == excluded_at) lemma(Category::Excluded, kExcluded[t % 4]);
      if (j < L) lemma(kCycle[(j + t) % 7], "");
    }

    std::string header = "theory " + cur_->name + "\n  imports";
    if (cur_->imports.size() > 2) {
      for (const auto& imp : cur_->imports) header += "\n    " + imp;
    } else {
      for (const auto& imp : cur_->imports) header += " " + imp;
    }
    std::string text = header + "\nbegin\n\ntext \\<open>Synthetic theory " + cur_->name + " of session " +
                       cur_->session + ".\\<close>\n\n" + body_ + "end\n";
    out_.files[cur_->path] = text;
    exported_[t] = own_;
  }

  SyntheticParams p_;
  Rng rng_;
  std::vector<SessionPlan> sessions_;
  std::vector<TheoryPlan> theories_;
  std::map<std::string, int> by_name_;
  std::map<int, std::vector<Fact>> exported_;
  std::map<std::string, int> atoms_;
  int tag_counter_ = 0;
  int lemma_counter_ = 0;
  const TheoryPlan* cur_ = nullptr;
  std::vector<Fact> own_;
  std::vector<const Fact*> visible_;
  std::string body_;
  std::string pending_;
  bool anon_done_ = false;
  SyntheticCorpus out_;
};

}  // namespace

std::string SyntheticCorpus::golden_manifest() const {
  using json = nlohmann::ordered_json;
  std::vector<GoldenLemma> sorted = golden;
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  std::string out;
  std::map<std::string, int> counts{{"P1", 0}, {"P2", 0}, {"P3", 0}, {"D", 0}, {"excluded", 0}};
  for (const auto& g : sorted) {
    json j = {{"id", g.id},
              {"style", to_string(g.style)},
              {"category", to_string(g.category)},
              {"proof_line_count", g.proof_line_count}};
    out += j.dump() + "\n";
    ++counts[to_string(g.category)];
  }
  json summary = json::object();
  for (const char* c : {"P1", "P2", "P3", "D", "excluded"}) summary[c] = counts[c];
  out += json{{"summary", summary}}.dump() + "\n";
  return out;
}

SyntheticCorpus generate_synthetic(const SyntheticParams& params) {
  if (params.sessions < 1 || params.theories_per_session < 1 || params.lemmas_per_theory < 1)
    throw Error(ErrorCode::ConfigError, "synthetic corpus sizes must be >= 1");
  return Generator(params).run();
}

void write_synthetic(const SyntheticCorpus& corpus, const std::string& dir) {
  for (const auto& [path, text] : corpus.files) write_file((fs::path(dir) / path).string(), text);
  write_file((fs::path(dir) / kGoldenManifestName).string(), corpus.golden_manifest());
}

std::vector<GoldenLemma> read_golden_manifest(const std::string& path) {
  std::vector<GoldenLemma> out;
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  std::string line;
  while (std::getline(in, line)) {
    if (is_blank(line)) continue;
    auto j = nlohmann::json::parse(line);
    if (!j.contains("id")) continue;
    out.push_back({j.at("id"), parse_style(j.at("style").get<std::string>()),
                   parse_category(j.at("category").get<std::string>()), j.at("proof_line_count")});
  }
  return out;
}

}  // namespace isobench

#include "isobench/mock_prover.hpp"

#include <algorithm>
#include <filesystem>
#include <functional>
#include <json.hpp>
#include <memory>
#include <thread>

#include "isobench/corpus_loader.hpp"
#include "isobench/digest.hpp"
#include "isobench/error.hpp"
#include "isobench/graph.hpp"
#include "isobench/root_file.hpp"
#include "isobench/text.hpp"
#include "isobench/theory.hpp"

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace isobench {
namespace {

using lex::Kind;
using lex::Token;

const std::set<std::string_view> kMethods = {
    "simp",     "simp_all",  "auto",     "clarsimp",  "fastforce", "force",     "blast",    "metis",
    "meson",    "rule",      "erule",    "drule",     "frule",     "intro",     "elim",     "wp",
    "wpsimp",   "cases",     "case_tac", "induct",    "induct_tac", "fact",     "assumption", "unfold",
    "fold",     "subst",     "arith",    "linarith",  "presburger", "rule_tac", "erule_tac", "drule_tac",
    "frule_tac", "subgoal_tac", "cut_tac", "insert",  "safe",      "clarify",   "standard", "this",
    "iprover",  "argo",      "eval",     "smt",       "rules",     "wpc",       "fastsimp", "intro_classes",
    "transfer", "coinduct",  "atomize",  "succeed",   "fail",      "elim_tac",  "erule_tac", "simp_tac",
};

// methods whose bare arguments are terms, not facts
const std::set<std::string_view> kTermMethods = {"case_tac", "cases", "induct", "induct_tac", "rule_tac",
                                                 "erule_tac", "drule_tac", "frule_tac", "subgoal_tac",
                                                 "cut_tac",  "coinduct", "subst"};

// modifiers whose arguments are terms
const std::set<std::string_view> kTermModifiers = {"arbitrary", "taking", "rule_format"};

const std::set<std::string_view> kSkipWithText = {"text",          "txt",      "section", "subsection",
                                                  "subsubsection", "chapter",  "paragraph",
                                                  "subparagraph",  "text_raw", "header"};

const std::set<std::string_view> kLemmaWords = {"lemma", "theorem", "corollary", "proposition", "schematic_goal"};
const std::set<std::string_view> kStatementWords = {"assumes", "shows", "fixes", "and", "obtains", "for", "if"};

struct Failure {
  std::string message;
};
struct TimedOut {};

struct Method {
  std::vector<std::pair<std::string, std::size_t>> methods;  // name, token index
  std::vector<std::pair<std::string, std::size_t>> facts;
};

class Checker {
 public:
  Checker(std::string_view src, std::string_view display, const FactTable& scope, Clock::time_point deadline)
      : src_(src), display_(display), scope_(scope), deadline_(deadline) {
    for (auto& t : lex::tokenize(src))
      if (t.kind != Kind::Comment) toks_.push_back(t);
  }

  MockCheck run() {
    MockCheck out;
    try {
      header();
      theory_body();
      out.exported = exported_;
    } catch (const Failure& f) {
      out.result.status = VerifyStatus::Failure;
      out.result.message = f.message;
    } catch (const TimedOut&) {
      out.result.status = VerifyStatus::Timeout;
      out.result.message = "Timeout";
    }
    return out;
  }

 private:
  enum class Mode { Prove, State };
  enum class Origin { Root, Have, Show };
  struct Frame {
    Mode mode = Mode::Prove;
    Origin origin = Origin::Root;
    std::set<std::string> remaining;
    std::set<std::string> stated;
    std::string fact_name;
    std::vector<std::string> chained;
  };

  // -- token helpers --
  bool at_end() const { return pos_ >= toks_.size(); }
  bool is(Kind k, std::size_t i) const { return i < toks_.size() && toks_[i].kind == k; }
  std::string_view text(std::size_t i) const { return i < toks_.size() ? toks_[i].text(src_) : std::string_view(); }
  std::string_view word(std::size_t i) const { return is(Kind::Name, i) ? text(i) : std::string_view(); }
  bool is_sym(std::size_t i, std::string_view s) const { return is(Kind::Symbol, i) && text(i) == s; }

  [[noreturn]] void fail(const std::string& what, std::size_t cmd) const {
    std::string c = cmd < toks_.size() ? std::string(text(cmd)) : "end-of-input";
    int line = cmd < toks_.size() ? toks_[cmd].line : (toks_.empty() ? 1 : toks_.back().line);
    throw Failure{what + " At command \"" + c + "\" (line " + std::to_string(line) + " of \"" +
                  std::string(display_) + "\")"};
  }

  void tick() const {
    if (Clock::now() >= deadline_) throw TimedOut{};
  }

  std::size_t matching(std::size_t open, std::string_view o, std::string_view c) const {
    int depth = 0;
    for (std::size_t i = open; i < toks_.size(); ++i) {
      if (is_sym(i, o)) ++depth;
      if (is_sym(i, c) && --depth == 0) return i;
    }
    fail("Outer syntax error", open);
  }

  const std::set<std::string>* lookup(const std::string& name) const {
    if (auto it = local_.find(name); it != local_.end()) return &it->second;
    if (auto it = own_.find(name); it != own_.end()) return &it->second;
    if (auto it = scope_.find(name); it != scope_.end()) return &it->second;
    return nullptr;
  }

  // -- theory level --
  void header() {
    if (word(0) != "theory") fail("Outer syntax error", 0);
    for (pos_ = 1; !at_end() && word(pos_) != "begin"; ++pos_) {
    }
    if (at_end()) fail("Outer syntax error", 0);
    ++pos_;
  }

  void theory_body() {
    int depth = 0;
    while (true) {
      tick();
      if (at_end()) fail("Outer syntax error: missing end", pos_);
      const std::size_t cmd = pos_;
      std::string_view w = word(cmd);
      if (w.empty()) fail("Outer syntax error", cmd);
      if (w == "end") {
        ++pos_;
        if (depth == 0) return;
        --depth;
      } else if (w == "context" || w == "locale") {
        while (!at_end() && word(pos_) != "begin") ++pos_;
        if (at_end()) fail("Outer syntax error", cmd);
        ++pos_;
        ++depth;
      } else if (w == "definition" || w == "abbreviation") {
        definition();
      } else if (kLemmaWords.count(w)) {
        lemma();
      } else if (w == "lemmas") {
        lemmas();
      } else if (kSkipWithText.count(w)) {
        ++pos_;
        if (is(Kind::String, pos_) || is(Kind::Cartouche, pos_)) ++pos_;
      } else if (is_theory_command(w)) {
        // declare, notation, ... carry no goal-tag content
        ++pos_;
        while (!at_end() && !(is(Kind::Name, pos_) && (is_theory_command(word(pos_)) || word(pos_) == "end"))) ++pos_;
      } else {
        fail("Outer syntax error", cmd);
      }
    }
  }

  void definition() {
    const std::size_t cmd = pos_++;
    if (!is(Kind::Name, pos_)) fail("Outer syntax error", cmd);
    std::string name(word(pos_++));
    std::size_t where = pos_;
    while (where < toks_.size() && word(where) != "where" && !(is(Kind::Name, where) && is_theory_command(word(where))))
      ++where;
    std::size_t body = where < toks_.size() && word(where) == "where" ? where + 1 : pos_;
    while (body < toks_.size() && !is(Kind::String, body) && !is(Kind::Cartouche, body)) ++body;
    if (body >= toks_.size()) fail("Outer syntax error", cmd);
    auto tags = goal_tags(toks_[body].inner(src_));
    own_[name + "_def"] = tags;
    exported_[name + "_def"] = tags;
    pos_ = body + 1;
  }

  void lemmas() {
    const std::size_t cmd = pos_++;
    if (!is(Kind::Name, pos_) || !is_sym(pos_ + 1, "=")) fail("Outer syntax error", cmd);
    std::string name(word(pos_));
    pos_ += 2;
    std::set<std::string> tags;
    while (is(Kind::Name, pos_) && !is_theory_command(word(pos_)) && word(pos_) != "end") {
      std::string f(word(pos_));
      const auto* t = lookup(f);
      if (!t) fail("Undefined fact: \"" + f + "\"", cmd);
      tags.insert(t->begin(), t->end());
      ++pos_;
      if (is_sym(pos_, "[")) pos_ = matching(pos_, "[", "]") + 1;
    }
    own_[name] = tags;
    exported_[name] = tags;
  }

  void lemma() {
    const std::size_t cmd = pos_++;
    if (is_sym(pos_, "(")) pos_ = matching(pos_, "(", ")") + 1;
    std::string name;
    if (is(Kind::Name, pos_) && (is_sym(pos_ + 1, "[") || is_sym(pos_ + 1, ":"))) name = std::string(word(pos_++));
    if (is_sym(pos_, "[")) pos_ = matching(pos_, "[", "]") + 1;
    if (is_sym(pos_, ":")) ++pos_;
    std::set<std::string> tags;
    bool any = false;
    while (!at_end()) {
      if (is(Kind::String, pos_) || is(Kind::Cartouche, pos_)) {
        auto t = goal_tags(toks_[pos_].inner(src_));
        tags.insert(t.begin(), t.end());
        any = true;
        ++pos_;
      } else if (kStatementWords.count(word(pos_))) {
        ++pos_;
      } else {
        break;
      }
    }
    if (!any) fail("Outer syntax error", cmd);
    local_.clear();
    bool proved = prove(tags, cmd);
    local_.clear();
    if (proved && !name.empty()) {
      own_[name] = tags;
      exported_[name] = tags;
    }
  }

  // -- proofs --
  Method parse_method(std::size_t cmd) {
    Method m;
    if (is(Kind::Name, pos_)) {
      std::string w(word(pos_));
      if (is_mock_method(w))
        m.methods.emplace_back(w, pos_);
      else
        m.facts.emplace_back(w, pos_);
      ++pos_;
      if (is_sym(pos_, "[")) bracket_facts(pos_, m), pos_ = matching(pos_, "[", "]") + 1;
      return m;
    }
    if (!is_sym(pos_, "(")) fail("Outer syntax error", cmd);
    std::size_t close = matching(pos_, "(", ")");
    bool expect_method = true;
    bool term_args = false;
    for (std::size_t i = pos_ + 1; i < close; ++i) {
      if (is(Kind::Symbol, i)) {
        std::string_view s = text(i);
        if (s == "(" || s == "|" || s == "," || s == ";") {
          expect_method = true;
          term_args = false;
        } else if (s == "[") {
          if (!term_args) bracket_facts(i, m);
          i = matching(i, "[", "]");
        }
        continue;
      }
      if (!is(Kind::Name, i)) continue;
      std::string w(word(i));
      if (expect_method) {
        m.methods.emplace_back(w, i);
        expect_method = false;
        term_args = kTermMethods.count(w) > 0;
      } else if (is_sym(i + 1, ":")) {
        term_args = kTermModifiers.count(w) > 0;
        ++i;
      } else if (is(Kind::Name, i + 1) && is_sym(i + 2, ":") &&
                 (word(i + 1) == "add" || word(i + 1) == "del" || word(i + 1) == "only")) {
        term_args = false;  // `simp add:`, `split del:`
        i += 2;
      } else if (w == "in") {
        term_args = false;
      } else if (!term_args && w != "_") {
        m.facts.emplace_back(w, i);
      }
    }
    pos_ = close + 1;
    while (is_sym(pos_, "+") || is_sym(pos_, "?")) ++pos_;
    if (is_sym(pos_, "[") && is(Kind::Number, pos_ + 1)) pos_ = matching(pos_, "[", "]") + 1;
    return m;
  }

  // `[OF a b]` contributes facts; `[of ...]`, `[where ...]`, attributes do not.
  void bracket_facts(std::size_t open, Method& m) const {
    std::size_t close = matching(open, "[", "]");
    if (word(open + 1) != "OF" && word(open + 1) != "THEN") return;
    for (std::size_t i = open + 2; i < close; ++i) {
      if (is_sym(i, "[")) {
        i = matching(i, "[", "]");
        continue;
      }
      if (is(Kind::Name, i) && word(i) != "_") m.facts.emplace_back(std::string(word(i)), i);
    }
  }

  std::vector<std::string> fact_list(std::size_t cmd) {
    std::vector<std::string> out;
    while (is(Kind::Name, pos_) && !is_proof_command(word(pos_)) && !is_theory_command(word(pos_))) {
      std::string f(word(pos_++));
      if (!lookup(f)) fail("Undefined fact: \"" + f + "\"", cmd);
      out.push_back(f);
      if (is_sym(pos_, "[")) pos_ = matching(pos_, "[", "]") + 1;
    }
    if (out.empty()) fail("Outer syntax error", cmd);
    return out;
  }

  void apply(Frame& f, const Method& m, std::size_t cmd) {
    for (const auto& [name, _] : m.methods)
      if (!is_mock_method(name)) fail("Undefined method: \"" + name + "\"", cmd);
    std::set<std::string> covered;
    std::size_t used = f.chained.size() + m.facts.size();
    for (const auto& [name, _] : m.facts) {
      const auto* t = lookup(name);
      if (!t) fail("Undefined fact: \"" + name + "\"", cmd);
      covered.insert(t->begin(), t->end());
    }
    for (const auto& name : f.chained) {
      const auto* t = lookup(name);
      if (t) covered.insert(t->begin(), t->end());
    }
    f.chained.clear();
    if (used > 0 && !f.remaining.empty()) {
      bool progress = std::any_of(covered.begin(), covered.end(), [&](const auto& t) { return f.remaining.count(t); });
      if (!progress) fail("Failed to apply proof method", cmd);
    }
    for (const auto& t : covered) f.remaining.erase(t);
  }

  void close_top(std::vector<Frame>& stack) {
    Frame done = std::move(stack.back());
    stack.pop_back();
    if (done.origin == Origin::Root) return;
    local_["this"] = done.stated;
    if (!done.fact_name.empty()) local_[done.fact_name] = done.stated;
    if (done.origin == Origin::Show)
      for (const auto& t : done.stated) stack.back().remaining.erase(t);
  }

  void delay(std::size_t cmd) {
    if (!is(Kind::Number, pos_)) fail("Outer syntax error", cmd);
    double secs = std::stod(std::string(text(pos_++)));
    auto until = Clock::now() + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(secs));
    if (until >= deadline_) {
      std::this_thread::sleep_until(deadline_);
      throw TimedOut{};
    }
    std::this_thread::sleep_until(until);
  }

  bool method_start(std::size_t i) const { return is_sym(i, "(") || (is(Kind::Name, i) && is_mock_method(word(i))); }

  /// Returns false when the proof was abandoned with `oops`.
  bool prove(const std::set<std::string>& goal, std::size_t lemma_cmd) {
    std::vector<Frame> stack(1);
    stack[0].remaining = goal;
    stack[0].stated = goal;
    while (!stack.empty()) {
      tick();
      const std::size_t cmd = pos_;
      if (at_end()) fail("Failed to finish proof", lemma_cmd);
      std::string_view w = word(cmd);
      Frame& f = stack.back();
      if (w.empty()) fail("Outer syntax error", cmd);
      if (w == "mock_delay") {
        ++pos_;
        delay(cmd);
        continue;
      }
      if (f.mode == Mode::Prove) {
        if (w == "apply") {
          ++pos_;
          apply(f, parse_method(cmd), cmd);
        } else if (w == "by") {
          ++pos_;
          apply(f, parse_method(cmd), cmd);
          if (method_start(pos_) && toks_[pos_].line == toks_[cmd].line) apply(f, parse_method(cmd), cmd);
          if (!f.remaining.empty()) fail("Failed to finish proof", cmd);
          close_top(stack);
        } else if (w == "done") {
          ++pos_;
          if (!f.remaining.empty()) fail("Failed to finish proof", cmd);
          close_top(stack);
        } else if (w == "using" || w == "unfolding") {
          ++pos_;
          for (auto& fact : fact_list(cmd)) f.chained.push_back(fact);
        } else if (w == "proof") {
          ++pos_;
          if (is_sym(pos_, "-"))
            ++pos_;
          else if (method_start(pos_) && toks_[pos_].line == toks_[cmd].line)
            apply(f, parse_method(cmd), cmd);
          f.mode = Mode::State;
        } else if (w == "sorry") {
          ++pos_;
          close_top(stack);
        } else if (w == "oops") {
          ++pos_;
          return false;
        } else if (is_theory_command(w) || w == "end") {
          fail("Failed to finish proof", cmd);
        } else {
          fail("Outer syntax error", cmd);
        }
        continue;
      }
      // state mode: inside proof ... qed
      if (w == "have" || w == "hence" || w == "show" || w == "thus") {
        ++pos_;
        Frame sub;
        sub.origin = (w == "show" || w == "thus") ? Origin::Show : Origin::Have;
        sub.chained = std::move(f.chained);
        f.chained.clear();
        if (w == "hence" || w == "thus" || then_) sub.chained.push_back("this");
        then_ = false;
        if (is(Kind::Name, pos_) && (is_sym(pos_ + 1, ":") || is_sym(pos_ + 1, "["))) {
          sub.fact_name = std::string(word(pos_++));
          if (is_sym(pos_, "[")) pos_ = matching(pos_, "[", "]") + 1;
        }
        if (is_sym(pos_, ":")) ++pos_;
        if (word(pos_) == "?thesis") {
          sub.stated = f.remaining;
          ++pos_;
        } else if (is(Kind::String, pos_) || is(Kind::Cartouche, pos_)) {
          while (is(Kind::String, pos_) || is(Kind::Cartouche, pos_)) {
            auto t = goal_tags(toks_[pos_].inner(src_));
            sub.stated.insert(t.begin(), t.end());
            ++pos_;
          }
        } else {
          fail("Outer syntax error", cmd);
        }
        sub.remaining = sub.stated;
        stack.push_back(std::move(sub));
      } else if (w == "from" || w == "with") {
        ++pos_;
        f.chained = fact_list(cmd);
        if (w == "with") f.chained.push_back("this");
      } else if (w == "then") {
        ++pos_;
        then_ = true;
      } else if (w == "next") {
        ++pos_;
      } else if (w == "qed") {
        ++pos_;
        if (!f.remaining.empty()) fail("Failed to finish proof", cmd);
        close_top(stack);
      } else if (is_theory_command(w) || w == "end") {
        fail("Failed to finish proof", cmd);
      } else {
        fail("Outer syntax error", cmd);
      }
    }
    return true;
  }

  std::string_view src_;
  std::string_view display_;
  const FactTable& scope_;
  Clock::time_point deadline_;
  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  FactTable own_;       // facts declared earlier in this theory
  FactTable local_;     // facts local to the current proof
  FactTable exported_;
  bool then_ = false;
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Header {
  std::string name;
  std::vector<std::string> imports;
};

std::optional<Header> read_header(std::string_view text) {
  Header h;
  std::vector<Token> toks;
  for (auto& t : lex::tokenize(text))
    if (t.kind != Kind::Comment) toks.push_back(t);
  if (toks.size() < 2 || toks[0].text(text) != "theory") return std::nullopt;
  h.name = std::string(toks[1].text(text));
  std::size_t i = 2;
  if (i < toks.size() && toks[i].text(text) == "imports") {
    for (++i; i < toks.size() && toks[i].text(text) != "begin"; ++i) {
      if (toks[i].kind == Kind::String) h.imports.emplace_back(toks[i].inner(text));
      else if (toks[i].kind == Kind::Name && toks[i].text(text) != "keywords" && toks[i].text(text) != "abbrevs")
        h.imports.emplace_back(toks[i].text(text));
      else if (toks[i].kind == Kind::Name) break;
    }
  }
  return h;
}

nlohmann::json facts_json(const FactTable& facts) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [k, v] : facts) j[k] = v;
  return j;
}

}  // namespace

std::set<std::string> goal_tags(std::string_view s) {
  std::set<std::string> out;
  std::size_t i = 0;
  auto ident = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '\''; };
  while (i < s.size()) {
    if (!ident(s[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < s.size() && ident(s[j])) ++j;
    std::string_view w = s.substr(i, j - i);
    std::size_t k = 0;
    while (k < w.size() && w[k] >= 'a' && w[k] <= 'z') ++k;
    std::size_t d = k;
    while (d < w.size() && std::isdigit(static_cast<unsigned char>(w[d]))) ++d;
    if (k > 0 && d > k && d == w.size()) out.emplace(w);
    i = j;
  }
  return out;
}

bool is_mock_method(std::string_view name) { return kMethods.count(name) > 0; }

MockCheck check_theory(std::string_view text, std::string_view display_name, const FactTable& scope,
                       Clock::time_point deadline) {
  auto start = Clock::now();
  MockCheck out = Checker(text, display_name, scope, deadline).run();
  out.result.elapsed_seconds = seconds_since(start);
  return out;
}

VerifyResult mock_verify(std::string_view text, const FactTable& scope) {
  return check_theory(text, "Scratch", scope).result;
}

// ---------------------------------------------------------------------------

struct MockProver::SessionInfo {
  SessionSpec spec;
  fs::path dir;  // absolute session directory
};

struct MockProver::BuildState {
  Clock::time_point deadline;
  int rebuilt = 0;
  VerifyResult failure;
  bool failed = false;
  std::set<std::string> in_progress;
  // absolute theory path -> (session, theory name, digest, visible facts)
  struct Built {
    std::string session;
    std::string name;
    std::string digest;
    std::shared_ptr<FactTable> visible;
  };
  std::map<std::string, Built> theories;
  std::set<std::string> sessions_done;

  bool fail(VerifyStatus status, std::string message) {
    failed = true;
    failure.status = status;
    failure.message = std::move(message);
    return false;
  }
};

MockProver::MockProver(ProverConfig config) : config_(std::move(config)) {
  if (config_.timeout_seconds <= 0) throw Error(ErrorCode::ConfigError, "timeout_seconds must be positive");
}

long MockProver::total_rebuilt() const {
  std::lock_guard lock(mu_);
  return total_rebuilt_;
}

std::mutex& MockProver::session_lock(const std::string& name) {
  std::lock_guard lock(mu_);
  auto& slot = session_locks_[name];
  if (!slot) slot = std::make_unique<std::mutex>();
  return *slot;
}

std::map<std::string, MockProver::SessionInfo> MockProver::load_sessions(const std::string& root_dir) const {
  std::map<std::string, SessionInfo> out;
  std::vector<std::string> dirs{root_dir};
  dirs.insert(dirs.end(), config_.include_dirs.begin(), config_.include_dirs.end());
  std::set<std::string> seen_files;
  for (const auto& d : dirs) {
    for (const auto& rel : find_root_files(d)) {
      fs::path file = fs::weakly_canonical(fs::path(d) / rel);
      if (!seen_files.insert(file.string()).second) continue;
      RootFile root;
      try {
        root = parse_root(read_file(file.string()), ".", rel);
      } catch (const Error&) {
        continue;  // reported when the session is requested and missing
      }
      for (auto& s : root.stanzas) {
        SessionInfo info;
        info.dir = (file.parent_path() / s.directory).lexically_normal();
        info.spec = std::move(s);
        out.emplace(info.spec.name, std::move(info));
      }
    }
  }
  return out;
}

bool MockProver::build_one(const std::map<std::string, SessionInfo>& sessions, const std::string& name,
                           BuildState& st) {
  if (is_builtin_session(name) || st.sessions_done.count(name)) return true;
  auto it = sessions.find(name);
  if (it == sessions.end()) return st.fail(VerifyStatus::Failure, "Undefined session: \"" + name + "\"");
  if (!st.in_progress.insert(name).second)
    return st.fail(VerifyStatus::Failure, "Cyclic session dependency at \"" + name + "\"");
  const SessionInfo& info = it->second;
  std::vector<std::string> deps = info.spec.dependencies();
  for (const auto& d : deps)
    if (!build_one(sessions, d, st)) return false;

  std::lock_guard session_guard(session_lock(name));

  // theories visible from ancestor sessions, by qualified and bare name
  std::set<std::string> ancestors;
  {
    std::vector<std::string> todo = deps;
    while (!todo.empty()) {
      std::string s = todo.back();
      todo.pop_back();
      if (!ancestors.insert(s).second) continue;
      if (auto a = sessions.find(s); a != sessions.end())
        for (const auto& d : a->second.spec.dependencies()) todo.push_back(d);
    }
  }
  auto find_ancestor = [&](const std::string& session, const std::string& theory) -> std::optional<std::string> {
    for (const auto& [path, b] : st.theories)
      if (b.session == session && b.name == theory) return path;
    return std::nullopt;
  };

  // discover member theories
  struct Member {
    std::string text;
    std::string name;
    std::vector<std::string> deps;  // absolute paths (members or ancestor theories)
  };
  std::map<std::string, Member> members;
  std::vector<std::string> todo;
  for (const auto& e : info.spec.entry_theories) todo.push_back(fs::weakly_canonical(info.dir / (e + ".thy")).string());
  while (!todo.empty()) {
    std::string path = todo.back();
    todo.pop_back();
    if (members.count(path)) continue;
    if (!fs::is_regular_file(path)) return st.fail(VerifyStatus::Failure, "No such file: \"" + path + "\"");
    Member m;
    m.text = read_file(path);
    auto header = read_header(m.text);
    if (!header) return st.fail(VerifyStatus::Failure, "Outer syntax error: bad theory header in \"" + path + "\"");
    m.name = fs::path(path).stem().string();
    for (const auto& imp : header->imports) {
      if (is_builtin_theory(imp)) continue;
      auto dot = imp.find('.');
      if (imp.find('/') == std::string::npos && dot != std::string::npos && sessions.count(imp.substr(0, dot))) {
        std::string s = imp.substr(0, dot);
        auto b = ancestors.count(s) ? find_ancestor(s, imp.substr(dot + 1)) : std::nullopt;
        if (!b) return st.fail(VerifyStatus::Failure, "Bad theory import \"" + imp + "\" in \"" + m.name + "\"");
        m.deps.push_back(*b);
        continue;
      }
      std::string file = fs::weakly_canonical(fs::path(path).parent_path() / (imp + ".thy")).string();
      if (auto b = st.theories.find(file); b != st.theories.end() && ancestors.count(b->second.session)) {
        m.deps.push_back(file);
        continue;
      }
      if (fs::is_regular_file(file)) {
        m.deps.push_back(file);
        todo.push_back(file);
        continue;
      }
      const BuildState::Built* found = nullptr;
      std::string found_path;
      for (const auto& [p, b] : st.theories)
        if (b.name == imp && ancestors.count(b.session) && (!found || b.session < found->session)) found = &b, found_path = p;
      if (!found) return st.fail(VerifyStatus::Failure, "Bad theory import \"" + imp + "\" in \"" + m.name + "\"");
      m.deps.push_back(found_path);
    }
    members.emplace(path, std::move(m));
  }

  // topological order over members
  std::vector<std::string> order;
  std::map<std::string, int> mark;
  std::function<bool(const std::string&)> visit = [&](const std::string& p) {
    if (!members.count(p) || mark[p] == 2) return true;
    if (mark[p] == 1) return st.fail(VerifyStatus::Failure, "Cyclic theory dependency at \"" + p + "\"");
    mark[p] = 1;
    for (const auto& d : members.at(p).deps)
      if (!visit(d)) return false;
    mark[p] = 2;
    order.push_back(p);
    return true;
  };
  for (const auto& [p, _] : members)
    if (!visit(p)) return false;

  for (const auto& path : order) {
    if (Clock::now() >= st.deadline) return st.fail(VerifyStatus::Timeout, "Timeout");
    const Member& m = members.at(path);
    std::string material = m.text;
    auto visible = std::make_shared<FactTable>();
    for (const auto& d : m.deps) {
      const auto& b = st.theories.at(d);
      material += "\n" + b.digest;
      for (const auto& [k, v] : *b.visible) (*visible)[k] = v;
    }
    std::string digest = sha256_hex(material);
    fs::path cache_file = fs::path(config_.cache_dir) / name / (m.name + ".json");
    FactTable own;
    bool hit = false;
    if (!config_.cache_dir.empty() && fs::is_regular_file(cache_file)) {
      try {
        auto j = nlohmann::json::parse(read_file(cache_file.string()));
        if (j.at("digest") == digest) {
          for (auto& [k, v] : j.at("facts").items()) own[k] = v.get<std::set<std::string>>();
          hit = true;
        }
      } catch (const std::exception&) {
        hit = false;
      }
    }
    if (!hit) {
      auto check = check_theory(m.text, name + "." + m.name, *visible, st.deadline);
      ++st.rebuilt;
      if (check.result.status != VerifyStatus::Success) return st.fail(check.result.status, check.result.message);
      own = std::move(check.exported);
      if (!config_.cache_dir.empty()) {
        nlohmann::json j = {{"session", name}, {"theory", m.name}, {"digest", digest}, {"facts", facts_json(own)}};
        fs::path tmp = cache_file;
        tmp += ".tmp";
        write_file(tmp.string(), j.dump());
        fs::rename(tmp, cache_file);
      }
    }
    for (const auto& [k, v] : own) (*visible)[k] = v;
    st.theories[path] = {name, m.name, digest, visible};
  }
  st.in_progress.erase(name);
  st.sessions_done.insert(name);
  return true;
}

VerifyResult MockProver::build_session(const std::string& root_dir, const std::string& session) {
  return build_session(root_dir, session, config_.timeout_seconds);
}

VerifyResult MockProver::build_session(const std::string& root_dir, const std::string& session, double timeout) {
  auto start = Clock::now();
  BuildState st;
  st.deadline = start + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(timeout));
  VerifyResult out;
  try {
    auto sessions = load_sessions(root_dir);
    if (!sessions.count(session)) {
      st.fail(VerifyStatus::Failure, "Undefined session: \"" + session + "\"");
    } else {
      build_one(sessions, session, st);
    }
  } catch (const Error& e) {
    st.fail(VerifyStatus::Failure, e.what());
  }
  if (st.failed) out = st.failure;
  out.elapsed_seconds = seconds_since(start);
  out.rebuilt_theories = st.rebuilt;
  {
    std::lock_guard lock(mu_);
    total_rebuilt_ += st.rebuilt;
  }
  return out;
}

}  // namespace isobench

#include "isobench/theory.hpp"

#include <map>
#include <optional>
#include <set>

#include "isobench/text.hpp"

namespace isobench {
namespace {

using lex::Kind;
using lex::Token;

const std::set<std::string_view> kTheoryCommands = {
    "abbreviation", "axiomatization", "bundle",        "chapter",      "class",
    "consts",       "context",        "corollary",     "crunch",       "crunch_ignore",
    "datatype",     "declare",        "definition",    "end",          "experiment",
    "find_theorems", "fun",           "function",      "global_interpretation",
    "hide_const",   "hide_fact",      "hide_type",     "inductive",    "inductive_set",
    "instance",     "instantiation",  "interpretation", "lemma",       "lemmas",
    "locale",       "method",         "method_setup",  "ML",           "ML_file",
    "named_theorems", "no_notation",  "notation",      "notepad",      "overloading",
    "paragraph",    "primrec",        "print_theorems", "proposition", "record",
    "schematic_goal", "section",      "setup",         "simproc_setup", "sublocale",
    "subsection",   "subsubsection",  "syntax",        "term",         "termination",
    "text",         "theorem",        "thm",           "translations", "type_notation",
    "type_synonym", "typedecl",       "typedef",       "unbundle",     "value",
};

const std::set<std::string_view> kProofCommands = {
    "apply",  "apply_end", "assume", "back",   "by",      "case",   "defer",   "done",
    "fix",    "from",      "have",   "hence",  "including", "moreover", "next", "note",
    "obtain", "oops",      "prefer", "presume", "proof",  "qed",    "show",    "sorry",
    "subgoal", "supply",   "then",   "thus",   "ultimately", "unfolding", "using", "with",
    "interpret", "consider", "define", "let",  "also",    "finally",
};

const std::set<std::string_view> kProofStart = {
    "apply", "by", "proof", "using", "unfolding", "including", "supply", "sorry", "oops", "subgoal",
};

const std::set<std::string_view> kStatementKeywords = {"assumes", "shows", "fixes", "obtains", "notes",
                                                       "defines", "and", "for", "if", "constrains"};

/// Token stream over the masked theory with per-token helpers.
class Scanner {
 public:
  Scanner(std::string_view original, std::string masked)
      : original_(original), masked_(std::move(masked)), toks_(lex::tokenize(masked_)) {
    int prev_line = 0;
    for (const auto& t : toks_) {
      line_first_.push_back(t.line != prev_line);
      prev_line = t.line;
    }
  }

  const std::vector<Token>& tokens() const { return toks_; }
  std::size_t size() const { return toks_.size(); }
  const Token& operator[](std::size_t i) const { return toks_[i]; }
  bool line_first(std::size_t i) const { return line_first_[i]; }
  std::string_view word(std::size_t i) const {
    return toks_[i].kind == Kind::Name ? toks_[i].text(masked_) : std::string_view{};
  }
  std::string_view symbol(std::size_t i) const {
    return toks_[i].kind == Kind::Symbol ? toks_[i].text(masked_) : std::string_view{};
  }
  std::string_view original(std::size_t b, std::size_t e) const { return original_.substr(b, e - b); }
  std::string_view original_token(std::size_t i) const {
    const auto& t = toks_[i];
    return t.kind == Kind::String ? original_.substr(t.inner_begin, t.inner_end - t.inner_begin)
                                  : original_.substr(t.begin, t.end - t.begin);
  }

 private:
  std::string_view original_;
  std::string masked_;
  std::vector<Token> toks_;
  std::vector<bool> line_first_;
};

int bracket_delta(std::string_view sym) {
  if (sym == "(" || sym == "[" || sym == "{") return 1;
  if (sym == ")" || sym == "]" || sym == "}") return -1;
  return 0;
}

struct LemmaScan {
  bool terminated = false;
  std::size_t resume = 0;  // token index to continue scanning from
  Lemma lemma;
  int start_line = 0;
};

class LemmaExtractor {
 public:
  LemmaExtractor(const TheoryFile& th, const Scanner& sc) : th_(th), sc_(sc), end_(end_index()) {}

  Extraction run() {
    Extraction out;
    std::size_t i = 0;
    int context_depth = 0;
    while (i < sc_.size()) {
      const auto& t = sc_[i];
      if (t.begin < th_.header_end) {
        ++i;
        continue;
      }
      if (t.begin >= th_.end_offset) break;
      std::string_view w = sc_.word(i);
      if (w == "begin") {
        ++context_depth;
      } else if (w == "end") {
        if (context_depth > 0) --context_depth;
      } else if ((w == "lemma" || w == "theorem") && sc_.line_first(i)) {
        LemmaScan scan = scan_lemma(i, context_depth > 0);
        if (scan.terminated) {
          finish(scan.lemma);
          out.lemmas.push_back(std::move(scan.lemma));
        } else {
          out.issues.push_back({ErrorCode::UnterminatedProof, scan.start_line,
                                "lemma at line " + std::to_string(scan.start_line) + " has no proof terminator"});
        }
        i = scan.resume;
        continue;
      }
      ++i;
    }
    return out;
  }

 private:
  LemmaScan scan_lemma(std::size_t kw, bool in_context) {
    LemmaScan s;
    s.start_line = sc_[kw].line;
    Lemma& L = s.lemma;
    L.theory_id = th_.id;
    L.keyword = std::string(sc_.word(kw));
    L.in_locale = in_context;
    std::size_t j = kw + 1;
    const std::size_t n = end_;

    if (j + 3 < n && sc_.symbol(j) == "(" && sc_.word(j + 1) == "in" && sc_.symbol(j + 3) == ")") {
      L.in_locale = true;
      j += 4;
    }
    if (j < n && sc_[j].kind == Kind::Name && !kStatementKeywords.count(sc_.word(j)) &&
        !kProofStart.count(sc_.word(j)) && j + 1 < n && (sc_.symbol(j + 1) == "[" || sc_.symbol(j + 1) == ":")) {
      L.name = std::string(sc_.original_token(j));
      ++j;
    }
    while (j < n && sc_.symbol(j) == "[") {
      std::size_t open = j;
      int depth = 0;
      for (; j < n; ++j) {
        depth += bracket_delta(sc_.symbol(j));
        if (depth == 0) break;
      }
      if (j >= n) break;
      L.attributes.emplace_back(trim(sc_.original(sc_[open].end, sc_[j].begin)));
      ++j;
    }
    if (j < n && sc_.symbol(j) == ":") ++j;

    // statement: up to the first proof-opening word at bracket depth zero
    int depth = 0;
    std::size_t last_spec = j == kw + 1 ? kw : j - 1;
    for (; j < n; ++j) {
      std::string_view w = sc_.word(j);
      if (depth == 0 && kProofStart.count(w)) break;
      if (sc_.line_first(j) && is_theory_command(w)) {
        s.resume = j;
        return s;
      }
      depth += bracket_delta(sc_.symbol(j));
      last_spec = j;
    }
    if (j >= n) {
      s.resume = n;
      return s;
    }
    L.spec_text = std::string(sc_.original(sc_[kw].begin, sc_[last_spec].end));
    L.proof_on_spec_line = sc_[j].line == sc_[last_spec].line + line_count_inside(last_spec);
    L.proof_first_line = sc_[j].line;

    const std::size_t proof_start = j;
    std::size_t last = 0;
    int blocks = 0;
    depth = 0;
    bool done = false;
    for (; j < n && !done; ++j) {
      std::string_view sym = sc_.symbol(j);
      if (!sym.empty()) {
        depth += bracket_delta(sym);
        continue;
      }
      std::string_view w = sc_.word(j);
      if (depth != 0 || w.empty()) continue;
      if (j != proof_start && sc_.line_first(j) && is_theory_command(w)) {
        s.resume = j;
        return s;
      }
      if (w == "proof") {
        ++blocks;
      } else if (w == "qed") {
        if (--blocks <= 0) {
          last = j;
          done = blocks == 0;
          if (blocks < 0) {
            s.resume = j + 1;
            return s;
          }
        }
      } else if (w == "done" && blocks == 0) {
        last = j;
        done = true;
      } else if (w == "sorry" || w == "oops") {
        L.uses_sorry = true;
        if (blocks == 0 || w == "oops") {
          last = j;
          done = true;
        }
      } else if (w == "by" && blocks == 0) {
        auto end = consume_by(j, n);
        if (!end) {
          s.resume = n;
          return s;
        }
        last = *end;
        done = true;
      }
    }
    if (!done) {
      s.resume = n;
      return s;
    }
    L.proof_text = std::string(sc_.original(sc_[proof_start].begin, sc_[last].end));
    L.span = {s.start_line, sc_[last].line + line_count_inside(last) };
    s.terminated = true;
    s.resume = last + 1;
    return s;
  }

  // Number of extra lines covered by a multi-line token (a string spanning lines).
  int line_count_inside(std::size_t i) const {
    int extra = 0;
    auto text = sc_.original(sc_[i].begin, sc_[i].end);
    for (char c : text)
      if (c == '\n') ++extra;
    return extra;
  }

  /// End token index of a `by` statement starting at `by_index`: balanced
  /// brackets, then continuation onto the immediately following line unless
  /// that line opens with a command keyword.
  std::optional<std::size_t> consume_by(std::size_t by_index, std::size_t n) const {
    int depth = 0;
    std::size_t k = by_index + 1;
    std::size_t last = by_index;
    for (; k < n; ++k) {
      if (k > by_index + 1 && depth == 0 && sc_[k].line != sc_[last].line) {
        // statement may continue on the next line
        const bool adjacent = sc_[k].line == sc_[last].line + line_count_inside(last) + 1;
        std::string_view w = sc_.word(k);
        if (!adjacent || is_theory_command(w) || is_proof_command(w)) break;
      }
      if (k > by_index + 1 && depth == 0 && sc_.line_first(k) && is_theory_command(sc_.word(k))) break;
      depth += bracket_delta(sc_.symbol(k));
      last = k;
      if (depth < 0) return std::nullopt;
    }
    if (depth != 0 || last == by_index) return std::nullopt;
    return last;
  }

  std::size_t end_index() const {
    std::size_t i = 0;
    while (i < sc_.size() && sc_[i].begin < th_.end_offset) ++i;
    return i;
  }

  void finish(Lemma& L) {
    if (L.name.empty()) L.name = "anon#" + std::to_string(++anon_count_);
    int seen = ++name_count_[L.name];
    L.id = th_.id + "." + L.name + (seen > 1 ? "#" + std::to_string(seen) : "");
    L.proof_line_count = count_proof_lines(L.proof_text);
    L.style = classify_style(L.proof_text);
    L.category = categorize(L);
  }

  const TheoryFile& th_;
  const Scanner& sc_;
  std::size_t end_;
  int anon_count_ = 0;
  std::map<std::string, int> name_count_;
};

}  // namespace

bool is_theory_command(std::string_view word) { return kTheoryCommands.count(word) > 0; }
bool is_proof_command(std::string_view word) { return kProofCommands.count(word) > 0; }

TheoryFile parse_theory(std::string_view text, std::string_view id, std::string path) {
  TheoryFile th;
  th.id = std::string(id);
  th.path = std::move(path);
  th.text = std::string(text);
  if (auto dot = th.id.find('.'); dot != std::string::npos) th.session = th.id.substr(0, dot);

  Scanner sc(text, mask_source(text));
  if (sc.size() == 0 || sc.word(0) != "theory") throw Error(ErrorCode::MissingHeader, th.id);
  if (sc.size() < 2 || (sc[1].kind != Kind::Name && sc[1].kind != Kind::String))
    throw Error(ErrorCode::MissingHeader, th.id + ": theory name missing");
  th.header_begin = sc[0].begin;
  th.name = std::string(sc.original_token(1));

  std::size_t i = 2;
  bool in_imports = false;
  bool skipping = false;
  for (; i < sc.size(); ++i) {
    std::string_view w = sc.word(i);
    if (w == "begin") break;
    if (w == "imports") {
      in_imports = true;
      skipping = false;
      continue;
    }
    if (w == "keywords" || w == "abbrevs") {
      in_imports = false;
      skipping = true;
      continue;
    }
    if (in_imports && !skipping && (sc[i].kind == Kind::Name || sc[i].kind == Kind::String))
      th.imports.emplace_back(sc.original_token(i));
  }
  if (i >= sc.size()) throw Error(ErrorCode::MissingHeader, th.id + ": no `begin` after header");
  th.header_end = sc[i].end;
  const int header_line = sc[i].line;

  for (const auto& imp : th.imports) {
    if (imp == th.name) throw Error(ErrorCode::SelfImport, th.id + " imports itself");
  }

  int depth = 0;
  bool closed = false;
  for (++i; i < sc.size(); ++i) {
    std::string_view w = sc.word(i);
    if (w == "begin") {
      ++depth;
    } else if (w == "end") {
      if (depth == 0) {
        th.end_offset = sc[i].begin;
        th.body = {header_line + 1, sc[i].line - 1};
        closed = true;
        break;
      }
      --depth;
    }
  }
  if (!closed) throw Error(ErrorCode::UnterminatedTheory, th.id);
  return th;
}

Extraction extract_lemmas(const TheoryFile& theory) {
  Scanner sc(theory.text, mask_source(theory.text));
  return LemmaExtractor(theory, sc).run();
}

TheoryFile parse_theory_with_lemmas(std::string_view text, std::string_view id, std::string path) {
  TheoryFile th = parse_theory(text, id, std::move(path));
  th.lemmas = extract_lemmas(th).lemmas;
  return th;
}

Style classify_style(std::string_view proof_text) {
  for (const auto& t : lex::tokenize(mask_source(proof_text))) {
    if (t.kind != Kind::Name) continue;
    return t.text(proof_text) == "proof" ? Style::Declarative : Style::Procedural;
  }
  return Style::Procedural;
}

int count_proof_lines(std::string_view proof_text) {
  int n = 0;
  for (auto line : split_lines(proof_text))
    if (!is_blank(line)) ++n;
  return n;
}

}  // namespace isobench

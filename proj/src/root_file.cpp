#include "isobench/root_file.hpp"

#include <algorithm>
#include <array>
#include <filesystem>

#include "isobench/error.hpp"
#include "isobench/text.hpp"

namespace isobench {
namespace {

using lex::Kind;
using lex::Token;

constexpr std::array kTopLevel = {std::string_view("session"), std::string_view("chapter"),
                                  std::string_view("chapter_definition")};

constexpr std::array kDirectives = {
    std::string_view("description"),      std::string_view("options"),
    std::string_view("sessions"),         std::string_view("directories"),
    std::string_view("theories"),         std::string_view("document_theories"),
    std::string_view("document_files"),   std::string_view("export_files"),
    std::string_view("export_classpath"),
};

template <std::size_t N>
bool one_of(std::string_view word, const std::array<std::string_view, N>& set) {
  return std::find(set.begin(), set.end(), word) != set.end();
}

class StanzaParser {
 public:
  StanzaParser(std::string_view src, const std::vector<Token>& toks, std::size_t pos, std::string_view root_dir)
      : src_(src), toks_(toks), pos_(pos), root_dir_(root_dir) {}

  /// Parses from the `session` keyword at `pos`; returns the index one past
  /// the stanza's last token.
  std::size_t parse(SessionSpec& out) {
    const int header_line = toks_[pos_].line;
    auto malformed = [&] {
      throw Error(ErrorCode::MalformedStanza, "line " + std::to_string(header_line));
    };
    ++pos_;  // session
    if (!name_like()) malformed();
    out.name = word();
    ++pos_;
    if (is_symbol("(")) skip_group("(", ")");
    if (at_kind(Kind::Cartouche)) ++pos_;  // inline description form
    std::string dir;
    if (is_word("in")) {
      ++pos_;
      if (!name_like()) malformed();
      dir = word();
      ++pos_;
    }
    out.directory = join_relative(root_dir_, dir);
    if (!is_symbol("=")) malformed();
    ++pos_;
    if (name_like() && next_is_symbol("+")) {
      out.parent = word();
      pos_ += 2;
    }
    while (pos_ < toks_.size() && !top_level()) {
      if (!at_kind(Kind::Name) || !one_of(word(), kDirectives)) {
        ++pos_;  // stray token inside a stanza; tolerated and preserved in raw text
        continue;
      }
      std::string directive = word();
      std::size_t start = toks_[pos_].begin;
      ++pos_;
      if (directive == "description") {
        if (at_kind(Kind::Cartouche) || at_kind(Kind::String)) {
          out.description = std::string(toks_[pos_].inner(src_));
          ++pos_;
        }
      } else if (directive == "sessions") {
        while (name_like() && !directive_here() && !top_level()) out.imported_sessions.push_back(take_word());
      } else if (directive == "theories") {
        if (is_symbol("[")) skip_group("[", "]");
        while (name_like() && !directive_here() && !top_level()) {
          out.entry_theories.push_back(take_word());
          if (is_symbol("(")) skip_group("(", ")");
        }
      } else {
        std::size_t last_end = toks_[pos_ - 1].end;
        while (pos_ < toks_.size() && !top_level() && !directive_here()) last_end = toks_[pos_++].end;
        out.other_directives.emplace_back(trim(src_.substr(start, last_end - start)));
      }
    }
    return pos_;
  }

 private:
  bool at_kind(Kind k) const { return pos_ < toks_.size() && toks_[pos_].kind == k; }
  bool name_like() const { return at_kind(Kind::Name) || at_kind(Kind::String) || at_kind(Kind::Number); }
  std::string word() const {
    const Token& t = toks_[pos_];
    return std::string(t.kind == Kind::String ? t.inner(src_) : t.text(src_));
  }
  std::string take_word() {
    std::string w = word();
    ++pos_;
    return w;
  }
  bool is_word(std::string_view w) const { return at_kind(Kind::Name) && toks_[pos_].text(src_) == w; }
  bool is_symbol(std::string_view s) const { return at_kind(Kind::Symbol) && toks_[pos_].text(src_) == s; }
  bool next_is_symbol(std::string_view s) const {
    return pos_ + 1 < toks_.size() && toks_[pos_ + 1].kind == Kind::Symbol && toks_[pos_ + 1].text(src_) == s;
  }
  bool directive_here() const { return at_kind(Kind::Name) && one_of(toks_[pos_].text(src_), kDirectives); }
  bool top_level() const { return at_kind(Kind::Name) && one_of(toks_[pos_].text(src_), kTopLevel); }
  void skip_group(std::string_view open, std::string_view close) {
    int depth = 0;
    while (pos_ < toks_.size()) {
      if (is_symbol(open)) ++depth;
      if (is_symbol(close) && --depth == 0) {
        ++pos_;
        return;
      }
      ++pos_;
    }
  }

  std::string_view src_;
  const std::vector<Token>& toks_;
  std::size_t pos_;
  std::string_view root_dir_;
};

std::size_t extend_to_line_end(std::string_view src, std::size_t end) {
  std::size_t i = end;
  while (i < src.size() && (src[i] == ' ' || src[i] == '\t' || src[i] == '\r')) ++i;
  if (i < src.size() && src[i] == '\n') return i + 1;
  return end;
}

}  // namespace

std::string join_relative(std::string_view root_dir, std::string_view dir) {
  std::filesystem::path p(root_dir.empty() ? "." : std::string(root_dir));
  if (!dir.empty()) p /= std::string(dir);
  std::string out = p.lexically_normal().generic_string();
  while (out.size() > 1 && out.back() == '/') out.pop_back();
  return out.empty() ? "." : out;
}

RootFile parse_root(std::string_view text, std::string_view root_dir, std::string path) {
  RootFile root;
  root.path = std::move(path);
  lex::Options opts;
  opts.dash_in_names = true;
  opts.keep_comments = true;
  const auto all = lex::tokenize(text, opts);
  std::vector<Token> toks;
  std::copy_if(all.begin(), all.end(), std::back_inserter(toks),
               [](const Token& t) { return t.kind != Kind::Comment; });

  std::size_t i = 0;
  while (i < toks.size()) {
    if (toks[i].kind != Kind::Name || toks[i].text(text) != "session") {
      ++i;
      continue;
    }
    SessionSpec spec;
    std::size_t next = StanzaParser(text, toks, i, root_dir).parse(spec);
    ByteSpan span{toks[i].begin, extend_to_line_end(text, toks[next - 1].end)};
    spec.raw_stanza = std::string(text.substr(span.begin, span.end - span.begin));
    root.stanzas.push_back(std::move(spec));
    root.stanza_spans.push_back(span);
    i = next;
  }

  std::size_t cursor = 0;
  auto add_gap = [&](std::size_t upto) {
    if (upto > cursor) root.unparsed_regions.push_back({{cursor, upto}, std::string(text.substr(cursor, upto - cursor))});
  };
  for (const auto& span : root.stanza_spans) {
    add_gap(span.begin);
    cursor = span.end;
  }
  add_gap(text.size());
  return root;
}

std::string RootFile::reconstruct() const {
  struct Piece {
    std::size_t begin;
    const std::string* text;
  };
  std::vector<Piece> pieces;
  for (std::size_t i = 0; i < stanzas.size(); ++i) pieces.push_back({stanza_spans[i].begin, &stanzas[i].raw_stanza});
  for (const auto& r : unparsed_regions) pieces.push_back({r.span.begin, &r.text});
  std::sort(pieces.begin(), pieces.end(), [](const Piece& a, const Piece& b) { return a.begin < b.begin; });
  std::string out;
  for (const auto& p : pieces) out += *p.text;
  return out;
}

std::string emit_stanza(const SessionSpec& spec) {
  std::string out = "session " + spec.name;
  if (spec.directory != ".") out += " in \"" + spec.directory + "\"";
  out += " =";
  if (spec.parent) out += " " + *spec.parent + " +";
  out += "\n";
  if (spec.description) out += "  description \\<open>" + *spec.description + "\\<close>\n";
  if (!spec.imported_sessions.empty()) {
    out += "  sessions\n";
    for (const auto& s : spec.imported_sessions) out += "    " + s + "\n";
  }
  if (!spec.entry_theories.empty()) {
    out += "  theories\n";
    for (const auto& t : spec.entry_theories) out += "    \"" + t + "\"\n";
  }
  return out;
}

}  // namespace isobench

#include "isobench/text.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "isobench/error.hpp"

namespace isobench {
namespace lex {
namespace {

constexpr std::string_view kOpenCartouche = "\xE2\x80\xB9";   // ‹
constexpr std::string_view kCloseCartouche = "\xE2\x80\xBA";  // ›
constexpr std::string_view kOpenSym = "\\<open>";
constexpr std::string_view kCloseSym = "\\<close>";

bool is_name_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }

bool is_name_char(char c, bool dash) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '\'' || c == '.' ||
         (dash && c == '-');
}

std::size_t utf8_length(unsigned char lead) {
  if (lead >= 0xF0) return 4;
  if (lead >= 0xE0) return 3;
  if (lead >= 0xC0) return 2;
  return 1;
}

class Lexer {
 public:
  Lexer(std::string_view src, const Options& opts) : src_(src), opts_(opts) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (c == '\n') {
        ++line_;
        ++pos_;
        continue;
      }
      if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
        continue;
      }
      Token tok = next();
      if (tok.kind == Kind::Comment && !opts_.keep_comments) continue;
      out.push_back(tok);
    }
    return out;
  }

 private:
  bool at(std::string_view s) const { return src_.substr(pos_, s.size()) == s; }

  void advance(std::size_t n) {
    for (std::size_t i = 0; i < n && pos_ < src_.size(); ++i) {
      if (src_[pos_] == '\n') ++line_;
      ++pos_;
    }
  }

  Token make(Kind k, std::size_t b, int line) {
    return Token{k, b, pos_, b, pos_, line};
  }

  Token next() {
    const std::size_t b = pos_;
    const int line = line_;
    if (at("(*")) return comment(b, line);
    if (at(kOpenCartouche) || at(kOpenSym)) return cartouche(b, line);
    if (at("{*")) return verbatim(b, line);
    char c = src_[pos_];
    if (c == '"' || c == '`') return quoted(b, line, c);
    if (c == '\\' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '<') {
      auto close = src_.find('>', pos_);
      advance(close == std::string_view::npos ? src_.size() - pos_ : close - pos_ + 1);
      return make(Kind::Symbol, b, line);
    }
    const bool schematic = c == '?' && pos_ + 1 < src_.size() && is_name_start(src_[pos_ + 1]);
    if (is_name_start(c) || schematic) {
      advance(1);
      while (pos_ < src_.size() && is_name_char(src_[pos_], opts_.dash_in_names)) advance(1);
      // a trailing dot belongs to the surrounding syntax, not the name
      while (pos_ > b + 1 && src_[pos_ - 1] == '.') --pos_;
      return make(Kind::Name, b, line);
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) advance(1);
      return make(Kind::Number, b, line);
    }
    advance(utf8_length(static_cast<unsigned char>(c)));
    return make(Kind::Symbol, b, line);
  }

  Token comment(std::size_t b, int line) {
    int depth = 0;
    while (pos_ < src_.size()) {
      if (at("(*")) {
        ++depth;
        advance(2);
      } else if (at("*)")) {
        --depth;
        advance(2);
        if (depth == 0) break;
      } else {
        advance(1);
      }
    }
    return make(Kind::Comment, b, line);
  }

  Token cartouche(std::size_t b, int line) {
    int depth = 0;
    std::size_t inner_b = 0;
    std::size_t inner_e = src_.size();
    while (pos_ < src_.size()) {
      if (at(kOpenCartouche) || at(kOpenSym)) {
        std::size_t n = at(kOpenSym) ? kOpenSym.size() : kOpenCartouche.size();
        advance(n);
        if (depth++ == 0) inner_b = pos_;
      } else if (at(kCloseCartouche) || at(kCloseSym)) {
        std::size_t n = at(kCloseSym) ? kCloseSym.size() : kCloseCartouche.size();
        if (--depth == 0) inner_e = pos_;
        advance(n);
        if (depth == 0) break;
      } else {
        advance(1);
      }
    }
    Token t = make(Kind::Cartouche, b, line);
    t.inner_begin = inner_b;
    t.inner_end = std::min(inner_e, pos_);
    return t;
  }

  Token verbatim(std::size_t b, int line) {
    advance(2);
    const std::size_t inner_b = pos_;
    auto close = src_.find("*}", pos_);
    std::size_t inner_e = close == std::string_view::npos ? src_.size() : close;
    advance(inner_e - pos_);
    advance(2);
    Token t = make(Kind::Cartouche, b, line);
    t.inner_begin = inner_b;
    t.inner_end = inner_e;
    return t;
  }

  Token quoted(std::size_t b, int line, char quote) {
    advance(1);
    const std::size_t inner_b = pos_;
    std::size_t inner_e = src_.size();
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (c == '\\' && pos_ + 1 < src_.size() && (src_[pos_ + 1] == quote || src_[pos_ + 1] == '\\')) {
        advance(2);
        continue;
      }
      if (c == quote) {
        inner_e = pos_;
        advance(1);
        break;
      }
      advance(1);
    }
    Token t = make(Kind::String, b, line);
    t.inner_begin = inner_b;
    t.inner_end = inner_e;
    return t;
  }

  std::string_view src_;
  Options opts_;
  std::size_t pos_ = 0;
  int line_ = 1;
};

}  // namespace

std::vector<Token> tokenize(std::string_view src, const Options& opts) { return Lexer(src, opts).run(); }

}  // namespace lex

std::string mask_source(std::string_view src) {
  std::string out(src);
  lex::Options opts;
  opts.keep_comments = true;
  for (const auto& t : lex::tokenize(src, opts)) {
    if (t.kind != lex::Kind::Comment && t.kind != lex::Kind::String && t.kind != lex::Kind::Cartouche) continue;
    for (std::size_t i = t.begin; i < t.end; ++i)
      if (out[i] != '\n') out[i] = ' ';
    if (t.kind != lex::Kind::Comment && t.end > t.begin) {
      out[t.begin] = '"';
      if (t.end - 1 > t.begin && out[t.end - 1] != '\n') out[t.end - 1] = '"';
    }
  }
  return out;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    auto nl = text.find('\n', start);
    if (nl == std::string_view::npos) {
      lines.push_back(text.substr(start));
      break;
    }
    lines.push_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  return lines;
}

std::vector<std::size_t> line_starts(std::string_view text) {
  std::vector<std::size_t> starts{0, 0};
  for (std::size_t i = 0; i < text.size(); ++i)
    if (text[i] == '\n') starts.push_back(i + 1);
  return starts;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool is_blank(std::string_view s) { return trim(s).empty(); }

std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

bool starts_with_word(std::string_view line, std::string_view word) {
  auto t = trim(line);
  if (t.substr(0, word.size()) != word) return false;
  if (t.size() == word.size()) return true;
  char c = t[word.size()];
  return !(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '\'');
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, std::string_view contents) {
  std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
}

}  // namespace isobench

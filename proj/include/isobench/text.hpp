#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace isobench {

/// Outer-syntax lexer shared by the ROOT and theory parsers. It understands
/// nested `(* *)` comments, double-quoted and back-quoted strings, cartouches
/// (both `‹…›` and `\<open>…\<close>`, nested) and `{* *}` verbatim text.
/// Everything else is split into names, numbers and symbols.
namespace lex {

enum class Kind { Name, Number, String, Cartouche, Comment, Symbol };

struct Token {
  Kind kind;
  std::size_t begin;        // byte offset of the first byte
  std::size_t end;          // one past the last byte
  std::size_t inner_begin;  // String/Cartouche: first byte of the content
  std::size_t inner_end;
  int line;                 // 1-based line of `begin`

  std::string_view text(std::string_view src) const { return src.substr(begin, end - begin); }
  std::string_view inner(std::string_view src) const {
    return src.substr(inner_begin, inner_end - inner_begin);
  }
};

struct Options {
  bool keep_comments = false;
  bool dash_in_names = false;  // ROOT files allow `HOL-Library` as a bare name
};

std::vector<Token> tokenize(std::string_view src, const Options& opts = {});

}  // namespace lex

/// Same-length copy of `src` where comments become blanks and the payload of
/// strings and cartouches is blanked (delimiters become `"`). Newlines are
/// kept, so offsets and line numbers carry over unchanged. Keyword scanning
/// runs on this view so nothing inside a comment or a term can open a lemma.
std::string mask_source(std::string_view src);

/// Lines without their terminating '\n'. A trailing newline does not produce
/// an extra empty line.
std::vector<std::string_view> split_lines(std::string_view text);

/// Byte offset where each 1-based line starts; entry 0 is unused.
std::vector<std::size_t> line_starts(std::string_view text);

std::string_view trim(std::string_view s);
bool is_blank(std::string_view s);
std::string to_lower(std::string_view s);
std::string join(const std::vector<std::string>& parts, std::string_view sep);
bool starts_with_word(std::string_view line, std::string_view word);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

}  // namespace isobench

#include "isobench/corpus.hpp"

#include "isobench/error.hpp"

namespace isobench {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::MalformedStanza: return "MalformedStanza";
    case ErrorCode::MissingHeader: return "MissingHeader";
    case ErrorCode::UnterminatedTheory: return "UnterminatedTheory";
    case ErrorCode::UnterminatedProof: return "UnterminatedProof";
    case ErrorCode::SelfImport: return "SelfImport";
    case ErrorCode::UnresolvedImport: return "UnresolvedImport";
    case ErrorCode::UnresolvedSession: return "UnresolvedSession";
    case ErrorCode::DuplicateSession: return "DuplicateSession";
    case ErrorCode::DependencyCycle: return "DependencyCycle";
    case ErrorCode::UnknownTheory: return "UnknownTheory";
    case ErrorCode::LemmaExcluded: return "LemmaExcluded";
    case ErrorCode::TheoryNotInGraph: return "TheoryNotInGraph";
    case ErrorCode::MissingPlaceholder: return "MissingPlaceholder";
    case ErrorCode::SpliceCollision: return "SpliceCollision";
    case ErrorCode::ExecutableNotFound: return "ExecutableNotFound";
    case ErrorCode::EmptyQuery: return "EmptyQuery";
    case ErrorCode::NoCandidate: return "NoCandidate";
    case ErrorCode::AuthError: return "AuthError";
    case ErrorCode::TransportError: return "TransportError";
    case ErrorCode::ResponseMalformed: return "ResponseMalformed";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Error";
}

ErrorCode parse_error_code(const std::string& name) noexcept {
  for (int i = 0; i <= static_cast<int>(ErrorCode::IoError); ++i) {
    auto code = static_cast<ErrorCode>(i);
    if (name == to_string(code)) return code;
  }
  return ErrorCode::IoError;
}

const char* to_string(Style s) noexcept { return s == Style::Procedural ? "procedural" : "declarative"; }

const char* to_string(Category c) noexcept {
  switch (c) {
    case Category::P1: return "P1";
    case Category::P2: return "P2";
    case Category::P3: return "P3";
    case Category::D: return "D";
    case Category::Excluded: return "excluded";
  }
  return "excluded";
}

Style parse_style(std::string_view s) {
  if (s == "procedural") return Style::Procedural;
  if (s == "declarative") return Style::Declarative;
  throw Error(ErrorCode::ConfigError, "unknown style '" + std::string(s) + "'");
}

Category parse_category(std::string_view s) {
  if (s == "P1") return Category::P1;
  if (s == "P2") return Category::P2;
  if (s == "P3") return Category::P3;
  if (s == "D") return Category::D;
  if (s == "excluded") return Category::Excluded;
  throw Error(ErrorCode::ConfigError, "unknown category '" + std::string(s) + "'");
}

std::vector<std::string> SessionSpec::dependencies() const {
  std::vector<std::string> deps;
  if (parent) deps.push_back(*parent);
  for (const auto& s : imported_sessions)
    if (!parent || s != *parent) deps.push_back(s);
  return deps;
}

std::string Lemma::source_text() const {
  return spec_text + (proof_on_spec_line ? " " : "\n") + proof_text;
}

Category categorize(Style style, int proof_line_count, bool in_locale) noexcept {
  if (in_locale || proof_line_count < 1 || proof_line_count > 20) return Category::Excluded;
  if (style == Style::Declarative) return Category::D;
  if (proof_line_count == 1) return Category::P1;
  if (proof_line_count <= 6) return Category::P2;
  return Category::P3;
}

Category categorize(const Lemma& lemma) noexcept {
  if (lemma.uses_sorry) return Category::Excluded;
  return categorize(lemma.style, lemma.proof_line_count, lemma.in_locale);
}

}  // namespace isobench

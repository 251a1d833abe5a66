#include "isobench/manifest.hpp"

#include <filesystem>
#include <fstream>
#include <json.hpp>

#include "isobench/digest.hpp"
#include "isobench/text.hpp"

namespace isobench {
namespace {

using json = nlohmann::ordered_json;

json optional_json(const std::optional<std::string>& v) { return v ? json(*v) : json(nullptr); }

json session_json(const SessionSpec& s) {
  return {{"type", "session"},
          {"name", s.name},
          {"directory", s.directory},
          {"parent", optional_json(s.parent)},
          {"sessions", s.imported_sessions},
          {"theories", s.entry_theories},
          {"description", optional_json(s.description)},
          {"other_directives", s.other_directives},
          {"raw_stanza", s.raw_stanza}};
}

json lemma_json(const Lemma& l) {
  return {{"type", "lemma"},
          {"id", l.id},
          {"theory", l.theory_id},
          {"keyword", l.keyword},
          {"name", l.name},
          {"attributes", l.attributes},
          {"span", {l.span.first, l.span.last}},
          {"proof_first_line", l.proof_first_line},
          {"proof_on_spec_line", l.proof_on_spec_line},
          {"proof_line_count", l.proof_line_count},
          {"style", to_string(l.style)},
          {"category", to_string(l.category)},
          {"in_locale", l.in_locale},
          {"uses_sorry", l.uses_sorry},
          {"spec_text", l.spec_text},
          {"proof_text", l.proof_text}};
}

std::optional<std::string> optional_from(const json& j) {
  return j.is_null() ? std::nullopt : std::optional<std::string>(j.get<std::string>());
}

}  // namespace

std::string render_manifest(const Corpus& corpus) {
  std::string out;
  auto line = [&](const json& j) { out += j.dump() + "\n"; };
  line({{"type", "corpus"}, {"version", kManifestVersion}, {"root", corpus.root}});
  for (const auto& s : corpus.sessions) line(session_json(s));
  for (const auto& th : corpus.theories) {
    line({{"type", "theory"},
          {"id", th.id},
          {"session", th.session},
          {"name", th.name},
          {"path", th.path},
          {"digest", sha256_hex(th.text)},
          {"imports", th.imports},
          {"header_begin", th.header_begin},
          {"header_end", th.header_end},
          {"end_offset", th.end_offset},
          {"body", {th.body.first, th.body.last}}});
    for (const auto& l : th.lemmas) line(lemma_json(l));
  }
  for (const auto& issue : corpus.issues)
    line({{"type", "issue"}, {"path", issue.path}, {"code", to_string(issue.code)}, {"message", issue.message}});
  json counts = json::object();
  for (const auto& [cat, n] : corpus.category_counts()) counts[to_string(cat)] = n;
  line({{"type", "summary"},
        {"sessions", corpus.sessions.size()},
        {"theories", corpus.theories.size()},
        {"lemmas", corpus.lemmas().size()},
        {"categories", counts}});
  return out;
}

void write_manifest(const Corpus& corpus, const std::string& path) { write_file(path, render_manifest(corpus)); }

Corpus read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open manifest " + path);
  Corpus corpus;
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    if (is_blank(raw)) continue;
    json j;
    try {
      j = json::parse(raw);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::IoError, path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    const std::string type = j.at("type");
    if (type == "corpus") {
      if (j.at("version") != kManifestVersion) throw Error(ErrorCode::IoError, "unsupported manifest version");
      corpus.root = j.at("root");
    } else if (type == "session") {
      SessionSpec s;
      s.name = j.at("name");
      s.directory = j.at("directory");
      s.parent = optional_from(j.at("parent"));
      s.imported_sessions = j.at("sessions").get<std::vector<std::string>>();
      s.entry_theories = j.at("theories").get<std::vector<std::string>>();
      s.description = optional_from(j.at("description"));
      s.other_directives = j.at("other_directives").get<std::vector<std::string>>();
      s.raw_stanza = j.at("raw_stanza");
      corpus.sessions.push_back(std::move(s));
    } else if (type == "theory") {
      TheoryFile th;
      th.id = j.at("id");
      th.session = j.at("session");
      th.name = j.at("name");
      th.path = j.at("path");
      th.imports = j.at("imports").get<std::vector<std::string>>();
      th.header_begin = j.at("header_begin");
      th.header_end = j.at("header_end");
      th.end_offset = j.at("end_offset");
      th.body = {j.at("body")[0], j.at("body")[1]};
      th.text = read_file((std::filesystem::path(corpus.root) / th.path).string());
      if (sha256_hex(th.text) != j.at("digest").get<std::string>())
        throw Error(ErrorCode::IoError, th.path + " changed since the manifest was written");
      corpus.theories.push_back(std::move(th));
    } else if (type == "lemma") {
      if (corpus.theories.empty() || corpus.theories.back().id != j.at("theory"))
        throw Error(ErrorCode::IoError, "lemma record outside its theory at line " + std::to_string(lineno));
      Lemma l;
      l.id = j.at("id");
      l.theory_id = j.at("theory");
      l.keyword = j.at("keyword");
      l.name = j.at("name");
      l.attributes = j.at("attributes").get<std::vector<std::string>>();
      l.span = {j.at("span")[0], j.at("span")[1]};
      l.proof_first_line = j.at("proof_first_line");
      l.proof_on_spec_line = j.at("proof_on_spec_line");
      l.proof_line_count = j.at("proof_line_count");
      l.style = parse_style(j.at("style").get<std::string>());
      l.category = parse_category(j.at("category").get<std::string>());
      l.in_locale = j.at("in_locale");
      l.uses_sorry = j.at("uses_sorry");
      l.spec_text = j.at("spec_text");
      l.proof_text = j.at("proof_text");
      corpus.theories.back().lemmas.push_back(std::move(l));
    } else if (type == "issue") {
      corpus.issues.push_back({j.at("path"), parse_error_code(j.at("code")), j.at("message")});
    }
  }
  if (corpus.root.empty()) throw Error(ErrorCode::IoError, path + ": missing corpus header");
  return corpus;
}

}  // namespace isobench

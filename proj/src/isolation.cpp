#include "isobench/isolation.hpp"

#include <filesystem>
#include <json.hpp>

#include "isobench/digest.hpp"
#include "isobench/error.hpp"
#include "isobench/root_file.hpp"
#include "isobench/text.hpp"

namespace fs = std::filesystem;

namespace isobench {
namespace {

std::string parent_of(const std::string& rel) {
  auto p = fs::path(rel).parent_path().generic_string();
  return p.empty() ? "." : p;
}

std::string strip_thy(const fs::path& p) {
  fs::path q = p;
  q.replace_extension();
  return q.generic_string();
}

std::string render_header(const std::string& name, const std::vector<std::string>& imports) {
  std::string out = "theory " + name + "\n  imports";
  for (const auto& imp : imports) out += " \"" + imp + "\"";
  return out + "\nbegin";
}

void write_if_changed(const std::string& path, const std::string& text) {
  if (fs::is_regular_file(path) && read_file(path) == text) return;
  write_file(path, text);
}

std::string status_file(const std::string& dir) { return (fs::path(dir) / "bench.json").string(); }

}  // namespace

const char* to_string(BenchStatus s) noexcept {
  switch (s) {
    case BenchStatus::Unchecked: return "unchecked";
    case BenchStatus::Verified: return "verified";
    case BenchStatus::Broken: return "broken";
  }
  return "unchecked";
}

std::string lemma_key(std::string_view lemma_id) { return short_digest(lemma_id, 10); }

std::string bench_dir(const std::string& workspace_root, std::string_view lemma_id) {
  return (fs::absolute(workspace_root) / "benches" / lemma_key(lemma_id)).lexically_normal().string();
}

IsolatedBench isolate(const Corpus& corpus, const DependencyGraph& graph, const Lemma& lemma,
                      const std::string& workspace_root) {
  if (lemma.category == Category::Excluded) throw Error(ErrorCode::LemmaExcluded, lemma.id);
  if (!graph.has_theory(lemma.theory_id)) throw Error(ErrorCode::TheoryNotInGraph, lemma.theory_id);
  const TheoryFile* th = corpus.find_theory(lemma.theory_id);
  if (!th) throw Error(ErrorCode::TheoryNotInGraph, lemma.theory_id);
  const SessionSpec* orig = corpus.find_session(th->session);
  if (!orig) throw Error(ErrorCode::TheoryNotInGraph, th->session);

  IsolatedBench b;
  b.lemma_id = lemma.id;
  b.key = lemma_key(lemma.id);
  b.workspace = bench_dir(workspace_root, lemma.id);
  b.dep_theory_name = th->name + "_DEP";
  b.target_theory_name = th->name + "_TGT";

  const std::string rel_dir = parent_of(th->path);
  const fs::path session_dir = (fs::path(b.workspace) / rel_dir).lexically_normal();
  b.dep_theory_path = (session_dir / (b.dep_theory_name + ".thy")).string();
  b.target_theory_path = (session_dir / (b.target_theory_name + ".thy")).string();

  // imports: same-session theories by path into the corpus, others qualified
  std::vector<std::string> imports;
  for (const auto& imp : th->imports) {
    auto resolved = graph.resolve_import(*th, imp);
    if (!resolved) {
      imports.push_back(imp);
    } else if (graph.owner(*resolved) == th->session) {
      const TheoryFile* dep = corpus.find_theory(*resolved);
      fs::path target = fs::path(corpus.root) / dep->path;
      imports.push_back(strip_thy(fs::relative(target, session_dir)));
    } else {
      imports.push_back(*resolved);
    }
  }

  auto starts = line_starts(th->text);
  std::size_t cut = static_cast<std::size_t>(lemma.span.first) < starts.size() ? starts[lemma.span.first] : th->text.size();
  if (cut < th->header_end) cut = th->header_end;
  std::string body = th->text.substr(th->header_end, cut - th->header_end);
  while (!body.empty() && (body.back() == '\n' || body.back() == ' ' || body.back() == '\t')) body.pop_back();
  b.dep_theory_text = th->text.substr(0, th->header_begin) + render_header(b.dep_theory_name, imports) + body +
                      "\n\nend\n";

  b.dep_session.name = th->session + "_DEP_" + b.key;
  b.dep_session.directory = rel_dir;
  b.dep_session.parent = orig->parent;
  b.dep_session.imported_sessions = orig->imported_sessions;
  b.dep_session.description = orig->description;
  b.dep_session.entry_theories = {b.dep_theory_name};

  b.target_session.name = th->session + "_TGT_" + b.key;
  b.target_session.directory = rel_dir;
  b.target_session.parent = b.dep_session.name;
  b.target_session.entry_theories = {b.target_theory_name};

  b.target_theory_template = render_header(b.target_theory_name, {b.dep_session.name + "." + b.dep_theory_name}) +
                             "\n\n" + lemma.spec_text + (lemma.proof_on_spec_line ? " " : "\n") +
                             std::string(kProofPlaceholder) + "\n\nend\n";

  write_if_changed((fs::path(b.workspace) / "ROOT").string(), emit_root(b));
  write_if_changed(b.dep_theory_path, b.dep_theory_text);
  write_if_changed(b.target_theory_path, b.target_theory_template);
  if (auto saved = load_bench_status(workspace_root, lemma.id)) {
    b.status = saved->first;
    b.broken_reason = saved->second;
  }
  return b;
}

std::string emit_root(const IsolatedBench& bench) {
  return emit_stanza(bench.dep_session) + "\n" + emit_stanza(bench.target_session);
}

std::string splice_proof(const IsolatedBench& bench, std::string_view proof) {
  const std::string& t = bench.target_theory_template;
  auto at = t.find(kProofPlaceholder);
  if (at == std::string::npos) throw Error(ErrorCode::MissingPlaceholder, bench.lemma_id);
  std::string out = t.substr(0, at) + std::string(proof) + t.substr(at + kProofPlaceholder.size());
  if (out.find(kProofPlaceholder) != std::string::npos) throw Error(ErrorCode::SpliceCollision, bench.lemma_id);
  return out;
}

VerifyResult verify_proof(const IsolatedBench& bench, ProverDriver& prover, std::string_view proof,
                          std::optional<double> timeout_seconds) {
  std::string text;
  try {
    text = splice_proof(bench, proof);
  } catch (const Error& e) {
    VerifyResult r;
    r.status = VerifyStatus::Failure;
    r.message = e.what();
    return r;
  }
  write_if_changed(bench.target_theory_path, text);
  double limit = timeout_seconds.value_or(prover.config().timeout_seconds);
  return prover.build_session(bench.workspace, bench.target_session.name, limit);
}

BenchStatus check_correctness(IsolatedBench& bench, ProverDriver& prover, const Lemma& lemma) {
  auto dep = prover.build_session(bench.workspace, bench.dep_session.name);
  if (dep.status != VerifyStatus::Success) {
    bench.status = BenchStatus::Broken;
    bench.broken_reason = std::string("dependency session ") + to_string(dep.status) + ": " + dep.message;
  } else {
    auto tgt = verify_proof(bench, prover, lemma.proof_text);
    if (tgt.status == VerifyStatus::Success) {
      bench.status = BenchStatus::Verified;
      bench.broken_reason.clear();
    } else {
      bench.status = BenchStatus::Broken;
      bench.broken_reason = std::string("target session ") + to_string(tgt.status) + ": " + tgt.message;
    }
  }
  nlohmann::ordered_json j = {{"lemma_id", bench.lemma_id},
                              {"key", bench.key},
                              {"dep_session", bench.dep_session.name},
                              {"target_session", bench.target_session.name},
                              {"status", to_string(bench.status)},
                              {"reason", bench.broken_reason}};
  write_file(status_file(bench.workspace), j.dump(2) + "\n");
  return bench.status;
}

std::optional<std::pair<BenchStatus, std::string>> load_bench_status(const std::string& workspace_root,
                                                                     std::string_view lemma_id) {
  std::string path = status_file(bench_dir(workspace_root, lemma_id));
  if (!fs::is_regular_file(path)) return std::nullopt;
  auto j = nlohmann::json::parse(read_file(path), nullptr, false);
  if (j.is_discarded() || !j.contains("status")) return std::nullopt;
  std::string s = j["status"];
  BenchStatus st = s == "verified" ? BenchStatus::Verified : s == "broken" ? BenchStatus::Broken : BenchStatus::Unchecked;
  return std::make_pair(st, j.value("reason", std::string()));
}

}  // namespace isobench

// isobench: corpus ingestion, lemma isolation and LLM proof evaluation.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <json.hpp>

#include "isobench/corpus_loader.hpp"
#include "isobench/error.hpp"
#include "isobench/manifest.hpp"
#include "isobench/orchestrator.hpp"
#include "isobench/synthetic.hpp"
#include "isobench/text.hpp"

namespace fs = std::filesystem;
using namespace isobench;

namespace {

enum Exit { kOk = 0, kUsage = 1, kCorpus = 2, kRuntime = 3 };

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::ConfigError:
    case ErrorCode::AuthError:
      return kUsage;
    case ErrorCode::MalformedStanza:
    case ErrorCode::MissingHeader:
    case ErrorCode::UnterminatedTheory:
    case ErrorCode::UnterminatedProof:
    case ErrorCode::SelfImport:
    case ErrorCode::UnresolvedImport:
    case ErrorCode::UnresolvedSession:
    case ErrorCode::DuplicateSession:
    case ErrorCode::DependencyCycle:
    case ErrorCode::UnknownTheory:
    case ErrorCode::LemmaExcluded:
    case ErrorCode::TheoryNotInGraph:
      return kCorpus;
    default:
      return kRuntime;
  }
}

struct Common {
  std::string config;
  std::string corpus;
  std::string workspace;

  void add_to(CLI::App* app) {
    app->add_option("-c,--config", config, "INI configuration file");
    app->add_option("--corpus", corpus, "corpus directory (overrides the config)");
    app->add_option("-w,--workspace", workspace, "workspace directory (overrides the config)");
  }

  RunConfig load() const {
    RunConfig cfg;
    if (!config.empty()) cfg = load_run_config(config);
    if (!corpus.empty()) {
      cfg.corpus = fs::absolute(corpus).lexically_normal().string();
      cfg.prover.include_dirs = {cfg.corpus};
    }
    if (!workspace.empty()) {
      cfg.workspace = fs::absolute(workspace).lexically_normal().string();
      cfg.prover.cache_dir = Workspace(cfg.workspace).prover_cache();
    }
    if (cfg.workspace.empty()) throw Error(ErrorCode::ConfigError, "no workspace (use --workspace or --config)");
    if (cfg.prover.cache_dir.empty()) cfg.prover.cache_dir = Workspace(cfg.workspace).prover_cache();
    return cfg;
  }
};

Corpus workspace_corpus(const Workspace& ws) {
  if (!fs::is_regular_file(ws.manifest()))
    throw Error(ErrorCode::ConfigError, "no manifest in workspace; run `isobench ingest` first");
  return read_manifest(ws.manifest());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"isobench: isolated lemma benchmark and LLM proof evaluation"};
  app.require_subcommand(1);

  // gen-synthetic
  auto* gen = app.add_subcommand("gen-synthetic", "write the bundled synthetic corpus");
  SyntheticParams sp;
  std::string gen_out;
  gen->add_option("-o,--out", gen_out, "output directory")->required();
  gen->add_option("--seed", sp.seed, "generator seed")->capture_default_str();
  gen->add_option("--sessions", sp.sessions, "sessions")->capture_default_str();
  gen->add_option("--theories", sp.theories_per_session, "theories per session")->capture_default_str();
  gen->add_option("--lemmas", sp.lemmas_per_theory, "benchmark lemmas per theory")->capture_default_str();

  // ingest
  Common ingest_opts;
  std::string ingest_out;
  auto* ingest = app.add_subcommand("ingest", "parse a corpus and write the lemma manifest");
  ingest_opts.add_to(ingest);
  ingest->add_option("-o,--out", ingest_out, "manifest path (default: <workspace>/manifest.jsonl)");

  // isolate
  Common iso_opts;
  bool iso_all = false;
  std::vector<std::string> iso_ids;
  auto* iso = app.add_subcommand("isolate", "build and check isolated benches");
  iso_opts.add_to(iso);
  auto* all_flag = iso->add_flag("--all", iso_all, "every benchmark lemma");
  iso->add_option("-l,--lemma", iso_ids, "lemma id (repeatable)")->excludes(all_flag);

  // chunks
  Common chunk_opts;
  auto* chunks = app.add_subcommand("chunks", "build the retrieval chunk library");
  chunk_opts.add_to(chunks);

  // bootstrap-fixing-demos
  Common boot_opts;
  auto* boot = app.add_subcommand("bootstrap-fixing-demos", "collect wrong proofs for fixing demonstrations");
  boot_opts.add_to(boot);

  // eval
  Common eval_opts;
  std::string resume, augment;
  std::optional<int> limit, k, workers;
  std::optional<std::uint64_t> seed;
  bool try_again = false, quiet = false;
  auto* eval = app.add_subcommand("eval", "evaluate the subject model on the benchmark");
  eval_opts.add_to(eval);
  eval->add_option("--resume", resume, "continue an interrupted run");
  eval->add_option("--limit", limit, "evaluate at most N lemmas in this invocation");
  eval->add_option("-k", k, "trials per lemma");
  eval->add_option("--seed", seed, "demonstration seed");
  eval->add_option("--augment", augment, "similar,dependency,fixing (comma separated)");
  eval->add_flag("--try-again", try_again, "second round without the error message");
  eval->add_option("--workers", workers, "concurrent lemmas");
  eval->add_flag("-q,--quiet", quiet, "no per-lemma progress");

  // report
  Common rep_opts;
  std::string rep_run, rep_format = "text";
  auto* rep = app.add_subcommand("report", "rebuild a run's report from its log");
  rep_opts.add_to(rep);
  rep->add_option("-r,--run", rep_run, "run id or run directory")->required();
  rep->add_option("--format", rep_format, "text or json")->check(CLI::IsMember({"text", "json"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*gen) {
      auto corpus = generate_synthetic(sp);
      write_synthetic(corpus, gen_out);
      std::cout << "wrote " << corpus.files.size() << " files and " << kGoldenManifestName << " to " << gen_out
                << "\n";
      return kOk;
    }

    if (*ingest) {
      auto cfg = ingest_opts.load();
      if (cfg.corpus.empty()) throw Error(ErrorCode::ConfigError, "no corpus (use --corpus or --config)");
      Workspace ws(cfg.workspace);
      Corpus corpus;
      try {
        corpus = load_corpus(cfg.corpus);
      } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.code() == ErrorCode::IoError ? kCorpus : exit_code_for(e.code());
      }
      std::cout << corpus_summary(corpus);
      if (corpus.lemmas().empty()) {
        std::cerr << "error: no lemmas extracted\n";
        return kCorpus;
      }
      std::string out = ingest_out.empty() ? ws.manifest() : ingest_out;
      write_manifest(corpus, out);
      std::cout << "manifest: " << ws.rel(fs::absolute(out).lexically_normal().string()) << "\n";
      if (!corpus.issues.empty()) std::cerr << "warning: " << corpus.issues.size() << " file(s) failed to parse\n";
      return kOk;
    }

    if (*iso) {
      if (!iso_all && iso_ids.empty()) throw Error(ErrorCode::ConfigError, "isolate needs --all or --lemma");
      auto cfg = iso_opts.load();
      Workspace ws(cfg.workspace);
      auto corpus = workspace_corpus(ws);
      if (cfg.prover.include_dirs.empty()) cfg.prover.include_dirs = {corpus.root};
      auto prover = make_workspace_prover(cfg);
      auto summary = isolate_lemmas(corpus, ws, *prover, iso_all ? std::vector<std::string>{} : iso_ids);
      std::cout << summary.to_text();
      return kOk;
    }

    if (*chunks) {
      auto cfg = chunk_opts.load();
      Workspace ws(cfg.workspace);
      auto lib = build_workspace_chunks(workspace_corpus(ws), ws);
      std::cout << lib.chunks.size() << " chunks, " << lib.doc_freq.size() << " terms -> " << ws.rel(ws.chunks())
                << "\n";
      return kOk;
    }

    if (*boot) {
      auto cfg = boot_opts.load();
      Workspace ws(cfg.workspace);
      auto corpus = workspace_corpus(ws);
      if (cfg.prover.include_dirs.empty()) cfg.prover.include_dirs = {corpus.root};
      auto endpoint = make_endpoint(cfg.endpoint);
      auto prover = make_workspace_prover(cfg);
      auto demos = bootstrap_fixing_demos(cfg, corpus, *endpoint, *prover, &std::cout);
      int failed = 0, total = 0;
      for (const auto& [c, list] : demos)
        for (const auto& d : list) {
          ++total;
          failed += d.error.has_value();
        }
      std::cout << failed << " of " << total << " demonstrations carry a fixing round -> " << ws.rel(ws.fixing_demos())
                << "\n";
      return kOk;
    }

    if (*eval) {
      RunConfig cfg;
      if (!resume.empty() && eval_opts.config.empty()) {
        // a resumed run keeps the configuration it started with
        if (eval_opts.workspace.empty()) throw Error(ErrorCode::ConfigError, "--resume needs --workspace or --config");
        Workspace ws(eval_opts.workspace);
        auto meta = nlohmann::json::parse(read_file(ws.run_dir(resume) + "/config.json"));
        cfg = RunConfig::from_json(meta.at("config").dump());
      } else {
        cfg = eval_opts.load();
        if (k) cfg.k = *k;
        if (seed) cfg.seed = *seed;
        if (!augment.empty()) {
          bool force_d = cfg.augment.force_dependency_for_d;
          cfg.augment = parse_augment_list(augment);
          cfg.augment.force_dependency_for_d = force_d;
        }
        if (try_again) cfg.augment.try_again = true;
      }
      if (workers) cfg.workers = *workers;
      cfg.validate();
      EvalOptions opts;
      if (!resume.empty()) opts.resume = resume;
      opts.limit = limit;
      opts.progress = quiet ? nullptr : &std::cerr;
      auto res = run_eval(cfg, opts);
      Workspace ws(cfg.workspace);
      std::cout << "run " << res.run_id << " (" << ws.rel(res.run_dir) << "): " << res.evaluated_now
                << " lemmas evaluated, " << res.remaining << " remaining\n";
      if (res.report) std::cout << "\n" << res.report->to_text();
      return kOk;
    }

    if (*rep) {
      std::string dir = rep_run;
      if (!fs::is_directory(dir)) dir = Workspace(rep_opts.load().workspace).run_dir(rep_run);
      if (!fs::is_regular_file(dir + "/config.json")) throw Error(ErrorCode::ConfigError, "no run at " + dir);
      auto log = read_run_log(dir);
      auto report = report_from_run(dir);
      std::cout << (rep_format == "json" ? report.to_json() : report.to_text());
      if (static_cast<int>(log.finished.size()) < log.evaluation_size)
        std::cerr << "warning: run incomplete, " << log.finished.size() << " of " << log.evaluation_size
                  << " lemmas finished\n";
      return kOk;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kUsage;
}

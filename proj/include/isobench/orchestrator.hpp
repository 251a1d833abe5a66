#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "isobench/corpus_loader.hpp"
#include "isobench/endpoint.hpp"
#include "isobench/evaluation.hpp"
#include "isobench/isolation.hpp"
#include "isobench/prover.hpp"
#include "isobench/retrieval.hpp"

namespace isobench {

struct EndpointConfig {
  std::string kind = "scripted";  // scripted | http
  std::string script;             // scripted: JSON script path
  HttpEndpointConfig http;
};

struct RunConfig {
  std::string corpus;
  std::string workspace;
  ProverConfig prover;
  EndpointConfig endpoint;
  std::vector<Category> categories{Category::P1, Category::P2, Category::P3, Category::D};
  int k = 1;
  std::optional<double> temperature;  // default from k
  double top_p = 0.95;
  int max_generation_units = 2048;
  Augmentations augment;
  std::uint64_t seed = 0;
  int demos_per_category = 5;
  bool short_circuit = false;
  int workers = 4;
  std::optional<double> verify_timeout_seconds;  // default: prover timeout
  std::string refusal_patterns;  // empty: built-in list
  std::string fact_stoplist;     // empty: built-in list
  bool save_prompts = true;

  SamplingParams sampling() const;
  /// Throws ConfigError.
  void validate() const;
  /// Digest of every setting that can change results (not paths, not workers).
  std::string digest() const;
  std::string to_json() const;
  static RunConfig from_json(const std::string& text);
};

/// "similar,dependency,fixing,try_again" (or "none"). Throws ConfigError.
Augmentations parse_augment_list(const std::string& value);

/// INI file with [corpus] [workspace] [prover] [endpoint] [eval] sections.
/// Relative paths resolve against the file's directory. Credentials are read
/// from the environment only; a key named like a secret is a ConfigError.
RunConfig load_run_config(const std::string& path);

/// Workspace layout.
struct Workspace {
  std::string root;  // absolute

  explicit Workspace(const std::string& dir);
  std::string manifest() const { return root + "/manifest.jsonl"; }
  std::string prover_cache() const { return root + "/prover-cache"; }
  std::string chunks() const { return root + "/chunks.json"; }
  std::string fixing_demos() const { return root + "/fixing_demos.json"; }
  std::string runs() const { return root + "/runs"; }
  std::string run_dir(const std::string& id) const { return runs() + "/" + id; }
  /// `path` relative to the workspace when inside it.
  std::string rel(const std::string& path) const;
};

std::unique_ptr<ProverDriver> make_workspace_prover(const RunConfig& cfg);
/// Throws AuthError (missing credential) or ConfigError.
std::unique_ptr<ChatEndpoint> make_endpoint(const EndpointConfig& cfg);
/// Identity of the subject model, for caches.
std::string endpoint_identity(const EndpointConfig& cfg);

// ---------------------------------------------------------------------------
// commands

/// Extracted-lemma counts per category, with excluded lemmas and parse issues.
std::string corpus_summary(const Corpus& corpus);

struct IsolateSummary {
  std::map<Category, int> verified, broken, skipped;  // skipped: already verified earlier
  std::vector<std::pair<std::string, std::string>> failures;  // lemma id, reason
  long rebuilt_theories = -1;  // mock prover only
  std::string to_text() const;
};

/// Isolates and checks the given lemmas (all benchmark lemmas when empty).
/// Benches verified by an earlier call are skipped.
IsolateSummary isolate_lemmas(const Corpus& corpus, const Workspace& ws, ProverDriver& prover,
                              const std::vector<std::string>& lemma_ids, std::ostream* progress = nullptr);

ChunkLibrary build_workspace_chunks(const Corpus& corpus, const Workspace& ws);

/// Lemmas with a verified bench, per category, manifest order.
std::map<Category, std::vector<const Lemma*>> verified_pools(const Corpus& corpus, const Workspace& ws,
                                                             const std::vector<Category>& categories);

struct FixingDemo {
  std::string lemma_id;
  std::optional<std::string> wrong_proof;
  std::optional<std::string> error;
};

/// Runs the model once on every demonstration lemma with the other ones as
/// demonstrations and caches failed attempts with their errors.
std::map<Category, std::vector<FixingDemo>> bootstrap_fixing_demos(const RunConfig& cfg, const Corpus& corpus,
                                                                   ChatEndpoint& endpoint, ProverDriver& prover,
                                                                   std::ostream* progress = nullptr);
/// Cached demos, nullopt when absent or made for another seed/model/selection.
std::optional<std::map<Category, std::vector<FixingDemo>>> load_fixing_demos(
    const RunConfig& cfg, const std::map<Category, std::vector<std::string>>& demo_ids);

struct EvalOptions {
  std::optional<std::string> resume;  // run id
  std::optional<int> limit;           // lemmas to process in this invocation
  ChatEndpoint* endpoint = nullptr;   // overrides the configured one
  ProverDriver* prover = nullptr;
  std::ostream* progress = nullptr;
};

struct EvalResult {
  std::string run_id;
  std::string run_dir;
  int evaluated_now = 0;  // lemmas finished by this invocation
  int remaining = 0;
  bool complete = false;
  std::optional<RunReport> report;  // when complete
};

/// Throws ConfigError before any trial for an unusable configuration.
EvalResult run_eval(const RunConfig& cfg, const EvalOptions& options = {});

struct RunLog {
  std::vector<TrialRecord> records;  // of finished lemmas only
  std::map<std::string, Category> finished;
  int dependency_located = 0;
  int dependency_skipped = 0;
  int evaluation_size = 0;
};
RunLog read_run_log(const std::string& run_dir);

/// Rebuilds the report from config.json and trials.jsonl.
RunReport report_from_run(const std::string& run_dir);

/// Per-lemma evaluation pieces, exposed for tests.
struct LemmaTask {
  const Lemma* lemma = nullptr;
  IsolatedBench bench;
  std::string augmentation;
  std::string instruction;
  const std::vector<Demonstration>* demos = nullptr;
};

struct PromptLog {
  std::string lemma_id;
  int trial_index;
  Round round;
  std::vector<Message> messages;
};

/// k trials, each with an optional second round. Endpoint and prover errors
/// end up in the records.
std::vector<TrialRecord> evaluate_lemma(const LemmaTask& task, const RunConfig& cfg, ChatEndpoint& endpoint,
                                        ProverDriver& prover, const std::vector<std::string>& refusal_patterns,
                                        std::vector<PromptLog>* prompts = nullptr);

}  // namespace isobench

#include "isobench/orchestrator.hpp"

#include <atomic>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <chrono>
#include <condition_variable>
#include <ctime>
#include <deque>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <sstream>
#include <thread>

#include "isobench/digest.hpp"
#include "isobench/error.hpp"
#include "isobench/manifest.hpp"
#include "isobench/mock_prover.hpp"
#include "isobench/text.hpp"

namespace isobench {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// config

SamplingParams RunConfig::sampling() const {
  SamplingParams p = SamplingParams::defaults_for(k);
  if (temperature) p.temperature = *temperature;
  p.top_p = top_p;
  p.max_generation_units = max_generation_units;
  return p;
}

void RunConfig::validate() const {
  sampling().validate();
  augment.validate();
  if (categories.empty()) throw Error(ErrorCode::ConfigError, "no categories to evaluate");
  for (Category c : categories)
    if (c == Category::Excluded) throw Error(ErrorCode::ConfigError, "excluded lemmas cannot be evaluated");
  if (demos_per_category < 0) throw Error(ErrorCode::ConfigError, "demos_per_category must be >= 0");
  if (workers < 1) throw Error(ErrorCode::ConfigError, "workers must be >= 1");
  if (endpoint.kind != "scripted" && endpoint.kind != "http")
    throw Error(ErrorCode::ConfigError, "endpoint kind must be scripted or http");
  if (workspace.empty()) throw Error(ErrorCode::ConfigError, "workspace path missing");
}

namespace {

json categories_json(const std::vector<Category>& cats) {
  json a = json::array();
  for (Category c : cats) a.push_back(to_string(c));
  return a;
}

std::string file_digest_or_empty(const std::string& path) {
  return path.empty() ? "" : sha256_hex(read_file(path));
}

json augment_json(const Augmentations& a) {
  return {{"similar", a.similar},
          {"dependency", a.dependency},
          {"fixing", a.fixing},
          {"try_again", a.try_again},
          {"force_dependency_for_d", a.force_dependency_for_d}};
}

Augmentations augment_from_json(const json& j) {
  Augmentations a;
  a.similar = j.at("similar");
  a.dependency = j.at("dependency");
  a.fixing = j.at("fixing");
  a.try_again = j.at("try_again");
  a.force_dependency_for_d = j.at("force_dependency_for_d");
  return a;
}

}  // namespace

std::string RunConfig::digest() const {
  auto s = sampling();
  json j = {{"categories", categories_json(categories)},
            {"k", k},
            {"temperature", s.temperature},
            {"top_p", s.top_p},
            {"max_generation_units", s.max_generation_units},
            {"augment", augment_json(augment)},
            {"seed", seed},
            {"demos_per_category", demos_per_category},
            {"short_circuit", short_circuit},
            {"verify_timeout", verify_timeout_seconds.value_or(prover.timeout_seconds)},
            {"prover", prover.kind == ProverConfig::Kind::Mock ? "mock" : "external"},
            {"endpoint", endpoint_identity(endpoint)},
            {"refusal_patterns", file_digest_or_empty(refusal_patterns)},
            {"fact_stoplist", file_digest_or_empty(fact_stoplist)}};
  return short_digest(j.dump(), 12);
}

std::string RunConfig::to_json() const {
  json j;
  j["corpus"] = corpus;
  j["workspace"] = workspace;
  j["prover"] = {{"kind", prover.kind == ProverConfig::Kind::Mock ? "mock" : "external"},
                 {"executable", prover.executable},
                 {"cache_dir", prover.cache_dir},
                 {"timeout_seconds", prover.timeout_seconds},
                 {"include_dirs", prover.include_dirs},
                 {"pool_size", prover.pool_size}};
  j["endpoint"] = {{"kind", endpoint.kind},
                   {"script", endpoint.script},
                   {"base_url", endpoint.http.base_url},
                   {"model", endpoint.http.model},
                   {"api_key_env", endpoint.http.api_key_env},
                   {"max_attempts", endpoint.http.max_attempts},
                   {"backoff_seconds", endpoint.http.backoff_seconds},
                   {"timeout_seconds", endpoint.http.timeout_seconds},
                   {"requests_per_minute", endpoint.http.requests_per_minute}};
  j["eval"] = {{"categories", categories_json(categories)},
               {"k", k},
               {"temperature", temperature ? json(*temperature) : json(nullptr)},
               {"top_p", top_p},
               {"max_generation_units", max_generation_units},
               {"augment", augment_json(augment)},
               {"seed", seed},
               {"demos_per_category", demos_per_category},
               {"short_circuit", short_circuit},
               {"workers", workers},
               {"verify_timeout_seconds", verify_timeout_seconds ? json(*verify_timeout_seconds) : json(nullptr)},
               {"refusal_patterns", refusal_patterns},
               {"fact_stoplist", fact_stoplist},
               {"save_prompts", save_prompts}};
  return j.dump(2) + "\n";
}

RunConfig RunConfig::from_json(const std::string& text) {
  RunConfig c;
  try {
    auto j = json::parse(text);
    c.corpus = j.at("corpus");
    c.workspace = j.at("workspace");
    const auto& p = j.at("prover");
    c.prover.kind = p.at("kind") == "mock" ? ProverConfig::Kind::Mock : ProverConfig::Kind::External;
    c.prover.executable = p.at("executable");
    c.prover.cache_dir = p.at("cache_dir");
    c.prover.timeout_seconds = p.at("timeout_seconds");
    c.prover.include_dirs = p.at("include_dirs").get<std::vector<std::string>>();
    c.prover.pool_size = p.at("pool_size");
    const auto& e = j.at("endpoint");
    c.endpoint.kind = e.at("kind");
    c.endpoint.script = e.at("script");
    c.endpoint.http.base_url = e.at("base_url");
    c.endpoint.http.model = e.at("model");
    c.endpoint.http.api_key_env = e.at("api_key_env");
    c.endpoint.http.max_attempts = e.at("max_attempts");
    c.endpoint.http.backoff_seconds = e.at("backoff_seconds");
    c.endpoint.http.timeout_seconds = e.at("timeout_seconds");
    c.endpoint.http.requests_per_minute = e.at("requests_per_minute");
    const auto& v = j.at("eval");
    c.categories.clear();
    for (const auto& cat : v.at("categories")) c.categories.push_back(parse_category(cat.get<std::string>()));
    c.k = v.at("k");
    if (!v.at("temperature").is_null()) c.temperature = v["temperature"].get<double>();
    c.top_p = v.at("top_p");
    c.max_generation_units = v.at("max_generation_units");
    c.augment = augment_from_json(v.at("augment"));
    c.seed = v.at("seed");
    c.demos_per_category = v.at("demos_per_category");
    c.short_circuit = v.at("short_circuit");
    c.workers = v.at("workers");
    if (!v.at("verify_timeout_seconds").is_null())
      c.verify_timeout_seconds = v["verify_timeout_seconds"].get<double>();
    c.refusal_patterns = v.at("refusal_patterns");
    c.fact_stoplist = v.at("fact_stoplist");
    c.save_prompts = v.at("save_prompts");
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("run config: ") + e.what());
  }
  return c;
}

namespace {

namespace pt = boost::property_tree;

bool parse_bool(const std::string& key, const std::string& v) {
  std::string s = to_lower(trim(v));
  if (s == "true" || s == "yes" || s == "1" || s == "on") return true;
  if (s == "false" || s == "no" || s == "0" || s == "off") return false;
  throw Error(ErrorCode::ConfigError, key + ": expected a boolean, got '" + v + "'");
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  std::istringstream in{std::string(trim(v))};
  T out{};
  if (!(in >> out) || !in.eof()) throw Error(ErrorCode::ConfigError, key + ": expected a number, got '" + v + "'");
  return out;
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : v + ",") {
    if (c == ',' || c == ' ') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  return out;
}

bool looks_secret(const std::string& key) {
  static const char* names[] = {"api_key", "key", "secret", "password", "token", "authorization", "bearer"};
  std::string k = to_lower(key);
  for (const char* n : names)
    if (k == n) return true;
  return false;
}

}  // namespace

Augmentations parse_augment_list(const std::string& value) {
  Augmentations a;
  for (const auto& item : split_list(value)) {
    if (item == "similar") a.similar = true;
    else if (item == "dependency") a.dependency = true;
    else if (item == "fixing") a.fixing = true;
    else if (item == "try_again" || item == "try-again") a.try_again = true;
    else if (item != "none") throw Error(ErrorCode::ConfigError, "unknown augmentation '" + item + "'");
  }
  a.validate();
  return a;
}

RunConfig load_run_config(const std::string& path) {
  pt::ptree tree;
  try {
    pt::read_ini(path, tree);
  } catch (const pt::ini_parser_error& e) {
    throw Error(ErrorCode::ConfigError, e.what());
  }
  const fs::path base = fs::absolute(path).parent_path();
  auto resolve = [&](const std::string& p) {
    if (p.empty()) return p;
    fs::path q(p);
    return (q.is_absolute() ? q : base / q).lexically_normal().string();
  };
  RunConfig c;
  bool include_dirs_set = false;
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty())
      throw Error(ErrorCode::ConfigError, "key '" + section + "' outside a section");
    for (const auto& [key, node] : body) {
      const std::string v = node.get_value<std::string>();
      const std::string where = section + "." + key;
      if (looks_secret(key))
        throw Error(ErrorCode::ConfigError, where + ": credentials are read from the environment only");
      if (section == "corpus" && key == "path") c.corpus = resolve(v);
      else if (section == "workspace" && key == "path") c.workspace = resolve(v);
      else if (section == "prover") {
        if (key == "kind") {
          if (v == "mock") c.prover.kind = ProverConfig::Kind::Mock;
          else if (v == "external" || v == "isabelle") c.prover.kind = ProverConfig::Kind::External;
          else throw Error(ErrorCode::ConfigError, where + ": unknown prover '" + v + "'");
        } else if (key == "executable") c.prover.executable = v;
        else if (key == "timeout_seconds") c.prover.timeout_seconds = parse_number<double>(where, v);
        else if (key == "pool_size") c.prover.pool_size = parse_number<int>(where, v);
        else if (key == "cache_dir") c.prover.cache_dir = resolve(v);
        else if (key == "include_dirs") {
          include_dirs_set = true;
          for (const auto& d : split_list(v)) c.prover.include_dirs.push_back(resolve(d));
        } else throw Error(ErrorCode::ConfigError, "unknown key " + where);
      } else if (section == "endpoint") {
        if (key == "kind") c.endpoint.kind = v;
        else if (key == "script") c.endpoint.script = resolve(v);
        else if (key == "base_url") c.endpoint.http.base_url = v;
        else if (key == "model") c.endpoint.http.model = v;
        else if (key == "api_key_env") c.endpoint.http.api_key_env = v;
        else if (key == "max_attempts") c.endpoint.http.max_attempts = parse_number<int>(where, v);
        else if (key == "backoff_seconds") c.endpoint.http.backoff_seconds = parse_number<double>(where, v);
        else if (key == "timeout_seconds") c.endpoint.http.timeout_seconds = parse_number<double>(where, v);
        else if (key == "requests_per_minute") c.endpoint.http.requests_per_minute = parse_number<double>(where, v);
        else throw Error(ErrorCode::ConfigError, "unknown key " + where);
      } else if (section == "eval") {
        if (key == "k") c.k = parse_number<int>(where, v);
        else if (key == "seed") c.seed = parse_number<std::uint64_t>(where, v);
        else if (key == "categories") {
          c.categories.clear();
          try {
            for (const auto& cat : split_list(v)) c.categories.push_back(parse_category(cat));
          } catch (const Error& e) {
            throw Error(ErrorCode::ConfigError, where + ": " + e.what());
          }
        } else if (key == "augment") c.augment = parse_augment_list(v);
        else if (key == "force_dependency_for_d") c.augment.force_dependency_for_d = parse_bool(where, v);
        else if (key == "temperature") c.temperature = parse_number<double>(where, v);
        else if (key == "top_p") c.top_p = parse_number<double>(where, v);
        else if (key == "max_generation_units") c.max_generation_units = parse_number<int>(where, v);
        else if (key == "demos_per_category") c.demos_per_category = parse_number<int>(where, v);
        else if (key == "short_circuit") c.short_circuit = parse_bool(where, v);
        else if (key == "workers") c.workers = parse_number<int>(where, v);
        else if (key == "verify_timeout_seconds") c.verify_timeout_seconds = parse_number<double>(where, v);
        else if (key == "refusal_patterns") c.refusal_patterns = resolve(v);
        else if (key == "fact_stoplist") c.fact_stoplist = resolve(v);
        else if (key == "save_prompts") c.save_prompts = parse_bool(where, v);
        else throw Error(ErrorCode::ConfigError, "unknown key " + where);
      } else {
        throw Error(ErrorCode::ConfigError, "unknown key " + where);
      }
    }
  }
  if (c.workspace.empty()) throw Error(ErrorCode::ConfigError, "[workspace] path is required");
  if (c.prover.cache_dir.empty()) c.prover.cache_dir = c.workspace + "/prover-cache";
  if (!include_dirs_set && !c.corpus.empty()) c.prover.include_dirs = {c.corpus};
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// workspace

Workspace::Workspace(const std::string& dir) : root(fs::absolute(dir).lexically_normal().string()) {
  while (root.size() > 1 && root.back() == '/') root.pop_back();
}

std::string Workspace::rel(const std::string& path) const {
  auto r = fs::path(path).lexically_relative(root);
  if (r.empty() || *r.begin() == "..") return path;
  return r.string();
}

std::unique_ptr<ProverDriver> make_workspace_prover(const RunConfig& cfg) {
  ProverConfig p = cfg.prover;
  if (p.cache_dir.empty()) p.cache_dir = Workspace(cfg.workspace).prover_cache();
  if (p.include_dirs.empty() && !cfg.corpus.empty()) p.include_dirs = {cfg.corpus};
  return make_prover(p);
}

std::unique_ptr<ChatEndpoint> make_endpoint(const EndpointConfig& cfg) {
  if (cfg.kind == "scripted") {
    if (cfg.script.empty()) throw Error(ErrorCode::ConfigError, "scripted endpoint needs a script path");
    if (!fs::is_regular_file(cfg.script)) throw Error(ErrorCode::ConfigError, "no endpoint script " + cfg.script);
    return ScriptedEndpoint::from_file(cfg.script);
  }
  if (cfg.kind == "http") return std::make_unique<HttpChatEndpoint>(cfg.http);
  throw Error(ErrorCode::ConfigError, "unknown endpoint kind " + cfg.kind);
}

std::string endpoint_identity(const EndpointConfig& cfg) {
  if (cfg.kind == "scripted")
    return "scripted:" + (fs::is_regular_file(cfg.script) ? short_digest(read_file(cfg.script), 12) : cfg.script);
  return "http:" + cfg.http.model + "@" + cfg.http.base_url;
}

// ---------------------------------------------------------------------------
// ingest / isolate / chunks

std::string corpus_summary(const Corpus& corpus) {
  auto counts = corpus.category_counts();
  std::ostringstream out;
  char buf[64];
  out << "sessions " << corpus.sessions.size() << ", theories " << corpus.theories.size() << ", lemmas "
      << corpus.lemmas().size() << "\n";
  std::snprintf(buf, sizeof buf, "%-10s%-8s%-8s%-8s%-8s%s\n", "", "P1", "P2", "P3", "D", "excluded");
  out << buf;
  std::snprintf(buf, sizeof buf, "%-10s%-8d%-8d%-8d%-8d%d\n", "Extracted", counts[Category::P1], counts[Category::P2],
                counts[Category::P3], counts[Category::D], counts[Category::Excluded]);
  out << buf;
  for (const auto& issue : corpus.issues)
    out << "warning: " << issue.path << ": " << to_string(issue.code) << ": " << issue.message << "\n";
  return out.str();
}

std::string IsolateSummary::to_text() const {
  std::ostringstream out;
  char buf[80];
  std::snprintf(buf, sizeof buf, "%-20s%-8s%-8s%-8s%s\n", "", "P1", "P2", "P3", "D");
  out << buf;
  auto row = [&](const char* label, const std::map<Category, int>& m) {
    auto get = [&](Category c) {
      auto it = m.find(c);
      return it == m.end() ? 0 : it->second;
    };
    std::snprintf(buf, sizeof buf, "%-20s%-8d%-8d%-8d%d\n", label, get(Category::P1), get(Category::P2),
                  get(Category::P3), get(Category::D));
    out << buf;
  };
  std::map<Category, int> total_verified;
  for (Category c : kBenchCategories) {
    auto v = verified.count(c) ? verified.at(c) : 0;
    auto s = skipped.count(c) ? skipped.at(c) : 0;
    total_verified[c] = v + s;
  }
  row("Correctly verified", total_verified);
  row("Broken", broken);
  row("Already verified", skipped);
  for (const auto& [id, reason] : failures) out << "broken: " << id << ": " << reason << "\n";
  if (rebuilt_theories >= 0) out << "theories rebuilt: " << rebuilt_theories << "\n";
  return out.str();
}

IsolateSummary isolate_lemmas(const Corpus& corpus, const Workspace& ws, ProverDriver& prover,
                              const std::vector<std::string>& lemma_ids, std::ostream* progress) {
  IsolateSummary summary;
  for (Category c : kBenchCategories) summary.verified[c] = summary.broken[c] = summary.skipped[c] = 0;
  auto graph = corpus.graph();
  std::vector<const Lemma*> todo;
  if (lemma_ids.empty()) {
    for (const auto* l : corpus.lemmas())
      if (l->category != Category::Excluded) todo.push_back(l);
  } else {
    for (const auto& id : lemma_ids) {
      const Lemma* l = corpus.find_lemma(id);
      if (!l) throw Error(ErrorCode::UnknownTheory, "no lemma " + id);
      if (l->category == Category::Excluded) throw Error(ErrorCode::LemmaExcluded, id);
      todo.push_back(l);
    }
  }
  auto* mock = dynamic_cast<MockProver*>(&prover);
  long rebuilt_before = mock ? mock->total_rebuilt() : 0;
  for (const auto* l : todo) {
    auto saved = load_bench_status(ws.root, l->id);
    if (saved && saved->first == BenchStatus::Verified) {
      // the bench files are still refreshed in case the workspace was cleaned
      isolate(corpus, graph, *l, ws.root);
      ++summary.skipped[l->category];
      continue;
    }
    auto bench = isolate(corpus, graph, *l, ws.root);
    auto st = check_correctness(bench, prover, *l);
    if (st == BenchStatus::Verified) {
      ++summary.verified[l->category];
    } else {
      ++summary.broken[l->category];
      summary.failures.emplace_back(l->id, bench.broken_reason);
    }
    if (progress) *progress << to_string(st) << " " << l->id << "\n";
  }
  if (mock) summary.rebuilt_theories = mock->total_rebuilt() - rebuilt_before;
  return summary;
}

ChunkLibrary build_workspace_chunks(const Corpus& corpus, const Workspace& ws) {
  auto lib = build_chunks(corpus.theories);
  save_library(lib, ws.chunks());
  return lib;
}

std::map<Category, std::vector<const Lemma*>> verified_pools(const Corpus& corpus, const Workspace& ws,
                                                             const std::vector<Category>& categories) {
  std::map<Category, std::vector<const Lemma*>> out;
  for (Category c : categories) out[c];
  for (const auto* l : corpus.lemmas()) {
    auto it = out.find(l->category);
    if (it == out.end()) continue;
    auto saved = load_bench_status(ws.root, l->id);
    if (saved && saved->first == BenchStatus::Verified) it->second.push_back(l);
  }
  return out;
}

// ---------------------------------------------------------------------------
// per-lemma evaluation

namespace {

TrialRecord run_round(const std::vector<Message>& messages, const LemmaTask& task, const RunConfig& cfg,
                      ChatEndpoint& endpoint, ProverDriver& prover, const std::vector<std::string>& patterns,
                      int trial, Round round) {
  TrialRecord r;
  r.lemma_id = task.lemma->id;
  r.category = task.lemma->category;
  r.trial_index = trial;
  r.round = round;
  r.sampling = cfg.sampling();
  r.prompt_digest = prompt_digest(messages);
  try {
    auto c = endpoint.complete(messages, r.sampling);
    r.generation = c.text;
    r.precheck = precheck(c.text, r.sampling.max_generation_units, patterns, c.completion_tokens);
  } catch (const Error& e) {
    r.endpoint_error = e.what();
  }
  if (r.endpoint_error.empty() && r.precheck.ok()) {
    try {
      r.verify = verify_proof(task.bench, prover, r.generation, cfg.verify_timeout_seconds);
    } catch (const std::exception& e) {
      r.verify = VerifyResult{VerifyStatus::Failure, e.what(), 0.0, std::nullopt};
    }
  }
  finalize_record(r);
  return r;
}

}  // namespace

std::vector<TrialRecord> evaluate_lemma(const LemmaTask& task, const RunConfig& cfg, ChatEndpoint& endpoint,
                                        ProverDriver& prover, const std::vector<std::string>& refusal_patterns,
                                        std::vector<PromptLog>* prompts) {
  static const std::vector<Demonstration> no_demos;
  const auto& demos = task.demos ? *task.demos : no_demos;
  const bool second = cfg.augment.second_round();
  const auto first_prompt = assemble_prompt(task.instruction, demos, task.augmentation, task.lemma->spec_text,
                                            second, cfg.augment.try_again);
  std::vector<TrialRecord> out;
  for (int t = 0; t < cfg.k; ++t) {
    auto r = run_round(first_prompt, task, cfg, endpoint, prover, refusal_patterns, t, Round::First);
    if (prompts) prompts->push_back({task.lemma->id, t, Round::First, first_prompt});
    out.push_back(r);
    bool ok = r.success();
    if (!ok && second && r.endpoint_error.empty()) {
      auto msgs = first_prompt;
      msgs.push_back({"assistant", r.generation});
      msgs.push_back({"user", cfg.augment.try_again ? std::string(kTryAgainMessage) : fixing_message(r.error_text())});
      auto f = run_round(msgs, task, cfg, endpoint, prover, refusal_patterns, t, Round::Fixing);
      if (prompts) prompts->push_back({task.lemma->id, t, Round::Fixing, msgs});
      ok = f.success();
      out.push_back(std::move(f));
    }
    if (ok && cfg.short_circuit) break;
  }
  return out;
}

// ---------------------------------------------------------------------------
// fixing demonstrations

namespace {

std::map<Category, std::vector<std::string>> demo_ids_for(const RunConfig& cfg, const Corpus& corpus,
                                                          const Workspace& ws, std::vector<std::string>* warnings,
                                                          std::map<Category, std::vector<std::string>>* evaluation) {
  auto pools = verified_pools(corpus, ws, cfg.categories);
  std::map<Category, std::vector<std::string>> ids;
  for (const auto& [c, ls] : pools)
    for (const auto* l : ls) ids[c].push_back(l->id);
  auto sel = select_demonstrations(ids, cfg.seed, cfg.demos_per_category);
  if (warnings) *warnings = sel.warnings;
  if (evaluation) *evaluation = sel.evaluation;
  return sel.demos;
}

json fixing_demos_json(const RunConfig& cfg, const std::map<Category, std::vector<FixingDemo>>& demos) {
  json j;
  j["seed"] = cfg.seed;
  j["endpoint"] = endpoint_identity(cfg.endpoint);
  json cats = json::object();
  for (const auto& [c, list] : demos) {
    json a = json::array();
    for (const auto& d : list) {
      json x = {{"lemma_id", d.lemma_id}};
      x["wrong_proof"] = d.wrong_proof ? json(*d.wrong_proof) : json(nullptr);
      x["error"] = d.error ? json(*d.error) : json(nullptr);
      a.push_back(x);
    }
    cats[to_string(c)] = a;
  }
  j["categories"] = cats;
  return j;
}

std::vector<std::string> refusal_patterns_for(const RunConfig& cfg) {
  return cfg.refusal_patterns.empty() ? default_refusal_patterns() : load_refusal_patterns(cfg.refusal_patterns);
}

std::map<Category, std::vector<FixingDemo>> bootstrap_with(const RunConfig& cfg, const Corpus& corpus,
                                                          const std::map<Category, std::vector<std::string>>& ids,
                                                          ChatEndpoint& endpoint, ProverDriver& prover,
                                                          std::ostream* progress) {
  Workspace ws(cfg.workspace);
  auto graph = corpus.graph();
  auto patterns = refusal_patterns_for(cfg);
  RunConfig one = cfg;
  one.k = 1;
  one.temperature = 0.0;
  one.augment = {};
  std::map<Category, std::vector<FixingDemo>> out;
  for (const auto& [cat, list] : ids) {
    auto& demos = out[cat];
    for (std::size_t i = 0; i < list.size(); ++i) {
      const Lemma* lemma = corpus.find_lemma(list[i]);
      if (!lemma) throw Error(ErrorCode::IoError, "demonstration lemma vanished: " + list[i]);
      std::vector<Demonstration> others;
      for (std::size_t j = 0; j < list.size(); ++j) {
        if (j == i) continue;
        const Lemma* o = corpus.find_lemma(list[j]);
        others.push_back({o->id, o->spec_text, o->proof_text, "", {}, {}});
      }
      LemmaTask task;
      task.lemma = lemma;
      task.bench = isolate(corpus, graph, *lemma, ws.root);
      task.instruction = base_instruction();
      task.demos = &others;
      auto recs = evaluate_lemma(task, one, endpoint, prover, patterns);
      const auto& r = recs.front();
      FixingDemo d{lemma->id, {}, {}};
      if (!r.success() && r.endpoint_error.empty()) {
        d.wrong_proof = r.generation;
        d.error = r.error_text();
      }
      if (progress) *progress << (d.error ? "failed " : "solved ") << lemma->id << "\n";
      demos.push_back(std::move(d));
    }
  }
  write_file(ws.fixing_demos(), fixing_demos_json(cfg, out).dump(2) + "\n");
  return out;
}

}  // namespace

std::map<Category, std::vector<FixingDemo>> bootstrap_fixing_demos(const RunConfig& cfg, const Corpus& corpus,
                                                                   ChatEndpoint& endpoint, ProverDriver& prover,
                                                                   std::ostream* progress) {
  auto ids = demo_ids_for(cfg, corpus, Workspace(cfg.workspace), nullptr, nullptr);
  return bootstrap_with(cfg, corpus, ids, endpoint, prover, progress);
}

std::optional<std::map<Category, std::vector<FixingDemo>>> load_fixing_demos(
    const RunConfig& cfg, const std::map<Category, std::vector<std::string>>& demo_ids) {
  Workspace ws(cfg.workspace);
  if (!fs::is_regular_file(ws.fixing_demos())) return std::nullopt;
  auto j = json::parse(read_file(ws.fixing_demos()), nullptr, false);
  if (j.is_discarded() || j.value("seed", std::uint64_t{0}) != cfg.seed ||
      j.value("endpoint", std::string()) != endpoint_identity(cfg.endpoint))
    return std::nullopt;
  std::map<Category, std::vector<FixingDemo>> out;
  for (const auto& [cat, ids] : demo_ids) {
    const auto& arr = j["categories"][to_string(cat)];
    if (!arr.is_array() || arr.size() != ids.size()) return std::nullopt;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (arr[i].value("lemma_id", std::string()) != ids[i]) return std::nullopt;
      FixingDemo d{ids[i], {}, {}};
      if (!arr[i]["wrong_proof"].is_null()) d.wrong_proof = arr[i]["wrong_proof"].get<std::string>();
      if (!arr[i]["error"].is_null()) d.error = arr[i]["error"].get<std::string>();
      out[cat].push_back(std::move(d));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// runs

namespace {

/// Single writer for the run log. Each push is one whole lemma, records
/// first and the done marker last.
class LogWriter {
 public:
  LogWriter(const std::string& trials, const std::string& prompts)
      : trials_(trials, std::ios::app), prompts_(prompts.empty() ? nullptr : new std::ofstream(prompts, std::ios::app)) {
    if (!trials_) throw Error(ErrorCode::IoError, "cannot append to " + trials);
    thread_ = std::thread([this] { loop(); });
  }
  ~LogWriter() { close(); }

  void push(std::string trial_lines, std::string prompt_lines) {
    {
      std::lock_guard lock(mu_);
      queue_.emplace_back(std::move(trial_lines), std::move(prompt_lines));
    }
    cv_.notify_one();
  }

  void close() {
    {
      std::lock_guard lock(mu_);
      if (done_) return;
      done_ = true;
    }
    cv_.notify_one();
    thread_.join();
  }

 private:
  void loop() {
    for (;;) {
      std::unique_lock lock(mu_);
      cv_.wait(lock, [&] { return done_ || !queue_.empty(); });
      if (queue_.empty()) return;
      auto item = std::move(queue_.front());
      queue_.pop_front();
      lock.unlock();
      if (prompts_) {
        *prompts_ << item.second;
        prompts_->flush();
      }
      trials_ << item.first;
      trials_.flush();
    }
  }

  std::ofstream trials_;
  std::unique_ptr<std::ofstream> prompts_;
  std::deque<std::pair<std::string, std::string>> queue_;
  std::mutex mu_;
  std::condition_variable cv_;
  bool done_ = false;
  std::thread thread_;
};

std::string make_run_id(const RunConfig& cfg, const Workspace& ws) {
  std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y%m%dT%H%M%SZ", &tm);
  std::string base = std::string(stamp) + "-s" + std::to_string(cfg.seed) + "-" + cfg.digest();
  std::string id = base;
  for (int n = 2; fs::exists(ws.run_dir(id)); ++n) id = base + "-" + std::to_string(n);
  return id;
}

std::string prompt_line(const PromptLog& p) {
  json j;
  j["lemma_id"] = p.lemma_id;
  j["trial_index"] = p.trial_index;
  j["round"] = to_string(p.round);
  j["prompt_digest"] = prompt_digest(p.messages);
  json m = json::array();
  for (const auto& x : p.messages) m.push_back({{"role", x.role}, {"content", x.content}});
  j["messages"] = m;
  return j.dump() + "\n";
}

/// Keeps only the lines of finished lemmas (drops what a crash left behind).
void compact_log(const std::string& path, const std::map<std::string, Category>& finished) {
  if (!fs::is_regular_file(path)) return;
  std::ifstream in(path);
  std::string line, kept;
  while (std::getline(in, line)) {
    auto j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.contains("lemma_id")) continue;
    if (finished.count(j["lemma_id"].get<std::string>())) kept += line + "\n";
  }
  in.close();
  write_file(path, kept);
}

}  // namespace

RunLog read_run_log(const std::string& run_dir) {
  RunLog log;
  auto cfg = json::parse(read_file(run_dir + "/config.json"));
  log.evaluation_size = static_cast<int>(cfg.at("evaluation").size());
  std::vector<std::pair<std::string, std::string>> trials;  // lemma id, line
  std::string path = run_dir + "/trials.jsonl";
  if (fs::is_regular_file(path)) {
    std::ifstream in(path);
    std::string line;
    while (std::getline(in, line)) {
      auto j = json::parse(line, nullptr, false);
      if (j.is_discarded() || !j.is_object()) continue;  // torn final line
      std::string type = j.value("type", "");
      if (type == "trial") {
        trials.emplace_back(j.value("lemma_id", ""), line);
      } else if (type == "lemma_done") {
        log.finished[j.at("lemma_id")] = parse_category(j.at("category").get<std::string>());
        log.dependency_located += j.value("dependency_located", 0);
        log.dependency_skipped += j.value("dependency_skipped", 0);
      }
    }
  }
  // records of unfinished lemmas may be incomplete; they are never parsed
  for (const auto& [id, line] : trials)
    if (log.finished.count(id)) log.records.push_back(record_from_json(line));
  return log;
}

RunReport report_from_run(const std::string& run_dir) {
  auto meta = json::parse(read_file(run_dir + "/config.json"));
  auto cfg = RunConfig::from_json(meta.at("config").dump());
  auto log = read_run_log(run_dir);
  auto rep = build_report(log.records, log.finished, cfg.k);
  rep.seed = cfg.seed;
  rep.config_digest = meta.at("config_digest");
  rep.augmentations = cfg.augment.describe();
  rep.dependency_located = log.dependency_located;
  rep.dependency_skipped = log.dependency_skipped;
  return rep;
}

EvalResult run_eval(const RunConfig& cfg_in, const EvalOptions& options) {
  const auto t0 = std::chrono::steady_clock::now();
  RunConfig cfg = cfg_in;
  cfg.validate();
  Workspace ws(cfg.workspace);
  if (!fs::is_regular_file(ws.manifest()))
    throw Error(ErrorCode::ConfigError, "no manifest in workspace; run `isobench ingest` first");
  Corpus corpus = read_manifest(ws.manifest());
  const bool needs_chunks = cfg.augment.similar || cfg.augment.dependency;
  ChunkLibrary lib;
  if (needs_chunks) {
    if (!fs::is_regular_file(ws.chunks()))
      throw Error(ErrorCode::ConfigError, "similar/dependency augmentation needs the chunk library; run `isobench chunks`");
    lib = load_library(ws.chunks());
  }
  auto stoplist = cfg.fact_stoplist.empty() ? default_fact_stoplist() : load_fact_stoplist(cfg.fact_stoplist);
  auto patterns = refusal_patterns_for(cfg);

  EvalResult result;
  if (options.resume) {
    result.run_id = *options.resume;
    result.run_dir = ws.run_dir(result.run_id);
    if (!fs::is_regular_file(result.run_dir + "/config.json"))
      throw Error(ErrorCode::ConfigError, "no run " + result.run_id);
    auto meta = json::parse(read_file(result.run_dir + "/config.json"));
    if (meta.at("config_digest") != cfg.digest())
      throw Error(ErrorCode::ConfigError, "configuration differs from the one run " + result.run_id + " started with");
  } else {
    result.run_id = make_run_id(cfg, ws);
    result.run_dir = ws.run_dir(result.run_id);
  }

  std::unique_ptr<ChatEndpoint> own_endpoint;
  ChatEndpoint* endpoint = options.endpoint;
  if (!endpoint) {
    own_endpoint = make_endpoint(cfg.endpoint);
    endpoint = own_endpoint.get();
  }
  std::unique_ptr<ProverDriver> own_prover;
  ProverDriver* prover = options.prover;
  if (!prover) {
    own_prover = make_workspace_prover(cfg);
    prover = own_prover.get();
  }

  std::vector<std::string> warnings;
  std::map<Category, std::vector<std::string>> evaluation;
  auto demo_ids = demo_ids_for(cfg, corpus, ws, &warnings, &evaluation);
  if (options.progress)
    for (const auto& w : warnings) *options.progress << "warning: " << w << "\n";
  std::vector<std::pair<std::string, Category>> eval_set;
  for (Category c : kBenchCategories)
    if (evaluation.count(c))
      for (const auto& id : evaluation[c]) eval_set.emplace_back(id, c);
  if (eval_set.empty()) throw Error(ErrorCode::ConfigError, "evaluation set is empty; run `isobench isolate --all` first");

  if (!options.resume) {
    json meta;
    meta["run_id"] = result.run_id;
    meta["config_digest"] = cfg.digest();
    meta["config"] = json::parse(cfg.to_json());
    json demos = json::object();
    for (const auto& [c, ids] : demo_ids) demos[to_string(c)] = ids;
    meta["demonstrations"] = demos;
    json ev = json::array();
    for (const auto& [id, c] : eval_set) ev.push_back({{"lemma_id", id}, {"category", to_string(c)}});
    meta["evaluation"] = ev;
    meta["warnings"] = warnings;
    write_file(result.run_dir + "/config.json", meta.dump(2) + "\n");
  }

  std::map<Category, std::vector<FixingDemo>> fixing;
  if (cfg.augment.second_round()) {
    auto cached = load_fixing_demos(cfg, demo_ids);
    if (cached) {
      fixing = *cached;
    } else {
      if (options.progress) *options.progress << "bootstrapping fixing demonstrations\n";
      fixing = bootstrap_with(cfg, corpus, demo_ids, *endpoint, *prover, options.progress);
    }
  }

  auto graph = corpus.graph();
  std::map<Category, std::vector<Demonstration>> demos;
  std::map<Category, std::string> instructions;
  auto effective = [&](Category c) {
    Augmentations a = cfg.augment;
    if (c == Category::D && !a.force_dependency_for_d) a.dependency = false;
    return a;
  };
  struct AugText {
    std::string text;
    int located = 0, skipped = 0;
  };
  auto augmentation_for = [&](const Lemma& l, Category c) {
    AugText out;
    auto a = effective(c);
    std::vector<std::string> parts;
    if (a.similar) {
      try {
        parts.push_back(similar_augment(lib, l));
      } catch (const Error& e) {
        if (e.code() != ErrorCode::NoCandidate) throw;
      }
    }
    if (a.dependency) {
      auto dep = dependency_augment(lib, graph, l, stoplist);
      if (!dep.text.empty()) parts.push_back(dep.text);
      out.located = dep.located;
      out.skipped = dep.skipped;
    }
    out.text = join(parts, "\n");
    return out;
  };
  for (const auto& [c, ids] : demo_ids) {
    instructions[c] = build_instruction(effective(c));
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const Lemma* l = corpus.find_lemma(ids[i]);
      Demonstration d{l->id, l->spec_text, l->proof_text, augmentation_for(*l, c).text, {}, {}};
      if (fixing.count(c) && i < fixing[c].size()) {
        d.wrong_proof = fixing[c][i].wrong_proof;
        d.error = fixing[c][i].error;
      }
      demos[c].push_back(std::move(d));
    }
  }

  // resume bookkeeping
  auto prior = read_run_log(result.run_dir);
  compact_log(result.run_dir + "/trials.jsonl", prior.finished);
  compact_log(result.run_dir + "/prompts.jsonl", prior.finished);
  std::vector<std::pair<std::string, Category>> pending;
  for (const auto& e : eval_set)
    if (!prior.finished.count(e.first)) pending.push_back(e);
  if (options.limit && *options.limit < static_cast<int>(pending.size())) pending.resize(std::max(*options.limit, 0));

  std::vector<LemmaTask> tasks;
  std::vector<AugText> aug_texts;
  for (const auto& [id, c] : pending) {
    const Lemma* l = corpus.find_lemma(id);
    LemmaTask t;
    t.lemma = l;
    t.bench = isolate(corpus, graph, *l, ws.root);
    auto a = augmentation_for(*l, c);
    t.augmentation = a.text;
    t.instruction = instructions[c];
    t.demos = &demos[c];
    tasks.push_back(std::move(t));
    aug_texts.push_back(a);
  }

  LogWriter writer(result.run_dir + "/trials.jsonl", cfg.save_prompts ? result.run_dir + "/prompts.jsonl" : "");
  std::atomic<std::size_t> next{0};
  std::atomic<int> done{0};
  std::mutex progress_mu;
  auto worker = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++) {
      std::vector<PromptLog> prompts;
      auto recs = evaluate_lemma(tasks[i], cfg, *endpoint, *prover, patterns, cfg.save_prompts ? &prompts : nullptr);
      std::string lines, plines;
      bool passed = false;
      for (const auto& r : recs) {
        lines += record_to_json(r) + "\n";
        passed = passed || r.success();
      }
      json marker = {{"type", "lemma_done"},
                     {"lemma_id", tasks[i].lemma->id},
                     {"category", to_string(tasks[i].lemma->category)},
                     {"passed", passed},
                     {"dependency_located", aug_texts[i].located},
                     {"dependency_skipped", aug_texts[i].skipped}};
      lines += marker.dump() + "\n";
      for (const auto& p : prompts) plines += prompt_line(p);
      writer.push(std::move(lines), std::move(plines));
      ++done;
      if (options.progress) {
        std::lock_guard lock(progress_mu);
        *options.progress << (passed ? "pass " : "fail ") << tasks[i].lemma->id << "\n";
      }
    }
  };
  std::vector<std::thread> pool;
  const int n_workers = std::min<int>(cfg.workers, std::max<int>(1, static_cast<int>(tasks.size())));
  for (int i = 0; i < n_workers; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  writer.close();

  result.evaluated_now = done;
  auto log = read_run_log(result.run_dir);
  result.remaining = static_cast<int>(eval_set.size()) - static_cast<int>(log.finished.size());
  result.complete = result.remaining == 0;

  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  json timing = json::object();
  std::string tpath = result.run_dir + "/timing.json";
  if (fs::is_regular_file(tpath)) timing = json::parse(read_file(tpath), nullptr, false);
  if (timing.is_discarded() || !timing.contains("invocations")) timing = {{"invocations", json::array()}};
  double verify_total = 0;
  int verified_trials = 0;
  for (const auto& r : log.records)
    if (r.verify) {
      verify_total += r.verify->elapsed_seconds;
      ++verified_trials;
    }
  timing["invocations"].push_back({{"lemmas", result.evaluated_now}, {"wall_seconds", wall}});
  timing["verified_trials"] = verified_trials;
  timing["verify_seconds_total"] = verify_total;
  timing["verify_seconds_mean"] = verified_trials ? verify_total / verified_trials : 0.0;
  write_file(tpath, timing.dump(2) + "\n");

  if (result.complete) {
    auto rep = report_from_run(result.run_dir);
    write_file(result.run_dir + "/report.json", rep.to_json());
    write_file(result.run_dir + "/report.txt", rep.to_text());
    result.report = rep;
  }
  return result;
}

}  // namespace isobench

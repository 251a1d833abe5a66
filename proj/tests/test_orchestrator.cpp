#include <gtest/gtest.h>
#include <stdlib.h>

#include <cmath>
#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

#include "isobench/error.hpp"
#include "isobench/isolation.hpp"
#include "isobench/manifest.hpp"
#include "isobench/mock_prover.hpp"
#include "isobench/orchestrator.hpp"
#include "isobench/synthetic.hpp"
#include "isobench/text.hpp"
#include "test_util.hpp"

using namespace isobench;
using isobench::testing::TempDir;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no isobench::Error thrown";
  return ErrorCode::IoError;
}

std::vector<std::string> lines_of(const std::string& path) {
  std::vector<std::string> out;
  std::ifstream in(path);
  for (std::string l; std::getline(in, l);)
    if (!l.empty()) out.push_back(l);
  return out;
}

// Corpus + ingested, isolated workspace shared by the suite.
struct Prepared {
  TempDir dir;
  std::string corpus, workspace;
  IsolateSummary first, second;
  Corpus manifest;

  Prepared() {
    corpus = dir / "corpus";
    workspace = dir / "ws";
    write_synthetic(generate_synthetic({}), corpus);
    Workspace ws(workspace);
    write_manifest(load_corpus(corpus), ws.manifest());
    manifest = read_manifest(ws.manifest());
    {
      auto p = make_workspace_prover(base_config());
      first = isolate_lemmas(manifest, ws, *p, {});
    }
    {
      auto p = make_workspace_prover(base_config());
      second = isolate_lemmas(manifest, ws, *p, {});
    }
    build_workspace_chunks(manifest, ws);
  }

  RunConfig base_config() const {
    RunConfig c;
    c.corpus = corpus;
    c.workspace = workspace;
    c.prover.cache_dir = Workspace(workspace).prover_cache();
    c.prover.include_dirs = {corpus};
    return c;
  }
};

Prepared& prepared() {
  static Prepared p;
  return p;
}

enum class Plan { Success, Undefined, Logic, Sorry, Refusal, Rescue };

Plan plan_for(std::size_t i) { return static_cast<Plan>(i % 6); }

// Script answering every benchmark lemma according to its plan. Anonymous
// lemmas have no name to key on and fall to the default rule (Logic).
json planned_script(const Corpus& corpus, std::map<std::string, Plan>* plans) {
  json lemmas = json::object();
  std::size_t i = 0;
  for (const auto* l : corpus.lemmas()) {
    if (l->category == Category::Excluded) continue;
    if (l->name.rfind("anon#", 0) == 0) {
      (*plans)[l->id] = Plan::Logic;
      continue;
    }
    Plan p = plan_for(i++);
    (*plans)[l->id] = p;
    json first, fixing;
    switch (p) {
      case Plan::Success: first = {l->proof_text}; fixing = {l->proof_text}; break;
      case Plan::Undefined: first = fixing = {"by (simp add: zz_nonexistent_fact)"}; break;
      case Plan::Logic: first = fixing = {"by simp"}; break;
      case Plan::Sorry: first = fixing = {"sorry"}; break;
      case Plan::Refusal: first = fixing = {"I cannot assist with that request."}; break;
      case Plan::Rescue: first = {"by simp"}; fixing = {l->proof_text}; break;
    }
    lemmas[l->name] = {{"first", first}, {"fixing", fixing}};
  }
  return {{"default", {{"first", {"by simp"}}, {"fixing", {"by simp"}}}}, {"lemmas", lemmas}};
}

double round1_oracle(double x) { return std::floor(x * 10.0 + 0.5) / 10.0; }

struct PlannedRun {
  RunConfig cfg;
  std::map<std::string, Plan> plans;
  std::unique_ptr<ScriptedEndpoint> endpoint;
};

PlannedRun planned_run(const std::string& script_dir, int k, bool fixing) {
  auto& P = prepared();
  PlannedRun r;
  auto script = planned_script(P.manifest, &r.plans);
  std::string path = script_dir + "/script.json";
  write_file(path, script.dump(1));
  r.cfg = P.base_config();
  r.cfg.endpoint.script = path;
  r.cfg.k = k;
  r.cfg.augment.similar = true;
  r.cfg.augment.dependency = true;
  r.cfg.augment.fixing = fixing;
  r.cfg.seed = 11;
  r.endpoint = ScriptedEndpoint::from_json(script.dump());
  return r;
}

}  // namespace

// ---------------------------------------------------------------------------

TEST(Config, IniLoadsAndResolvesRelativePaths) {
  TempDir d;
  write_file(d / "run.ini",
             "[corpus]\npath = corpus\n[workspace]\npath = ws\n[endpoint]\nkind = http\nmodel = m1\n"
             "api_key_env = MY_KEY\nrequests_per_minute = 30\n[eval]\nk = 10\naugment = similar,fixing\nseed = 3\n"
             "categories = P1,D\nworkers = 2\n");
  auto cfg = load_run_config(d / "run.ini");
  EXPECT_EQ(cfg.corpus, d / "corpus");
  EXPECT_EQ(cfg.workspace, d / "ws");
  EXPECT_EQ(cfg.prover.cache_dir, d / "ws/prover-cache");
  EXPECT_EQ(cfg.endpoint.kind, "http");
  EXPECT_EQ(cfg.endpoint.http.model, "m1");
  EXPECT_EQ(cfg.endpoint.http.api_key_env, "MY_KEY");
  EXPECT_EQ(cfg.k, 10);
  EXPECT_EQ(cfg.seed, 3u);
  EXPECT_TRUE(cfg.augment.similar);
  EXPECT_FALSE(cfg.augment.dependency);
  EXPECT_TRUE(cfg.augment.fixing);
  EXPECT_EQ(cfg.categories, (std::vector<Category>{Category::P1, Category::D}));
  EXPECT_DOUBLE_EQ(cfg.sampling().temperature, 0.5);
}

TEST(Config, SecretsAndUnknownKeysRejected) {
  TempDir d;
  write_file(d / "a.ini", "[workspace]\npath = ws\n[endpoint]\napi_key = sk-123\n");
  EXPECT_EQ(code_of([&] { load_run_config(d / "a.ini"); }), ErrorCode::ConfigError);
  write_file(d / "b.ini", "[workspace]\npath = ws\n[eval]\nkay = 3\n");
  EXPECT_EQ(code_of([&] { load_run_config(d / "b.ini"); }), ErrorCode::ConfigError);
  write_file(d / "c.ini", "[workspace]\npath = ws\n[eval]\nk = zero\n");
  EXPECT_EQ(code_of([&] { load_run_config(d / "c.ini"); }), ErrorCode::ConfigError);
}

TEST(Config, FixingAndTryAgainExclusive) {
  RunConfig c;
  c.workspace = "/tmp/x";
  c.augment.fixing = true;
  c.augment.try_again = true;
  EXPECT_EQ(code_of([&] { c.validate(); }), ErrorCode::ConfigError);
  EXPECT_EQ(code_of([] { parse_augment_list("fixing,try_again"); }), ErrorCode::ConfigError);
  EXPECT_EQ(code_of([] { parse_augment_list("similar,bogus"); }), ErrorCode::ConfigError);
}

TEST(Config, DigestIgnoresPathsAndWorkers) {
  RunConfig a, b;
  a.workspace = "/a";
  b.workspace = "/b";
  b.workers = 9;
  EXPECT_EQ(a.digest(), b.digest());
  b.seed = 1;
  EXPECT_NE(a.digest(), b.digest());
  auto c = RunConfig::from_json(a.to_json());
  EXPECT_EQ(c.digest(), a.digest());
}

TEST(Config, MissingCredentialIsAuthError) {
  EndpointConfig e;
  e.kind = "http";
  e.http.api_key_env = "ISOBENCH_SURELY_UNSET_KEY";
  unsetenv("ISOBENCH_SURELY_UNSET_KEY");
  EXPECT_EQ(code_of([&] { make_endpoint(e); }), ErrorCode::AuthError);
}

// ---------------------------------------------------------------------------

TEST(Pipeline, IsolationVerifiesEveryLemmaThenCaches) {
  auto& P = prepared();
  std::map<Category, int> expected;
  for (const auto* l : P.manifest.lemmas())
    if (l->category != Category::Excluded) ++expected[l->category];
  for (Category c : kBenchCategories) {
    EXPECT_EQ(P.first.verified[c], expected[c]) << to_string(c);
    EXPECT_EQ(P.first.broken[c], 0);
    EXPECT_EQ(P.second.skipped[c], expected[c]);
  }
  EXPECT_GT(P.first.rebuilt_theories, 0);
  EXPECT_EQ(P.second.rebuilt_theories, 0);
}

TEST(Pipeline, TruncatedGroundtruthIsBroken) {
  auto& P = prepared();
  TempDir d;
  Workspace ws(d / "ws");
  Corpus c = P.manifest;
  const Lemma* target = nullptr;
  for (const auto* l : c.lemmas())
    if (l->category == Category::P2) {
      target = l;
      break;
    }
  ASSERT_NE(target, nullptr);
  const_cast<Lemma*>(target)->proof_text = "apply simp";
  RunConfig cfg = P.base_config();
  cfg.workspace = ws.root;
  cfg.prover.cache_dir = ws.prover_cache();
  auto prover = make_workspace_prover(cfg);
  auto s = isolate_lemmas(c, ws, *prover, {target->id});
  EXPECT_EQ(s.broken[Category::P2], 1);
  ASSERT_EQ(s.failures.size(), 1u);
  EXPECT_EQ(s.failures[0].first, target->id);
}

TEST(Pipeline, SummaryMatchesGoldenManifest) {
  auto& P = prepared();
  auto golden = read_golden_manifest(P.corpus + "/" + kGoldenManifestName);
  std::map<Category, int> g;
  for (const auto& l : golden) ++g[l.category];
  std::string s = corpus_summary(P.manifest);
  std::string extracted = s.substr(s.find("Extracted"));
  extracted = extracted.substr(0, extracted.find('\n'));
  std::istringstream row(extracted.substr(9));
  for (Category c : {Category::P1, Category::P2, Category::P3, Category::D, Category::Excluded}) {
    int n = -1;
    row >> n;
    EXPECT_EQ(n, g[c]) << to_string(c);
  }
  EXPECT_NE(s.find("Extracted"), std::string::npos);
}

// ---------------------------------------------------------------------------

TEST(Eval, PlannedOutcomesGiveOracleMetrics) {
  TempDir d;
  auto run = planned_run(d.str(), 2, true);
  EvalOptions opt;
  opt.endpoint = run.endpoint.get();
  auto res = run_eval(run.cfg, opt);
  ASSERT_TRUE(res.complete);
  auto meta = json::parse(read_file(res.run_dir + "/config.json"));

  // oracle over the evaluation set
  std::map<std::string, int> n, pass, undef, logic, other;
  std::set<std::string> demo_ids;
  for (auto& [c, ids] : meta["demonstrations"].items())
    for (auto& id : ids) demo_ids.insert(id.get<std::string>());
  for (const auto& e : meta["evaluation"]) {
    std::string id = e["lemma_id"], c = e["category"];
    EXPECT_FALSE(demo_ids.count(id)) << "demonstration evaluated: " << id;
    ++n[c];
    switch (run.plans.at(id)) {
      case Plan::Success:
      case Plan::Rescue: ++pass[c]; break;
      case Plan::Undefined: ++undef[c]; break;
      case Plan::Logic: ++logic[c]; break;
      case Plan::Sorry:
      case Plan::Refusal: ++other[c]; break;
    }
  }
  auto rep = json::parse(read_file(res.run_dir + "/report.json"));
  for (const char* c : {"P1", "P2", "P3", "D"}) {
    const auto& r = rep["categories"][c];
    ASSERT_GT(n[c], 0) << c;
    EXPECT_EQ(r["lemmas"], n[c]) << c;
    EXPECT_EQ(r["passed"], pass[c]) << c;
    EXPECT_DOUBLE_EQ(r["acc"].get<double>(), round1_oracle(100.0 * pass[c] / n[c])) << c;
    EXPECT_EQ(r["errors"]["total"], n[c] - pass[c]) << c;
    EXPECT_EQ(r["errors"]["undefined"]["count"], undef[c]) << c;
    EXPECT_EQ(r["errors"]["logic"]["count"], logic[c]) << c;
    EXPECT_EQ(r["errors"]["other"]["count"], other[c]) << c;
    EXPECT_EQ(r["errors"]["unmatched"], 0) << c;
    int pct = r["errors"]["undefined"]["percent"].get<int>() + r["errors"]["logic"]["percent"].get<int>() +
              r["errors"]["other"]["percent"].get<int>();
    EXPECT_EQ(pct, 100) << c;
  }
  // sorry was never sent to the prover
  for (const auto& line : lines_of(res.run_dir + "/trials.jsonl")) {
    auto j = json::parse(line);
    if (j["type"] != "trial") continue;
    if (j["generation"] == "sorry") {
      EXPECT_FALSE(j.contains("verify") && !j["verify"].is_null());
      EXPECT_TRUE(j["precheck"]["banned_token"].get<bool>());
    }
  }
  // D prompts carry no dependency blocks unless forced
  for (const auto& call : run.endpoint->calls()) {
    const auto& target = call.round == Round::Fixing ? call.messages[call.messages.size() - 3] : call.messages.back();
    std::string key = ScriptedEndpoint::lemma_key(target.content);
    const Lemma* l = nullptr;
    for (const auto* x : prepared().manifest.lemmas())
      if (x->name == key) l = x;
    if (!l) continue;  // anonymous
    if (l->category == Category::D) EXPECT_EQ(target.content.find("<dep>"), std::string::npos);
  }
}

TEST(Eval, FixingRoundCarriesErrorInBraces) {
  TempDir d;
  auto run = planned_run(d.str(), 1, true);
  EvalOptions opt;
  opt.endpoint = run.endpoint.get();
  auto res = run_eval(run.cfg, opt);
  std::map<std::string, std::string> first_error;
  for (const auto& line : lines_of(res.run_dir + "/trials.jsonl")) {
    auto j = json::parse(line);
    if (j["type"] == "trial" && j["round"] == "first" && j.contains("verify") && !j["verify"].is_null())
      first_error[j["lemma_id"]] = j["verify"]["message"];
  }
  int rescued = 0;
  for (const auto& line : lines_of(res.run_dir + "/prompts.jsonl")) {
    auto j = json::parse(line);
    if (j["round"] != "fixing") continue;
    const auto& msgs = j["messages"];
    std::string id = j["lemma_id"];
    ASSERT_GE(msgs.size(), 3u);
    EXPECT_EQ(msgs[msgs.size() - 2]["role"], "assistant");
    if (first_error.count(id)) EXPECT_EQ(msgs.back()["content"], "{" + first_error[id] + "}");
    if (run.plans[id] == Plan::Rescue) {
      ++rescued;
      EXPECT_NE(msgs.back()["content"].get<std::string>().find("Failed to finish proof"), std::string::npos);
    }
  }
  EXPECT_GT(rescued, 0);
  for (const auto& line : lines_of(res.run_dir + "/trials.jsonl")) {
    auto j = json::parse(line);
    if (j["type"] == "trial" && j["round"] == "fixing" && run.plans[j["lemma_id"]] == Plan::Rescue)
      EXPECT_EQ(j["verify"]["status"], "success");
  }
}

TEST(Eval, TryAgainSendsPlainRetry) {
  TempDir d;
  auto run = planned_run(d.str(), 1, false);
  run.cfg.augment.try_again = true;
  run.cfg.categories = {Category::P3};
  EvalOptions opt;
  opt.endpoint = run.endpoint.get();
  run_eval(run.cfg, opt);
  int fixing = 0;
  for (const auto& call : run.endpoint->calls())
    if (call.round == Round::Fixing) {
      ++fixing;
      EXPECT_EQ(call.messages.back().content, "Try again.");
    }
  EXPECT_GT(fixing, 0);
}

TEST(Eval, DeterministicAcrossRunsAndWorkers) {
  TempDir d;
  auto a = planned_run(d.str(), 2, true);
  a.cfg.workers = 1;
  auto ra = run_eval(a.cfg, {});
  auto b = planned_run(d.str(), 2, true);
  b.cfg.workers = 6;
  auto rb = run_eval(b.cfg, {});
  EXPECT_NE(ra.run_id, rb.run_id);
  EXPECT_EQ(read_file(ra.run_dir + "/report.json"), read_file(rb.run_dir + "/report.json"));
  EXPECT_EQ(read_file(ra.run_dir + "/report.txt"), read_file(rb.run_dir + "/report.txt"));
  // regeneration from the log
  EXPECT_EQ(report_from_run(ra.run_dir).to_json(), read_file(ra.run_dir + "/report.json"));
}

TEST(Eval, ResumeFinishesRemainingAndDropsPartialRecords) {
  TempDir d;
  auto run = planned_run(d.str(), 1, true);
  run.cfg.categories = {Category::P1};
  EvalOptions opt;
  opt.limit = 7;
  auto r1 = run_eval(run.cfg, opt);
  EXPECT_EQ(r1.evaluated_now, 7);
  EXPECT_FALSE(r1.complete);
  EXPECT_FALSE(fs::exists(r1.run_dir + "/report.json"));
  int total = r1.evaluated_now + r1.remaining;

  // a lemma cut off mid-way: records without its completion marker, then a torn line
  auto meta = json::parse(read_file(r1.run_dir + "/config.json"));
  std::set<std::string> done;
  for (const auto& line : lines_of(r1.run_dir + "/trials.jsonl")) {
    auto j = json::parse(line);
    if (j["type"] == "lemma_done") done.insert(j["lemma_id"].get<std::string>());
  }
  EXPECT_EQ(done.size(), 7u);
  std::string victim;
  for (const auto& e : meta["evaluation"])
    if (!done.count(e["lemma_id"])) {
      victim = e["lemma_id"];
      break;
    }
  ASSERT_FALSE(victim.empty());
  {
    std::ofstream out(r1.run_dir + "/trials.jsonl", std::ios::app);
    json fake = {{"type", "trial"}, {"lemma_id", victim}, {"category", "P1"}, {"trial_index", 0},
                 {"round", "first"}, {"generation", "PARTIAL"}};
    out << fake.dump() << "\n{\"type\":\"tri";
  }

  // a different configuration may not resume it
  RunConfig other = run.cfg;
  other.k = 3;
  EvalOptions bad;
  bad.resume = r1.run_id;
  EXPECT_EQ(code_of([&] { run_eval(other, bad); }), ErrorCode::ConfigError);

  EvalOptions opt2;
  opt2.resume = r1.run_id;
  auto r2 = run_eval(run.cfg, opt2);
  EXPECT_EQ(r2.evaluated_now, total - 7);
  EXPECT_TRUE(r2.complete);
  std::map<std::string, int> markers;
  for (const auto& line : lines_of(r2.run_dir + "/trials.jsonl")) {
    auto j = json::parse(line);  // no torn lines left
    EXPECT_NE(j.value("generation", ""), "PARTIAL");
    if (j["type"] == "lemma_done") ++markers[j["lemma_id"]];
  }
  EXPECT_EQ(static_cast<int>(markers.size()), total);
  for (const auto& [id, m] : markers) EXPECT_EQ(m, 1) << id;

  // same numbers as an uninterrupted run
  auto fresh = run_eval(run.cfg, {});
  EXPECT_EQ(read_file(fresh.run_dir + "/report.json"), read_file(r2.run_dir + "/report.json"));
  auto timing = json::parse(read_file(r2.run_dir + "/timing.json"));
  EXPECT_EQ(timing["invocations"].size(), 2u);
}

TEST(Eval, FailureRules) {
  auto& P = prepared();
  TempDir d;
  // one lemma of P3 each: timeout, too long, sorry, endpoint error
  std::vector<const Lemma*> p3;
  for (const auto* l : P.manifest.lemmas())
    if (l->category == Category::P3) p3.push_back(l);
  json lemmas = json::object();
  for (std::size_t i = 0; i < p3.size(); ++i) {
    json e;
    switch (i % 4) {
      case 0: e = "mock_delay 30\n  " + p3[i]->proof_text; break;
      case 1: e = {{"text", p3[i]->proof_text}, {"completion_tokens", 2049}}; break;
      case 2: e = p3[i]->proof_text + "\n(* fine *) sorry"; break;
      case 3: e = {{"error", "TransportError"}}; break;
    }
    lemmas[p3[i]->name] = {{"first", {e}}};
  }
  write_file(d / "script.json", json{{"lemmas", lemmas}}.dump());
  RunConfig cfg = P.base_config();
  cfg.endpoint.script = d / "script.json";
  cfg.categories = {Category::P3};
  cfg.verify_timeout_seconds = 1.0;
  auto t0 = std::chrono::steady_clock::now();
  auto res = run_eval(cfg, {});
  EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(), 20.0);
  ASSERT_TRUE(res.complete);
  int timeouts = 0, too_long = 0, banned = 0, endpoint_err = 0, trials = 0;
  for (const auto& line : lines_of(res.run_dir + "/trials.jsonl")) {
    auto j = json::parse(line);
    if (j["type"] != "trial") continue;
    ++trials;
    EXPECT_EQ(j["error_class"], "other") << line;
    if (j.contains("verify") && !j["verify"].is_null() && j["verify"]["status"] == "timeout") ++timeouts;
    if (j["precheck"]["too_long"].get<bool>()) ++too_long;
    if (j["precheck"]["banned_token"].get<bool>()) ++banned;
    if (!j.value("endpoint_error", std::string()).empty()) ++endpoint_err;
  }
  auto rep = json::parse(read_file(res.run_dir + "/report.json"));
  EXPECT_EQ(rep["categories"]["P3"]["passed"], 0);
  EXPECT_EQ(rep["categories"]["P3"]["errors"]["other"]["percent"], 100);
  EXPECT_EQ(trials, rep["categories"]["P3"]["lemmas"].get<int>());
  EXPECT_GT(timeouts, 0);
  EXPECT_GT(too_long, 0);
  EXPECT_GT(banned, 0);
  EXPECT_GT(endpoint_err, 0);
}

TEST(Eval, UnusableConfigFailsBeforeAnyTrial) {
  auto& P = prepared();
  TempDir d;
  RunConfig cfg = P.base_config();
  cfg.workspace = d / "empty-ws";
  write_file(d / "s.json", "{}");
  cfg.endpoint.script = d / "s.json";
  EXPECT_EQ(code_of([&] { run_eval(cfg, {}); }), ErrorCode::ConfigError);  // no manifest
  cfg = P.base_config();
  cfg.endpoint.script = d / "missing.json";
  EXPECT_EQ(code_of([&] { run_eval(cfg, {}); }), ErrorCode::ConfigError);
  EXPECT_FALSE(fs::exists(d / "empty-ws/runs"));
}

// ---------------------------------------------------------------------------

namespace {

struct Cli {
  int code;
  std::string out;
};

Cli cli(const std::string& args, const std::string& env = "") {
  TempDir d;
  std::string cmd = env + " " + std::string(ISOBENCH_CLI) + " " + args + " >" + (d / "out") + " 2>&1";
  int rc = std::system(cmd.c_str());
  return {WIFEXITED(rc) ? WEXITSTATUS(rc) : -1, read_file(d / "out")};
}

}  // namespace

TEST(Cli, ExitCodes) {
  TempDir d;
  EXPECT_EQ(cli("").code, 1);
  EXPECT_EQ(cli("frobnicate").code, 1);
  EXPECT_EQ(cli("--help").code, 0);
  EXPECT_EQ(cli("ingest --corpus " + d.str() + " -w " + (d / "ws")).code, 2);  // no ROOT files
  write_file(d / "bad.ini", "[workspace]\npath = ws\n[endpoint]\npassword = x\n");
  EXPECT_EQ(cli("eval -c " + (d / "bad.ini")).code, 1);
  write_file(d / "http.ini",
             "[workspace]\npath = " + prepared().workspace + "\n[endpoint]\nkind = http\napi_key_env = ISOBENCH_NOPE\n");
  auto r = cli("eval -c " + (d / "http.ini"), "env -u ISOBENCH_NOPE");
  EXPECT_EQ(r.code, 1) << r.out;
  EXPECT_NE(r.out.find("ISOBENCH_NOPE"), std::string::npos);
}

TEST(Cli, EndToEnd) {
  TempDir d;
  auto gen = cli("gen-synthetic --out " + (d / "c"));
  ASSERT_EQ(gen.code, 0) << gen.out;
  auto ing = cli("ingest --corpus " + (d / "c") + " -w " + (d / "ws"));
  ASSERT_EQ(ing.code, 0) << ing.out;
  EXPECT_NE(ing.out.find("manifest.jsonl"), std::string::npos);
  EXPECT_EQ(ing.out.find(d.str()), std::string::npos) << "absolute path in output";
  auto iso = cli("isolate --all -w " + (d / "ws"));
  ASSERT_EQ(iso.code, 0) << iso.out;
  EXPECT_NE(iso.out.find("Broken              0       0       0       0"), std::string::npos) << iso.out;
  ASSERT_EQ(cli("chunks -w " + (d / "ws")).code, 0);
  write_file(d / "s.json", R"({"default":{"first":["by simp"]}})");
  write_file(d / "run.ini", "[corpus]\npath = c\n[workspace]\npath = ws\n[endpoint]\nscript = s.json\n[eval]\n"
                            "augment = similar,fixing\ncategories = P3\n");
  auto ev = cli("eval -q -c " + (d / "run.ini") + " --limit 3");
  ASSERT_EQ(ev.code, 0) << ev.out;
  auto runs = std::vector<fs::path>(fs::directory_iterator(d / "ws/runs"), fs::directory_iterator());
  ASSERT_EQ(runs.size(), 1u);
  std::string id = runs[0].filename().string();
  auto resumed = cli("eval -q -w " + (d / "ws") + " --resume " + id);
  ASSERT_EQ(resumed.code, 0) << resumed.out;
  EXPECT_NE(resumed.out.find("ACC#1"), std::string::npos);
  auto rep = cli("report -w " + (d / "ws") + " -r " + id);
  ASSERT_EQ(rep.code, 0) << rep.out;
  EXPECT_EQ(rep.out, read_file(runs[0].string() + "/report.txt"));
  EXPECT_EQ(cli("report -w " + (d / "ws") + " -r nope").code, 1);
}

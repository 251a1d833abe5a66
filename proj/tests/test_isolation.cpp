#include <gtest/gtest.h>

#include <filesystem>

#include "isobench/corpus_loader.hpp"
#include "isobench/error.hpp"
#include "isobench/isolation.hpp"
#include "isobench/mock_prover.hpp"
#include "isobench/root_file.hpp"
#include "isobench/text.hpp"
#include "test_util.hpp"

using namespace isobench;
using isobench::testing::TempDir;
namespace fs = std::filesystem;

namespace {

struct Fixture {
  TempDir corpus_dir, ws, cache;
  Corpus corpus;
  DependencyGraph graph;
  std::unique_ptr<MockProver> prover;

  Fixture() {
    write_file(corpus_dir / "ROOT",
               "session Base in \"base\" = HOL +\n  theories\n    A\n\n"
               "session Top in \"top\" = Base +\n  description \\<open>Top level.\\<close>\n  theories\n    B\n");
    write_file(corpus_dir / "base/A.thy",
               "theory A\n  imports Main\nbegin\n\ndefinition f :: \"bool\" where\n  \"f = k1\"\n\nend\n");
    write_file(corpus_dir / "top/C.thy",
               "theory C imports Main begin\n\ndefinition g :: \"bool\" where\n  \"g = k2\"\n\nend\n");
    write_file(corpus_dir / "top/B.thy",
               "(* header comment *)\ntheory B\n  imports C \"Base.A\"\nbegin\n\n"
               "lemma first: \"k1\"\n  by (simp add: f_def)\n\n"
               "lemma second: \"k1 \\<and> k2\"\n  apply (rule first)\n  apply (simp add: g_def)\n  done\n\n"
               "lemma third: \"k2\" by (simp add: g_def)\n\n"
               "lemma (in loc) fourth: \"k2\" by (simp add: g_def)\n\nend\n");
    corpus = load_corpus(corpus_dir.str());
    graph = corpus.graph();
    ProverConfig cfg;
    cfg.cache_dir = cache.str();
    cfg.include_dirs = {corpus_dir.str()};
    prover = std::make_unique<MockProver>(cfg);
  }
  const Lemma& lemma(const std::string& id) { return *corpus.find_lemma(id); }
};

}  // namespace

TEST(Isolation, DependencyTheoryKeepsEarlierLemmas) {
  Fixture fx;
  auto b = isolate(fx.corpus, fx.graph, fx.lemma("Top.B.second"), fx.ws.str());
  fs::path session_dir = fs::path(b.workspace) / "top";
  std::string rel_c = (fs::path(fx.corpus.root) / "top" / "C").lexically_relative(session_dir).generic_string();
  EXPECT_EQ(b.dep_theory_text, "(* header comment *)\ntheory B_DEP\n  imports \"" + rel_c +
                                   "\" \"Base.A\"\nbegin\n\nlemma first: \"k1\"\n  by (simp add: f_def)\n\nend\n");
  EXPECT_EQ(b.target_theory_template, "theory B_TGT\n  imports \"Top_DEP_" + b.key +
                                          ".B_DEP\"\nbegin\n\nlemma second: \"k1 \\<and> k2\"\n(*@@PROOF@@*)\n\nend\n");
  EXPECT_EQ(read_file(b.dep_theory_path), b.dep_theory_text);
  EXPECT_EQ(b.key.size(), 10u);
  EXPECT_EQ(fs::path(b.workspace).filename().string(), b.key);
}

TEST(Isolation, ProofOnSpecLineKeepsLayout) {
  Fixture fx;
  auto b = isolate(fx.corpus, fx.graph, fx.lemma("Top.B.third"), fx.ws.str());
  EXPECT_NE(b.target_theory_template.find("lemma third: \"k2\" (*@@PROOF@@*)"), std::string::npos);
  EXPECT_EQ(splice_proof(b, "by (simp add: g_def)").find("lemma third: \"k2\" by (simp add: g_def)\n"),
            b.target_theory_template.find("lemma third"));
}

TEST(Isolation, RootStanzasParseBack) {
  Fixture fx;
  auto b = isolate(fx.corpus, fx.graph, fx.lemma("Top.B.second"), fx.ws.str());
  auto root = parse_root(read_file((fs::path(b.workspace) / "ROOT").string()));
  ASSERT_EQ(root.stanzas.size(), 2u);
  const auto& dep = root.stanzas[0];
  const auto& tgt = root.stanzas[1];
  EXPECT_EQ(dep.name, "Top_DEP_" + b.key);
  EXPECT_EQ(dep.parent, std::optional<std::string>("Base"));
  EXPECT_EQ(dep.description, std::optional<std::string>("Top level."));
  EXPECT_EQ(dep.entry_theories, std::vector<std::string>{"B_DEP"});
  EXPECT_EQ(dep.directory, "top");
  EXPECT_EQ(tgt.name, "Top_TGT_" + b.key);
  EXPECT_EQ(tgt.parent, std::optional<std::string>(dep.name));
  EXPECT_EQ(tgt.entry_theories, std::vector<std::string>{"B_TGT"});
  EXPECT_EQ(emit_root(b), read_file((fs::path(b.workspace) / "ROOT").string()));
}

TEST(Isolation, CheckCorrectnessPersistsStatus) {
  Fixture fx;
  const Lemma& l = fx.lemma("Top.B.second");
  auto b = isolate(fx.corpus, fx.graph, l, fx.ws.str());
  EXPECT_EQ(b.status, BenchStatus::Unchecked);
  EXPECT_EQ(check_correctness(b, *fx.prover, l), BenchStatus::Verified) << b.broken_reason;
  auto again = isolate(fx.corpus, fx.graph, l, fx.ws.str());
  EXPECT_EQ(again.status, BenchStatus::Verified);
  auto saved = load_bench_status(fx.ws.str(), l.id);
  ASSERT_TRUE(saved);
  EXPECT_EQ(saved->first, BenchStatus::Verified);
}

TEST(Isolation, WrongProofFailsWithProverMessage) {
  Fixture fx;
  const Lemma& l = fx.lemma("Top.B.second");
  auto b = isolate(fx.corpus, fx.graph, l, fx.ws.str());
  auto r = verify_proof(b, *fx.prover, "by (simp add: f_def)");
  EXPECT_EQ(r.status, VerifyStatus::Failure);
  EXPECT_NE(r.message.find("Failed to finish proof"), std::string::npos) << r.message;
  r = verify_proof(b, *fx.prover, "by (simp add: third)");
  EXPECT_NE(r.message.find("Undefined fact: \"third\""), std::string::npos) << r.message;
}

TEST(Isolation, BrokenGroundtruthIsReported) {
  Fixture fx;
  Lemma l = fx.lemma("Top.B.second");
  auto b = isolate(fx.corpus, fx.graph, l, fx.ws.str());
  l.proof_text = "apply (rule first)\n  done";  // truncated
  EXPECT_EQ(check_correctness(b, *fx.prover, l), BenchStatus::Broken);
  EXPECT_NE(b.broken_reason.find("target session failure"), std::string::npos) << b.broken_reason;
}

TEST(Isolation, ExcludedAndUnknownTheory) {
  Fixture fx;
  try {
    isolate(fx.corpus, fx.graph, fx.lemma("Top.B.fourth"), fx.ws.str());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::LemmaExcluded);
  }
  Lemma ghost = fx.lemma("Top.B.second");
  ghost.theory_id = "Top.Nowhere";
  try {
    isolate(fx.corpus, fx.graph, ghost, fx.ws.str());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TheoryNotInGraph);
  }
}

TEST(Isolation, SpliceErrors) {
  Fixture fx;
  auto b = isolate(fx.corpus, fx.graph, fx.lemma("Top.B.second"), fx.ws.str());
  try {
    splice_proof(b, "by simp (*@@PROOF@@*)");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SpliceCollision);
  }
  IsolatedBench none = b;
  none.target_theory_template = "theory B_TGT imports Main begin end";
  try {
    splice_proof(none, "by simp");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingPlaceholder);
  }
  EXPECT_EQ(verify_proof(none, *fx.prover, "by simp").status, VerifyStatus::Failure);
}

TEST(Isolation, FirstLemmaDependsOnImportsOnly) {
  Fixture fx;
  auto b = isolate(fx.corpus, fx.graph, fx.lemma("Top.B.first"), fx.ws.str());
  EXPECT_EQ(b.dep_theory_text.find("lemma"), std::string::npos);
  EXPECT_EQ(check_correctness(b, *fx.prover, fx.lemma("Top.B.first")), BenchStatus::Verified) << b.broken_reason;
}

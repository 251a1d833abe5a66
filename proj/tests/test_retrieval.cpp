#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "isobench/corpus_loader.hpp"
#include "isobench/error.hpp"
#include "isobench/retrieval.hpp"
#include "isobench/synthetic.hpp"
#include "isobench/text.hpp"
#include "isobench/theory.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace isobench;
using isobench::testing::TempDir;

namespace {

ChunkLibrary library_of(const std::vector<std::string>& docs) {
  std::vector<Chunk> chunks;
  for (std::size_t i = 0; i < docs.size(); ++i)
    chunks.push_back({static_cast<int>(i), "T.T", {static_cast<int>(i) + 1, static_cast<int>(i) + 1}, docs[i]});
  return ChunkLibrary::from_chunks(chunks);
}

TheoryFile theory(const std::string& id, const std::string& text) {
  TheoryFile t;
  t.id = id;
  t.text = text;
  return t;
}

}  // namespace

TEST(Chunks, SplitOnBlankLines) {
  auto lib = build_chunks({theory("S.T", "a b\nc\n\nd e\n   \n\n f\n")});
  ASSERT_EQ(lib.chunks.size(), 3u);
  EXPECT_EQ(lib.chunks[0].text, "a b\nc");
  EXPECT_EQ(lib.chunks[0].line_span, (LineSpan{1, 2}));
  EXPECT_EQ(lib.chunks[1].line_span, (LineSpan{4, 4}));
  EXPECT_EQ(lib.chunks[2].text, " f");
  EXPECT_EQ(build_chunks({theory("S.T", "x\n\ny")}).chunks.size(), 2u);
  EXPECT_TRUE(build_chunks({}).chunks.empty());
}

TEST(Chunks, ReferenceListingIsOneTenLineChunk) {
  auto text = read_file(std::string(ISOBENCH_TESTDATA) + "/fixtures/listings.thy");
  auto lib = build_chunks({theory("S.Listings", text)});
  const Chunk* listing = nullptr;
  for (const auto& c : lib.chunks)
    if (c.text.rfind("lemma unbind_notification_valid_sched", 0) == 0) listing = &c;
  ASSERT_NE(listing, nullptr);
  EXPECT_EQ(listing->line_span.last - listing->line_span.first + 1, 10);
  EXPECT_EQ(split_lines(listing->text).size(), 10u);
}

TEST(Chunks, StatisticsRebuildAndPersist) {
  TempDir d, out;
  write_synthetic(generate_synthetic({}), d.str());
  auto corpus = load_corpus(d.str());
  auto lib = build_chunks(corpus.theories);
  for (std::size_t i = 0; i < lib.chunks.size(); ++i) {
    EXPECT_EQ(lib.chunks[i].id, static_cast<int>(i));
    for (auto line : split_lines(lib.chunks[i].text)) EXPECT_FALSE(is_blank(line));
    if (i && lib.chunks[i].theory_id == lib.chunks[i - 1].theory_id)
      EXPECT_GT(lib.chunks[i].line_span.first, lib.chunks[i - 1].line_span.last);
  }
  EXPECT_EQ(ChunkLibrary::from_chunks(lib.chunks), lib);
  save_library(lib, out / "chunks.json");
  EXPECT_EQ(load_library(out / "chunks.json"), lib);
  auto text = read_file(out / "chunks.json");
  auto pos = text.find("\"version\":1");
  ASSERT_NE(pos, std::string::npos);
  write_file(out / "old.json", text.replace(pos, 11, "\"version\":0"));
  EXPECT_THROW(load_library(out / "old.json"), Error);
}

TEST(Bm25, HandComputedToyCorpus) {
  auto lib = library_of({"a b", "a c c", "d"});
  auto s = bm25_scores(lib, "c");
  // N=3, avgdl=2; doc 1: tf=2, dl=3
  EXPECT_NEAR(s[1], std::log(8.0 / 3.0) * 4.4 / 3.65, 1e-9);
  EXPECT_EQ(s[0], 0.0);
  s = bm25_scores(lib, "a");
  EXPECT_NEAR(s[0], std::log(1.6) * 2.2 / 2.2, 1e-9);
  EXPECT_NEAR(s[1], std::log(1.6) * 2.2 / 2.65, 1e-9);
}

TEST(Bm25, MatchesBruteForceOnRandomCorpora) {
  std::mt19937_64 rng(5);
  for (int round = 0; round < 50; ++round) {
    int vocab = 1 + static_cast<int>(rng() % 50);
    std::vector<std::string> docs(1 + rng() % 20);
    for (auto& d : docs)
      for (int w = static_cast<int>(rng() % 12); w > 0; --w) d += "t" + std::to_string(rng() % vocab) + " ";
    std::string query;
    for (int w = 1 + static_cast<int>(rng() % 5); w > 0; --w) query += "t" + std::to_string(rng() % (vocab + 3)) + " ";
    auto got = bm25_scores(library_of(docs), query);
    auto want = oracle::bm25_reference(docs, query);
    ASSERT_EQ(got.size(), want.size());
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-9) << round << ":" << i;
  }
}

TEST(Bm25, RankingRules) {
  auto lib = library_of({"alpha beta", "gamma delta epsilon", "alpha beta", "zeta"});
  auto r = bm25_rank(lib, "gamma delta epsilon", 2);
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(r[0].first, 1);
  r = bm25_rank(lib, "alpha", 4);
  EXPECT_EQ(r[0].first, 0);  // tie with chunk 2 goes to the lower id
  EXPECT_EQ(r[1].first, 2);
  r = bm25_rank(lib, "unknownword", 10);
  ASSERT_EQ(r.size(), 4u);
  for (int i = 0; i < 4; ++i) {
    EXPECT_EQ(r[static_cast<std::size_t>(i)].first, i);
    EXPECT_EQ(r[static_cast<std::size_t>(i)].second, 0.0);
  }
  EXPECT_THROW(bm25_rank(lib, "  ,;  ", 1), Error);
  EXPECT_THROW(bm25_rank(lib, "alpha", 0), Error);
}

TEST(Similar, ExcludesOwnChunkAndCapsLines) {
  auto text = std::string("theory T imports Main begin\n\n") +
              "lemma target_lemma: \"foo bar baz\"\n  by simp\n\n" +
              "lemma copy: \"foo bar baz\"\n  by simp\n\n" +
              "lemma other: \"qux\"\n  by simp\n\nend\n";
  auto th = parse_theory(text, "S.T", "T.thy");
  auto lemmas = extract_lemmas(th);
  auto lib = build_chunks({th});
  const Lemma& target = lemmas.lemmas[0];
  EXPECT_EQ(similar_augment(lib, target), "<sim>\nlemma copy: \"foo bar baz\"\n  by simp\n</sim>");

  std::string long_chunk;
  for (int i = 1; i <= 14; ++i) long_chunk += "line" + std::to_string(i) + " qux\n";
  auto th2 = theory("S.U", long_chunk);
  auto lib2 = build_chunks({th, th2});
  auto sim = similar_augment(lib2, lemmas.lemmas[2]);
  EXPECT_EQ(split_lines(sim).size(), 12u);  // tags + 10 lines

  auto lone = build_chunks({theory("S.T", "lemma target_lemma: \"foo bar baz\"\n  by simp\n")});
  Lemma only = target;
  only.span = {1, 2};
  EXPECT_THROW(similar_augment(lone, only), Error);
}

TEST(Similar, NeverReturnsTargetChunkOnSyntheticCorpus) {
  TempDir d;
  write_synthetic(generate_synthetic({}), d.str());
  auto corpus = load_corpus(d.str());
  auto lib = build_chunks(corpus.theories);
  int checked = 0;
  for (const auto* l : corpus.lemmas()) {
    auto sim = similar_augment(lib, *l);
    for (const auto& c : lib.chunks)
      if (chunk_holds_lemma(c, *l)) {
        auto lines = split_lines(c.text);
        std::string head;
        for (std::size_t i = 0; i < lines.size() && i < 10; ++i) head += (i ? "\n" : "") + std::string(lines[i]);
        EXPECT_NE(sim, "<sim>\n" + head + "\n</sim>") << l->id;
      }
    ++checked;
  }
  EXPECT_GT(checked, 80);
}

TEST(AppliedFacts, ReferenceExamples) {
  EXPECT_EQ(extract_applied_facts("by (simp add: gen_invocation_type_def)"),
            std::vector<std::string>{"gen_invocation_type_def"});
  EXPECT_EQ(extract_applied_facts("apply (rule hoare_seq_ext[OF _ gbn_sp])"),
            (std::vector<std::string>{"hoare_seq_ext", "gbn_sp"}));
  EXPECT_TRUE(extract_applied_facts("by simp").empty());
  EXPECT_EQ(extract_applied_facts("by (simp add:\n  gen_invocation_type_def\n  split: invocation_label.splits)"),
            (std::vector<std::string>{"gen_invocation_type_def", "invocation_label.splits"}));
}

TEST(AppliedFacts, ReferenceListing) {
  std::string proof =
      "apply (simp add: unbind_notification_def)\napply (rule hoare_seq_ext[OF _ gbn_sp])\n"
      "apply (case_tac ntfnptra, simp, wp, simp)\napply (clarsimp)\n"
      "apply (rule hoare_seq_ext[OF _ get_simple_ko_sp])\napply (wp set_bound_notification_valid_sched, clarsimp)\n"
      "done";
  EXPECT_EQ(extract_applied_facts(proof),
            (std::vector<std::string>{"unbind_notification_def", "hoare_seq_ext", "gbn_sp", "get_simple_ko_sp",
                                      "set_bound_notification_valid_sched"}));
}

TEST(AppliedFacts, TermsAndLocalsAreNotFacts) {
  EXPECT_TRUE(extract_applied_facts("by (cases obj, auto)").empty());
  EXPECT_EQ(extract_applied_facts("apply (rule_tac x=y in exI)\n  apply (induct xs arbitrary: ys)\n  done"),
            std::vector<std::string>{"exI"});
  EXPECT_EQ(extract_applied_facts("proof -\n  have h: \"P x\" by (auto simp: foo_def)\n  show ?thesis\n"
                                  "    using h bar[of x] by (metis baz)\nqed"),
            (std::vector<std::string>{"foo_def", "h", "bar", "baz"}));
  EXPECT_EQ(extract_applied_facts("by (simp add: a_def) (* b_def *)"), std::vector<std::string>{"a_def"});
}

TEST(AppliedFacts, IdempotentAndStable) {
  std::string proof = "apply (simp add: x_def y_def)\n  apply (rule z[OF x_def])\n  apply (wp w)\n  done";
  auto facts = extract_applied_facts(proof);
  EXPECT_EQ(facts, (std::vector<std::string>{"x_def", "y_def", "z", "w"}));
  EXPECT_EQ(extract_applied_facts(proof), facts);
  EXPECT_EQ(extract_applied_facts("using " + join(facts, " ") + " by simp"), facts);
}

TEST(AppliedFacts, StoplistDataFileMatchesDefault) {
  EXPECT_EQ(load_fact_stoplist(std::string(ISOBENCH_DATA) + "/fact_stoplist.txt"), default_fact_stoplist());
  EXPECT_THROW(load_fact_stoplist("/nonexistent/stop.txt"), Error);
}

namespace {

struct DepFixture {
  TempDir dir;
  Corpus corpus;
  DependencyGraph graph;
  ChunkLibrary lib;
  DepFixture() {
    write_file(dir / "ROOT", "session S = HOL +\n  theories\n    B\n    C\n");
    write_file(dir / "A.thy",
               "theory A imports Main begin\n\ndefinition foo :: \"bool\" where\n  \"foo = k1\"\n\n"
               "lemma bar: \"k1\"\n  by (simp add: foo_def)\nlemmas bar2 = bar\n\nend\n");
    write_file(dir / "B.thy",
               "theory B imports A begin\n\nlemma near: \"k1\" by (rule bar)\n\n"
               "lemma t: \"k1\"\n  by (simp add: foo_def bar bar2 later baz near)\n\n"
               "lemma later: \"k1\" by (rule bar)\n\nend\n");
    write_file(dir / "C.thy", "theory C imports Main begin\n\nlemma baz: \"k9\" sorry\n\nend\n");
    corpus = load_corpus(dir.str());
    graph = corpus.graph();
    lib = build_chunks(corpus.theories);
  }
};

}  // namespace

TEST(Dependency, LocatesClosureDeclarationsOnly) {
  DepFixture fx;
  const Lemma& t = *fx.corpus.find_lemma("S.B.t");
  auto dep = dependency_augment(fx.lib, fx.graph, t, default_fact_stoplist());
  EXPECT_EQ(dep.located, 4);  // foo_def, bar, bar2, near
  EXPECT_EQ(dep.skipped, 2);  // later (after the target), baz (outside the closure)
  ASSERT_EQ(dep.chunk_ids.size(), 3u);
  EXPECT_EQ(dep.text,
            "<dep>\ndefinition foo :: \"bool\" where\n  \"foo = k1\"\n</dep>\n"
            "<dep>\nlemma bar: \"k1\"\n  by (simp add: foo_def)\nlemmas bar2 = bar\n</dep>\n"
            "<dep>\nlemma near: \"k1\" by (rule bar)\n</dep>");
  auto closure = fx.graph.theory_closure(t.theory_id);
  for (int id : dep.chunk_ids) {
    const auto& c = fx.lib.chunks[static_cast<std::size_t>(id)];
    bool ok = c.theory_id == t.theory_id || std::find(closure.begin(), closure.end(), c.theory_id) != closure.end();
    EXPECT_TRUE(ok) << c.theory_id;
  }
}

TEST(Dependency, FiveLineCap) {
  TempDir d;
  write_file(d / "ROOT", "session S = HOL +\n  theories\n    B\n");
  std::string a = "theory A imports Main begin\n\nlemma big: \"k1\"\n";
  for (int i = 0; i < 8; ++i) a += "  apply simp\n";
  a += "  done\n\nend\n";
  write_file(d / "A.thy", a);
  write_file(d / "B.thy", "theory B imports A begin\n\nlemma t: \"k1\" by (rule big)\n\nend\n");
  auto corpus = load_corpus(d.str());
  auto dep = dependency_augment(build_chunks(corpus.theories), corpus.graph(), *corpus.find_lemma("S.B.t"),
                                default_fact_stoplist());
  EXPECT_EQ(split_lines(dep.text).size(), 7u);
}

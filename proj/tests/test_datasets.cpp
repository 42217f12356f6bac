#include <gtest/gtest.h>

#include <set>

#include "prowl/datasets.hpp"
#include "prowl/entity.hpp"
#include "support/synthetic.hpp"

using namespace prowl;

namespace {

const char* kContent =
    "d1\thope game win\tsports\n"
    "d2\tvote law\tpolitics\n"
    "d3\tgame game score\tsports\n"
    "d4\tlaw court\tpolitics\n"
    "d5\thope faith\treligion\n"
    "d6\twin score\tsports\n";

const char* kCites =
    "d1\td3\n"
    "d2\td4\n"
    "d1\td9\n"  // dangling: d9 unknown
    "d5\td1\n";

const char* kMiniCorpus = R"({"relation_labels": ["sideEffects", "interactsWith", "Other"], "type_labels": ["symptom", "drug"], "range": {"sideEffects": "symptom", "interactsWith": "drug"}}
{"subject": "aspirin", "sections": [{"title": "adverse reactions", "sentences": ["Heartburn may occur.", "Nausea and heartburn were reported."]}], "mentions": [{"id": "m1", "section": "adverse reactions", "sentence": 0, "nps": ["heartburn"], "features": ["tok_heartburn"], "relation": "sideEffects", "type": "symptom"}, {"id": "m2", "section": "adverse reactions", "sentence": 1, "nps": ["nausea", "heartburn"], "features": ["tok_nausea"], "relation": "sideEffects"}, {"id": "m3", "section": "adverse reactions", "sentence": 1, "nps": ["nausea"], "features": ["tok_n2"]}]}
{"subject": "singulair", "sections": [{"title": "adverse reactions", "sentences": ["Heartburn was noted."]}], "mentions": [{"id": "m4", "section": "adverse reactions", "sentence": 0, "nps": ["heartburn"], "features": ["tok_heartburn"], "relation": "sideEffects"}]}
)";

}  // namespace

TEST(Citation, LoadWordListLayout) {
  CitationDataset ds = load_citation(kContent, kCites);
  EXPECT_EQ(ds.docs.size(), 6u);
  EXPECT_EQ(ds.links.size(), 3u);
  EXPECT_EQ(ds.dropped_links, 1);
  EXPECT_EQ(ds.labels.size(), 3u);
  EXPECT_EQ(ds.vocabulary_size, 8u);  // hope game win vote law score court faith

  // repeated words deduplicate per document
  const auto& d3 = ds.docs[ds.index.at("d3")];
  EXPECT_EQ(d3.words.size(), 2u);
}

TEST(Citation, LoadBinaryColumnLayout) {
  // The public layout: one 0/1 column per vocabulary word.
  std::string content =
      "p1\t1\t0\t1\tca\n"
      "p2\t0\t1\t0\tcb\n"
      "p3\t1\t1\t0\tca\n";
  CitationDataset ds = load_citation(content, "p1\tp2\n");
  EXPECT_EQ(ds.docs.size(), 3u);
  EXPECT_EQ(ds.vocabulary_size, 3u);
  EXPECT_EQ(ds.docs[0].words, (std::vector<std::string>{"w0", "w2"}));
  EXPECT_EQ(ds.labels, (std::vector<std::string>{"ca", "cb"}));
}

TEST(Citation, MalformedLinesReported) {
  EXPECT_THROW(load_citation("justonefield\n", ""), std::runtime_error);
  EXPECT_THROW(load_citation("", ""), std::runtime_error);
  EXPECT_THROW(load_citation("d1\ta b\tl1\nd1\tc\tl1\n", ""), std::runtime_error);  // dup id
  EXPECT_THROW(load_citation("d1\ta\tl1\n", "d1\n"), std::runtime_error);  // bad cites line
}

TEST(SplitTest, CountsDisjointnessDeterminism) {
  CitationDataset ds = load_citation(kContent, kCites);
  // 6 docs, 3 labels; 1 per class labeled, 2 test, cap big.
  Split s = make_split(ds, 1, 2, 100, 9);
  EXPECT_EQ(s.test.size(), 2u);
  EXPECT_EQ(s.labeled.size(), 3u);
  EXPECT_EQ(s.unlabeled.size(), 1u);

  std::set<std::string> all;
  for (const auto& [d, l] : s.test) all.insert(d);
  for (const auto& [d, l] : s.labeled) all.insert(d);
  for (const std::string& d : s.unlabeled) all.insert(d);
  EXPECT_EQ(all.size(), 6u);  // disjoint and exhaustive here

  Split again = make_split(ds, 1, 2, 100, 9);
  EXPECT_EQ(s.labeled, again.labeled);
  EXPECT_EQ(s.unlabeled, again.unlabeled);
  EXPECT_EQ(s.test, again.test);

  // Some label has too few members once 2 docs are held out.
  EXPECT_THROW(make_split(ds, 2, 2, 100, 9), std::runtime_error);
}

// The published setup: 20 labeled per class, 1,000 test, training capped at
// 5,000. On a 2,708-document 7-class collection this leaves exactly 140
// labeled and 1,568 unlabeled; with 3 classes the labeled pool is 60.
TEST(SplitTest, PublishedSplitArithmetic) {
  rng::Stream rng(606);
  synth::GeneratedCitation gen = synth::citation_like(rng, {2708, 5429, 7, 1433});
  CitationDataset cora_shaped = load_citation(gen.content, gen.cites);
  Split s = make_split(cora_shaped, 20, 1000, 5000, 2);
  EXPECT_EQ(s.labeled.size(), 140u);
  EXPECT_EQ(s.unlabeled.size(), 1568u);
  EXPECT_EQ(s.test.size(), 1000u);

  std::string content;
  for (int i = 0; i < 300; ++i)
    content += "p" + std::to_string(i) + "\tw" + std::to_string(i % 9) + "\tc" +
               std::to_string(i % 3) + "\n";
  CitationDataset three_class = load_citation(content, "");
  EXPECT_EQ(make_split(three_class, 20, 100, 5000, 2).labeled.size(), 60u);
}

TEST(SplitTest, TrainCapLimitsThePool) {
  std::string content;
  for (int i = 0; i < 40; ++i)
    content += "d" + std::to_string(i) + "\tw" + std::to_string(i % 5) + "\tc" +
               std::to_string(i % 2) + "\n";
  CitationDataset ds = load_citation(content, "");
  Split s = make_split(ds, 2, 10, 20, 4);
  EXPECT_EQ(s.test.size(), 10u);
  EXPECT_EQ(s.labeled.size() + s.unlabeled.size(), 20u);
}

TEST(Emit, FactsAndExampleShapes) {
  CitationDataset ds = load_citation("d\ta b\tc1\ne\tz\tc2\n", "d\te\n");
  Split s;
  s.labeled = {{"d", "c1"}};
  s.test = {{"e", "c2"}};
  EmittedFiles files = emit_classifier_facts(ds, s);

  EXPECT_NE(files.facts.find("hasFeature\td\ta\n"), std::string::npos);
  EXPECT_NE(files.facts.find("cites\td\te\n"), std::string::npos);
  EXPECT_NE(files.facts.find("near\td\te\n"), std::string::npos);
  EXPECT_NE(files.facts.find("near\te\td\n"), std::string::npos);
  EXPECT_NE(files.facts.find("pickLabel\tc1\n"), std::string::npos);

  EXPECT_EQ(files.train_examples,
            "predictT(d,Y)\t+predictT(d,c1)\t-predictT(d,c2)\n");
  EXPECT_EQ(files.test_examples,
            "predictT(e,Y)\t+predictT(e,c2)\t-predictT(e,c1)\n");
  EXPECT_TRUE(files.train_examples_citation.empty());

  EmitOptions opts;
  opts.citation_view = true;
  EXPECT_EQ(emit_classifier_facts(ds, s, opts).train_examples_citation,
            "predictC(d,Y)\t+predictC(d,c1)\t-predictC(d,c2)\n");

  // Empty split: no examples, facts still emitted.
  Split empty;
  EmittedFiles none = emit_classifier_facts(ds, empty);
  EXPECT_TRUE(none.train_examples.empty());
  EXPECT_FALSE(none.facts.empty());
}

// Labels like "Agents" in the public data start uppercase; emission maps
// them through the bijective '_' prefix so fact and example files stay
// parseable, and the inverse recovers the original.
TEST(Emit, UppercaseTokensSanitized) {
  CitationDataset ds = load_citation("d\ta\tAgents\ne\tb\tIR\n", "");
  Split s;
  s.labeled = {{"d", "Agents"}};
  EmittedFiles files = emit_classifier_facts(ds, s);
  EXPECT_NE(files.facts.find("pickLabel\t_Agents\n"), std::string::npos);
  EXPECT_NE(files.train_examples.find("+predictT(d,_Agents)"), std::string::npos);

  SymbolTable syms;
  EXPECT_NO_THROW(parse_facts(files.facts, syms));
  EXPECT_NO_THROW(parse_examples(files.train_examples, syms));

  EXPECT_EQ(unsafe_token(safe_token("Agents")), "Agents");
  EXPECT_EQ(unsafe_token(safe_token("_odd")), "_odd");
  EXPECT_EQ(unsafe_token(safe_token("plain")), "plain");
}

TEST(Entity, LoadCorpusAndPairIndexes) {
  EntityCorpus corpus = load_entity_corpus(kMiniCorpus);
  EXPECT_EQ(corpus.documents.size(), 2u);
  EXPECT_EQ(corpus.mentions.size(), 4u);
  EXPECT_EQ(corpus.relation_labels.size(), 3u);
  EXPECT_EQ(corpus.range_map.size(), 2u);

  // heartburn appears in m1 and m2 of the aspirin document.
  ASSERT_EQ(corpus.doc_pairs.size(), 2u);  // (m1,m2) via heartburn, (m2,m3) via nausea
  EXPECT_EQ(corpus.mentions[corpus.doc_pairs[0].first].id, "m1");
  EXPECT_EQ(corpus.mentions[corpus.doc_pairs[0].second].id, "m2");

  // m2 and m3 share sentence 1 of "adverse reactions".
  ASSERT_EQ(corpus.sent_pairs.size(), 1u);
  EXPECT_EQ(corpus.mentions[corpus.sent_pairs[0].first].id, "m2");
  EXPECT_EQ(corpus.mentions[corpus.sent_pairs[0].second].id, "m3");

  // heartburn in matching "adverse reactions" sections of both documents.
  std::set<std::pair<std::string, std::string>> title_pairs;
  for (const auto& [a, b] : corpus.title_pairs)
    title_pairs.insert({corpus.mentions[a].id, corpus.mentions[b].id});
  EXPECT_TRUE(title_pairs.count({"m1", "m4"}));
  EXPECT_TRUE(title_pairs.count({"m2", "m4"}));
  EXPECT_FALSE(title_pairs.count({"m3", "m4"}));  // nausea does not match heartburn
}

// A sentence with three mentions contributes all three unordered pairs to
// the sentence index; a lone mention contributes none.
TEST(Entity, ThreeMentionSentencePairs) {
  std::string corpus = R"({"relation_labels": ["r1", "Other"], "type_labels": ["t1"]}
{"subject": "x", "sections": [{"title": "s", "sentences": ["one.", "two."]}], "mentions": [{"id": "a", "section": "s", "sentence": 0, "nps": ["na"]}, {"id": "b", "section": "s", "sentence": 0, "nps": ["nb"]}, {"id": "c", "section": "s", "sentence": 0, "nps": ["nc"]}, {"id": "lone", "section": "s", "sentence": 1, "nps": ["nd"]}]}
)";
  EntityCorpus c = load_entity_corpus(corpus);
  EXPECT_EQ(c.sent_pairs.size(), 3u);  // C(3,2)
  for (const auto& [i, k] : c.sent_pairs) {
    EXPECT_NE(c.mentions[static_cast<size_t>(i)].id, "lone");
    EXPECT_NE(c.mentions[static_cast<size_t>(k)].id, "lone");
  }
}

TEST(Entity, SchemaViolations) {
  EXPECT_THROW(load_entity_corpus("{}\n"), std::runtime_error);  // header incomplete
  EXPECT_THROW(load_entity_corpus(
                   R"({"relation_labels": ["a"], "type_labels": []})" "\n"),
               std::runtime_error);  // no Other
  std::string bad_section = R"({"relation_labels": ["Other"], "type_labels": []}
{"subject": "x", "sections": [{"title": "t", "sentences": ["s"]}], "mentions": [{"id": "m", "section": "nope", "sentence": 0}]}
)";
  EXPECT_THROW(load_entity_corpus(bad_section), std::runtime_error);
  std::string bad_sentence = R"({"relation_labels": ["Other"], "type_labels": []}
{"subject": "x", "sections": [{"title": "t", "sentences": ["s"]}], "mentions": [{"id": "m", "section": "t", "sentence": 3}]}
)";
  EXPECT_THROW(load_entity_corpus(bad_sentence), std::runtime_error);
}

TEST(Entity, MentionFactsEmitted) {
  EntityCorpus corpus = load_entity_corpus(kMiniCorpus);
  std::string facts = emit_mention_facts(corpus);
  EXPECT_NE(facts.find("hasFeature\tm1\ttok_heartburn\n"), std::string::npos);
  SymbolTable syms;
  EXPECT_NO_THROW(parse_facts(facts, syms));
}

TEST(Entity, RankedExampleCutoff) {
  SymbolTable syms;
  std::string text =
      "3\tpredictR(m3,Y)\t+predictR(m3,sideEffects)\n"
      "1\tpredictR(m1,Y)\t+predictR(m1,sideEffects)\n"
      "2\tpredictR(m2,Y)\t-predictR(m2,interactsWith)\n";
  auto top2 = load_ranked_examples(text, syms, 2);
  ASSERT_EQ(top2.size(), 2u);
  EXPECT_EQ(to_string(top2[0].query, syms), "predictR(m1,Y)");
  EXPECT_EQ(to_string(top2[1].query, syms), "predictR(m2,Y)");
  auto all = load_ranked_examples(text, syms, -1);
  EXPECT_EQ(all.size(), 3u);
  EXPECT_THROW(load_ranked_examples("noRank\n", syms, 1), std::runtime_error);
}

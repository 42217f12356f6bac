#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "prowl/grounder.hpp"
#include "prowl/parser.hpp"

using namespace prowl;

namespace {

const char* kSupervised =
    "predict(X,Y) :- pickLabel(Y), classify(X,Y).\n"
    "classify(X,Y) :- true { f(W,Y) : hasFeature(X,W) }.\n";

const char* kSupervisedFacts =
    "pickLabel\tsports\npickLabel\tpolitics\npickLabel\ttech\n"
    "hasFeature\td1\thope\nhasFeature\td1\tgame\n";

struct Fixture {
  SymbolTable syms;
  FeatureTable feats;
  Program program;

  Fixture(const char* rules, const char* facts) {
    program = parse_program(rules, syms);
    FactSet fs = parse_facts(facts, syms);
    for (const Atom& f : fs.all()) program.facts.add(f);
  }

  ProofGraph ground_query(const std::string& q, GroundingLimits limits = {}) {
    return ground(program, parse_query(q, syms), limits, syms, feats);
  }
};

int count_edges(const ProofGraph& g, EdgeKind kind) {
  int n = 0;
  for (const Edge& e : g.edges)
    if (e.kind == kind) ++n;
  return n;
}

}  // namespace

TEST(Grounder, SupervisedThreeLabelGraph) {
  Fixture fx(kSupervised, kSupervisedFacts);
  ProofGraph g = fx.ground_query("predict(d1,Y)");

  EXPECT_EQ(g.node_count, 8);
  ASSERT_EQ(g.solutions.size(), 3u);  // one true node per label
  EXPECT_FALSE(g.truncated);

  // classify edges carry one feature per (word, label): two words here.
  int feature_edges = 0;
  for (const Edge& e : g.edges) {
    if (e.kind == EdgeKind::Rule && !e.features.empty() && e.src != ProofGraph::kRoot) {
      if (e.features.size() == 2) ++feature_edges;
    }
  }
  EXPECT_EQ(feature_edges, 3);

  std::set<std::string> answers;
  for (const Atom& a : g.answers()) answers.insert(to_string(a, fx.syms));
  EXPECT_EQ(answers, (std::set<std::string>{"predict(d1,sports)", "predict(d1,politics)",
                                            "predict(d1,tech)"}));
}

TEST(Grounder, GraphInvariants) {
  Fixture fx(kSupervised, kSupervisedFacts);
  ProofGraph g = fx.ground_query("predict(d1,Y)");

  // Every non-solution non-root node has exactly one reset edge to the root;
  // every solution node exactly one self-loop.
  std::vector<int> resets(static_cast<size_t>(g.node_count), 0);
  std::vector<int> loops(static_cast<size_t>(g.node_count), 0);
  for (const Edge& e : g.edges) {
    if (e.kind == EdgeKind::Reset) {
      EXPECT_EQ(e.dst, ProofGraph::kRoot);
      ++resets[static_cast<size_t>(e.src)];
    }
    if (e.kind == EdgeKind::Loop) {
      EXPECT_EQ(e.src, e.dst);
      ++loops[static_cast<size_t>(e.src)];
    }
    if (e.kind == EdgeKind::Rule) EXPECT_FALSE(g.is_solution(e.src));
  }
  for (int32_t v = 0; v < g.node_count; ++v) {
    bool sol = g.is_solution(v);
    EXPECT_EQ(loops[static_cast<size_t>(v)], sol ? 1 : 0);
    EXPECT_EQ(resets[static_cast<size_t>(v)], (sol || v == ProofGraph::kRoot) ? 0 : 1);
  }
}

TEST(Grounder, SingleSuccessRule) {
  Fixture fx("q(X) :- true.\n", "seed\tz\n");  // unrelated fact keeps the program non-empty
  ProofGraph g = fx.ground_query("q(c)");
  EXPECT_EQ(g.node_count, 2);
  ASSERT_EQ(g.solutions.size(), 1u);
  EXPECT_EQ(count_edges(g, EdgeKind::Rule), 1);
  EXPECT_EQ(count_edges(g, EdgeKind::Loop), 1);
  EXPECT_EQ(count_edges(g, EdgeKind::Reset), 0);
  EXPECT_EQ(to_string(g.solution_answer[0], fx.syms), "q(c)");
}

// Hand enumeration for the recursive similarity program over the citation
// cycle a->b->c->a with near facts in both orientations, depth limit 4:
// revisited subproblems merge, giving 9 states, 3 answers, 12 rule edges.
TEST(Grounder, RecursiveCycleMergesRevisitedStates) {
  Fixture fx(
      "sim1(X1,X2) :- near(X1,Z), sim1(Z,X2).\n"
      "sim1(X,X) :- true.\n",
      "near\ta\tb\nnear\tb\ta\nnear\tb\tc\nnear\tc\tb\nnear\tc\ta\nnear\ta\tc\n");
  GroundingLimits limits;
  limits.max_depth = 4;
  ProofGraph g = fx.ground_query("sim1(a,W)", limits);

  EXPECT_EQ(g.node_count, 9);
  EXPECT_EQ(g.solutions.size(), 3u);
  EXPECT_EQ(count_edges(g, EdgeKind::Rule), 12);
  EXPECT_EQ(count_edges(g, EdgeKind::Loop), 3);
  EXPECT_EQ(count_edges(g, EdgeKind::Reset), 5);
  EXPECT_FALSE(g.truncated);

  std::set<std::string> answers;
  for (const Atom& a : g.answers()) answers.insert(to_string(a, fx.syms));
  EXPECT_EQ(answers,
            (std::set<std::string>{"sim1(a,a)", "sim1(a,b)", "sim1(a,c)"}));

  // A back edge to the root witnesses the merge of the revisited subproblem.
  bool back_edge = false;
  for (const Edge& e : g.edges)
    if (e.kind == EdgeKind::Rule && e.dst == ProofGraph::kRoot && e.src != ProofGraph::kRoot)
      back_edge = true;
  EXPECT_TRUE(back_edge);
}

TEST(Grounder, DepthLimitMonotonicity) {
  Fixture fx(
      "sim1(X1,X2) :- near(X1,Z), sim1(Z,X2).\n"
      "sim1(X,X) :- true.\n",
      "near\ta\tb\nnear\tb\ta\nnear\tb\tc\nnear\tc\tb\nnear\tc\ta\nnear\ta\tc\n");
  std::set<std::string> prev;
  for (int d = 1; d <= 6; ++d) {
    GroundingLimits limits;
    limits.max_depth = d;
    ProofGraph g = fx.ground_query("sim1(a,W)", limits);
    std::set<std::string> answers;
    for (const Atom& a : g.answers()) answers.insert(to_string(a, fx.syms));
    for (const std::string& a : prev) EXPECT_TRUE(answers.count(a)) << "depth " << d;
    prev = std::move(answers);
  }
}

// Canonical merging folds the six ordered-pair proofs of mutexFailure into
// shared downstream states: the six pair states exist, the answer maps to a
// single solution node, and the total walk mass per answer is unchanged by
// the merge, which is what the penalty loss consumes.
TEST(Grounder, MutexPenaltyGraphStructure) {
  Fixture fx(
      "mutexFailure(X) :- pickMutex(Y1,Y2), classify(X,Y1), classify(X,Y2).\n"
      "classify(X,Y) :- true { f(W,Y) : hasFeature(X,W) }.\n",
      "pickMutex\tsports\tpolitics\npickMutex\tpolitics\tsports\n"
      "pickMutex\tsports\ttech\npickMutex\ttech\tsports\n"
      "pickMutex\tpolitics\ttech\npickMutex\ttech\tpolitics\n"
      "hasFeature\tx\thope\nhasFeature\tx\tgame\n");
  ProofGraph g = fx.ground_query("mutexFailure(x)");

  // root -> conjunction -> 6 ordered-pair states -> 3 merged classify states
  // -> 1 merged solution.
  EXPECT_EQ(g.node_count, 12);
  int pair_fanout = 0;
  for (const Edge& e : g.edges)
    if (e.kind == EdgeKind::Rule && e.src == 1) ++pair_fanout;
  EXPECT_EQ(pair_fanout, 6);

  Atom answer = parse_query("mutexFailure(x)", fx.syms);
  EXPECT_EQ(g.answer_nodes(answer).size(), 1u);
  EXPECT_EQ(g.solutions.size(), 1u);
}

TEST(Grounder, AnswerNodesForUnknownLabelIsEmpty) {
  Fixture fx(kSupervised, kSupervisedFacts);
  ProofGraph g = fx.ground_query("predict(d1,Y)");
  Atom bogus = parse_query("predict(d1,unknownLabel)", fx.syms);
  EXPECT_TRUE(g.answer_nodes(bogus).empty());
}

TEST(Grounder, UnknownPredicate) {
  Fixture fx(kSupervised, kSupervisedFacts);
  EXPECT_THROW(fx.ground_query("nonsense(d1,Y)"), GroundingError);
}

TEST(Grounder, NodeBudgetTruncates) {
  Fixture fx(kSupervised, kSupervisedFacts);
  GroundingLimits limits;
  limits.max_nodes = 4;
  ProofGraph g = fx.ground_query("predict(d1,Y)", limits);
  EXPECT_TRUE(g.truncated);
  EXPECT_LE(g.node_count, 4);
}

TEST(Grounder, DeterministicConstruction) {
  Fixture fx(kSupervised, kSupervisedFacts);
  ProofGraph g1 = fx.ground_query("predict(d1,Y)");
  ProofGraph g2 = fx.ground_query("predict(d1,Y)");
  ASSERT_EQ(g1.edges.size(), g2.edges.size());
  for (size_t i = 0; i < g1.edges.size(); ++i) {
    EXPECT_EQ(g1.edges[i].src, g2.edges[i].src);
    EXPECT_EQ(g1.edges[i].dst, g2.edges[i].dst);
    EXPECT_EQ(g1.edges[i].kind, g2.edges[i].kind);
    EXPECT_EQ(g1.edges[i].features, g2.edges[i].features);
  }
}

TEST(Grounder, DumpFormat) {
  Fixture fx(kSupervised, kSupervisedFacts);
  GroundingLimits limits;
  limits.keep_node_text = true;
  ProofGraph g = fx.ground_query("predict(d1,Y)", limits);
  std::ostringstream os;
  write_graph_tsv(os, g, fx.feats);
  std::string dump = os.str();
  EXPECT_NE(dump.find("truncated=false"), std::string::npos);
  EXPECT_NE(dump.find("node\t0\troot"), std::string::npos);
  EXPECT_NE(dump.find("RESET"), std::string::npos);
  EXPECT_NE(dump.find("LOOP"), std::string::npos);

  auto feats = split_feature_list("f(hope,sports),f(game,sports)");
  ASSERT_EQ(feats.size(), 2u);
  EXPECT_EQ(feats[0], "f(hope,sports)");
  EXPECT_EQ(feats[1], "f(game,sports)");
}

// Feature conditions that bind through the rule head: the citation-view
// classifier template g(Cited,Y): cites(X,Cited).
TEST(Grounder, ConditionDrivenFeatures) {
  Fixture fx(
      "classifyC(X,Y) :- true { g(Cited,Y) : cites(X,Cited) }.\n",
      "cites\tp1\tp2\ncites\tp1\tp3\ncites\tp9\tp1\n");
  ProofGraph g = fx.ground_query("classifyC(p1,lab)");
  ASSERT_EQ(g.solutions.size(), 1u);
  ASSERT_EQ(g.edges.size(), 2u);  // rule edge + loop
  const Edge& e = g.edges[0];
  ASSERT_EQ(e.features.size(), 2u);
  std::set<std::string> names;
  for (FeatId f : e.features) names.insert(fx.feats.name(f));
  EXPECT_EQ(names, (std::set<std::string>{"g(p2,lab)", "g(p3,lab)"}));
}

// A template whose conditions match no facts grounds zero features; the rule
// edge then behaves as unannotated weight one. Seen for documents that have
// no recorded words.
TEST(Grounder, EmptyConditionSolutionsGiveUnannotatedEdge) {
  Fixture fx("classify(X,Y) :- true { f(W,Y) : hasFeature(X,W) }.\n",
             "hasFeature\tother\tword\n");
  ProofGraph g = fx.ground_query("classify(lonely,lab)");
  ASSERT_EQ(g.solutions.size(), 1u);
  EXPECT_TRUE(g.edges[0].features.empty());
}

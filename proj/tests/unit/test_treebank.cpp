#include <numeric>

#include <gtest/gtest.h>

#include "../oracles/oracles.hpp"
#include "helpers.hpp"
#include "synenc/treebank.hpp"

using namespace synenc;
using namespace synenc::treebank;
using testing_util::conllu_line;

TEST(Bracketed, ParsesTwoWordSentence) {
  const auto t = parse_bracketed(testing_util::kBeganTree);
  EXPECT_EQ(t.token_count(), 2u);
  EXPECT_EQ(t.word(0), "I");
  EXPECT_EQ(t.word(1), "began");
  EXPECT_EQ(t.tag(0), "PRP");
  EXPECT_EQ(t.tag(1), "VBD");
  EXPECT_EQ(t.node(t.root()).label, "S");
  EXPECT_EQ(t.node(t.root()).begin, 0u);
  EXPECT_EQ(t.node(t.root()).end, 2u);
  EXPECT_EQ(tree_height(t, t.root()), 3u);
  EXPECT_EQ(t.internal_node_count(), 5u);
}

TEST(Bracketed, HeightOfMinimalTreesAndLeaves) {
  const auto t = parse_bracketed("(X (A a))");
  EXPECT_EQ(tree_height(t, t.root()), 2u);
  EXPECT_EQ(tree_height(t, t.leaf(0)), 0u);
}

TEST(Bracketed, StripsFunctionTagsButKeepsBracketLabels) {
  const auto t = parse_bracketed("(S (NP-SBJ=2 (-NONE- *)) (VP (-LRB- -LRB-) (VBD ran)))");
  EXPECT_EQ(t.node(t.node(t.root()).children[0]).label, "NP");
  EXPECT_EQ(t.tag(0), "-NONE-");
  EXPECT_EQ(t.tag(1), "-LRB-");
}

TEST(Bracketed, UnwrapsUnlabeledOuterBracket) {
  const auto a = parse_bracketed("( (S (NP (PRP I)) (VP (VBD began))) )");
  const auto b = parse_bracketed(testing_util::kBeganTree);
  EXPECT_EQ(a, b);
}

TEST(Bracketed, UnbalancedParensReportsOffset) {
  EXPECT_ERROR(parse_bracketed("(S (NP"), UnbalancedParens);
  EXPECT_ERROR(parse_bracketed("(S (NP (PRP I))))"), UnbalancedParens);
  try {
    parse_bracketed("(S (NP");
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("byte"), std::string::npos) << e.what();
  }
}

TEST(Bracketed, RejectsEmptyAndTokenlessTrees) {
  EXPECT_THROW(parse_bracketed("(S ())"), Error);
  EXPECT_THROW(parse_bracketed(""), Error);
  EXPECT_THROW(parse_bracketed("(S)"), Error);
}

TEST(Bracketed, TreeFileHasOneTreePerLine) {
  const auto trees = parse_tree_file(std::string(testing_util::kBeganTree) + "\n\n(X (A a))\n");
  ASSERT_EQ(trees.size(), 2u);
  EXPECT_EQ(trees[1].token_count(), 1u);
}

// Random trees: printing and re-parsing is the identity, spans are the union
// of the children's spans and every token has exactly one leaf.
TEST(BracketedProperty, RoundTripAndSpans) {
  Rng rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    const auto text = oracle::random_tree(rng, 12, 6);
    const auto t = parse_bracketed(text);
    EXPECT_EQ(parse_bracketed(t.to_bracketed()), t) << text;
    for (std::size_t k = 0; k < t.token_count(); ++k) {
      const auto& leaf = t.node(t.leaf(k));
      EXPECT_TRUE(leaf.is_leaf());
      EXPECT_EQ(leaf.begin, k);
      EXPECT_EQ(leaf.end, k + 1);
      EXPECT_TRUE(t.is_preterminal(*leaf.parent));
    }
    for (NodeId id = 0; id < t.node_count(); ++id) {
      const auto& n = t.node(id);
      if (n.is_leaf()) continue;
      EXPECT_EQ(n.begin, t.node(n.children.front()).begin);
      EXPECT_EQ(n.end, t.node(n.children.back()).end);
      for (std::size_t c = 1; c < n.children.size(); ++c) {
        EXPECT_EQ(t.node(n.children[c - 1]).end, t.node(n.children[c]).begin);
      }
      EXPECT_EQ(n.height, tree_height(t, id));
      if (n.parent) EXPECT_EQ(n.depth, t.node(*n.parent).depth + 1);
    }
  }
}

TEST(BracketedProperty, SubtreeIsReindexedCopy) {
  Rng rng(12);
  for (int trial = 0; trial < 100; ++trial) {
    const auto t = parse_bracketed(oracle::random_tree(rng, 10, 5));
    for (NodeId id = 0; id < t.node_count(); ++id) {
      if (t.node(id).is_leaf()) continue;
      const auto s = t.subtree(id);
      EXPECT_EQ(s.to_bracketed(), t.to_bracketed(id));
      EXPECT_EQ(s.token_count(), t.node(id).end - t.node(id).begin);
    }
  }
}

namespace {

std::string began_conllu() {
  return "# text = I began\n" + conllu_line(1, "I", "PRON", "PRP", 2, "nsubj") +
         conllu_line(2, "began", "VERB", "VBD", 0, "root") + "\n";
}

}  // namespace

TEST(Conllu, ParsesGraph) {
  const auto graphs = parse_conllu(began_conllu());
  ASSERT_EQ(graphs.size(), 1u);
  const auto& g = graphs[0];
  EXPECT_EQ(g.size(), 2u);
  EXPECT_EQ(g.root(), 1u);
  EXPECT_EQ(g.head_of(0), std::optional<std::size_t>(1));
  EXPECT_EQ(g.relation_of(0), "nsubj");
  EXPECT_FALSE(g.head_of(1).has_value());
  EXPECT_EQ(g.nodes()[1].xpos, "VBD");
}

TEST(Conllu, SkipsMultiwordAndEmptyNodes) {
  const std::string text = "1-2\tdon't\t_\t_\t_\t_\t_\t_\t_\t_\n" + conllu_line(1, "do", "AUX", "VBP", 0, "root") +
                           conllu_line(2, "n't", "PART", "RB", 1, "advmod") +
                           "2.1\tx\tx\tX\tX\t_\t_\t_\t_\t_\n\n";
  const auto graphs = parse_conllu(text);
  ASSERT_EQ(graphs.size(), 1u);
  EXPECT_EQ(graphs[0].size(), 2u);
}

TEST(Conllu, Errors) {
  EXPECT_ERROR(parse_conllu(conllu_line(1, "I", "PRON", "PRP", 5, "nsubj") +
                            conllu_line(2, "began", "VERB", "VBD", 0, "root") + "\n"),
               DanglingHead);
  EXPECT_ERROR(parse_conllu(conllu_line(1, "a", "X", "X", 2, "dep") + conllu_line(2, "b", "X", "X", 1, "dep") +
                            conllu_line(3, "c", "X", "X", 0, "root") + "\n"),
               CycleDetected);
  EXPECT_ERROR(parse_conllu(conllu_line(1, "a", "X", "X", 0, "root") + conllu_line(2, "b", "X", "X", 0, "root") + "\n"),
               MultipleRoots);
  EXPECT_ERROR(parse_conllu("1\tI\tI\n\n"), MalformedConllu);
}

namespace {

std::size_t find_root(std::vector<std::size_t>& parent, std::size_t x) {
  while (parent[x] != x) x = parent[x] = parent[parent[x]];
  return x;
}

}  // namespace

// Random head assignments that form a tree: the parsed graph is connected
// (union-find over its edges) and has n - 1 non-root edges.
TEST(ConlluProperty, RandomTreesAreConnected) {
  Rng rng(13);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.uniform_index(12);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order.begin(), order.end());
    std::vector<int> head(n, 0);
    for (std::size_t i = 1; i < n; ++i) head[order[i]] = static_cast<int>(order[rng.uniform_index(i)]) + 1;
    std::string text;
    for (std::size_t i = 0; i < n; ++i) {
      text += conllu_line(static_cast<int>(i + 1), "w" + std::to_string(i), "X", "X", head[i],
                          head[i] == 0 ? "root" : "dep");
    }
    const auto g = parse_conllu(text + "\n").at(0);
    ASSERT_EQ(g.size(), n);
    EXPECT_EQ(g.root(), order[0]);
    std::vector<std::size_t> uf(n);
    std::iota(uf.begin(), uf.end(), 0);
    std::size_t edges = 0;
    for (std::size_t i = 0; i < n; ++i) {
      EXPECT_EQ(g.edges()[i].dependent, i);
      if (auto h = g.head_of(i)) {
        ++edges;
        uf[find_root(uf, i)] = find_root(uf, *h);
      }
    }
    EXPECT_EQ(edges, n - 1);
    for (std::size_t i = 0; i < n; ++i) EXPECT_EQ(find_root(uf, i), find_root(uf, 0));
  }
}

TEST(Punctuation, TextAndTags) {
  EXPECT_TRUE(is_punctuation_text("."));
  EXPECT_TRUE(is_punctuation_text("..."));
  EXPECT_TRUE(is_punctuation_text("\xE2\x80\x94"));  // em dash
  EXPECT_FALSE(is_punctuation_text("a."));
  EXPECT_FALSE(is_punctuation_text(""));
  EXPECT_TRUE(is_punctuation_tag(","));
  EXPECT_TRUE(is_punctuation_tag("-LRB-"));
  EXPECT_FALSE(is_punctuation_tag("NN"));
  EXPECT_EQ(unescape_ptb("-LRB-"), "(");
  EXPECT_EQ(unescape_ptb("-RCB-"), "}");
  EXPECT_EQ(unescape_ptb("dog"), "dog");
}

TEST(Corpus, BuildsSentencesFromTreesAndGraphs) {
  const auto c = testing_util::fixture_corpus(false);
  EXPECT_EQ(c.sentences().size(), 2u);
  EXPECT_EQ(c.token_count(), 9u);
  EXPECT_EQ(c.sentence_offset(1), 3u);
  EXPECT_TRUE(c.has_graphs());
  EXPECT_FALSE(c.has_timing());
  const auto toks = c.tokens();
  EXPECT_TRUE(toks[2]->is_punct);
  EXPECT_FALSE(toks[1]->is_punct);
  EXPECT_EQ(toks[4]->surface, "story");
}

TEST(Corpus, CountAndSurfaceMismatch) {
  const auto trees = parse_tree_file(testing_util::kBeganTree);
  EXPECT_ERROR(StimulusCorpus::build(trees, parse_conllu(conllu_line(1, "I", "PRON", "PRP", 0, "root") + "\n")),
               CountMismatch);
  EXPECT_ERROR(StimulusCorpus::build(trees, parse_conllu(conllu_line(1, "I", "PRON", "PRP", 2, "nsubj") +
                                                         conllu_line(2, "ran", "VERB", "VBD", 0, "root") + "\n")),
               SurfaceMismatch);
  try {
    StimulusCorpus::build(trees, parse_conllu(conllu_line(1, "I", "PRON", "PRP", 2, "nsubj") +
                                              conllu_line(2, "ran", "VERB", "VBD", 0, "root") + "\n"));
  } catch (const Error& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("ran"), std::string::npos);
    EXPECT_NE(msg.find("began"), std::string::npos);
  }
}

TEST(Timing, AttachesOnsets) {
  const auto c = testing_util::fixture_corpus();
  EXPECT_TRUE(c.has_timing());
  const auto toks = c.tokens();
  EXPECT_DOUBLE_EQ(toks[1]->onset_sec, 0.8);
  EXPECT_DOUBLE_EQ(toks[8]->offset_sec, 3.9);
  EXPECT_GE(c.run_duration_sec(), 3.9);
}

TEST(Timing, Errors) {
  const auto corpus = StimulusCorpus::build(parse_tree_file(testing_util::kBeganTree));
  EXPECT_ERROR(corpus.with_timing("I\t0\t0.2\t0\t0\nbegan\t0.3\t0.5\t0\t1\nextra\t0.6\t0.7\t0\t2\n"), CountMismatch);
  EXPECT_ERROR(corpus.with_timing("I\t0\t0.2\t0\t0\nran\t0.3\t0.5\t0\t1\n"), SurfaceMismatch);
  EXPECT_ERROR(corpus.with_timing("I\t1.0\t1.2\t0\t0\nbegan\t0.3\t0.5\t0\t1\n"), NonMonotonicTiming);
  EXPECT_ERROR(corpus.with_timing("I\t0\t0.2\t0\nbegan\t0.3\t0.5\t0\n"), MalformedTiming);
}

TEST(Timing, SmallJitterIsNormalized) {
  const auto corpus = StimulusCorpus::build(parse_tree_file(testing_util::kBeganTree));
  const auto c = corpus.with_timing("I\t0.3004\t0.5\t0\t0\nbegan\t0.3\t0.6\t0\t1\n");
  const auto toks = c.tokens();
  EXPECT_LE(toks[0]->onset_sec, toks[1]->onset_sec);
}

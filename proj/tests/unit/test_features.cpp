#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "../oracles/oracles.hpp"
#include "helpers.hpp"
#include "synenc/syntax_features.hpp"

using namespace synenc;
using namespace synenc::features;
using treebank::parse_bracketed;

namespace {

std::vector<std::string> sorted(std::vector<std::string> v) {
  std::sort(v.begin(), v.end());
  return v;
}

// True iff every element of a (with multiplicity) occurs in b.
bool is_submultiset(std::vector<std::string> a, std::vector<std::string> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  return std::includes(b.begin(), b.end(), a.begin(), a.end());
}

Eigen::Index onehot_index(const Matrix& m, Eigen::Index row) {
  Eigen::Index idx = -1;
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    if (m(row, c) != 0.0) {
      if (idx >= 0) return -2;
      idx = c;
    }
  }
  return idx;
}

}  // namespace

TEST(CompleteSubtree, Examples) {
  const auto t = parse_bracketed(testing_util::kBeganTree);
  const auto np = complete_subtree(t, 0);
  EXPECT_EQ(t.node(np).label, "NP");
  EXPECT_EQ(t.node(np).begin, 0u);
  EXPECT_EQ(t.node(np).end, 1u);
  EXPECT_EQ(tree_height(t, np), 2u);
  EXPECT_EQ(complete_subtree(t, 1), t.root());
  const auto single = parse_bracketed("(X (A a))");
  EXPECT_EQ(complete_subtree(single, 0), single.root());
}

TEST(CompleteSubtree, UnaryChainTieGoesToRoot) {
  const auto t = parse_bracketed("(S (VP (VB go)))");
  EXPECT_EQ(complete_subtree(t, 0), t.root());
}

TEST(CompleteSubtreeProperty, MatchesEnumerationOracle) {
  Rng rng(21);
  for (int trial = 0; trial < 300; ++trial) {
    const auto text = oracle::random_tree(rng, 12, 6);
    const auto t = parse_bracketed(text);
    for (std::size_t k = 0; k < t.token_count(); ++k) {
      const auto id = complete_subtree(t, k);
      EXPECT_EQ(id, oracle::complete_subtree(t, k)) << text << " k=" << k;
      EXPECT_EQ(sorted(subtree_productions(t, id)), oracle::subtree_productions(t, id)) << text;
    }
  }
}

TEST(IncompleteSubtree, TwoWordExample) {
  const auto t = parse_bracketed(testing_util::kBeganTree);
  const auto p = incomplete_subtree(t, 0);
  EXPECT_EQ(p.open_count(), 1u);
  EXPECT_EQ(sorted(p.productions()), (std::vector<std::string>{"NP -> PRP", "PRP -> *", "S -> NP VP"}));
  EXPECT_EQ(sorted(p.encoded_productions()),
            (std::vector<std::string>{"NP -> PRP", "PRP -> *", "S -> NP VP", "VP -> ?"}));
}

TEST(IncompleteSubtree, FullPrefixHasNoOpenNodes) {
  const auto t = parse_bracketed(testing_util::kBeganTree);
  const auto p = incomplete_subtree(t, 1);
  EXPECT_EQ(p.open_count(), 0u);
  EXPECT_EQ(sorted(p.productions()), sorted(subtree_productions(t, t.root())));
}

TEST(IncompleteSubtree, LeftSpineWithThreeOpenNodes) {
  const auto t = parse_bracketed("(S (A (B (C a) (D b)) (E c)) (F d))");
  const auto p = incomplete_subtree(t, 0);
  EXPECT_EQ(p.open_count(), 3u);
  std::size_t spine = 0;
  for (const auto& n : p.nodes) spine += (!n.open && !n.leaf) ? 1 : 0;
  EXPECT_EQ(spine, 4u);
  EXPECT_EQ(sorted(p.productions()),
            (std::vector<std::string>{"A -> B E", "B -> C D", "C -> *", "S -> A F"}));
}

TEST(IncompleteSubtreeProperty, MatchesOracleAndNests) {
  Rng rng(22);
  for (int trial = 0; trial < 300; ++trial) {
    const auto text = oracle::random_tree(rng, 12, 6);
    const auto t = parse_bracketed(text);
    std::vector<std::string> previous;
    for (std::size_t k = 0; k < t.token_count(); ++k) {
      const auto p = incomplete_subtree(t, k);
      EXPECT_EQ(sorted(p.productions()), oracle::incomplete_productions(t, k, false)) << text << " k=" << k;
      EXPECT_EQ(sorted(p.encoded_productions()), oracle::incomplete_productions(t, k, true)) << text << " k=" << k;
      EXPECT_EQ(p.open_count(), oracle::open_count(t, k));
      const auto current = p.productions();
      EXPECT_TRUE(is_submultiset(previous, current)) << text << " k=" << k;
      previous = current;
    }
    EXPECT_EQ(sorted(previous), sorted(subtree_productions(t, t.root())));
  }
}

TEST(Encoding, EmptyAndDeterministic) {
  SubtreeEncodingConfig cfg;
  cfg.dim = 16;
  EXPECT_EQ(encode_subtree(PartialTree{}, cfg).squaredNorm(), 0.0);
  const auto t = parse_bracketed(testing_util::kBeganTree);
  EXPECT_EQ(encode_subtree(t, t.root(), cfg), encode_subtree(parse_bracketed(testing_util::kBeganTree), 0, cfg));
  cfg.mode = SubtreeEncodingConfig::Mode::SeededRandomProjection;
  cfg.seed = 5;
  const auto a = encode_subtree(t, t.root(), cfg);
  EXPECT_EQ(a, encode_subtree(t, t.root(), cfg));
  EXPECT_GT(a.norm(), 0.0);
}

TEST(Encoding, ThreeProductionsHaveL1Three) {
  SubtreeEncodingConfig cfg;
  cfg.dim = 8;
  cfg.seed = 3;
  const auto t = parse_bracketed("(NP (DT the) (NN dog))");
  ASSERT_EQ(sorted(subtree_productions(t, t.root())).size(), 3u);
  EXPECT_DOUBLE_EQ(encode_subtree(t, t.root(), cfg).lpNorm<1>(), 3.0);
}

TEST(Encoding, HashedBucketIsHashModDim) {
  SubtreeEncodingConfig cfg;
  cfg.dim = 50;
  const auto v = encode_productions({"S -> NP VP"}, cfg);
  EXPECT_EQ(v[static_cast<Eigen::Index>(hash64("S -> NP VP") % 50)], 1.0);
}

TEST(EncodingProperty, L1EqualsProductionCount) {
  Rng rng(23);
  SubtreeEncodingConfig cfg;
  cfg.dim = 7;
  for (int trial = 0; trial < 200; ++trial) {
    const auto t = parse_bracketed(oracle::random_tree(rng, 12, 6));
    for (std::size_t k = 0; k < t.token_count(); ++k) {
      const auto p = incomplete_subtree(t, k);
      EXPECT_DOUBLE_EQ(encode_subtree(p, cfg).lpNorm<1>(), static_cast<double>(p.encoded_productions().size()));
      const auto id = complete_subtree(t, k);
      EXPECT_DOUBLE_EQ(encode_subtree(t, id, cfg).lpNorm<1>(),
                       static_cast<double>(subtree_productions(t, id).size()));
    }
  }
}

TEST(Encoding, ConfigValidation) {
  SubtreeEncodingConfig cfg;
  cfg.dim = 0;
  EXPECT_ERROR(cfg.validate(), InvalidArgument);
}

TEST(CcCi, FeatureMatricesHaveOneRowPerToken) {
  const auto c = testing_util::fixture_corpus(false);
  SubtreeEncodingConfig cfg;
  cfg.dim = 32;
  const auto cc = cc_features(c, cfg);
  const auto ci = ci_features(c, cfg);
  EXPECT_EQ(cc.rows(), 9);
  EXPECT_EQ(ci.dim(), 32);
  EXPECT_EQ(cc.space, FeatureSpace::CC);
  EXPECT_EQ(ci.space, FeatureSpace::CI);
  EXPECT_EQ(cc.values, cc_features(c, cfg).values);
  for (Eigen::Index r = 0; r < cc.rows(); ++r) EXPECT_GT(cc.values.row(r).lpNorm<1>(), 0.0);
}

TEST(Punctuation, AttachesToPrecedingWord) {
  const auto c = testing_util::fixture_corpus(false);
  const auto pu = punctuation_features(c);
  ASSERT_EQ(pu.dim(), 12);
  EXPECT_EQ(onehot_index(pu.values, 0), -1);  // I
  EXPECT_EQ(onehot_index(pu.values, 1), 0);   // began .
  EXPECT_EQ(onehot_index(pu.values, 2), 0);   // .
  EXPECT_EQ(onehot_index(pu.values, 4), -1);  // story
  EXPECT_EQ(onehot_index(pu.values, 5), 1);   // ended ,
  EXPECT_EQ(onehot_index(pu.values, 6), 1);   // ,
  const auto self = punctuation_features(c, PunctuationAttachment::SelfOnly);
  EXPECT_EQ(onehot_index(self.values, 1), -1);
  EXPECT_EQ(onehot_index(self.values, 2), 0);
}

TEST(Punctuation, ClassOrder) {
  const std::vector<std::string> marks = {".", ",", ";", ":", "!", "?", "\"", "'", "--", "(", ")", "#"};
  for (std::size_t i = 0; i < marks.size(); ++i) {
    treebank::Token tok;
    tok.surface = marks[i];
    tok.is_punct = true;
    EXPECT_EQ(punctuation_class(tok), std::optional<std::size_t>(i)) << marks[i];
  }
  treebank::Token word;
  word.surface = "dog";
  EXPECT_FALSE(punctuation_class(word).has_value());
}

TEST(NodeCount, Example) {
  const auto nc = node_counts(parse_bracketed(testing_util::kBeganTree));
  EXPECT_EQ(nc, (std::vector<std::size_t>{2, 3}));
}

TEST(NodeCountProperty, SumsToInternalNodeCount) {
  Rng rng(24);
  for (int trial = 0; trial < 300; ++trial) {
    const auto t = parse_bracketed(oracle::random_tree(rng, 12, 6));
    const auto nc = node_counts(t);
    std::size_t sum = 0;
    for (auto v : nc) sum += v;
    EXPECT_EQ(sum, t.internal_node_count());
  }
}

TEST(Complexity, Columns) {
  const auto c = testing_util::fixture_corpus(false);
  const auto freq = FrequencyTable::parse(testing_util::two_sentences().frequency);
  const auto cm = complexity_metrics(c, freq);
  ASSERT_EQ(cm.dim(), 3);
  EXPECT_EQ(cm.values(0, 0), 2.0);
  EXPECT_EQ(cm.values(1, 1), 5.0);
  EXPECT_NEAR(cm.values(0, 2), std::log10(5e6), 1e-12);
  // "." is not in the table: 1 per billion.
  EXPECT_EQ(cm.values(2, 2), 0.0);
  EXPECT_EQ(cm.meta["missing_frequency_words"], 2);
}

TEST(Complexity, WordLengthCountsCodePointsAndFrequencyIsLog10) {
  const auto corpus = treebank::StimulusCorpus::build(treebank::parse_tree_file("(S (NN caf\xC3\xA9) (NN word))"));
  FrequencyTable freq;
  freq.set("word", 1000);
  const auto before = log::warning_count();
  const auto cm = complexity_metrics(corpus, freq);
  EXPECT_EQ(cm.values(0, 1), 4.0);
  EXPECT_DOUBLE_EQ(cm.values(1, 2), 3.0);
  EXPECT_EQ(cm.values(0, 2), 0.0);
  EXPECT_GT(log::warning_count(), before);
}

TEST(Frequency, RejectsNonPositive) {
  EXPECT_ERROR(FrequencyTable::parse("dog\t0\n"), InvalidArgument);
  EXPECT_EQ(FrequencyTable::parse("Dog\t3\n").lookup("DOG"), std::optional<double>(3.0));
}

TEST(PosDep, OneHotSegments) {
  const auto c = testing_util::fixture_corpus(false);
  const auto pd = pos_dep_features(c);
  const auto n_pos = pd.meta["config"]["pos_alphabet"].size();
  const auto n_rel = pd.meta["config"]["relation_alphabet"].size();
  EXPECT_EQ(static_cast<std::size_t>(pd.dim()), n_pos + n_rel);
  for (Eigen::Index r = 0; r < pd.rows(); ++r) {
    EXPECT_EQ(pd.values.row(r).sum(), 2.0);
    EXPECT_EQ(pd.values.row(r).head(static_cast<Eigen::Index>(n_pos)).sum(), 1.0);
  }
  // Both "." tokens are (., punct).
  EXPECT_EQ(pd.values.row(2), pd.values.row(8));
  EXPECT_TRUE(std::is_sorted(pd.meta["config"]["pos_alphabet"].begin(), pd.meta["config"]["pos_alphabet"].end()));
}

TEST(PosDep, NeedsGraphs) {
  const auto c = treebank::StimulusCorpus::build(treebank::parse_tree_file(testing_util::kBeganTree));
  EXPECT_ERROR(pos_dep_features(c), InvalidArgument);
}

TEST(Pca, MatchesCovarianceEigenOracle) {
  Rng rng(25);
  FeatureMatrix x;
  x.values = Matrix(10, 4);
  for (Eigen::Index i = 0; i < x.values.size(); ++i) x.values.data()[i] = rng.normal();
  const auto r = pca_reduce(x, 4);
  ASSERT_EQ(r.scores.dim(), 4);
  const auto expected = oracle::pca_scores(x.values, 4);
  for (Eigen::Index c = 0; c < 4; ++c) {
    const double sign = r.scores.values.col(c).dot(expected.col(c)) < 0 ? -1.0 : 1.0;
    EXPECT_LT((r.scores.values.col(c) - sign * expected.col(c)).cwiseAbs().maxCoeff(), 1e-6) << c;
  }
  EXPECT_LT((r.components.transpose() * r.components - Matrix::Identity(4, 4)).cwiseAbs().maxCoeff(), 1e-8);
  for (Eigen::Index c = 1; c < 4; ++c) EXPECT_GE(r.explained_variance[c - 1], r.explained_variance[c]);
}

TEST(Pca, RankTwoInputReconstructsExactly) {
  Rng rng(26);
  Matrix a(30, 2), b(2, 6);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = rng.normal();
  for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = rng.normal();
  FeatureMatrix x;
  x.values = a * b;
  x.values.rowwise() += Eigen::RowVectorXd::LinSpaced(6, 1.0, 6.0);
  const auto r = pca_reduce(x, 250);
  EXPECT_EQ(r.scores.dim(), 2);
  EXPECT_EQ(r.scores.meta["actual_dim"], 2);
  const Matrix rebuilt = (r.scores.values * r.components.transpose()).rowwise() + r.mean.transpose();
  EXPECT_LT((rebuilt - x.values).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Pca, ZeroVarianceIsDegenerate) {
  FeatureMatrix x;
  x.values = Matrix::Ones(5, 3);
  EXPECT_ERROR(pca_reduce(x, 2), DegenerateInput);
}

TEST(Spaces, NamesRoundTrip) {
  for (auto s : {FeatureSpace::PU, FeatureSpace::CM, FeatureSpace::PD, FeatureSpace::CC, FeatureSpace::CI,
                 FeatureSpace::INC, FeatureSpace::DEP, FeatureSpace::SEM}) {
    EXPECT_EQ(parse_space(to_string(s)), std::optional<FeatureSpace>(s));
  }
  EXPECT_FALSE(parse_space("XYZ").has_value());
}

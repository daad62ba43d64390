#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "../oracles/oracles.hpp"
#include "helpers.hpp"
#include "synenc/incparser.hpp"

using namespace synenc;
using namespace synenc::incparser;
using treebank::parse_tree_file;

namespace {

double rule_prob(const Pcfg& g, const std::string& lhs, const std::vector<std::string>& rhs) {
  for (const auto& r : g.rules()) {
    if (g.symbol(r.lhs).name != lhs || r.rhs.size() != rhs.size()) continue;
    bool same = true;
    for (std::size_t i = 0; i < rhs.size(); ++i) same = same && g.symbol(r.rhs[i]).name == rhs[i];
    if (same) return r.prob;
  }
  return -1.0;
}

Pcfg tiny() { return Pcfg::from_rules("S", {{"S", {"A", "B"}, 1.0}, {"A", {"a"}, 1.0}, {"B", {"b"}, 1.0}}); }

// Ambiguous, right-recursive grammar over {a, b}.
Pcfg ambiguous() {
  return Pcfg::from_rules("S", {{"S", {"X", "Y"}, 0.5},
                                {"S", {"X", "Z"}, 0.5},
                                {"X", {"a", "X"}, 0.3},
                                {"X", {"a"}, 0.7},
                                {"Y", {"b"}, 1.0},
                                {"Z", {"b"}, 0.4},
                                {"Z", {"b", "Y"}, 0.6}});
}

using Key = std::pair<std::vector<SymbolId>, std::vector<std::uint32_t>>;

std::vector<Key> keys(const std::vector<oracle::Derivation>& ds) {
  std::vector<Key> out;
  for (const auto& d : ds) out.emplace_back(d.stack, d.applied);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<Key> keys(const Beam& b) {
  std::vector<Key> out;
  for (const auto& d : b.derivations) out.emplace_back(d.stack, d.applied);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

TEST(Induce, SingleTreeGivesProbabilityOne) {
  const auto g = induce_pcfg(parse_tree_file(testing_util::kBeganTree));
  EXPECT_DOUBLE_EQ(rule_prob(g, "S", {"NP", "VP"}), 1.0);
  EXPECT_EQ(g.symbol(g.start()).name, "S");
}

TEST(Induce, RelativeFrequencyAndAddK) {
  const auto even = induce_pcfg(parse_tree_file("(S (A x))\n(S (B y))\n"));
  EXPECT_DOUBLE_EQ(rule_prob(even, "S", {"A"}), 0.5);
  EXPECT_DOUBLE_EQ(rule_prob(even, "S", {"B"}), 0.5);
  InduceConfig cfg;
  cfg.add_k = 1.0;
  const auto smoothed = induce_pcfg(parse_tree_file("(S (A x))\n(S (A x))\n(S (B y))\n"), cfg);
  EXPECT_DOUBLE_EQ(rule_prob(smoothed, "S", {"A"}), 3.0 / 5.0);
  EXPECT_DOUBLE_EQ(rule_prob(smoothed, "S", {"B"}), 2.0 / 5.0);
}

TEST(Induce, MixedRootsGetSyntheticStart) {
  const auto g = induce_pcfg(parse_tree_file("(S (A x))\n(FRAG (B y))\n"));
  EXPECT_EQ(g.symbol(g.start()).name, "<TOP>");
  EXPECT_DOUBLE_EQ(rule_prob(g, "<TOP>", {"S"}), 0.5);
}

TEST(Induce, UnknownWordRulesAndEmptyTreebank) {
  const auto g = induce_pcfg(parse_tree_file("(S (A x) (A x) (B y))\n"));
  EXPECT_GT(rule_prob(g, "B", {std::string(kUnknownWord)}), 0.0);
  EXPECT_EQ(g.terminal_for("never-seen"), g.find(kUnknownWord, true));
  EXPECT_ERROR(induce_pcfg({}), EmptyTreebank);
}

TEST(InduceProperty, RulesNormalizePerLhs) {
  Rng rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<treebank::ConstituencyTree> trees;
    for (int i = 0; i < 5; ++i) trees.push_back(treebank::parse_bracketed(oracle::random_tree(rng, 8, 5)));
    InduceConfig cfg;
    cfg.add_k = rng.uniform();
    const auto g = induce_pcfg(trees, cfg);
    for (SymbolId s = 0; s < g.symbol_count(); ++s) {
      if (g.symbol(s).terminal || g.rules_for(s).empty()) continue;
      double total = 0.0;
      for (auto r : g.rules_for(s)) total += g.rule(r).prob;
      EXPECT_NEAR(total, 1.0, 1e-9);
    }
  }
}

TEST(Grammar, TextRoundTrip) {
  const auto g = ambiguous();
  const auto back = Pcfg::from_text(g.to_text());
  EXPECT_EQ(back.to_text(), g.to_text());
  EXPECT_EQ(back.rules().size(), g.rules().size());
}

TEST(Grammar, RejectsUnnormalizedRules) {
  EXPECT_ERROR(Pcfg::from_rules("S", {{"S", {"a"}, 0.5}}), InvalidGrammar);
  EXPECT_ERROR(Pcfg::from_rules("S", {{"S", {"a"}, 1.5}, {"S", {"b"}, -0.5}}), InvalidGrammar);
  EXPECT_ERROR(Pcfg::from_text("S\ta\tnope\n"), InvalidGrammar);
}

TEST(Grammar, LeftCornerTable) {
  const auto g = ambiguous();
  const auto s = *g.find("S", false);
  EXPECT_TRUE(g.can_start(s, *g.find("a", true)));
  EXPECT_FALSE(g.can_start(s, *g.find("b", true)));
}

TEST(Beam, TinyGrammarScan) {
  const auto g = tiny();
  const auto b = beam_advance(Beam::initial(g), "a", g);
  ASSERT_EQ(b.size(), 1u);
  EXPECT_DOUBLE_EQ(b.derivations[0].logp, 0.0);
  ASSERT_EQ(b.derivations[0].stack.size(), 1u);
  EXPECT_EQ(g.symbol(b.derivations[0].stack[0]).name, "B");
  EXPECT_ERROR(beam_advance(Beam::initial(g), "b", g), BeamExhausted);
}

TEST(Beam, IncFeaturesOfSingleDerivation) {
  const auto g = tiny();
  const auto b = beam_advance(Beam::initial(g), "a", g);
  features::SubtreeEncodingConfig cfg;
  cfg.dim = 16;
  const auto v = inc_features(b, g, cfg);
  EXPECT_DOUBLE_EQ(v.lpNorm<1>(), 3.0);
  EXPECT_EQ(v, features::encode_productions(derivation_productions(b.derivations[0], g), cfg));
}

TEST(Beam, EqualWeightsAverage) {
  const auto g = ambiguous();
  Beam b;
  b.derivations.push_back(Derivation{{*g.find("Y", false)}, {0, 3}, -1.0});
  b.derivations.push_back(Derivation{{*g.find("Z", false)}, {1, 3}, -1.0});
  features::SubtreeEncodingConfig cfg;
  cfg.dim = 32;
  const Vector expected = 0.5 * (features::encode_productions(derivation_productions(b.derivations[0], g), cfg) +
                                 features::encode_productions(derivation_productions(b.derivations[1], g), cfg));
  EXPECT_LT((inc_features(b, g, cfg) - expected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Beam, PrefixLogprob) {
  Beam one;
  one.derivations.push_back(Derivation{{}, {}, -1.2});
  EXPECT_DOUBLE_EQ(prefix_logprob(one), -1.2);
  Beam two;
  two.derivations.push_back(Derivation{{0}, {}, std::log(0.3)});
  two.derivations.push_back(Derivation{{0}, {}, std::log(0.2)});
  EXPECT_NEAR(prefix_logprob(two), std::log(0.5), 1e-12);
  EXPECT_EQ(complete_parse_logprob(two), -std::numeric_limits<double>::infinity());
}

TEST(Beam, CompleteParseOfUnambiguousSentence) {
  const auto g = tiny();
  auto b = beam_advance(Beam::initial(g), "a", g);
  b = beam_advance(b, "b", g);
  EXPECT_DOUBLE_EQ(complete_parse_logprob(b), 0.0);
}

TEST(BeamProperty, UnboundedBeamMatchesEnumeration) {
  const auto g = ambiguous();
  ParserConfig cfg;
  cfg.beam_width = kUnboundedBeam;
  cfg.max_expansions_per_word = 1000;
  Rng rng(32);
  for (int trial = 0; trial < 60; ++trial) {
    std::vector<std::string> words;
    const std::size_t n = 1 + rng.uniform_index(5);
    for (std::size_t i = 0; i < n; ++i) words.push_back(rng.uniform() < 0.6 ? "a" : "b");
    Beam b = Beam::initial(g);
    bool exhausted = false;
    for (std::size_t i = 0; i < words.size() && !exhausted; ++i) {
      const std::vector<std::string> prefix(words.begin(), words.begin() + static_cast<long>(i + 1));
      const auto expected = oracle::derivations(g, prefix);
      try {
        b = beam_advance(b, words[i], g, cfg);
      } catch (const Error& e) {
        EXPECT_TRUE(expected.empty()) << e.what();
        exhausted = true;
        continue;
      }
      EXPECT_EQ(keys(b), keys(expected));
      EXPECT_NEAR(prefix_logprob(b), oracle::prefix_logprob(expected), 1e-9);
      for (std::size_t d = 1; d < b.size(); ++d) EXPECT_GE(b.derivations[d - 1].logp, b.derivations[d].logp);
    }
  }
}

TEST(Beam, WidthKeepsBestAndReportsDiscarded) {
  const auto g = ambiguous();
  ParserConfig cfg;
  cfg.beam_width = 1;
  AdvanceStats stats;
  const auto b = beam_advance(Beam::initial(g), "a", g, cfg, &stats);
  EXPECT_EQ(b.size(), 1u);
  ASSERT_TRUE(stats.best_discarded.has_value());
  EXPECT_LE(*stats.best_discarded, b.derivations[0].logp);
}

TEST(IncMatrix, RowsPerTokenAndResets) {
  const auto corpus = treebank::StimulusCorpus::build(parse_tree_file("(S (A a) (B b))\n(S (B b) (A a))\n"));
  const auto g = induce_pcfg(parse_tree_file("(S (A a) (B b))\n"));
  features::SubtreeEncodingConfig enc;
  enc.dim = 16;
  const auto r = inc_feature_matrix(corpus, g, ParserConfig{}, enc);
  EXPECT_EQ(r.features.rows(), 4);
  EXPECT_EQ(r.prefix_logprobs.size(), 4u);
  EXPECT_GE(r.resets, 1u);
  EXPECT_GT(r.features.values.row(0).norm(), 0.0);
  EXPECT_TRUE(std::isnan(r.prefix_logprobs[2]));
  EXPECT_EQ(r.features.values.row(2).norm(), 0.0);
}

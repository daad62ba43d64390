#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "synenc/common.hpp"
#include "synenc/syntax_features.hpp"
#include "synenc/treebank.hpp"

namespace synenc::incparser {

using SymbolId = std::uint32_t;

struct Symbol {
  std::string name;
  bool terminal = false;
};

struct Rule {
  SymbolId lhs = 0;
  std::vector<SymbolId> rhs;
  double prob = 1.0;
  double logp = 0.0;
};

struct RuleSpec {
  std::string lhs;
  std::vector<std::string> rhs;
  double prob = 1.0;
};

inline constexpr std::string_view kUnknownWord = "<UNK>";

// Terminals and nonterminals live in separate namespaces, so a word may share
// its spelling with a category label.
class Pcfg {
 public:
  SymbolId intern(std::string_view name, bool terminal);
  std::optional<SymbolId> find(std::string_view name, bool terminal) const;
  const Symbol& symbol(SymbolId id) const { return symbols_.at(id); }
  std::size_t symbol_count() const { return symbols_.size(); }

  SymbolId start() const { return start_; }
  void set_start(SymbolId id) { start_ = id; }

  std::size_t add_rule(SymbolId lhs, std::vector<SymbolId> rhs, double prob);
  const std::vector<Rule>& rules() const { return rules_; }
  const Rule& rule(std::size_t id) const { return rules_.at(id); }
  const std::vector<std::size_t>& rules_for(SymbolId lhs) const;

  // Checks normalization (1e-9) and probability range, then builds the
  // left-corner table. Throws InvalidGrammar.
  void finalize();

  // True iff some derivation of `nonterminal` starts with `terminal`.
  bool can_start(SymbolId nonterminal, SymbolId terminal) const;
  // The terminal for `word`, or the UNK terminal when the word is unseen.
  std::optional<SymbolId> terminal_for(std::string_view word) const;
  bool is_preterminal_rule(std::size_t rule_id) const;

  // "%start<TAB>S" then one "LHS<TAB>RHS...<TAB>prob" line per rule. On load,
  // RHS symbols that never occur as a LHS are terminals.
  std::string to_text() const;
  static Pcfg from_text(std::string_view text);
  static Pcfg from_rules(std::string_view start, const std::vector<RuleSpec>& rules);

 private:
  std::vector<Symbol> symbols_;
  std::unordered_map<std::string, SymbolId> index_;  // kind prefix + name
  std::vector<Rule> rules_;
  std::vector<std::vector<std::size_t>> by_lhs_;
  std::vector<std::vector<bool>> first_;  // nonterminal x terminal
  std::vector<SymbolId> terminal_index_;  // symbol id -> column in first_
  SymbolId start_ = 0;
  bool finalized_ = false;
};

struct InduceConfig {
  double add_k = 0.0;
  // Adds PT -> <UNK> per preterminal with the number of hapax tokens it tags.
  bool unknown_word_rules = true;
};

// Relative-frequency PCFG with add-k smoothing over observed alternatives.
// If every tree has the same root label it is the start symbol, otherwise a
// synthetic TOP rewrites to each root label. Throws EmptyTreebank.
Pcfg induce_pcfg(const std::vector<treebank::ConstituencyTree>& trees, const InduceConfig& cfg = {});

struct Derivation {
  std::vector<SymbolId> stack;  // back() is the leftmost pending symbol
  std::vector<std::uint32_t> applied;
  double logp = 0.0;
};

inline constexpr std::size_t kUnboundedBeam = std::numeric_limits<std::size_t>::max();

struct ParserConfig {
  std::size_t beam_width = 10;
  // Consecutive expansions without a scan; deeper derivations are dropped.
  std::size_t max_expansions_per_word = 25;
  // Hard bound on queue pops per word.
  std::size_t max_pops_per_word = 2'000'000;
  double temperature = 1.0;
};

struct Beam {
  std::vector<Derivation> derivations;  // descending logp

  static Beam initial(const Pcfg& g);
  bool empty() const { return derivations.empty(); }
  std::size_t size() const { return derivations.size(); }
};

struct AdvanceStats {
  std::size_t pops = 0;
  std::size_t dropped_by_depth = 0;
  bool hit_pop_limit = false;
  // Highest logp among scanned derivations cut by the beam width.
  std::optional<double> best_discarded;
};

// Expands every derivation best-first until it scans `word`; keeps the top
// `beam_width`. Throws BeamExhausted if nothing scans.
Beam beam_advance(const Beam& beam, std::string_view word, const Pcfg& g,
                  const ParserConfig& cfg = {}, AdvanceStats* stats = nullptr);

std::vector<std::string> derivation_productions(const Derivation& d, const Pcfg& g,
                                                bool lexicalized = false);
Vector inc_features(const Beam& beam, const Pcfg& g, const features::SubtreeEncodingConfig& cfg,
                    double temperature = 1.0);

double prefix_logprob(const Beam& beam);
// Log-sum-exp over derivations with an empty stack; -inf if there are none.
double complete_parse_logprob(const Beam& beam);

struct IncResult {
  features::FeatureMatrix features;
  std::vector<double> prefix_logprobs;  // per token; NaN where the beam was reset
  std::size_t resets = 0;
};

// INC rows for every token. A word nothing can scan yields a zero row and
// restarts the sentence beam.
IncResult inc_feature_matrix(const treebank::StimulusCorpus& corpus, const Pcfg& g,
                             const ParserConfig& pcfg, const features::SubtreeEncodingConfig& enc);

}  // namespace synenc::incparser

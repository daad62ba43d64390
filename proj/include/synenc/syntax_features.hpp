#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "synenc/common.hpp"
#include "synenc/treebank.hpp"

namespace synenc::features {

enum class FeatureSpace { PU, CM, PD, CC, CI, INC, DEP, SEM };

std::string_view to_string(FeatureSpace space);
std::optional<FeatureSpace> parse_space(std::string_view name);

// Word-level (or TR-level) feature rows with provenance.
struct FeatureMatrix {
  FeatureSpace space = FeatureSpace::PU;
  Matrix values;
  nlohmann::json meta = nlohmann::json::object();

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index dim() const { return values.cols(); }
  // Throws DegenerateInput on NaN/Inf or an empty column set.
  void validate() const;
};

struct SubtreeEncodingConfig {
  enum class Mode { HashedProductionCounts, SeededRandomProjection };

  std::size_t dim = 250;
  Mode mode = Mode::HashedProductionCounts;
  std::uint64_t seed = 0;
  std::optional<std::size_t> max_depth;
  // Preterminal productions carry the word ("NN -> dog") instead of "NN -> *".
  bool lexicalized = false;

  nlohmann::json to_json() const;
  void validate() const;
};

class FrequencyTable {
 public:
  FrequencyTable() = default;
  // "word<TAB>per_billion" rows; values must be > 0.
  static FrequencyTable parse(std::string_view tsv);
  void set(std::string_view word, double per_billion);
  std::optional<double> lookup(std::string_view word) const;  // case-folded
  std::size_t size() const { return table_.size(); }

 private:
  std::unordered_map<std::string, double> table_;
};

// Node satisfying: span ends at k+1 (all leaves seen, word k among them) with
// maximal height; among equal heights the one closest to the root.
treebank::NodeId complete_subtree(const treebank::ConstituencyTree& tree, std::size_t k);

// Prefix closure of a tree: the root plus every node covering a token <= k.
// Children that start after k are kept as open (unexpanded) nonterminals.
struct PartialTree {
  struct Node {
    std::string label;
    std::vector<std::size_t> children;
    std::size_t depth = 0;
    bool open = false;
    bool leaf = false;
  };
  std::vector<Node> nodes;  // preorder, node 0 is the root when non-empty

  bool empty() const { return nodes.empty(); }
  std::size_t open_count() const;
  // Expanded (closed) productions only; open nodes contribute nothing here.
  std::vector<std::string> productions(bool lexicalized = false) const;
  // productions() plus one "X -> ?" entry per open node.
  std::vector<std::string> encoded_productions(bool lexicalized = false) const;
};

PartialTree incomplete_subtree(const treebank::ConstituencyTree& tree, std::size_t k);

// Production strings: "S -> NP VP", "PRP -> *" (or "PRP -> I" when lexicalized),
// and "VP -> ?" for open nonterminals.
std::string production_string(std::string_view lhs, const std::vector<std::string>& rhs);
std::string open_production(std::string_view lhs);
std::string preterminal_production(std::string_view tag, std::string_view word, bool lexicalized);
std::vector<std::string> subtree_productions(const treebank::ConstituencyTree& tree,
                                             treebank::NodeId id, bool lexicalized = false,
                                             std::optional<std::size_t> max_depth = std::nullopt);

// Maps a bag of production strings to a D-dimensional vector.
Vector encode_productions(const std::vector<std::string>& productions,
                          const SubtreeEncodingConfig& cfg);
Vector encode_subtree(const treebank::ConstituencyTree& tree, treebank::NodeId id,
                      const SubtreeEncodingConfig& cfg);
Vector encode_subtree(const PartialTree& partial, const SubtreeEncodingConfig& cfg);

FeatureMatrix cc_features(const treebank::StimulusCorpus& corpus, const SubtreeEncodingConfig& cfg);
FeatureMatrix ci_features(const treebank::StimulusCorpus& corpus, const SubtreeEncodingConfig& cfg);

// Punctuation alphabet, in column order:
//   0 "."  1 ","  2 ";"  3 ":"  4 "!"  5 "?"  6 '"'  7 "'"  8 dash  9 "("  10 ")"  11 other
inline constexpr std::size_t kPunctuationClasses = 12;
std::optional<std::size_t> punctuation_class(const treebank::Token& token);

enum class PunctuationAttachment {
  PrecedingWord,  // the word before a run of punctuation gets its bits (and so does the mark)
  SelfOnly,       // only the punctuation token carries its bit
};

FeatureMatrix punctuation_features(const treebank::StimulusCorpus& corpus,
                                   PunctuationAttachment attach = PunctuationAttachment::PrecedingWord);

// Number of internal nodes whose rightmost leaf is token k, per sentence.
std::vector<std::size_t> node_counts(const treebank::ConstituencyTree& tree);

// Columns: node count, word length (code points), log10 occurrences per billion.
// Words missing from the table fall back to 1 per billion (WF = 0) with a warning.
FeatureMatrix complexity_metrics(const treebank::StimulusCorpus& corpus, const FrequencyTable& freq);

// One-hot POS tag followed by one-hot incoming dependency relation.
FeatureMatrix pos_dep_features(const treebank::StimulusCorpus& corpus);

struct PcaResult {
  FeatureMatrix scores;   // rows x k projections
  Matrix components;      // D x k, orthonormal columns
  Vector mean;            // D
  Vector explained_variance;
};

// Projects mean-centered X onto its leading principal components. The output
// dimension is min(dim, rows - 1, numerical rank).
PcaResult pca_reduce(const FeatureMatrix& x, std::size_t dim = 250);

// Hash of a JSON config value, rendered as 16 hex digits.
std::string config_hash(const nlohmann::json& config);

}  // namespace synenc::features

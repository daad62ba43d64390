#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "synenc/common.hpp"

namespace synenc::treebank {

struct Token {
  std::size_t index = 0;
  std::string surface;
  std::string pos;
  bool is_punct = false;
  double onset_sec = 0.0;
  double offset_sec = 0.0;
};

struct Sentence {
  std::size_t id = 0;
  std::vector<Token> tokens;
};

using NodeId = std::size_t;

struct TreeNode {
  std::string label;  // nonterminal / preterminal tag, or the word for leaves
  std::vector<NodeId> children;
  std::optional<NodeId> parent;
  std::size_t begin = 0;  // token span [begin, end)
  std::size_t end = 0;
  std::size_t height = 0;
  std::size_t depth = 0;

  bool is_leaf() const { return children.empty(); }
  bool operator==(const TreeNode&) const = default;
};

// Nodes are stored in preorder; node 0 is the root. Leaves are terminals.
class ConstituencyTree {
 public:
  ConstituencyTree() = default;

  NodeId root() const { return 0; }
  const TreeNode& node(NodeId id) const { return nodes_.at(id); }
  std::span<const TreeNode> nodes() const { return nodes_; }
  std::size_t node_count() const { return nodes_.size(); }
  std::size_t internal_node_count() const { return nodes_.size() - leaves_.size(); }
  std::size_t token_count() const { return leaves_.size(); }
  NodeId leaf(std::size_t token) const { return leaves_.at(token); }
  bool is_preterminal(NodeId id) const;

  // Raw leaf text and preterminal tag of token k.
  const std::string& word(std::size_t token) const { return nodes_[leaves_.at(token)].label; }
  const std::string& tag(std::size_t token) const;

  std::string to_bracketed() const { return to_bracketed(root()); }
  std::string to_bracketed(NodeId id) const;

  // Copy of the subtree rooted at `id`, re-indexed from token 0.
  ConstituencyTree subtree(NodeId id) const;

  bool operator==(const ConstituencyTree& other) const { return nodes_ == other.nodes_; }

  struct Builder;

 private:
  friend struct Builder;
  void finalize();

  std::vector<TreeNode> nodes_;
  std::vector<NodeId> leaves_;
};

// Parses one Penn-Treebank-style S-expression. Functional annotations after
// '-' or '=' are stripped from labels ("NP-SBJ" -> "NP"); bracket labels such
// as "-LRB-" and "-NONE-" are kept verbatim. Errors carry the byte offset.
ConstituencyTree parse_bracketed(std::string_view text);

// One tree per non-blank line.
std::vector<ConstituencyTree> parse_tree_file(std::string_view text);

std::size_t tree_height(const ConstituencyTree& tree, NodeId id);

struct DepNode {
  std::string form;
  std::string upos;
  std::string xpos;
};

struct DepEdge {
  std::optional<std::size_t> head;  // nullopt is the synthetic ROOT
  std::size_t dependent = 0;
  std::string relation;
};

class DependencyGraph {
 public:
  DependencyGraph(std::vector<DepNode> nodes, std::vector<DepEdge> edges);

  std::size_t size() const { return nodes_.size(); }
  const std::vector<DepNode>& nodes() const { return nodes_; }
  const std::vector<DepEdge>& edges() const { return edges_; }  // edges_[i].dependent == i
  std::optional<std::size_t> head_of(std::size_t token) const { return edges_.at(token).head; }
  const std::string& relation_of(std::size_t token) const { return edges_.at(token).relation; }
  std::size_t root() const { return root_; }

 private:
  std::vector<DepNode> nodes_;
  std::vector<DepEdge> edges_;
  std::size_t root_ = 0;
};

// CoNLL-U reader: columns ID, FORM, UPOS, XPOS, HEAD and DEPREL are used;
// comment lines, multiword ranges ("1-2") and empty nodes ("1.1") are skipped.
std::vector<DependencyGraph> parse_conllu(std::string_view text);

// PTB bracket escapes (-LRB- etc.) mapped back to the characters they stand for.
std::string unescape_ptb(std::string_view word);

// True iff the UTF-8 text is non-empty and made only of Unicode punctuation.
bool is_punctuation_text(std::string_view text);
bool is_punctuation_tag(std::string_view pos);

class StimulusCorpus {
 public:
  // Graphs may be empty (constituency-only corpus); otherwise one per tree
  // with matching token counts.
  static StimulusCorpus build(std::vector<ConstituencyTree> trees,
                              std::vector<DependencyGraph> graphs = {});

  const std::vector<Sentence>& sentences() const { return sentences_; }
  const std::vector<ConstituencyTree>& trees() const { return trees_; }
  const std::vector<DependencyGraph>& graphs() const { return graphs_; }
  bool has_graphs() const { return !graphs_.empty(); }
  bool has_timing() const { return has_timing_; }
  double run_duration_sec() const { return run_duration_sec_; }

  std::size_t token_count() const { return token_count_; }
  // Index of the first token of sentence s in corpus order.
  std::size_t sentence_offset(std::size_t s) const { return offsets_.at(s); }
  std::vector<const Token*> tokens() const;

  // Attaches word timing from the TSV (word, onset_sec, offset_sec,
  // sentence_id, token_id; ids 0-based). Jitter up to 1 ms is normalized.
  StimulusCorpus with_timing(std::string_view tsv,
                             std::optional<double> run_duration_sec = std::nullopt) const;

 private:
  std::vector<Sentence> sentences_;
  std::vector<ConstituencyTree> trees_;
  std::vector<DependencyGraph> graphs_;
  std::vector<std::size_t> offsets_;
  std::size_t token_count_ = 0;
  bool has_timing_ = false;
  double run_duration_sec_ = 0.0;
};

}  // namespace synenc::treebank

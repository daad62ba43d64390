#include "synenc/treebank.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <numeric>

namespace synenc::treebank {

namespace {

std::string at_byte(std::size_t offset) { return "at byte " + std::to_string(offset); }

std::string strip_function_tags(std::string_view label) {
  if (label.size() > 1 && label.front() == '-') return std::string(label);
  const auto cut = label.find_first_of("-=", 1);
  return std::string(label.substr(0, cut));
}

struct RawNode {
  std::string label;
  bool is_atom = false;
  std::size_t offset = 0;
  std::vector<RawNode> children;
};

class BracketReader {
 public:
  explicit BracketReader(std::string_view text) : text_(text) {}

  RawNode read_root() {
    skip_space();
    if (pos_ >= text_.size()) fail(ErrorCode::NoTokens, "empty tree text " + at_byte(pos_));
    if (text_[pos_] == ')') fail(ErrorCode::UnbalancedParens, "unexpected ')' " + at_byte(pos_));
    if (text_[pos_] != '(') fail(ErrorCode::MalformedTree, "expected '(' " + at_byte(pos_));
    RawNode root = read_node();
    skip_space();
    if (pos_ < text_.size()) {
      if (text_[pos_] == ')') fail(ErrorCode::UnbalancedParens, "unexpected ')' " + at_byte(pos_));
      fail(ErrorCode::MalformedTree, "trailing text after tree " + at_byte(pos_));
    }
    return root;
  }

 private:
  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  std::string read_atom() {
    const auto start = pos_;
    while (pos_ < text_.size()) {
      const char c = text_[pos_];
      if (c == '(' || c == ')' || std::isspace(static_cast<unsigned char>(c))) break;
      ++pos_;
    }
    return std::string(text_.substr(start, pos_ - start));
  }

  RawNode read_node() {
    RawNode node;
    node.offset = pos_;
    ++pos_;  // '('
    skip_space();
    if (pos_ >= text_.size()) fail(ErrorCode::UnbalancedParens, "unterminated node " + at_byte(pos_));
    if (text_[pos_] == ')') fail(ErrorCode::EmptyNode, "empty node " + at_byte(node.offset));
    if (text_[pos_] != '(') node.label = read_atom();
    while (true) {
      skip_space();
      if (pos_ >= text_.size()) {
        fail(ErrorCode::UnbalancedParens, "missing ')' at end-of-input " + at_byte(pos_));
      }
      const char c = text_[pos_];
      if (c == ')') {
        ++pos_;
        break;
      }
      if (c == '(') {
        node.children.push_back(read_node());
      } else {
        RawNode atom;
        atom.offset = pos_;
        atom.is_atom = true;
        atom.label = read_atom();
        node.children.push_back(std::move(atom));
      }
    }
    if (node.children.empty()) {
      fail(ErrorCode::EmptyNode, "node '" + node.label + "' has no children " + at_byte(node.offset));
    }
    const bool has_atom = std::any_of(node.children.begin(), node.children.end(),
                                      [](const RawNode& n) { return n.is_atom; });
    if (has_atom && node.children.size() != 1) {
      fail(ErrorCode::MalformedTree,
           "terminal mixed with other children under '" + node.label + "' " + at_byte(node.offset));
    }
    return node;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

constexpr std::array<std::string_view, 10> kPunctTags = {
    ".", ",", ":", "``", "''", "-LRB-", "-RRB-", "HYPH", "NFP", "PUNCT"};

std::vector<char32_t> decode_utf8(std::string_view text) {
  std::vector<char32_t> out;
  std::size_t i = 0;
  while (i < text.size()) {
    const auto c = static_cast<unsigned char>(text[i]);
    char32_t cp = c;
    std::size_t extra = 0;
    if (c >= 0xF0) {
      cp = c & 0x07;
      extra = 3;
    } else if (c >= 0xE0) {
      cp = c & 0x0F;
      extra = 2;
    } else if (c >= 0xC0) {
      cp = c & 0x1F;
      extra = 1;
    }
    ++i;
    for (std::size_t k = 0; k < extra && i < text.size(); ++k, ++i) {
      cp = (cp << 6) | (static_cast<unsigned char>(text[i]) & 0x3F);
    }
    out.push_back(cp);
  }
  return out;
}

bool is_punct_codepoint(char32_t cp) {
  if (cp < 0x80) {
    static constexpr std::string_view kAscii = "!\"#%&'()*,-./:;?@[\\]_{}";
    return kAscii.find(static_cast<char>(cp)) != std::string_view::npos;
  }
  switch (cp) {
    case 0x00A1: case 0x00A7: case 0x00AB: case 0x00B6: case 0x00B7: case 0x00BB: case 0x00BF:
      return true;
    default:
      break;
  }
  return (cp >= 0x2010 && cp <= 0x2027) || (cp >= 0x2030 && cp <= 0x2043) ||
         (cp >= 0x2045 && cp <= 0x2051) || (cp >= 0x2053 && cp <= 0x205E) ||
         (cp >= 0x3001 && cp <= 0x3003) || (cp >= 0x3008 && cp <= 0x3011) ||
         (cp >= 0x3014 && cp <= 0x301F) || (cp >= 0xFF01 && cp <= 0xFF03) ||
         (cp >= 0xFF05 && cp <= 0xFF0A) || (cp >= 0xFF0C && cp <= 0xFF0F) ||
         cp == 0xFF1A || cp == 0xFF1B || cp == 0xFF1F || cp == 0xFF20 ||
         (cp >= 0xFF3B && cp <= 0xFF3D) || cp == 0xFF3F || cp == 0xFF5B || cp == 0xFF5D;
}

}  // namespace

struct ConstituencyTree::Builder {
  static void append(ConstituencyTree& tree, const RawNode& raw, std::optional<NodeId> parent,
                     std::size_t depth) {
    if (!raw.is_atom && raw.label.empty()) {
      fail(ErrorCode::MalformedTree, "unlabeled internal node " + at_byte(raw.offset));
    }
    const NodeId id = tree.nodes_.size();
    tree.nodes_.push_back(TreeNode{});
    {
      TreeNode& node = tree.nodes_.back();
      node.label = raw.is_atom ? raw.label : strip_function_tags(raw.label);
      node.parent = parent;
      node.depth = depth;
    }
    if (parent) tree.nodes_[*parent].children.push_back(id);
    for (const auto& child : raw.children) append(tree, child, id, depth + 1);
  }

  static void copy(ConstituencyTree& out, const ConstituencyTree& in, NodeId id,
                   std::optional<NodeId> parent, std::size_t depth) {
    const NodeId new_id = out.nodes_.size();
    TreeNode node;
    node.label = in.nodes_[id].label;
    node.parent = parent;
    node.depth = depth;
    out.nodes_.push_back(std::move(node));
    if (parent) out.nodes_[*parent].children.push_back(new_id);
    for (NodeId child : in.nodes_[id].children) copy(out, in, child, new_id, depth + 1);
  }

  static void finish(ConstituencyTree& tree) { tree.finalize(); }
};

void ConstituencyTree::finalize() {
  leaves_.clear();
  for (NodeId id = 0; id < nodes_.size(); ++id) {
    if (nodes_[id].is_leaf()) {
      nodes_[id].begin = leaves_.size();
      nodes_[id].end = leaves_.size() + 1;
      nodes_[id].height = 0;
      leaves_.push_back(id);
    }
  }
  // Preorder: children always follow their parent, so a reverse sweep is bottom-up.
  for (NodeId id = nodes_.size(); id-- > 0;) {
    TreeNode& node = nodes_[id];
    if (node.is_leaf()) continue;
    node.begin = nodes_[node.children.front()].begin;
    node.end = nodes_[node.children.back()].end;
    std::size_t h = 0;
    for (NodeId c : node.children) h = std::max(h, nodes_[c].height);
    node.height = h + 1;
  }
}

bool ConstituencyTree::is_preterminal(NodeId id) const {
  const auto& n = nodes_.at(id);
  return n.children.size() == 1 && nodes_[n.children.front()].is_leaf();
}

const std::string& ConstituencyTree::tag(std::size_t token) const {
  return nodes_[*nodes_[leaves_.at(token)].parent].label;
}

std::string ConstituencyTree::to_bracketed(NodeId id) const {
  const TreeNode& n = nodes_.at(id);
  if (n.is_leaf()) return n.label;
  std::string out = "(" + n.label;
  for (NodeId c : n.children) {
    out += ' ';
    out += to_bracketed(c);
  }
  out += ')';
  return out;
}

ConstituencyTree ConstituencyTree::subtree(NodeId id) const {
  ConstituencyTree out;
  Builder::copy(out, *this, id, std::nullopt, 0);
  out.finalize();
  return out;
}

ConstituencyTree parse_bracketed(std::string_view text) {
  BracketReader reader(text);
  RawNode raw = reader.read_root();
  // PTB files often wrap each tree in an unlabeled outer bracket.
  while (raw.label.empty() && raw.children.size() == 1 && !raw.children.front().is_atom) {
    RawNode inner = std::move(raw.children.front());
    raw = std::move(inner);
  }
  if (raw.label.empty()) raw.label = "ROOT";
  ConstituencyTree tree;
  ConstituencyTree::Builder::append(tree, raw, std::nullopt, 0);
  ConstituencyTree::Builder::finish(tree);
  if (tree.token_count() == 0) fail(ErrorCode::NoTokens, "tree has no terminals");
  return tree;
}

std::vector<ConstituencyTree> parse_tree_file(std::string_view text) {
  std::vector<ConstituencyTree> trees;
  std::size_t line_no = 0;
  for (const auto& line : split(text, '\n')) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      trees.push_back(parse_bracketed(line));
    } catch (const Error& e) {
      throw Error(e.code(), "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return trees;
}

std::size_t tree_height(const ConstituencyTree& tree, NodeId id) {
  const TreeNode& n = tree.node(id);
  if (n.is_leaf()) return 0;
  std::size_t h = 0;
  for (NodeId c : n.children) h = std::max(h, tree_height(tree, c));
  return h + 1;
}

DependencyGraph::DependencyGraph(std::vector<DepNode> nodes, std::vector<DepEdge> edges)
    : nodes_(std::move(nodes)), edges_(std::move(edges)) {
  const std::size_t n = nodes_.size();
  if (edges_.size() != n) fail(ErrorCode::MalformedConllu, "edge count must equal token count");
  std::sort(edges_.begin(), edges_.end(),
            [](const DepEdge& a, const DepEdge& b) { return a.dependent < b.dependent; });
  std::optional<std::size_t> root;
  for (std::size_t i = 0; i < n; ++i) {
    const DepEdge& e = edges_[i];
    if (e.dependent != i) fail(ErrorCode::MalformedConllu, "token " + std::to_string(i + 1) + " has no head");
    if (!e.head) {
      if (root) {
        fail(ErrorCode::MultipleRoots, "tokens " + std::to_string(*root + 1) + " and " +
                                           std::to_string(i + 1) + " both attach to ROOT");
      }
      root = i;
    } else if (*e.head >= n) {
      fail(ErrorCode::DanglingHead, "token " + std::to_string(i + 1) + " has head " +
                                        std::to_string(*e.head + 1) + " beyond sentence length " +
                                        std::to_string(n));
    } else if (*e.head == i) {
      fail(ErrorCode::CycleDetected, "token " + std::to_string(i + 1) + " is its own head");
    }
  }
  // Every token must reach ROOT by following heads.
  std::vector<int> state(n, 0);  // 0 unvisited, 1 on path, 2 reaches root
  for (std::size_t start = 0; start < n; ++start) {
    std::vector<std::size_t> path;
    std::size_t cur = start;
    while (state[cur] == 0) {
      state[cur] = 1;
      path.push_back(cur);
      if (!edges_[cur].head) break;
      cur = *edges_[cur].head;
    }
    if (state[cur] == 1 && edges_[cur].head) {
      fail(ErrorCode::CycleDetected, "cycle through token " + std::to_string(cur + 1));
    }
    for (auto p : path) state[p] = 2;
  }
  if (!root) fail(ErrorCode::CycleDetected, "no token attaches to ROOT");
  root_ = *root;
}

std::vector<DependencyGraph> parse_conllu(std::string_view text) {
  std::vector<DependencyGraph> graphs;
  std::vector<DepNode> nodes;
  std::vector<DepEdge> edges;
  std::size_t line_no = 0;
  std::size_t block_start = 1;

  auto flush = [&]() {
    if (nodes.empty()) return;
    try {
      graphs.emplace_back(std::move(nodes), std::move(edges));
    } catch (const Error& e) {
      throw Error(e.code(), "sentence starting at line " + std::to_string(block_start) + ": " + e.what());
    }
    nodes.clear();
    edges.clear();
  };

  for (const auto& raw_line : split(text, '\n')) {
    ++line_no;
    const std::string_view line = trim(raw_line);
    if (line.empty()) {
      flush();
      continue;
    }
    if (line.front() == '#') continue;
    std::vector<std::string> cols;
    if (line.find('\t') != std::string_view::npos) {
      cols = split(line, '\t');
    } else {
      for (const auto& c : split(line, ' ')) {
        if (!c.empty()) cols.push_back(c);
      }
    }
    const std::string ctx = "line " + std::to_string(line_no);
    if (cols.size() < 8) fail(ErrorCode::MalformedConllu, ctx + ": expected at least 8 columns");
    const std::string& id = cols[0];
    if (id.find_first_of("-.") != std::string::npos) continue;
    if (nodes.empty()) block_start = line_no;
    const auto index = parse_int(id, ctx + " ID");
    if (index != static_cast<long long>(nodes.size()) + 1) {
      fail(ErrorCode::MalformedConllu, ctx + ": token ids must run 1..n, got " + id);
    }
    const auto head = parse_int(cols[6], ctx + " HEAD");
    if (head < 0) fail(ErrorCode::DanglingHead, ctx + ": negative head");
    nodes.push_back(DepNode{cols[1], cols[3], cols[4]});
    DepEdge edge;
    edge.dependent = nodes.size() - 1;
    if (head > 0) edge.head = static_cast<std::size_t>(head - 1);
    edge.relation = cols[7];
    edges.push_back(std::move(edge));
  }
  flush();
  return graphs;
}

std::string unescape_ptb(std::string_view word) {
  if (word == "-LRB-") return "(";
  if (word == "-RRB-") return ")";
  if (word == "-LCB-") return "{";
  if (word == "-RCB-") return "}";
  if (word == "-LSB-") return "[";
  if (word == "-RSB-") return "]";
  return std::string(word);
}

bool is_punctuation_text(std::string_view text) {
  const auto cps = decode_utf8(text);
  if (cps.empty()) return false;
  return std::all_of(cps.begin(), cps.end(), is_punct_codepoint);
}

bool is_punctuation_tag(std::string_view pos) {
  return std::find(kPunctTags.begin(), kPunctTags.end(), pos) != kPunctTags.end() || pos == "\"";
}

StimulusCorpus StimulusCorpus::build(std::vector<ConstituencyTree> trees,
                                     std::vector<DependencyGraph> graphs) {
  if (!graphs.empty() && graphs.size() != trees.size()) {
    fail(ErrorCode::CountMismatch, std::to_string(trees.size()) + " trees but " +
                                       std::to_string(graphs.size()) + " dependency graphs");
  }
  StimulusCorpus corpus;
  for (std::size_t s = 0; s < trees.size(); ++s) {
    const auto& tree = trees[s];
    if (!graphs.empty() && graphs[s].size() != tree.token_count()) {
      fail(ErrorCode::CountMismatch, "sentence " + std::to_string(s) + ": tree has " +
                                         std::to_string(tree.token_count()) + " tokens, graph has " +
                                         std::to_string(graphs[s].size()));
    }
    Sentence sentence;
    sentence.id = s;
    for (std::size_t k = 0; k < tree.token_count(); ++k) {
      Token token;
      token.index = k;
      token.surface = unescape_ptb(tree.word(k));
      token.pos = tree.tag(k);
      token.is_punct = is_punctuation_text(token.surface) || is_punctuation_tag(token.pos);
      if (!graphs.empty()) {
        const auto& form = graphs[s].nodes()[k].form;
        if (form != token.surface && form != tree.word(k)) {
          fail(ErrorCode::SurfaceMismatch, "sentence " + std::to_string(s) + " token " +
                                               std::to_string(k) + ": tree has '" + token.surface +
                                               "', CoNLL-U has '" + form + "'");
        }
      }
      sentence.tokens.push_back(std::move(token));
    }
    corpus.offsets_.push_back(corpus.token_count_);
    corpus.token_count_ += sentence.tokens.size();
    corpus.sentences_.push_back(std::move(sentence));
  }
  corpus.trees_ = std::move(trees);
  corpus.graphs_ = std::move(graphs);
  return corpus;
}

std::vector<const Token*> StimulusCorpus::tokens() const {
  std::vector<const Token*> out;
  out.reserve(token_count_);
  for (const auto& s : sentences_) {
    for (const auto& t : s.tokens) out.push_back(&t);
  }
  return out;
}

StimulusCorpus StimulusCorpus::with_timing(std::string_view tsv,
                                           std::optional<double> run_duration_sec) const {
  constexpr double kJitter = 1e-3;
  struct Row {
    std::size_t line;
    std::string word;
    double onset, offset;
    std::size_t sentence, token;
  };
  std::vector<Row> rows;
  std::size_t line_no = 0;
  for (const auto& raw_line : split(tsv, '\n')) {
    ++line_no;
    std::string_view line = raw_line;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (trim(line).empty()) continue;
    const auto cols = split(line, '\t');
    const std::string ctx = "timing line " + std::to_string(line_no);
    if (cols.size() < 5) fail(ErrorCode::MalformedTiming, ctx + ": expected 5 tab-separated columns");
    if (rows.empty() && line_no == 1 && to_lower(trim(cols[1])) == "onset_sec") continue;  // header
    Row row;
    row.line = line_no;
    row.word = cols[0];
    try {
      row.onset = parse_double(cols[1], ctx);
      row.offset = parse_double(cols[2], ctx);
      const auto s = parse_int(cols[3], ctx);
      const auto t = parse_int(cols[4], ctx);
      if (s < 0 || t < 0) fail(ErrorCode::MalformedTiming, ctx + ": negative id");
      row.sentence = static_cast<std::size_t>(s);
      row.token = static_cast<std::size_t>(t);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::MalformedTiming) throw;
      fail(ErrorCode::MalformedTiming, e.what());
    }
    if (!std::isfinite(row.onset) || !std::isfinite(row.offset)) {
      fail(ErrorCode::MalformedTiming, ctx + ": non-finite time");
    }
    rows.push_back(std::move(row));
  }
  if (rows.size() != token_count_) {
    fail(ErrorCode::CountMismatch, "timing has " + std::to_string(rows.size()) +
                                       " rows, corpus has " + std::to_string(token_count_) + " tokens");
  }

  StimulusCorpus out = *this;
  std::vector<char> seen(token_count_, 0);
  for (const auto& row : rows) {
    const std::string ctx = "timing line " + std::to_string(row.line);
    if (row.sentence >= out.sentences_.size() ||
        row.token >= out.sentences_[row.sentence].tokens.size()) {
      fail(ErrorCode::CountMismatch, ctx + ": no token (" + std::to_string(row.sentence) + ", " +
                                         std::to_string(row.token) + ") in corpus");
    }
    const std::size_t flat = offsets_[row.sentence] + row.token;
    if (seen[flat]) fail(ErrorCode::CountMismatch, ctx + ": token timed twice");
    seen[flat] = 1;
    Token& token = out.sentences_[row.sentence].tokens[row.token];
    const std::string& leaf = trees_[row.sentence].word(row.token);
    if (row.word != token.surface && row.word != leaf) {
      fail(ErrorCode::SurfaceMismatch,
           ctx + ": timing word '" + row.word + "' vs tree leaf '" + token.surface + "'");
    }
    double onset = row.onset;
    double offset = row.offset;
    if (onset < 0.0) {
      if (onset < -kJitter) fail(ErrorCode::NonMonotonicTiming, ctx + ": negative onset");
      onset = 0.0;
    }
    if (offset < onset) {
      if (onset - offset > kJitter) {
        fail(ErrorCode::NonMonotonicTiming, ctx + ": offset precedes onset");
      }
      offset = onset;
    }
    token.onset_sec = onset;
    token.offset_sec = offset;
  }

  double max_offset = 0.0;
  for (auto& sentence : out.sentences_) {
    for (std::size_t k = 1; k < sentence.tokens.size(); ++k) {
      auto& prev = sentence.tokens[k - 1];
      auto& cur = sentence.tokens[k];
      if (cur.onset_sec < prev.onset_sec) {
        if (prev.onset_sec - cur.onset_sec > kJitter) {
          fail(ErrorCode::NonMonotonicTiming,
               "sentence " + std::to_string(sentence.id) + " token " + std::to_string(k) +
                   ": onset " + format_double(cur.onset_sec) + " precedes previous onset " +
                   format_double(prev.onset_sec));
        }
        cur.onset_sec = prev.onset_sec;
        cur.offset_sec = std::max(cur.offset_sec, cur.onset_sec);
      }
    }
    for (const auto& t : sentence.tokens) max_offset = std::max(max_offset, t.offset_sec);
  }
  if (run_duration_sec) {
    if (max_offset > *run_duration_sec + kJitter) {
      fail(ErrorCode::MalformedTiming, "token offset " + format_double(max_offset) +
                                           " exceeds run duration " + format_double(*run_duration_sec));
    }
    out.run_duration_sec_ = *run_duration_sec;
  } else {
    out.run_duration_sec_ = max_offset;
  }
  out.has_timing_ = true;
  return out;
}

}  // namespace synenc::treebank

#include "synenc/syntax_features.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace synenc::features {

using treebank::ConstituencyTree;
using treebank::NodeId;
using treebank::StimulusCorpus;

namespace {

constexpr std::string_view kSpaceNames[] = {"PU", "CM", "PD", "CC", "CI", "INC", "DEP", "SEM"};

nlohmann::json base_meta(FeatureSpace space, Eigen::Index dim, nlohmann::json config) {
  nlohmann::json meta;
  meta["space"] = std::string(to_string(space));
  meta["dim"] = dim;
  meta["config"] = config;
  meta["config_hash"] = config_hash(config);
  return meta;
}

std::size_t utf8_length(std::string_view text) {
  std::size_t n = 0;
  for (unsigned char c : text) {
    if ((c & 0xC0) != 0x80) ++n;
  }
  return n;
}

void collect_partial(const PartialTree& partial, std::size_t id, bool lexicalized,
                     std::optional<std::size_t> max_depth, bool include_open,
                     std::vector<std::string>& out) {
  const auto& node = partial.nodes[id];
  if (node.leaf) return;
  const bool within = !max_depth || node.depth < *max_depth;
  if (node.open) {
    if (include_open && within) out.push_back(open_production(node.label));
    return;
  }
  if (within) {
    if (node.children.size() == 1 && partial.nodes[node.children.front()].leaf) {
      out.push_back(preterminal_production(node.label, partial.nodes[node.children.front()].label,
                                           lexicalized));
    } else {
      std::vector<std::string> rhs;
      for (auto c : node.children) rhs.push_back(partial.nodes[c].label);
      out.push_back(production_string(node.label, rhs));
    }
  }
  for (auto c : node.children) collect_partial(partial, c, lexicalized, max_depth, include_open, out);
}

void append_partial(const ConstituencyTree& tree, NodeId id, std::size_t k, PartialTree& out) {
  const auto& src = tree.node(id);
  const std::size_t me = out.nodes.size();
  PartialTree::Node node;
  node.label = src.label;
  node.depth = src.depth;
  node.leaf = src.is_leaf();
  node.open = !node.leaf && src.begin > k;
  out.nodes.push_back(std::move(node));
  if (out.nodes[me].open || out.nodes[me].leaf) return;
  for (NodeId c : src.children) {
    if (tree.node(c).begin > k && tree.node(c).is_leaf()) continue;
    out.nodes[me].children.push_back(out.nodes.size());
    append_partial(tree, c, k, out);
  }
}

}  // namespace

std::string_view to_string(FeatureSpace space) {
  return kSpaceNames[static_cast<std::size_t>(space)];
}

std::optional<FeatureSpace> parse_space(std::string_view name) {
  const std::string upper = [&] {
    std::string s(trim(name));
    for (auto& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return s;
  }();
  for (std::size_t i = 0; i < std::size(kSpaceNames); ++i) {
    if (upper == kSpaceNames[i]) return static_cast<FeatureSpace>(i);
  }
  if (upper == "BERT") return FeatureSpace::SEM;
  return std::nullopt;
}

void FeatureMatrix::validate() const {
  if (values.cols() == 0) fail(ErrorCode::DegenerateInput, std::string(to_string(space)) + ": dim is 0");
  if (!values.allFinite()) {
    fail(ErrorCode::DegenerateInput, std::string(to_string(space)) + ": non-finite feature values");
  }
}

nlohmann::json SubtreeEncodingConfig::to_json() const {
  nlohmann::json j;
  j["dim"] = dim;
  j["mode"] = mode == Mode::HashedProductionCounts ? "hashed_production_counts"
                                                   : "seeded_random_projection";
  j["seed"] = seed;
  j["max_depth"] = max_depth ? nlohmann::json(*max_depth) : nlohmann::json(nullptr);
  j["lexicalized"] = lexicalized;
  return j;
}

void SubtreeEncodingConfig::validate() const {
  if (dim < 1) fail(ErrorCode::InvalidArgument, "subtree encoding dim must be >= 1");
}

FrequencyTable FrequencyTable::parse(std::string_view tsv) {
  FrequencyTable table;
  std::size_t line_no = 0;
  for (const auto& raw : split(tsv, '\n')) {
    ++line_no;
    if (trim(raw).empty()) continue;
    const auto cols = split(raw, '\t');
    const std::string ctx = "frequency line " + std::to_string(line_no);
    if (cols.size() < 2) fail(ErrorCode::InvalidArgument, ctx + ": expected word<TAB>per_billion");
    if (line_no == 1 && to_lower(trim(cols[1])) == "per_billion") continue;
    table.set(cols[0], parse_double(cols[1], ctx));
  }
  return table;
}

void FrequencyTable::set(std::string_view word, double per_billion) {
  if (!(per_billion > 0.0) || !std::isfinite(per_billion)) {
    fail(ErrorCode::InvalidArgument, "frequency for '" + std::string(word) + "' must be positive");
  }
  table_[to_lower(word)] = per_billion;
}

std::optional<double> FrequencyTable::lookup(std::string_view word) const {
  const auto it = table_.find(to_lower(word));
  if (it == table_.end()) return std::nullopt;
  return it->second;
}

NodeId complete_subtree(const ConstituencyTree& tree, std::size_t k) {
  if (k >= tree.token_count()) {
    fail(ErrorCode::InvalidArgument, "token index " + std::to_string(k) + " out of range");
  }
  // Ancestors of leaf k ending at k+1 form a chain of strictly increasing
  // height; the topmost of them is the answer.
  NodeId cur = tree.leaf(k);
  while (true) {
    const auto& parent = tree.node(cur).parent;
    if (!parent || tree.node(*parent).end != k + 1) break;
    cur = *parent;
  }
  return cur;
}

std::size_t PartialTree::open_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes.begin(), nodes.end(), [](const Node& n) { return n.open; }));
}

std::vector<std::string> PartialTree::productions(bool lexicalized) const {
  std::vector<std::string> out;
  if (!empty()) collect_partial(*this, 0, lexicalized, std::nullopt, false, out);
  return out;
}

std::vector<std::string> PartialTree::encoded_productions(bool lexicalized) const {
  std::vector<std::string> out;
  if (!empty()) collect_partial(*this, 0, lexicalized, std::nullopt, true, out);
  return out;
}

PartialTree incomplete_subtree(const ConstituencyTree& tree, std::size_t k) {
  if (k >= tree.token_count()) {
    fail(ErrorCode::InvalidArgument, "token index " + std::to_string(k) + " out of range");
  }
  PartialTree out;
  append_partial(tree, tree.root(), k, out);
  return out;
}

std::string production_string(std::string_view lhs, const std::vector<std::string>& rhs) {
  std::string out(lhs);
  out += " ->";
  for (const auto& r : rhs) {
    out += ' ';
    out += r;
  }
  return out;
}

std::string open_production(std::string_view lhs) { return std::string(lhs) + " -> ?"; }

std::string preterminal_production(std::string_view tag, std::string_view word, bool lexicalized) {
  return std::string(tag) + " -> " + (lexicalized ? std::string(word) : std::string("*"));
}

std::vector<std::string> subtree_productions(const ConstituencyTree& tree, NodeId id,
                                             bool lexicalized, std::optional<std::size_t> max_depth) {
  std::vector<std::string> out;
  const std::size_t base = tree.node(id).depth;
  std::vector<NodeId> stack{id};
  while (!stack.empty()) {
    const NodeId cur = stack.back();
    stack.pop_back();
    const auto& node = tree.node(cur);
    if (node.is_leaf()) continue;
    if (!max_depth || node.depth - base < *max_depth) {
      if (tree.is_preterminal(cur)) {
        out.push_back(preterminal_production(node.label, tree.node(node.children.front()).label,
                                             lexicalized));
      } else {
        std::vector<std::string> rhs;
        for (NodeId c : node.children) rhs.push_back(tree.node(c).label);
        out.push_back(production_string(node.label, rhs));
      }
    }
    for (auto it = node.children.rbegin(); it != node.children.rend(); ++it) stack.push_back(*it);
  }
  return out;
}

Vector encode_productions(const std::vector<std::string>& productions,
                          const SubtreeEncodingConfig& cfg) {
  cfg.validate();
  Vector v = Vector::Zero(static_cast<Eigen::Index>(cfg.dim));
  for (const auto& p : productions) {
    const std::uint64_t h = hash64(p, cfg.seed);
    if (cfg.mode == SubtreeEncodingConfig::Mode::HashedProductionCounts) {
      v[static_cast<Eigen::Index>(h % cfg.dim)] += 1.0;
    } else {
      Rng rng(h);
      const double scale = 1.0 / std::sqrt(static_cast<double>(cfg.dim));
      for (Eigen::Index i = 0; i < v.size(); ++i) v[i] += scale * rng.normal();
    }
  }
  return v;
}

Vector encode_subtree(const ConstituencyTree& tree, NodeId id, const SubtreeEncodingConfig& cfg) {
  return encode_productions(subtree_productions(tree, id, cfg.lexicalized, cfg.max_depth), cfg);
}

Vector encode_subtree(const PartialTree& partial, const SubtreeEncodingConfig& cfg) {
  std::vector<std::string> prods;
  if (!partial.empty()) collect_partial(partial, 0, cfg.lexicalized, cfg.max_depth, true, prods);
  return encode_productions(prods, cfg);
}

FeatureMatrix cc_features(const StimulusCorpus& corpus, const SubtreeEncodingConfig& cfg) {
  cfg.validate();
  FeatureMatrix fm;
  fm.space = FeatureSpace::CC;
  fm.values.resize(static_cast<Eigen::Index>(corpus.token_count()), static_cast<Eigen::Index>(cfg.dim));
  Eigen::Index row = 0;
  for (const auto& tree : corpus.trees()) {
    for (std::size_t k = 0; k < tree.token_count(); ++k) {
      fm.values.row(row++) = encode_subtree(tree, complete_subtree(tree, k), cfg).transpose();
    }
  }
  fm.meta = base_meta(fm.space, fm.dim(), cfg.to_json());
  return fm;
}

FeatureMatrix ci_features(const StimulusCorpus& corpus, const SubtreeEncodingConfig& cfg) {
  cfg.validate();
  FeatureMatrix fm;
  fm.space = FeatureSpace::CI;
  fm.values.resize(static_cast<Eigen::Index>(corpus.token_count()), static_cast<Eigen::Index>(cfg.dim));
  Eigen::Index row = 0;
  for (const auto& tree : corpus.trees()) {
    for (std::size_t k = 0; k < tree.token_count(); ++k) {
      fm.values.row(row++) = encode_subtree(incomplete_subtree(tree, k), cfg).transpose();
    }
  }
  fm.meta = base_meta(fm.space, fm.dim(), cfg.to_json());
  return fm;
}

std::optional<std::size_t> punctuation_class(const treebank::Token& token) {
  if (!token.is_punct) return std::nullopt;
  const std::string& s = token.surface;
  if (s == "``" || s == "''") return 6;
  auto cls_of = [](char32_t cp) -> std::size_t {
    switch (cp) {
      case U'.': case U'…': return 0;
      case U',': return 1;
      case U';': return 2;
      case U':': return 3;
      case U'!': return 4;
      case U'?': return 5;
      case U'"': case U'“': case U'”': case U'„': case U'«': case U'»':
        return 6;
      case U'\'': case U'`': case U'‘': case U'’': return 7;
      case U'-': case U'‐': case U'‑': case U'‒': case U'–': case U'—':
      case U'―': return 8;
      case U'(': case U'[': case U'{': return 9;
      case U')': case U']': case U'}': return 10;
      default: return 11;
    }
  };
  // Decode just enough UTF-8 to classify each code point.
  std::optional<std::size_t> cls;
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    char32_t cp = c;
    std::size_t extra = c >= 0xF0 ? 3 : c >= 0xE0 ? 2 : c >= 0xC0 ? 1 : 0;
    if (extra) cp = c & (0x3F >> extra);
    ++i;
    for (std::size_t e = 0; e < extra && i < s.size(); ++e, ++i) {
      cp = (cp << 6) | (static_cast<unsigned char>(s[i]) & 0x3F);
    }
    const std::size_t c_cls = cls_of(cp);
    if (cls && *cls != c_cls) return 11;
    cls = c_cls;
  }
  return cls.value_or(11);
}

FeatureMatrix punctuation_features(const StimulusCorpus& corpus, PunctuationAttachment attach) {
  FeatureMatrix fm;
  fm.space = FeatureSpace::PU;
  fm.values = Matrix::Zero(static_cast<Eigen::Index>(corpus.token_count()),
                           static_cast<Eigen::Index>(kPunctuationClasses));
  Eigen::Index row = 0;
  for (const auto& sentence : corpus.sentences()) {
    const auto& toks = sentence.tokens;
    for (std::size_t k = 0; k < toks.size(); ++k, ++row) {
      if (auto cls = punctuation_class(toks[k])) fm.values(row, static_cast<Eigen::Index>(*cls)) = 1.0;
      if (attach == PunctuationAttachment::SelfOnly) continue;
      for (std::size_t j = k + 1; j < toks.size(); ++j) {
        const auto cls = punctuation_class(toks[j]);
        if (!cls) break;
        fm.values(row, static_cast<Eigen::Index>(*cls)) = 1.0;
      }
    }
  }
  nlohmann::json config;
  config["alphabet"] = {".", ",", ";", ":", "!", "?", "\"", "'", "dash", "(", ")", "other"};
  config["attach"] = attach == PunctuationAttachment::PrecedingWord ? "preceding_word" : "self_only";
  fm.meta = base_meta(fm.space, fm.dim(), config);
  return fm;
}

std::vector<std::size_t> node_counts(const ConstituencyTree& tree) {
  std::vector<std::size_t> counts(tree.token_count(), 0);
  for (const auto& node : tree.nodes()) {
    if (!node.is_leaf()) ++counts[node.end - 1];
  }
  return counts;
}

FeatureMatrix complexity_metrics(const StimulusCorpus& corpus, const FrequencyTable& freq) {
  FeatureMatrix fm;
  fm.space = FeatureSpace::CM;
  fm.values.resize(static_cast<Eigen::Index>(corpus.token_count()), 3);
  std::set<std::string> missing;
  Eigen::Index row = 0;
  for (std::size_t s = 0; s < corpus.sentences().size(); ++s) {
    const auto counts = node_counts(corpus.trees()[s]);
    for (const auto& token : corpus.sentences()[s].tokens) {
      fm.values(row, 0) = static_cast<double>(counts[token.index]);
      fm.values(row, 1) = static_cast<double>(utf8_length(token.surface));
      double per_billion = 1.0;
      if (auto f = freq.lookup(token.surface)) {
        per_billion = *f;
      } else if (missing.insert(to_lower(token.surface)).second) {
        log::warn("no frequency for '{}'; using 1 per billion (WF = 0)", token.surface);
      }
      fm.values(row, 2) = std::log10(per_billion);
      ++row;
    }
  }
  nlohmann::json config;
  config["columns"] = {"node_count", "word_length", "log10_per_billion"};
  config["frequency_entries"] = freq.size();
  config["missing_frequency_fallback_per_billion"] = 1.0;
  fm.meta = base_meta(fm.space, fm.dim(), config);
  fm.meta["missing_frequency_words"] = missing.size();
  return fm;
}

FeatureMatrix pos_dep_features(const StimulusCorpus& corpus) {
  if (!corpus.has_graphs()) {
    fail(ErrorCode::InvalidArgument, "PD features need dependency graphs");
  }
  std::set<std::string> pos_set;
  std::set<std::string> rel_set;
  for (std::size_t s = 0; s < corpus.sentences().size(); ++s) {
    for (const auto& t : corpus.sentences()[s].tokens) {
      pos_set.insert(t.pos);
      rel_set.insert(corpus.graphs()[s].relation_of(t.index));
    }
  }
  const std::vector<std::string> pos(pos_set.begin(), pos_set.end());
  const std::vector<std::string> rel(rel_set.begin(), rel_set.end());
  auto index_of = [](const std::vector<std::string>& alphabet, const std::string& v) {
    return static_cast<Eigen::Index>(std::lower_bound(alphabet.begin(), alphabet.end(), v) -
                                     alphabet.begin());
  };
  FeatureMatrix fm;
  fm.space = FeatureSpace::PD;
  fm.values = Matrix::Zero(static_cast<Eigen::Index>(corpus.token_count()),
                           static_cast<Eigen::Index>(pos.size() + rel.size()));
  Eigen::Index row = 0;
  for (std::size_t s = 0; s < corpus.sentences().size(); ++s) {
    for (const auto& t : corpus.sentences()[s].tokens) {
      fm.values(row, index_of(pos, t.pos)) = 1.0;
      fm.values(row, static_cast<Eigen::Index>(pos.size()) +
                         index_of(rel, corpus.graphs()[s].relation_of(t.index))) = 1.0;
      ++row;
    }
  }
  nlohmann::json config;
  config["pos_alphabet"] = pos;
  config["relation_alphabet"] = rel;
  fm.meta = base_meta(fm.space, fm.dim(), config);
  return fm;
}

PcaResult pca_reduce(const FeatureMatrix& x, std::size_t dim) {
  const Eigen::Index n = x.rows();
  if (n < 2 || x.dim() == 0) fail(ErrorCode::DegenerateInput, "PCA needs at least 2 rows");
  if (dim < 1) fail(ErrorCode::InvalidArgument, "PCA dim must be >= 1");
  x.validate();
  PcaResult out;
  out.mean = x.values.colwise().mean().transpose();
  const Matrix centered = x.values.rowwise() - out.mean.transpose();
  if (centered.squaredNorm() == 0.0) fail(ErrorCode::DegenerateInput, "input has zero variance");

  Eigen::BDCSVD<Matrix> svd(centered, Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  const double tol = static_cast<double>(std::max(centered.rows(), centered.cols())) *
                     std::numeric_limits<double>::epsilon() * s[0];
  Eigen::Index rank = 0;
  while (rank < s.size() && s[rank] > tol) ++rank;
  const Eigen::Index k =
      std::min<Eigen::Index>({static_cast<Eigen::Index>(dim), n - 1, rank});

  out.components = svd.matrixV().leftCols(k);
  for (Eigen::Index c = 0; c < k; ++c) {
    Eigen::Index arg = 0;
    out.components.col(c).cwiseAbs().maxCoeff(&arg);
    if (out.components(arg, c) < 0) out.components.col(c) *= -1.0;
  }
  out.explained_variance = s.head(k).array().square() / static_cast<double>(n - 1);
  out.scores.space = x.space;
  out.scores.values = centered * out.components;
  nlohmann::json config;
  config["requested_dim"] = dim;
  config["source_dim"] = x.dim();
  config["source_config_hash"] = x.meta.value("config_hash", "");
  out.scores.meta = base_meta(x.space, k, config);
  out.scores.meta["actual_dim"] = k;
  return out;
}

std::string config_hash(const nlohmann::json& config) { return hex64(hash64(config.dump())); }

}  // namespace synenc::features

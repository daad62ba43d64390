#include "synenc/incparser.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <queue>
#include <set>
#include <unordered_map>

namespace synenc::incparser {

namespace {

double log_sum_exp(const std::vector<double>& values) {
  if (values.empty()) return -std::numeric_limits<double>::infinity();
  const double m = *std::max_element(values.begin(), values.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double v : values) s += std::exp(v - m);
  return m + std::log(s);
}

struct Item {
  Derivation d;
  std::size_t depth = 0;
  std::uint64_t seq = 0;
};

struct ItemOrder {
  bool operator()(const Item& a, const Item& b) const {
    if (a.d.logp != b.d.logp) return a.d.logp < b.d.logp;
    return a.seq > b.seq;
  }
};

}  // namespace

SymbolId Pcfg::intern(std::string_view name, bool terminal) {
  if (auto id = find(name, terminal)) return *id;
  symbols_.push_back(Symbol{std::string(name), terminal});
  index_.emplace((terminal ? "t:" : "n:") + std::string(name),
                 static_cast<SymbolId>(symbols_.size() - 1));
  by_lhs_.emplace_back();
  finalized_ = false;
  return static_cast<SymbolId>(symbols_.size() - 1);
}

std::optional<SymbolId> Pcfg::find(std::string_view name, bool terminal) const {
  const auto it = index_.find((terminal ? "t:" : "n:") + std::string(name));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t Pcfg::add_rule(SymbolId lhs, std::vector<SymbolId> rhs, double prob) {
  if (lhs >= symbols_.size() || symbols_[lhs].terminal) {
    fail(ErrorCode::InvalidGrammar, "rule LHS must be a nonterminal");
  }
  if (rhs.empty()) fail(ErrorCode::InvalidGrammar, "empty RHS for " + symbols_[lhs].name);
  for (auto s : rhs) {
    if (s >= symbols_.size()) fail(ErrorCode::InvalidGrammar, "unknown RHS symbol id");
  }
  Rule r;
  r.lhs = lhs;
  r.rhs = std::move(rhs);
  r.prob = prob;
  r.logp = std::log(prob);
  rules_.push_back(std::move(r));
  by_lhs_[lhs].push_back(rules_.size() - 1);
  finalized_ = false;
  return rules_.size() - 1;
}

const std::vector<std::size_t>& Pcfg::rules_for(SymbolId lhs) const { return by_lhs_.at(lhs); }

void Pcfg::finalize() {
  if (start_ >= symbols_.size() || symbols_[start_].terminal || by_lhs_[start_].empty()) {
    fail(ErrorCode::InvalidGrammar, "start symbol must be a nonterminal with rules");
  }
  for (const auto& r : rules_) {
    if (!(r.prob > 0.0 && r.prob <= 1.0)) {
      fail(ErrorCode::InvalidGrammar, "rule probability outside (0, 1] for " + symbols_[r.lhs].name);
    }
    for (auto s : r.rhs) {
      if (!symbols_[s].terminal && by_lhs_[s].empty()) {
        fail(ErrorCode::InvalidGrammar, "nonterminal '" + symbols_[s].name + "' has no rules");
      }
    }
  }
  for (SymbolId s = 0; s < symbols_.size(); ++s) {
    if (by_lhs_[s].empty()) continue;
    double total = 0.0;
    for (auto r : by_lhs_[s]) total += rules_[r].prob;
    if (std::abs(total - 1.0) > 1e-9) {
      fail(ErrorCode::InvalidGrammar,
           "rules for '" + symbols_[s].name + "' sum to " + format_double(total));
    }
  }

  terminal_index_.assign(symbols_.size(), 0);
  std::size_t n_terminals = 0;
  for (SymbolId s = 0; s < symbols_.size(); ++s) {
    if (symbols_[s].terminal) terminal_index_[s] = static_cast<SymbolId>(n_terminals++);
  }
  first_.assign(symbols_.size(), std::vector<bool>(n_terminals, false));
  bool changed = true;
  while (changed) {
    changed = false;
    for (const auto& r : rules_) {
      const SymbolId y = r.rhs.front();
      auto& dst = first_[r.lhs];
      if (symbols_[y].terminal) {
        if (!dst[terminal_index_[y]]) {
          dst[terminal_index_[y]] = true;
          changed = true;
        }
        continue;
      }
      const auto& src = first_[y];
      for (std::size_t t = 0; t < n_terminals; ++t) {
        if (src[t] && !dst[t]) {
          dst[t] = true;
          changed = true;
        }
      }
    }
  }
  finalized_ = true;
}

bool Pcfg::can_start(SymbolId nonterminal, SymbolId terminal) const {
  if (symbols_.at(nonterminal).terminal) return nonterminal == terminal;
  return first_[nonterminal][terminal_index_.at(terminal)];
}

std::optional<SymbolId> Pcfg::terminal_for(std::string_view word) const {
  if (auto id = find(word, true)) return id;
  return find(kUnknownWord, true);
}

bool Pcfg::is_preterminal_rule(std::size_t rule_id) const {
  const auto& r = rules_.at(rule_id);
  return r.rhs.size() == 1 && symbols_[r.rhs.front()].terminal;
}

std::string Pcfg::to_text() const {
  std::string out = "%start\t" + symbols_.at(start_).name + "\n";
  std::set<std::string> nonterminal_names;
  for (const auto& s : symbols_) {
    if (!s.terminal) nonterminal_names.insert(s.name);
  }
  bool collision = false;
  for (const auto& r : rules_) {
    out += symbols_[r.lhs].name;
    for (auto s : r.rhs) {
      out += '\t';
      out += symbols_[s].name;
      if (symbols_[s].terminal && nonterminal_names.count(symbols_[s].name)) collision = true;
    }
    out += '\t';
    out += fmt::format("{:.17g}", r.prob);
    out += '\n';
  }
  if (collision) log::warn("grammar has a terminal spelled like a nonterminal; text form is lossy");
  return out;
}

Pcfg Pcfg::from_text(std::string_view text) {
  std::optional<std::string> start;
  std::vector<RuleSpec> specs;
  std::size_t line_no = 0;
  for (const auto& raw : split(text, '\n')) {
    ++line_no;
    const auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto cols = split(line, '\t');
    const std::string ctx = "grammar line " + std::to_string(line_no);
    if (cols.front() == "%start") {
      if (cols.size() != 2) fail(ErrorCode::InvalidGrammar, ctx + ": expected %start<TAB>symbol");
      start = cols[1];
      continue;
    }
    if (cols.size() < 3) fail(ErrorCode::InvalidGrammar, ctx + ": expected LHS<TAB>RHS...<TAB>prob");
    RuleSpec spec;
    spec.lhs = cols.front();
    spec.rhs.assign(cols.begin() + 1, cols.end() - 1);
    try {
      spec.prob = parse_double(cols.back(), ctx);
    } catch (const Error& e) {
      fail(ErrorCode::InvalidGrammar, e.what());
    }
    specs.push_back(std::move(spec));
  }
  if (specs.empty()) fail(ErrorCode::InvalidGrammar, "grammar has no rules");
  return from_rules(start.value_or(specs.front().lhs), specs);
}

Pcfg Pcfg::from_rules(std::string_view start, const std::vector<RuleSpec>& rules) {
  std::set<std::string> lhs_names;
  for (const auto& r : rules) lhs_names.insert(r.lhs);
  Pcfg g;
  for (const auto& r : rules) {
    const SymbolId lhs = g.intern(r.lhs, false);
    std::vector<SymbolId> rhs;
    for (const auto& s : r.rhs) rhs.push_back(g.intern(s, lhs_names.count(s) == 0));
    g.add_rule(lhs, std::move(rhs), r.prob);
  }
  const auto s = g.find(start, false);
  if (!s) fail(ErrorCode::InvalidGrammar, "start symbol '" + std::string(start) + "' has no rules");
  g.set_start(*s);
  g.finalize();
  return g;
}

Pcfg induce_pcfg(const std::vector<treebank::ConstituencyTree>& trees, const InduceConfig& cfg) {
  if (trees.empty()) fail(ErrorCode::EmptyTreebank, "cannot induce a grammar from zero trees");
  if (!(cfg.add_k >= 0.0)) fail(ErrorCode::InvalidArgument, "add-k must be >= 0");
  Pcfg g;
  std::map<std::pair<SymbolId, std::vector<SymbolId>>, double> counts;
  std::unordered_map<std::string, std::size_t> word_freq;
  std::vector<SymbolId> roots;
  for (const auto& tree : trees) {
    for (const auto& node : tree.nodes()) {
      if (node.is_leaf()) continue;
      const SymbolId lhs = g.intern(node.label, false);
      std::vector<SymbolId> rhs;
      for (auto c : node.children) {
        const auto& child = tree.node(c);
        rhs.push_back(g.intern(child.label, child.is_leaf()));
      }
      counts[{lhs, rhs}] += 1.0;
    }
    for (std::size_t k = 0; k < tree.token_count(); ++k) ++word_freq[tree.word(k)];
    roots.push_back(g.intern(tree.node(tree.root()).label, false));
  }
  if (cfg.unknown_word_rules) {
    std::map<SymbolId, double> hapax_per_tag;
    for (const auto& tree : trees) {
      for (std::size_t k = 0; k < tree.token_count(); ++k) {
        if (word_freq[tree.word(k)] == 1) hapax_per_tag[*g.find(tree.tag(k), false)] += 1.0;
      }
    }
    if (!hapax_per_tag.empty()) {
      const SymbolId unk = g.intern(kUnknownWord, true);
      for (const auto& [tag, n] : hapax_per_tag) counts[{tag, {unk}}] += n;
    }
  }
  const std::set<SymbolId> root_set(roots.begin(), roots.end());
  SymbolId start = roots.front();
  if (root_set.size() > 1) {
    start = g.intern("<TOP>", false);
    for (auto r : roots) counts[{start, {r}}] += 1.0;
  }

  std::map<SymbolId, std::pair<double, double>> lhs_totals;  // count, alternatives
  for (const auto& [key, c] : counts) {
    auto& t = lhs_totals[key.first];
    t.first += c;
    t.second += 1.0;
  }
  for (const auto& [key, c] : counts) {
    const auto& [total, alts] = lhs_totals[key.first];
    g.add_rule(key.first, key.second, (c + cfg.add_k) / (total + cfg.add_k * alts));
  }
  g.set_start(start);
  g.finalize();
  return g;
}

Beam Beam::initial(const Pcfg& g) {
  Beam b;
  b.derivations.push_back(Derivation{{g.start()}, {}, 0.0});
  return b;
}

Beam beam_advance(const Beam& beam, std::string_view word, const Pcfg& g, const ParserConfig& cfg,
                  AdvanceStats* stats) {
  if (cfg.beam_width < 1) fail(ErrorCode::InvalidArgument, "beam width must be >= 1");
  AdvanceStats local;
  AdvanceStats& st = stats ? *stats : local;
  st = AdvanceStats{};

  const auto w = g.terminal_for(word);
  if (!w) fail(ErrorCode::BeamExhausted, "word '" + std::string(word) + "' is not in the grammar");

  std::priority_queue<Item, std::vector<Item>, ItemOrder> queue;
  std::uint64_t seq = 0;
  for (const auto& d : beam.derivations) queue.push(Item{d, 0, seq++});

  Beam next;
  while (!queue.empty()) {
    if (st.pops >= cfg.max_pops_per_word) {
      st.hit_pop_limit = true;
      log::warn("beam search for '{}' stopped after {} pops", word, st.pops);
      break;
    }
    Item item = queue.top();
    queue.pop();
    ++st.pops;
    auto& stack = item.d.stack;
    if (stack.empty()) continue;
    const SymbolId top = stack.back();
    if (g.symbol(top).terminal) {
      if (top != *w) continue;
      stack.pop_back();
      if (next.derivations.size() < cfg.beam_width) {
        next.derivations.push_back(std::move(item.d));
        if (next.derivations.size() == cfg.beam_width && !stats) break;
        continue;
      }
      st.best_discarded = item.d.logp;
      break;
    }
    if (!g.can_start(top, *w)) continue;
    if (item.depth >= cfg.max_expansions_per_word) {
      ++st.dropped_by_depth;
      continue;
    }
    for (auto rid : g.rules_for(top)) {
      const Rule& r = g.rule(rid);
      if (!g.can_start(r.rhs.front(), *w)) continue;
      Item child;
      child.d.stack.reserve(stack.size() + r.rhs.size());
      child.d.stack.assign(stack.begin(), stack.end() - 1);
      child.d.stack.insert(child.d.stack.end(), r.rhs.rbegin(), r.rhs.rend());
      child.d.applied = item.d.applied;
      child.d.applied.push_back(static_cast<std::uint32_t>(rid));
      child.d.logp = item.d.logp + r.logp;
      child.depth = item.depth + 1;
      child.seq = seq++;
      queue.push(std::move(child));
    }
  }
  if (next.empty()) {
    fail(ErrorCode::BeamExhausted, "no derivation scans '" + std::string(word) + "'");
  }
  return next;
}

std::vector<std::string> derivation_productions(const Derivation& d, const Pcfg& g, bool lexicalized) {
  std::vector<std::string> out;
  out.reserve(d.applied.size() + d.stack.size());
  for (auto rid : d.applied) {
    const Rule& r = g.rule(rid);
    const std::string& lhs = g.symbol(r.lhs).name;
    if (g.is_preterminal_rule(rid)) {
      out.push_back(features::preterminal_production(lhs, g.symbol(r.rhs.front()).name, lexicalized));
    } else {
      std::vector<std::string> rhs;
      for (auto s : r.rhs) rhs.push_back(g.symbol(s).name);
      out.push_back(features::production_string(lhs, rhs));
    }
  }
  for (auto it = d.stack.rbegin(); it != d.stack.rend(); ++it) {
    out.push_back(features::open_production(g.symbol(*it).name));
  }
  return out;
}

Vector inc_features(const Beam& beam, const Pcfg& g, const features::SubtreeEncodingConfig& cfg,
                    double temperature) {
  if (beam.empty()) fail(ErrorCode::InvalidArgument, "INC features need a non-empty beam");
  if (!(temperature > 0.0)) fail(ErrorCode::InvalidArgument, "temperature must be > 0");
  double m = -std::numeric_limits<double>::infinity();
  for (const auto& d : beam.derivations) m = std::max(m, d.logp / temperature);
  std::vector<double> weights;
  double total = 0.0;
  for (const auto& d : beam.derivations) {
    weights.push_back(std::exp(d.logp / temperature - m));
    total += weights.back();
  }
  Vector out = Vector::Zero(static_cast<Eigen::Index>(cfg.dim));
  for (std::size_t i = 0; i < beam.size(); ++i) {
    out += (weights[i] / total) *
           features::encode_productions(derivation_productions(beam.derivations[i], g, cfg.lexicalized),
                                        cfg);
  }
  return out;
}

double prefix_logprob(const Beam& beam) {
  if (beam.empty()) fail(ErrorCode::InvalidArgument, "prefix probability of an empty beam");
  std::vector<double> v;
  for (const auto& d : beam.derivations) v.push_back(d.logp);
  return log_sum_exp(v);
}

double complete_parse_logprob(const Beam& beam) {
  std::vector<double> v;
  for (const auto& d : beam.derivations) {
    if (d.stack.empty()) v.push_back(d.logp);
  }
  return log_sum_exp(v);
}

IncResult inc_feature_matrix(const treebank::StimulusCorpus& corpus, const Pcfg& g,
                             const ParserConfig& pcfg, const features::SubtreeEncodingConfig& enc) {
  enc.validate();
  IncResult out;
  out.features.space = features::FeatureSpace::INC;
  out.features.values = Matrix::Zero(static_cast<Eigen::Index>(corpus.token_count()),
                                     static_cast<Eigen::Index>(enc.dim));
  Eigen::Index row = 0;
  for (std::size_t s = 0; s < corpus.trees().size(); ++s) {
    const auto& tree = corpus.trees()[s];
    Beam beam = Beam::initial(g);
    for (std::size_t k = 0; k < tree.token_count(); ++k, ++row) {
      try {
        beam = beam_advance(beam, tree.word(k), g, pcfg);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::BeamExhausted) throw;
        log::warn("sentence {} token {} ('{}'): beam exhausted, restarting", s, k, tree.word(k));
        ++out.resets;
        out.prefix_logprobs.push_back(std::numeric_limits<double>::quiet_NaN());
        beam = Beam::initial(g);
        continue;
      }
      out.prefix_logprobs.push_back(prefix_logprob(beam));
      out.features.values.row(row) = inc_features(beam, g, enc, pcfg.temperature).transpose();
    }
  }
  nlohmann::json config;
  config["encoding"] = enc.to_json();
  config["beam_width"] = pcfg.beam_width;
  config["max_expansions_per_word"] = pcfg.max_expansions_per_word;
  config["temperature"] = pcfg.temperature;
  config["grammar_hash"] = hex64(hash64(g.to_text()));
  out.features.meta["space"] = "INC";
  out.features.meta["dim"] = enc.dim;
  out.features.meta["config"] = config;
  out.features.meta["config_hash"] = features::config_hash(config);
  out.features.meta["beam_resets"] = out.resets;
  return out;
}

}  // namespace synenc::incparser

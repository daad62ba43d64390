#include "synenc/gcn.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <set>

namespace synenc::gcn {

namespace {

constexpr std::string_view kMagic = "GCN1";
constexpr std::uint32_t kVersion = 1;

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double log_sigmoid(double x) {
  if (x >= 0) return -std::log1p(std::exp(-x));
  return x - std::log1p(std::exp(x));
}

struct LayerCache {
  Matrix in;
  std::array<Matrix, kDirections> msg;   // W h(u) + b, per source node
  std::array<Vector, kDirections> gate;  // per source node
  Matrix z;
};

void check_edges(const std::vector<GcnEdge>& edges, Eigen::Index n) {
  for (const auto& e : edges) {
    if (static_cast<Eigen::Index>(e.target) >= n || static_cast<Eigen::Index>(e.source) >= n) {
      fail(ErrorCode::ShapeMismatch, "edge endpoint outside the graph");
    }
  }
}

Matrix forward_impl(const std::vector<GcnEdge>& edges, const Matrix& input, const GcnModel& model,
                    std::vector<LayerCache>* caches) {
  if (model.layers.empty()) fail(ErrorCode::ShapeMismatch, "model has no layers");
  if (input.cols() != model.layers.front().dir[0].W.cols()) {
    fail(ErrorCode::ShapeMismatch, "input dim " + std::to_string(input.cols()) + " != model input dim " +
                                       std::to_string(model.layers.front().dir[0].W.cols()));
  }
  check_edges(edges, input.rows());
  Matrix h = input;
  const Eigen::Index n = input.rows();
  for (const auto& layer : model.layers) {
    if (h.cols() != layer.dir[0].W.cols()) fail(ErrorCode::ShapeMismatch, "layer input dim mismatch");
    LayerCache cache;
    for (std::size_t d = 0; d < kDirections; ++d) {
      const auto& p = layer.dir[d];
      cache.msg[d] = (h * p.W.transpose()).rowwise() + p.b.transpose();
      cache.gate[d] = ((h * p.gate_w).array() + p.gate_b).unaryExpr([](double a) { return sigmoid(a); });
    }
    cache.z = Matrix::Zero(n, layer.dir[0].W.rows());
    for (const auto& e : edges) {
      const auto d = static_cast<std::size_t>(e.dir);
      const auto u = static_cast<Eigen::Index>(e.source);
      cache.z.row(static_cast<Eigen::Index>(e.target)) += cache.gate[d][u] * cache.msg[d].row(u);
    }
    Matrix next = cache.z.cwiseMax(0.0);
    if (caches) {
      cache.in = std::move(h);
      caches->push_back(std::move(cache));
    }
    h = std::move(next);
  }
  return h;
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_string(std::string& out, std::string_view s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.append(s);
}

class ByteReader {
 public:
  explicit ByteReader(std::string_view bytes) : bytes_(bytes) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string str() {
    const auto n = u32();
    need(n);
    std::string s(bytes_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  std::string_view raw(std::size_t n) {
    need(n);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) {
      fail(ErrorCode::MalformedCheckpoint, "checkpoint truncated at byte " + std::to_string(pos_));
    }
  }
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

template <typename Fn>
void for_each_block(GcnModel& m, ParamSubset subset, Fn&& fn) {
  if (subset == ParamSubset::All) fn(m.embeddings);
  for (auto& layer : m.layers) {
    for (auto& p : layer.dir) {
      if (subset == ParamSubset::All) {
        fn(p.W);
        fn(p.b);
      }
      fn(p.gate_w);
      fn(p.gate_b);
    }
  }
  if (subset == ParamSubset::All) fn(m.output);
}

}  // namespace

void GcnConfig::validate() const {
  if (layers < 1) fail(ErrorCode::InvalidArgument, "GCN needs at least one layer");
  if (hidden < 1 || input_dim < 1) fail(ErrorCode::InvalidArgument, "GCN dims must be >= 1");
  if (!(init_sigma >= 0.0)) fail(ErrorCode::InvalidArgument, "init sigma must be >= 0");
}

Vocabulary::Vocabulary() : words_{"<unk>"} { index_.emplace("<unk>", 0); }

Vocabulary Vocabulary::from_words(const std::vector<std::string>& words) {
  std::set<std::string> sorted;
  for (const auto& w : words) sorted.insert(to_lower(w));
  sorted.erase("<unk>");
  Vocabulary v;
  for (const auto& w : sorted) {
    v.index_.emplace(w, v.words_.size());
    v.words_.push_back(w);
  }
  return v;
}

Vocabulary Vocabulary::build(const treebank::StimulusCorpus& corpus) {
  if (!corpus.has_graphs()) fail(ErrorCode::InvalidArgument, "GCN vocabulary needs dependency graphs");
  std::vector<std::string> words;
  for (const auto& g : corpus.graphs()) {
    for (const auto& n : g.nodes()) words.push_back(n.form);
  }
  return from_words(words);
}

std::size_t Vocabulary::lookup(std::string_view word) const {
  const auto it = index_.find(to_lower(word));
  return it == index_.end() ? 0 : it->second;
}

GcnModel GcnModel::init(const GcnConfig& cfg, Vocabulary vocab, std::vector<std::string> relations,
                        std::uint64_t seed) {
  cfg.validate();
  GcnModel m;
  m.config = cfg;
  m.vocab = std::move(vocab);
  m.relations = std::move(relations);
  const auto V = static_cast<Eigen::Index>(m.vocab.size());
  const auto H = static_cast<Eigen::Index>(cfg.hidden);
  m.embeddings = Matrix::Zero(V, static_cast<Eigen::Index>(cfg.input_dim));
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    const Eigen::Index d_in = l == 0 ? static_cast<Eigen::Index>(cfg.input_dim) : H;
    LayerParams layer;
    for (auto& p : layer.dir) {
      p.W = Matrix::Zero(H, d_in);
      p.b = Vector::Zero(H);
      p.gate_w = Vector::Zero(d_in);
      p.gate_b = 0.0;
    }
    m.layers.push_back(std::move(layer));
  }
  m.output = Matrix::Zero(V, H);

  Rng rng(seed);
  auto fill = [&rng](auto& block, double sigma) {
    for (Eigen::Index r = 0; r < block.rows(); ++r) {
      for (Eigen::Index c = 0; c < block.cols(); ++c) block(r, c) = rng.normal(0.0, sigma);
    }
  };
  fill(m.embeddings, cfg.init_sigma);
  for (auto& layer : m.layers) {
    for (auto& p : layer.dir) {
      const double s = 1.0 / std::sqrt(static_cast<double>(p.W.cols()));
      fill(p.W, s);
      fill(p.gate_w, s);
    }
  }
  fill(m.output, cfg.init_sigma);
  return m;
}

GcnModel GcnModel::zeros_like() const {
  GcnModel z = *this;
  z.embeddings.setZero();
  for (auto& layer : z.layers) {
    for (auto& p : layer.dir) {
      p.W.setZero();
      p.b.setZero();
      p.gate_w.setZero();
      p.gate_b = 0.0;
    }
  }
  z.output.setZero();
  return z;
}

void GcnModel::validate() const {
  config.validate();
  const auto V = static_cast<Eigen::Index>(vocab.size());
  const auto H = static_cast<Eigen::Index>(config.hidden);
  auto expect = [](bool ok, const std::string& what) {
    if (!ok) fail(ErrorCode::ShapeMismatch, what);
  };
  expect(embeddings.rows() == V && embeddings.cols() == static_cast<Eigen::Index>(config.input_dim),
         "embedding table shape");
  expect(output.rows() == V && output.cols() == H, "output table shape");
  expect(layers.size() == config.layers, "layer count");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const Eigen::Index d_in = l == 0 ? static_cast<Eigen::Index>(config.input_dim) : H;
    for (const auto& p : layers[l].dir) {
      expect(p.W.rows() == H && p.W.cols() == d_in, "layer " + std::to_string(l) + " W shape");
      expect(p.b.size() == H && p.gate_w.size() == d_in, "layer " + std::to_string(l) + " bias shape");
      if (!p.W.allFinite() || !p.b.allFinite() || !p.gate_w.allFinite() || !std::isfinite(p.gate_b)) {
        fail(ErrorCode::DivergenceDetected, "non-finite parameters in layer " + std::to_string(l));
      }
    }
  }
  if (!embeddings.allFinite() || !output.allFinite()) {
    fail(ErrorCode::DivergenceDetected, "non-finite embedding parameters");
  }
}

std::size_t GcnModel::parameter_count() const {
  auto& self = const_cast<GcnModel&>(*this);
  return parameter_pointers(self).size();
}

bool GcnModel::operator==(const GcnModel& o) const {
  if (config.layers != o.config.layers || config.hidden != o.config.hidden ||
      config.input_dim != o.config.input_dim || !(vocab == o.vocab) || relations != o.relations ||
      layers.size() != o.layers.size()) {
    return false;
  }
  if (embeddings != o.embeddings || output != o.output) return false;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    for (std::size_t d = 0; d < kDirections; ++d) {
      const auto& a = layers[l].dir[d];
      const auto& b = o.layers[l].dir[d];
      if (a.W != b.W || a.b != b.b || a.gate_w != b.gate_w || a.gate_b != b.gate_b) return false;
    }
  }
  return true;
}

std::vector<double*> parameter_pointers(GcnModel& model, ParamSubset subset) {
  std::vector<double*> out;
  auto add = [&out](auto& block) {
    if constexpr (std::is_same_v<std::decay_t<decltype(block)>, double>) {
      out.push_back(&block);
    } else {
      for (Eigen::Index r = 0; r < block.rows(); ++r) {
        for (Eigen::Index c = 0; c < block.cols(); ++c) out.push_back(&block(r, c));
      }
    }
  };
  for_each_block(model, subset, add);
  return out;
}

std::vector<GcnEdge> gcn_edges(const treebank::DependencyGraph& graph) {
  std::vector<GcnEdge> edges;
  for (const auto& e : graph.edges()) {
    if (e.head) {
      edges.push_back(GcnEdge{*e.head, e.dependent, Direction::In});
      edges.push_back(GcnEdge{e.dependent, *e.head, Direction::Out});
    }
  }
  for (std::size_t i = 0; i < graph.size(); ++i) edges.push_back(GcnEdge{i, i, Direction::Self});
  return edges;
}

std::vector<std::size_t> word_ids(const treebank::DependencyGraph& graph, const Vocabulary& vocab) {
  std::vector<std::size_t> ids;
  for (const auto& n : graph.nodes()) ids.push_back(vocab.lookup(n.form));
  return ids;
}

Matrix gcn_forward(const std::vector<GcnEdge>& edges, const Matrix& input, const GcnModel& model) {
  return forward_impl(edges, input, model, nullptr);
}

Matrix gcn_forward(const treebank::DependencyGraph& graph, const GcnModel& model) {
  const auto ids = word_ids(graph, model.vocab);
  Matrix input(static_cast<Eigen::Index>(ids.size()), model.embeddings.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    input.row(static_cast<Eigen::Index>(i)) = model.embeddings.row(static_cast<Eigen::Index>(ids[i]));
  }
  return forward_impl(gcn_edges(graph), input, model, nullptr);
}

double masked_loss(const GcnModel& model, const std::vector<GcnEdge>& edges,
                   const MaskedExample& example, GcnModel* grad) {
  const auto n = static_cast<Eigen::Index>(example.words.size());
  if (example.negatives.size() != example.masked.size()) {
    fail(ErrorCode::ShapeMismatch, "one negative list per masked position required");
  }
  std::vector<bool> is_masked(example.words.size(), false);
  for (auto m : example.masked) {
    if (m >= example.words.size()) fail(ErrorCode::ShapeMismatch, "masked position out of range");
    is_masked[m] = true;
  }
  Matrix input = Matrix::Zero(n, model.embeddings.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto w = example.words[static_cast<std::size_t>(i)];
    if (w >= model.vocab.size()) fail(ErrorCode::ShapeMismatch, "word id out of range");
    if (!is_masked[static_cast<std::size_t>(i)]) input.row(i) = model.embeddings.row(static_cast<Eigen::Index>(w));
  }
  std::vector<LayerCache> caches;
  const Matrix h = forward_impl(edges, input, model, grad ? &caches : nullptr);

  double loss = 0.0;
  Matrix dh = Matrix::Zero(h.rows(), h.cols());
  for (std::size_t k = 0; k < example.masked.size(); ++k) {
    const auto pos = static_cast<Eigen::Index>(example.masked[k]);
    const auto target = static_cast<Eigen::Index>(example.words[example.masked[k]]);
    const double s = model.output.row(target).dot(h.row(pos));
    loss -= log_sigmoid(s);
    if (grad) {
      const double ds = -(1.0 - sigmoid(s));
      dh.row(pos) += ds * model.output.row(target);
      grad->output.row(target) += ds * h.row(pos);
    }
    for (auto neg : example.negatives[k]) {
      if (neg >= model.vocab.size()) fail(ErrorCode::ShapeMismatch, "negative id out of range");
      const auto nid = static_cast<Eigen::Index>(neg);
      const double sn = model.output.row(nid).dot(h.row(pos));
      loss -= log_sigmoid(-sn);
      if (grad) {
        const double dsn = sigmoid(sn);
        dh.row(pos) += dsn * model.output.row(nid);
        grad->output.row(nid) += dsn * h.row(pos);
      }
    }
  }
  if (!grad) return loss;

  Matrix dcur = std::move(dh);
  for (std::size_t l = model.layers.size(); l-- > 0;) {
    const auto& layer = model.layers[l];
    auto& glayer = grad->layers[l];
    const LayerCache& c = caches[l];
    const Matrix dz = dcur.array() * (c.z.array() > 0.0).cast<double>();
    std::array<Matrix, kDirections> dmsg;
    std::array<Vector, kDirections> dgate;
    for (std::size_t d = 0; d < kDirections; ++d) {
      dmsg[d] = Matrix::Zero(n, dz.cols());
      dgate[d] = Vector::Zero(n);
    }
    for (const auto& e : edges) {
      const auto d = static_cast<std::size_t>(e.dir);
      const auto u = static_cast<Eigen::Index>(e.source);
      const auto v = static_cast<Eigen::Index>(e.target);
      dmsg[d].row(u) += c.gate[d][u] * dz.row(v);
      dgate[d][u] += dz.row(v).dot(c.msg[d].row(u));
    }
    Matrix din = Matrix::Zero(n, c.in.cols());
    for (std::size_t d = 0; d < kDirections; ++d) {
      const auto& p = layer.dir[d];
      auto& gp = glayer.dir[d];
      const Vector da = dgate[d].array() * c.gate[d].array() * (1.0 - c.gate[d].array());
      gp.W += dmsg[d].transpose() * c.in;
      gp.b += dmsg[d].colwise().sum().transpose();
      gp.gate_w += c.in.transpose() * da;
      gp.gate_b += da.sum();
      din += dmsg[d] * p.W + da * p.gate_w.transpose();
    }
    dcur = std::move(din);
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (is_masked[static_cast<std::size_t>(i)]) continue;
    grad->embeddings.row(static_cast<Eigen::Index>(example.words[static_cast<std::size_t>(i)])) += dcur.row(i);
  }
  return loss;
}

NegativeSampler::NegativeSampler(const std::vector<double>& counts, double power) {
  double total = 0.0;
  for (double c : counts) {
    if (c < 0) fail(ErrorCode::InvalidArgument, "negative unigram count");
    total += c > 0 ? std::pow(c, power) : 0.0;
    cumulative_.push_back(total);
  }
  if (!(total > 0.0)) fail(ErrorCode::InvalidArgument, "negative sampler needs a positive count");
}

std::size_t NegativeSampler::sample(Rng& rng) const {
  const double u = rng.uniform() * cumulative_.back();
  const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
  return std::min(static_cast<std::size_t>(it - cumulative_.begin()), cumulative_.size() - 1);
}

MaskedExample make_example(const std::vector<std::size_t>& words, double mask_fraction,
                           std::size_t negatives, const NegativeSampler& sampler, Rng& rng) {
  MaskedExample ex;
  ex.words = words;
  if (words.empty()) return ex;
  const auto m = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(mask_fraction * static_cast<double>(words.size()))), 1,
      words.size());
  std::vector<std::size_t> order(words.size());
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order.begin(), order.end());
  ex.masked.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(m));
  std::sort(ex.masked.begin(), ex.masked.end());
  for (std::size_t k = 0; k < m; ++k) {
    std::vector<std::size_t> negs;
    for (std::size_t j = 0; j < negatives; ++j) negs.push_back(sampler.sample(rng));
    ex.negatives.push_back(std::move(negs));
  }
  return ex;
}

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    fail(ErrorCode::InvalidArgument, "learning rate must be finite and >= 0");
  }
  if (!(mask_fraction > 0.0 && mask_fraction <= 1.0)) {
    fail(ErrorCode::InvalidArgument, "mask fraction must be in (0, 1]");
  }
}

GcnModel gcn_train(const treebank::StimulusCorpus& corpus, const GcnConfig& cfg,
                   const TrainConfig& tc, TrainReport* report) {
  auto vocab = Vocabulary::build(corpus);
  std::set<std::string> rels;
  for (const auto& g : corpus.graphs()) {
    for (const auto& e : g.edges()) rels.insert(e.relation);
  }
  GcnModel model = GcnModel::init(cfg, std::move(vocab), {rels.begin(), rels.end()},
                                  derive_seed(tc.seed, "gcn-init"));
  return gcn_train(corpus, std::move(model), tc, report);
}

GcnModel gcn_train(const treebank::StimulusCorpus& corpus, GcnModel model, const TrainConfig& tc,
                   TrainReport* report) {
  tc.validate();
  model.validate();
  if (!corpus.has_graphs()) fail(ErrorCode::InvalidArgument, "GCN training needs dependency graphs");
  const auto& graphs = corpus.graphs();
  std::vector<std::vector<GcnEdge>> edges;
  std::vector<std::vector<std::size_t>> ids;
  std::vector<double> counts(model.vocab.size(), 0.0);
  for (const auto& g : graphs) {
    edges.push_back(gcn_edges(g));
    ids.push_back(word_ids(g, model.vocab));
    for (auto w : ids.back()) counts[w] += 1.0;
  }
  const NegativeSampler sampler(counts);

  Rng eval_rng(derive_seed(tc.seed, "gcn-eval"));
  std::vector<MaskedExample> eval_set;
  for (const auto& w : ids) eval_set.push_back(make_example(w, tc.mask_fraction, tc.negatives, sampler, eval_rng));
  auto eval_loss = [&] {
    double total = 0.0;
    std::size_t n = 0;
    for (std::size_t s = 0; s < eval_set.size(); ++s) {
      total += masked_loss(model, edges[s], eval_set[s]);
      n += eval_set[s].masked.size();
    }
    return total / static_cast<double>(std::max<std::size_t>(n, 1));
  };

  TrainReport local;
  TrainReport& rep = report ? *report : local;
  rep = TrainReport{};
  rep.eval_loss.push_back(eval_loss());

  Rng rng(derive_seed(tc.seed, "gcn-train"));
  GcnModel grad = model.zeros_like();
  auto model_ptrs = parameter_pointers(model);
  auto grad_ptrs = parameter_pointers(grad);
  std::vector<std::size_t> order(graphs.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 0; epoch < tc.epochs; ++epoch) {
    rng.shuffle(order.begin(), order.end());
    double total = 0.0;
    std::size_t n = 0;
    for (auto s : order) {
      const auto ex = make_example(ids[s], tc.mask_fraction, tc.negatives, sampler, rng);
      for (auto* g : grad_ptrs) *g = 0.0;
      total += masked_loss(model, edges[s], ex, &grad);
      n += ex.masked.size();
      for (std::size_t i = 0; i < model_ptrs.size(); ++i) *model_ptrs[i] -= tc.learning_rate * *grad_ptrs[i];
    }
    const double mean = total / static_cast<double>(std::max<std::size_t>(n, 1));
    if (!std::isfinite(mean)) {
      fail(ErrorCode::DivergenceDetected, "training loss is not finite at epoch " + std::to_string(epoch + 1));
    }
    rep.train_loss.push_back(mean);
    rep.eval_loss.push_back(eval_loss());
  }
  return model;
}

GradCheckResult gradient_check(const GcnModel& model, const treebank::DependencyGraph& graph,
                               double epsilon, ParamSubset subset, std::uint64_t seed) {
  GcnModel m = model;
  const auto edges = gcn_edges(graph);
  const auto ids = word_ids(graph, m.vocab);
  const NegativeSampler sampler(std::vector<double>(m.vocab.size(), 1.0));
  Rng rng(seed);
  const auto ex = make_example(ids, 0.25, 5, sampler, rng);

  GcnModel grad = m.zeros_like();
  masked_loss(m, edges, ex, &grad);
  auto params = parameter_pointers(m, subset);
  auto grads = parameter_pointers(grad, subset);

  GradCheckResult result;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double orig = *params[i];
    *params[i] = orig + epsilon;
    const double lp = masked_loss(m, edges, ex);
    *params[i] = orig - epsilon;
    const double lm = masked_loss(m, edges, ex);
    *params[i] = orig;
    const double numeric = (lp - lm) / (2.0 * epsilon);
    const double analytic = *grads[i];
    const double rel = std::abs(analytic - numeric) / std::max(std::abs(analytic) + std::abs(numeric), 1e-6);
    result.max_relative_error = std::max(result.max_relative_error, rel);
    ++result.checked;
  }
  return result;
}

std::string save_checkpoint(const GcnModel& model) {
  model.validate();
  std::string out(kMagic);
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(model.config.layers));
  put_u32(out, static_cast<std::uint32_t>(model.config.hidden));
  put_u32(out, static_cast<std::uint32_t>(model.config.input_dim));
  put_u32(out, static_cast<std::uint32_t>(model.vocab.size()));
  for (const auto& w : model.vocab.words()) put_string(out, w);
  put_u32(out, static_cast<std::uint32_t>(model.relations.size()));
  for (const auto& r : model.relations) put_string(out, r);
  auto& self = const_cast<GcnModel&>(model);
  for (const double* p : parameter_pointers(self)) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(*p)));
  return out;
}

GcnModel load_checkpoint(std::string_view bytes) {
  ByteReader in(bytes);
  if (in.raw(4) != kMagic) fail(ErrorCode::MalformedCheckpoint, "bad magic (expected GCN1)");
  if (const auto v = in.u32(); v != kVersion) {
    fail(ErrorCode::MalformedCheckpoint, "unsupported checkpoint version " + std::to_string(v));
  }
  GcnConfig cfg;
  cfg.layers = in.u32();
  cfg.hidden = in.u32();
  cfg.input_dim = in.u32();
  try {
    cfg.validate();
  } catch (const Error& e) {
    fail(ErrorCode::MalformedCheckpoint, e.what());
  }
  const auto n_words = in.u32();
  std::vector<std::string> words;
  for (std::uint32_t i = 0; i < n_words; ++i) words.push_back(in.str());
  if (words.empty() || words.front() != "<unk>") fail(ErrorCode::MalformedCheckpoint, "vocabulary must start with <unk>");
  const auto n_rel = in.u32();
  std::vector<std::string> relations;
  for (std::uint32_t i = 0; i < n_rel; ++i) relations.push_back(in.str());

  Vocabulary vocab = Vocabulary::from_words({words.begin() + 1, words.end()});
  if (vocab.words() != words) fail(ErrorCode::MalformedCheckpoint, "vocabulary is not sorted and unique");
  cfg.init_sigma = 0.0;
  GcnModel m = GcnModel::init(cfg, std::move(vocab), std::move(relations), 0);
  for (double* p : parameter_pointers(m)) *p = static_cast<double>(in.f32());
  if (!in.done()) fail(ErrorCode::MalformedCheckpoint, "trailing bytes after parameters");
  m.config.init_sigma = GcnConfig{}.init_sigma;
  m.validate();
  return m;
}

features::FeatureMatrix extract_dep_features(const treebank::StimulusCorpus& corpus, const GcnModel& model) {
  if (!corpus.has_graphs()) fail(ErrorCode::InvalidArgument, "DEP features need dependency graphs");
  model.validate();
  features::FeatureMatrix fm;
  fm.space = features::FeatureSpace::DEP;
  fm.values.resize(static_cast<Eigen::Index>(corpus.token_count()), static_cast<Eigen::Index>(model.config.hidden));
  Eigen::Index row = 0;
  for (const auto& g : corpus.graphs()) {
    const Matrix h = gcn_forward(g, model);
    fm.values.middleRows(row, h.rows()) = h;
    row += h.rows();
  }
  nlohmann::json config;
  config["layers"] = model.config.layers;
  config["hidden"] = model.config.hidden;
  config["input_dim"] = model.config.input_dim;
  config["vocab_size"] = model.vocab.size();
  config["checkpoint_hash"] = hex64(hash64(save_checkpoint(model)));
  fm.meta["space"] = "DEP";
  fm.meta["dim"] = fm.dim();
  fm.meta["config"] = config;
  fm.meta["config_hash"] = features::config_hash(config);
  return fm;
}

}  // namespace synenc::gcn

#pragma once

#include <array>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "synenc/common.hpp"
#include "synenc/syntax_features.hpp"
#include "synenc/treebank.hpp"

namespace synenc::gcn {

enum class Direction { In = 0, Out = 1, Self = 2 };
inline constexpr std::size_t kDirections = 3;

struct GcnConfig {
  std::size_t layers = 2;
  std::size_t hidden = 250;
  std::size_t input_dim = 250;
  double init_sigma = 0.1;  // input embeddings and output table

  void validate() const;
};

// Lower-cased word forms; index 0 is the unknown word.
class Vocabulary {
 public:
  Vocabulary();
  static Vocabulary build(const treebank::StimulusCorpus& corpus);
  static Vocabulary from_words(const std::vector<std::string>& words);

  std::size_t size() const { return words_.size(); }
  std::size_t lookup(std::string_view word) const;  // 0 if unknown
  const std::vector<std::string>& words() const { return words_; }
  bool operator==(const Vocabulary& other) const { return words_ == other.words_; }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct DirectionParams {
  Matrix W;        // H x d_in
  Vector b;        // H
  Vector gate_w;   // d_in
  double gate_b = 0.0;
};

struct LayerParams {
  std::array<DirectionParams, kDirections> dir;
};

struct GcnModel {
  GcnConfig config;
  Vocabulary vocab;
  std::vector<std::string> relations;
  Matrix embeddings;  // |V| x input_dim
  std::vector<LayerParams> layers;
  Matrix output;      // |V| x H, target table for the masked-word objective

  static GcnModel init(const GcnConfig& cfg, Vocabulary vocab, std::vector<std::string> relations,
                       std::uint64_t seed);
  // Same shapes, every parameter zero.
  GcnModel zeros_like() const;
  // Throws ShapeMismatch or DivergenceDetected (non-finite parameter).
  void validate() const;
  std::size_t parameter_count() const;
  bool operator==(const GcnModel& other) const;
};

enum class ParamSubset { All, GatesOnly };

// Pointers to every scalar parameter in a fixed order.
std::vector<double*> parameter_pointers(GcnModel& model, ParamSubset subset = ParamSubset::All);

struct GcnEdge {
  std::size_t target = 0;  // node receiving the message
  std::size_t source = 0;  // node whose state is sent
  Direction dir = Direction::Self;
};

// Head -> dependent edges send an `in` message to the head and an `out`
// message to the dependent; every token also has a self loop. The ROOT
// attachment carries no message.
std::vector<GcnEdge> gcn_edges(const treebank::DependencyGraph& graph);

std::vector<std::size_t> word_ids(const treebank::DependencyGraph& graph, const Vocabulary& vocab);

// Top-layer states (n x H) for the given input rows (n x input_dim).
Matrix gcn_forward(const std::vector<GcnEdge>& edges, const Matrix& input, const GcnModel& model);
Matrix gcn_forward(const treebank::DependencyGraph& graph, const GcnModel& model);

struct MaskedExample {
  std::vector<std::size_t> words;
  std::vector<std::size_t> masked;                  // positions whose input is zeroed
  std::vector<std::vector<std::size_t>> negatives;  // per masked position
};

// Sum over masked positions of -log s(o_w . h) - sum_neg log s(-o_n . h).
// Adds d(loss)/d(param) into `grad` when given.
double masked_loss(const GcnModel& model, const std::vector<GcnEdge>& edges,
                   const MaskedExample& example, GcnModel* grad = nullptr);

class NegativeSampler {
 public:
  // Unigram counts raised to `power`.
  NegativeSampler(const std::vector<double>& counts, double power = 0.75);
  std::size_t sample(Rng& rng) const;

 private:
  std::vector<double> cumulative_;
};

MaskedExample make_example(const std::vector<std::size_t>& words, double mask_fraction,
                           std::size_t negatives, const NegativeSampler& sampler, Rng& rng);

struct TrainConfig {
  double mask_fraction = 0.25;
  std::size_t negatives = 5;
  std::size_t epochs = 30;
  double learning_rate = 0.05;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TrainReport {
  std::vector<double> train_loss;  // mean per masked token, per epoch
  std::vector<double> eval_loss;   // fixed masks and negatives, before epoch 1 then after each
};

// Plain SGD, one sentence per step, in a seeded shuffled order.
GcnModel gcn_train(const treebank::StimulusCorpus& corpus, const GcnConfig& cfg,
                   const TrainConfig& tc, TrainReport* report = nullptr);
// Continues training an existing model.
GcnModel gcn_train(const treebank::StimulusCorpus& corpus, GcnModel model, const TrainConfig& tc,
                   TrainReport* report = nullptr);

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
};

// Analytic vs central-difference gradient of masked_loss on a seeded example.
// Relative error is |a - n| / max(|a| + |n|, 1e-6).
GradCheckResult gradient_check(const GcnModel& model, const treebank::DependencyGraph& graph,
                               double epsilon = 1e-4, ParamSubset subset = ParamSubset::All,
                               std::uint64_t seed = 0);

// "GCN1", u32 version, config block, then little-endian f32 parameter blocks.
std::string save_checkpoint(const GcnModel& model);
GcnModel load_checkpoint(std::string_view bytes);

features::FeatureMatrix extract_dep_features(const treebank::StimulusCorpus& corpus,
                                             const GcnModel& model);

}  // namespace synenc::gcn

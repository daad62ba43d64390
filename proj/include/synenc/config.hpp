#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "synenc/encoder.hpp"
#include "synenc/gcn.hpp"
#include "synenc/incparser.hpp"
#include "synenc/signal.hpp"
#include "synenc/stats.hpp"
#include "synenc/syntax_features.hpp"

namespace synenc::pipeline {

using features::FeatureSpace;

// Spaces in canonical (enum) order without duplicates.
using Group = std::vector<FeatureSpace>;

Group make_group(std::vector<FeatureSpace> spaces);
Group parse_group(std::string_view text);  // "PU+CM"
std::string group_name(const Group& g);

// "B over A": does adding B's columns to A improve prediction.
struct Comparison {
  Group b;
  Group a;
  std::string name() const { return group_name(b) + "-" + group_name(a); }
};

struct StudySpec {
  std::vector<Group> individual;
  std::vector<std::vector<Group>> hierarchical;  // levels, each with alternatives
  Group pairwise;
  std::vector<Comparison> comparisons;

  bool empty() const;
  // Hierarchical, pairwise and explicit comparisons, deduplicated, in order.
  std::vector<Comparison> expand() const;
  // Every group an encoding is needed for.
  std::vector<Group> required_groups() const;
};

enum class FdrScope { Global, PerAnalysis };

struct SubjectInput {
  std::string id;
  std::string fmri;
  std::string parcels;
};

struct RunConfig {
  std::string trees, conllu, timing, frequency, embeddings, probe_targets;
  std::optional<double> run_duration_sec;
  std::vector<SubjectInput> subjects;
  std::vector<FeatureSpace> spaces;
  std::string out;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;

  features::SubtreeEncodingConfig subtree;
  features::PunctuationAttachment pu_attach = features::PunctuationAttachment::PrecedingWord;
  std::size_t pca_dim = 250;
  incparser::ParserConfig parser;
  incparser::InduceConfig induce;
  gcn::GcnConfig gcn;
  gcn::TrainConfig gcn_train;
  signal::ResampleConfig resample;
  signal::FirConfig fir;
  encoder::RidgeConfig ridge;
  std::size_t folds = 4;
  stats::StatsConfig stats;
  FdrScope fdr_scope = FdrScope::Global;
  StudySpec study;
  std::vector<FeatureSpace> probe_spaces;

  // Flat "key = value" text; '#' starts a comment. Relative paths resolve
  // against base_dir. Unknown keys are a ConfigError.
  static RunConfig parse(std::string_view text, const std::string& base_dir = "");
  static RunConfig load(const std::string& path);

  // Overrides one key and re-derives the typed fields.
  void set(const std::string& key, const std::string& value);
  // Every key with its effective value, one per line, sorted.
  std::string to_text() const;
  // Hash of to_text() without `out` and `jobs`.
  std::string hash() const;

  bool has_space(FeatureSpace s) const;
  // Checks that every input a verb needs is configured; throws ConfigError.
  void require_feature_inputs() const;
  void require_fmri_inputs() const;

 private:
  void rebuild();
  std::map<std::string, std::string> entries_;
  std::string base_dir_;
};

}  // namespace synenc::pipeline

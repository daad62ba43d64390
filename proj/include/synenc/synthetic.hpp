#pragma once

#include <string>
#include <vector>

#include "synenc/common.hpp"
#include "synenc/syntax_features.hpp"

namespace synenc::synthetic {

struct SynthConfig {
  std::uint64_t seed = 1;
  std::size_t n_subjects = 3;
  std::size_t n_voxels = 2000;
  std::size_t n_tr = 282;
  double tr_sec = 1.5;
  std::size_t sem_dim = 8;
  double roi_fraction = 0.4;  // share of voxels labeled with a language-ROI parcel

  bool null = false;  // pure noise in every voxel
  features::FeatureSpace planted_space = features::FeatureSpace::CM;
  std::string planted_roi = "AG";
  double snr = 1.0;     // signal variance over noise variance in planted voxels
  double ar_phi = 0.5;  // AR(1) noise coefficient

  // Appended verbatim to the generated run.cfg; later keys may not repeat
  // earlier ones, so the defaults below are only written when absent here.
  std::string extra_config;
};

struct SynthDataset {
  std::string dir;
  std::string config_path;  // <dir>/run.cfg
  std::size_t n_tokens = 0;
  std::size_t n_sentences = 0;
  std::vector<std::string> subjects;
  std::vector<std::vector<std::size_t>> planted_voxels;  // per subject
};

// Story text from a small template grammar with matching trees, CoNLL-U
// (heads from head rules), timing, word frequencies, SEM embeddings, probe
// targets, per-subject parcel labels and fMRI matrices, and a run.cfg.
SynthDataset generate(const SynthConfig& cfg, const std::string& dir);

}  // namespace synenc::synthetic

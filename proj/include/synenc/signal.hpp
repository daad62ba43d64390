#pragma once

#include <string>
#include <vector>

#include "synenc/common.hpp"
#include "synenc/syntax_features.hpp"
#include "synenc/treebank.hpp"

namespace synenc::signal {

enum class ResampleMode { Lanczos, ChunkAverage };

struct ResampleConfig {
  int lobes = 3;
  double tr_sec = 1.5;
  ResampleMode mode = ResampleMode::Lanczos;

  void validate() const;
};

struct FirConfig {
  std::size_t n_delays = 8;
  double window_sec = 12.0;

  // n_delays * tr must equal the window within 1e-9.
  void validate(double tr_sec) const;
};

// sinc(t) sinc(t/a) on |t| < a, with sinc(x) = sin(pi x) / (pi x).
double lanczos_weight(double t, int a);

std::vector<double> word_onsets(const treebank::StimulusCorpus& corpus);

// Word rows to TR rows. TR r is sampled at its midpoint (r + 0.5) * TR.
// Lanczos rows are divided by max(sum of weights, 1): a weighted mean where
// words are dense, the plain weighted sum near edges and pauses. Throws
// NoTimings on an empty timing vector.
Matrix resample_to_tr(const Matrix& features, const std::vector<double>& onsets,
                      const ResampleConfig& cfg, std::size_t n_tr);

// Row r holds [X[r-1], X[r-2], ..., X[r-n]] with zeros before the run start.
Matrix fir_expand(const Matrix& x, const FirConfig& cfg);

struct ZScoreStats {
  Vector mean;
  Vector scale;               // 1 for columns left untouched
  std::vector<bool> constant; // zero-variance columns pass through unchanged
};

// Population (ddof = 0) statistics of the training rows.
ZScoreStats zscore_fit(const Matrix& train, bool warn_constant = true);
Matrix zscore_apply(const ZScoreStats& stats, const Matrix& x);
Matrix zscore_columns(const Matrix& train, const Matrix& apply_to);

struct AlignedDesign {
  Matrix values;  // TR x (D * n_delays)
  std::size_t n_tr = 0;
  std::string source;
};

AlignedDesign align_features(const features::FeatureMatrix& features, const std::vector<double>& onsets,
                             const ResampleConfig& rcfg, const FirConfig& fcfg, std::size_t n_tr);

}  // namespace synenc::signal

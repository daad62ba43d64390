#pragma once

#include <optional>
#include <string>
#include <vector>

#include "synenc/atlas.hpp"
#include "synenc/common.hpp"
#include "synenc/encoder.hpp"

namespace synenc::stats {

struct StatsConfig {
  std::size_t block = 10;
  std::size_t n_permutations = 5000;
  std::size_t n_bootstrap = 5000;
  double q = 0.05;
  std::uint64_t seed = 0;

  void validate() const;
};

// R^2 over all rows against the overall mean of `actual`.
Vector pooled_r2(const Matrix& predicted, const Matrix& actual);

// Within each fold the prediction rows are cut into contiguous blocks (the
// last may be short) whose order is shuffled; the same shuffle applies to
// every voxel. p = (1 + #{permuted R^2 >= observed}) / (1 + n).
Vector block_permutation_test(const Matrix& predicted, const Matrix& actual,
                              const encoder::FoldSpec& folds, const StatsConfig& cfg);

// One-sided test of R^2_A - R^2_B > 0. Blocks are resampled with replacement
// within each fold; p = (1 + #{d_b - d_obs >= d_obs}) / (1 + n).
Vector bootstrap_diff_test(const Matrix& pred_a, const Matrix& pred_b, const Matrix& actual,
                           const encoder::FoldSpec& folds, const StatsConfig& cfg);

struct FdrResult {
  std::optional<double> threshold;  // nullopt when nothing is rejected
  std::vector<bool> reject;
  std::size_t n_rejected = 0;
};

FdrResult bh_fdr(const std::vector<double>& pvals, double q);

struct SubjectResult {
  std::string subject;
  const atlas::ParcelLabels* labels = nullptr;
  std::vector<bool> significant;  // per voxel
  Vector r2;                      // per voxel
};

struct RoiSubjectRow {
  std::string roi;
  atlas::Hemisphere hemisphere = atlas::Hemisphere::Left;
  std::string subject;
  double pct_significant = 0.0;
  double mean_r2 = 0.0;
  std::size_t n_voxels = 0;
};

struct RoiSummaryRow {
  std::string roi;
  atlas::Hemisphere hemisphere = atlas::Hemisphere::Left;
  std::size_t n_subjects = 0;
  double mean_pct = 0.0;
  double se_pct = 0.0;  // population sd / sqrt(N)
  double mean_r2 = 0.0;
  double se_r2 = 0.0;
};

struct RoiReport {
  std::string analysis;
  std::vector<RoiSubjectRow> subjects;  // ROIs without voxels are absent
  std::vector<RoiSummaryRow> summary;
};

// Throws UnknownParcel when a subject's labels do not cover its voxels.
RoiReport roi_aggregate(const std::string& analysis, const std::vector<SubjectResult>& subjects);

}  // namespace synenc::stats

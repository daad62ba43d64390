#pragma once

#include <utility>
#include <vector>

#include "synenc/common.hpp"

namespace synenc::encoder {

struct RidgeConfig {
  std::vector<double> lambdas{1e-3, 1e-2, 1e-1};
  double validation_fraction = 0.2;  // contiguous tail of the training rows
  std::size_t min_fold_rows = 20;

  void validate() const;
  // Sorted ascending, duplicates removed.
  std::vector<double> grid() const;
};

struct FoldSpec {
  std::size_t n_rows = 0;
  std::vector<std::pair<std::size_t, std::size_t>> folds;  // [begin, end)

  // K contiguous folds with boundaries floor(i * n / K).
  static FoldSpec contiguous(std::size_t n_rows, std::size_t k = 4);
  std::size_t size() const { return folds.size(); }
  std::size_t length(std::size_t f) const { return folds.at(f).second - folds.at(f).first; }
  // Throws FoldTooSmall if a fold is shorter than min_rows or the folds do
  // not partition [0, n_rows).
  void validate(std::size_t min_rows) const;
};

struct RidgeModel {
  Matrix W;                    // D x V
  std::vector<double> lambda;  // per voxel
};

// W = (X'X + lambda I)^-1 X'Y by Cholesky, in the primal when D <= n and the
// dual otherwise. No intercept. Throws SingularSystem for lambda <= 0.
RidgeModel ridge_fit(const Matrix& x, const Matrix& y, double lambda);
double ridge_objective(const Matrix& x, const Matrix& y, const Matrix& w, double lambda);

// Column-wise 1 - SS_res / SS_tot around each column's own mean. A constant
// column scores 1 if predicted exactly and 0 otherwise.
Vector r2_score(const Matrix& actual, const Matrix& predicted);

// Predictions of intercept ridge (fit rows centered) for each lambda, via one
// eigendecomposition of the fit-row Gram matrix.
std::vector<Matrix> ridge_predict_grid(const Matrix& x_fit, const Matrix& y_fit, const Matrix& x_eval,
                                       const std::vector<double>& lambdas);

// Per-voxel lambda maximizing R^2 on the contiguous validation tail; ties go
// to the larger lambda.
std::vector<double> select_lambda(const Matrix& x_train, const Matrix& y_train, const RidgeConfig& cfg);

struct VoxelScores {
  FoldSpec folds;
  Matrix fold_r2;      // K x V, held-out mean per fold
  Vector pooled_r2;    // V, over all held-out predictions
  Matrix predictions;  // n x V, each row predicted by the model that held it out
  Matrix lambdas;      // K x V
};

// Per fold: z-score X on the training rows, select lambda, fit with an
// intercept, predict the held-out rows.
VoxelScores cross_validate(const Matrix& x, const Matrix& y, const FoldSpec& folds, const RidgeConfig& cfg);

struct ProbeConfig {
  std::size_t folds = 10;
  std::vector<double> lambdas{1e-1, 1.0, 1e1, 1e2, 1e3, 1e4};
};

// Word-level ridge probe: contiguous folds, z-scored features, lambda per
// target by leave-one-out error on the training rows. Returns the mean held-out
// R^2 across targets and folds.
double semantic_probe(const Matrix& features, const Matrix& targets, const ProbeConfig& cfg = {});

}  // namespace synenc::encoder

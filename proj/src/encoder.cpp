#include "synenc/encoder.hpp"

#include <algorithm>
#include <cmath>

#include "synenc/signal.hpp"

namespace synenc::encoder {

namespace {

Matrix take_rows(const Matrix& m, const std::vector<Eigen::Index>& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
  return out;
}

}  // namespace

void RidgeConfig::validate() const {
  if (lambdas.empty()) fail(ErrorCode::InvalidArgument, "lambda grid is empty");
  for (double l : lambdas) {
    if (!(l > 0.0) || !std::isfinite(l)) fail(ErrorCode::InvalidArgument, "lambda values must be > 0");
  }
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    fail(ErrorCode::InvalidArgument, "validation fraction must be in (0, 1)");
  }
}

std::vector<double> RidgeConfig::grid() const {
  std::vector<double> g = lambdas;
  std::sort(g.begin(), g.end());
  g.erase(std::unique(g.begin(), g.end()), g.end());
  return g;
}

FoldSpec FoldSpec::contiguous(std::size_t n_rows, std::size_t k) {
  if (k < 2) fail(ErrorCode::InvalidArgument, "need at least 2 folds");
  FoldSpec spec;
  spec.n_rows = n_rows;
  for (std::size_t i = 0; i < k; ++i) spec.folds.emplace_back(i * n_rows / k, (i + 1) * n_rows / k);
  return spec;
}

void FoldSpec::validate(std::size_t min_rows) const {
  std::size_t expect = 0;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    const auto [b, e] = folds[f];
    if (b != expect || e < b) fail(ErrorCode::InvalidArgument, "folds must partition the rows in order");
    if (e - b < min_rows) {
      fail(ErrorCode::FoldTooSmall,
           fmt::format("fold {} has {} rows; at least {} required", f, e - b, min_rows));
    }
    expect = e;
  }
  if (expect != n_rows) fail(ErrorCode::InvalidArgument, "folds do not cover every row");
}

RidgeModel ridge_fit(const Matrix& x, const Matrix& y, double lambda) {
  if (!(lambda > 0.0)) fail(ErrorCode::SingularSystem, "ridge needs lambda > 0");
  if (x.rows() != y.rows()) fail(ErrorCode::ShapeMismatch, "X and Y row counts differ");
  if (x.rows() < 1) fail(ErrorCode::InvalidArgument, "ridge needs at least one row");
  if (!x.allFinite() || !y.allFinite()) fail(ErrorCode::DegenerateInput, "non-finite ridge input");
  RidgeModel m;
  if (x.cols() <= x.rows()) {
    Matrix gram = x.transpose() * x;
    gram.diagonal().array() += lambda;
    Eigen::LLT<Matrix> llt(gram);
    if (llt.info() != Eigen::Success) fail(ErrorCode::SingularSystem, "Cholesky of X'X + lambda I failed");
    m.W = llt.solve(x.transpose() * y);
  } else {
    Matrix gram = x * x.transpose();
    gram.diagonal().array() += lambda;
    Eigen::LLT<Matrix> llt(gram);
    if (llt.info() != Eigen::Success) fail(ErrorCode::SingularSystem, "Cholesky of XX' + lambda I failed");
    m.W = x.transpose() * llt.solve(y);
  }
  m.lambda.assign(static_cast<std::size_t>(y.cols()), lambda);
  return m;
}

double ridge_objective(const Matrix& x, const Matrix& y, const Matrix& w, double lambda) {
  return (y - x * w).squaredNorm() + lambda * w.squaredNorm();
}

Vector r2_score(const Matrix& actual, const Matrix& predicted) {
  if (actual.rows() != predicted.rows() || actual.cols() != predicted.cols()) {
    fail(ErrorCode::ShapeMismatch, "R^2 needs equal shapes");
  }
  Vector out(actual.cols());
  const Eigen::RowVectorXd mean = actual.colwise().mean();
  const Eigen::RowVectorXd ss_tot = (actual.rowwise() - mean).colwise().squaredNorm();
  const Eigen::RowVectorXd ss_res = (actual - predicted).colwise().squaredNorm();
  for (Eigen::Index v = 0; v < actual.cols(); ++v) {
    if (ss_tot[v] > 0.0) {
      out[v] = 1.0 - ss_res[v] / ss_tot[v];
    } else {
      out[v] = ss_res[v] == 0.0 ? 1.0 : 0.0;
    }
  }
  return out;
}

std::vector<Matrix> ridge_predict_grid(const Matrix& x_fit, const Matrix& y_fit, const Matrix& x_eval,
                                       const std::vector<double>& lambdas) {
  if (x_fit.rows() != y_fit.rows() || x_fit.cols() != x_eval.cols()) {
    fail(ErrorCode::ShapeMismatch, "ridge prediction shapes disagree");
  }
  if (x_fit.rows() < 1) fail(ErrorCode::InvalidArgument, "ridge needs at least one fit row");
  const Eigen::RowVectorXd x_mean = x_fit.colwise().mean();
  const Eigen::RowVectorXd y_mean = y_fit.colwise().mean();
  const Matrix xc = x_fit.rowwise() - x_mean;
  const Matrix kernel = xc * xc.transpose();
  const Matrix cross = (x_eval.rowwise() - x_mean) * xc.transpose();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(kernel);
  const Vector evals = eig.eigenvalues().cwiseMax(0.0);
  const Matrix a = cross * eig.eigenvectors();
  const Matrix b = eig.eigenvectors().transpose() * (y_fit.rowwise() - y_mean);
  std::vector<Matrix> out;
  for (double lambda : lambdas) {
    if (!(lambda > 0.0)) fail(ErrorCode::SingularSystem, "ridge needs lambda > 0");
    const Vector inv = (evals.array() + lambda).inverse();
    Matrix pred = (a * inv.asDiagonal()) * b;
    pred.rowwise() += y_mean;
    out.push_back(std::move(pred));
  }
  return out;
}

std::vector<double> select_lambda(const Matrix& x_train, const Matrix& y_train, const RidgeConfig& cfg) {
  cfg.validate();
  const auto grid = cfg.grid();
  const Eigen::Index n = x_train.rows();
  const auto n_val = std::max<Eigen::Index>(
      1, static_cast<Eigen::Index>(std::llround(cfg.validation_fraction * static_cast<double>(n))));
  const Eigen::Index n_fit = n - n_val;
  if (n_fit < 2) fail(ErrorCode::FoldTooSmall, "training rows too few for a validation split");
  const Matrix y_val = y_train.bottomRows(n_val);
  const auto preds = ridge_predict_grid(x_train.topRows(n_fit), y_train.topRows(n_fit),
                                        x_train.bottomRows(n_val), grid);
  std::vector<double> best(static_cast<std::size_t>(y_train.cols()), grid.back());
  std::vector<double> best_r2(best.size(), -std::numeric_limits<double>::infinity());
  for (std::size_t g = grid.size(); g-- > 0;) {
    const Vector r2 = r2_score(y_val, preds[g]);
    for (Eigen::Index v = 0; v < r2.size(); ++v) {
      const auto vi = static_cast<std::size_t>(v);
      if (r2[v] > best_r2[vi]) {
        best_r2[vi] = r2[v];
        best[vi] = grid[g];
      }
    }
  }
  return best;
}

VoxelScores cross_validate(const Matrix& x, const Matrix& y, const FoldSpec& folds, const RidgeConfig& cfg) {
  cfg.validate();
  if (x.rows() != y.rows()) {
    fail(ErrorCode::TrMismatch, fmt::format("design has {} rows, response has {}", x.rows(), y.rows()));
  }
  if (folds.n_rows != static_cast<std::size_t>(x.rows())) {
    fail(ErrorCode::InvalidArgument, "fold spec does not match the row count");
  }
  folds.validate(cfg.min_fold_rows);
  const auto grid = cfg.grid();
  const Eigen::Index V = y.cols();
  VoxelScores out;
  out.folds = folds;
  out.fold_r2.resize(static_cast<Eigen::Index>(folds.size()), V);
  out.lambdas.resize(static_cast<Eigen::Index>(folds.size()), V);
  out.predictions.resize(x.rows(), V);

  for (std::size_t f = 0; f < folds.size(); ++f) {
    const auto [b, e] = folds.folds[f];
    std::vector<Eigen::Index> train_rows;
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      if (r < static_cast<Eigen::Index>(b) || r >= static_cast<Eigen::Index>(e)) train_rows.push_back(r);
    }
    const Matrix x_train_raw = take_rows(x, train_rows);
    const Matrix y_train = take_rows(y, train_rows);
    const auto stats = signal::zscore_fit(x_train_raw, false);
    const Matrix x_train = signal::zscore_apply(stats, x_train_raw);
    const auto len = static_cast<Eigen::Index>(e - b);
    const Matrix x_test = signal::zscore_apply(stats, x.middleRows(static_cast<Eigen::Index>(b), len));
    const Matrix y_test = y.middleRows(static_cast<Eigen::Index>(b), len);

    const auto chosen = select_lambda(x_train, y_train, cfg);
    const auto preds = ridge_predict_grid(x_train, y_train, x_test, grid);
    Matrix pred(len, V);
    for (Eigen::Index v = 0; v < V; ++v) {
      const double l = chosen[static_cast<std::size_t>(v)];
      const auto g = static_cast<std::size_t>(std::lower_bound(grid.begin(), grid.end(), l) - grid.begin());
      pred.col(v) = preds[g].col(v);
      out.lambdas(static_cast<Eigen::Index>(f), v) = l;
    }
    out.fold_r2.row(static_cast<Eigen::Index>(f)) = r2_score(y_test, pred).transpose();
    out.predictions.middleRows(static_cast<Eigen::Index>(b), len) = pred;
  }
  out.pooled_r2 = r2_score(y, out.predictions);
  return out;
}

double semantic_probe(const Matrix& features, const Matrix& targets, const ProbeConfig& cfg) {
  if (features.rows() != targets.rows()) fail(ErrorCode::CountMismatch, "probe features and targets differ in rows");
  if (cfg.lambdas.empty()) fail(ErrorCode::InvalidArgument, "probe lambda grid is empty");
  const auto folds = FoldSpec::contiguous(static_cast<std::size_t>(features.rows()), cfg.folds);
  folds.validate(2);
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& [b, e] : folds.folds) {
    std::vector<Eigen::Index> train_rows;
    for (Eigen::Index r = 0; r < features.rows(); ++r) {
      if (r < static_cast<Eigen::Index>(b) || r >= static_cast<Eigen::Index>(e)) train_rows.push_back(r);
    }
    const auto stats = signal::zscore_fit(take_rows(features, train_rows), false);
    const Matrix x_train = signal::zscore_apply(stats, take_rows(features, train_rows));
    const auto len = static_cast<Eigen::Index>(e - b);
    const Matrix x_test = signal::zscore_apply(stats, features.middleRows(static_cast<Eigen::Index>(b), len));
    const Matrix y_train = take_rows(targets, train_rows);
    const Matrix y_test = targets.middleRows(static_cast<Eigen::Index>(b), len);

    const Eigen::RowVectorXd x_mean = x_train.colwise().mean();
    const Eigen::RowVectorXd y_mean = y_train.colwise().mean();
    const Matrix xc = x_train.rowwise() - x_mean;
    const Matrix yc = y_train.rowwise() - y_mean;
    Eigen::BDCSVD<Matrix> svd(xc, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector s = svd.singularValues();
    const Matrix& u = svd.matrixU();
    const Matrix uty = u.transpose() * yc;
    const Matrix xt = (x_test.rowwise() - x_mean) * svd.matrixV();

    const Eigen::Index T = targets.cols();
    Matrix pred(len, T);
    Vector best_err = Vector::Constant(T, std::numeric_limits<double>::infinity());
    for (double lambda : cfg.lambdas) {
      const Vector shrink = s.array().square() / (s.array().square() + lambda);
      const Matrix fitted = u * (shrink.asDiagonal() * uty);
      const Vector leverage = (u.array().square().matrix() * shrink).array() + 1.0 / static_cast<double>(xc.rows());
      const Matrix resid = (yc - fitted).array().colwise() / (1.0 - leverage.array());
      const Vector err = resid.colwise().squaredNorm().transpose();
      const Vector coef = s.array() / (s.array().square() + lambda);
      const Matrix p = (xt * (coef.asDiagonal() * uty)).rowwise() + y_mean;
      for (Eigen::Index t = 0; t < T; ++t) {
        if (err[t] < best_err[t]) {
          best_err[t] = err[t];
          pred.col(t) = p.col(t);
        }
      }
    }
    const Vector r2 = r2_score(y_test, pred);
    total += r2.sum();
    count += static_cast<std::size_t>(r2.size());
  }
  return total / static_cast<double>(count);
}

}  // namespace synenc::encoder

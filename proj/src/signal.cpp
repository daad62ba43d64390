#include "synenc/signal.hpp"

#include <cmath>
#include <numbers>

namespace synenc::signal {

namespace {

double sinc(double x) {
  if (x == 0.0) return 1.0;
  const double px = std::numbers::pi * x;
  return std::sin(px) / px;
}

}  // namespace

void ResampleConfig::validate() const {
  if (lobes < 1) fail(ErrorCode::InvalidArgument, "Lanczos lobes must be >= 1");
  if (!(tr_sec > 0.0) || !std::isfinite(tr_sec)) fail(ErrorCode::InvalidArgument, "TR must be > 0");
}

void FirConfig::validate(double tr_sec) const {
  if (n_delays < 1) fail(ErrorCode::InvalidArgument, "FIR needs at least one delay");
  if (std::abs(static_cast<double>(n_delays) * tr_sec - window_sec) > 1e-9) {
    fail(ErrorCode::InvalidArgument, fmt::format("{} delays x {} s TR != {} s window", n_delays,
                                                 format_double(tr_sec), format_double(window_sec)));
  }
}

double lanczos_weight(double t, int a) {
  if (a < 1) fail(ErrorCode::InvalidArgument, "Lanczos lobes must be >= 1");
  const double at = std::abs(t);
  if (at >= a) return 0.0;
  if (t == 0.0) return 1.0;
  // sin(pi t) is not exactly zero in floating point at integers.
  if (at == std::floor(at)) return 0.0;
  return sinc(t) * sinc(t / a);
}

std::vector<double> word_onsets(const treebank::StimulusCorpus& corpus) {
  if (!corpus.has_timing()) fail(ErrorCode::NoTimings, "corpus has no word timing");
  std::vector<double> out;
  out.reserve(corpus.token_count());
  for (const auto& s : corpus.sentences()) {
    for (const auto& t : s.tokens) out.push_back(t.onset_sec);
  }
  return out;
}

Matrix resample_to_tr(const Matrix& features, const std::vector<double>& onsets,
                      const ResampleConfig& cfg, std::size_t n_tr) {
  cfg.validate();
  if (onsets.empty()) fail(ErrorCode::NoTimings, "no word onsets");
  if (static_cast<Eigen::Index>(onsets.size()) != features.rows()) {
    fail(ErrorCode::CountMismatch, fmt::format("{} onsets for {} feature rows", onsets.size(), features.rows()));
  }
  const auto R = static_cast<Eigen::Index>(n_tr);
  const auto n = static_cast<Eigen::Index>(onsets.size());
  Matrix weights = Matrix::Zero(R, n);
  if (cfg.mode == ResampleMode::Lanczos) {
    for (Eigen::Index r = 0; r < R; ++r) {
      const double t_r = (static_cast<double>(r) + 0.5) * cfg.tr_sec;
      double total = 0.0;
      for (Eigen::Index k = 0; k < n; ++k) {
        const double w = lanczos_weight((t_r - onsets[static_cast<std::size_t>(k)]) / cfg.tr_sec, cfg.lobes);
        weights(r, k) = w;
        total += w;
      }
      // Sparse rows (edges, pauses) keep the plain weighted sum.
      weights.row(r) /= std::max(total, 1.0);
    }
  } else {
    std::vector<double> counts(n_tr, 0.0);
    std::size_t outside = 0;
    for (Eigen::Index k = 0; k < n; ++k) {
      const double pos = onsets[static_cast<std::size_t>(k)] / cfg.tr_sec;
      const auto r = static_cast<long long>(std::floor(pos));
      if (r < 0 || r >= static_cast<long long>(n_tr)) {
        ++outside;
        continue;
      }
      weights(r, k) = 1.0;
      counts[static_cast<std::size_t>(r)] += 1.0;
    }
    for (Eigen::Index r = 0; r < R; ++r) {
      if (counts[static_cast<std::size_t>(r)] > 0) weights.row(r) /= counts[static_cast<std::size_t>(r)];
    }
    if (outside > 0) log::warn("{} words fall outside the {} TRs and were dropped", outside, n_tr);
  }
  return weights * features;
}

Matrix fir_expand(const Matrix& x, const FirConfig& cfg) {
  if (cfg.n_delays < 1) fail(ErrorCode::InvalidArgument, "FIR needs at least one delay");
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  Matrix out = Matrix::Zero(n, d * static_cast<Eigen::Index>(cfg.n_delays));
  for (std::size_t lag = 1; lag <= cfg.n_delays; ++lag) {
    const auto l = static_cast<Eigen::Index>(lag);
    if (l >= n) continue;
    out.block(l, (l - 1) * d, n - l, d) = x.topRows(n - l);
  }
  return out;
}

ZScoreStats zscore_fit(const Matrix& train, bool warn_constant) {
  if (train.rows() < 2) fail(ErrorCode::InvalidArgument, "z-scoring needs at least 2 training rows");
  ZScoreStats s;
  s.mean = train.colwise().mean().transpose();
  s.scale = Vector::Ones(train.cols());
  s.constant.assign(static_cast<std::size_t>(train.cols()), false);
  std::size_t n_constant = 0;
  for (Eigen::Index c = 0; c < train.cols(); ++c) {
    const double var = (train.col(c).array() - s.mean[c]).square().mean();
    const double sd = std::sqrt(var);
    if (!(sd > 1e-12 * std::max(1.0, std::abs(s.mean[c])))) {
      s.constant[static_cast<std::size_t>(c)] = true;
      s.mean[c] = 0.0;
      ++n_constant;
    } else {
      s.scale[c] = sd;
    }
  }
  if (n_constant > 0 && warn_constant) {
    log::warn("{} of {} columns have zero variance and are left unscaled", n_constant, train.cols());
  }
  return s;
}

Matrix zscore_apply(const ZScoreStats& stats, const Matrix& x) {
  if (x.cols() != stats.mean.size()) fail(ErrorCode::ShapeMismatch, "z-score column count mismatch");
  return (x.rowwise() - stats.mean.transpose()).array().rowwise() / stats.scale.transpose().array();
}

Matrix zscore_columns(const Matrix& train, const Matrix& apply_to) {
  return zscore_apply(zscore_fit(train), apply_to);
}

AlignedDesign align_features(const features::FeatureMatrix& features, const std::vector<double>& onsets,
                             const ResampleConfig& rcfg, const FirConfig& fcfg, std::size_t n_tr) {
  fcfg.validate(rcfg.tr_sec);
  features.validate();
  AlignedDesign out;
  out.values = fir_expand(resample_to_tr(features.values, onsets, rcfg, n_tr), fcfg);
  out.n_tr = n_tr;
  out.source = std::string(features::to_string(features.space));
  return out;
}

}  // namespace synenc::signal

#include "synenc/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace synenc::stats {

namespace {

struct Block {
  std::size_t begin = 0;  // absolute row
  std::size_t length = 0;
};

std::vector<std::vector<Block>> fold_blocks(const encoder::FoldSpec& folds, std::size_t block) {
  std::vector<std::vector<Block>> out;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    const auto [b, e] = folds.folds[f];
    if (e - b < block) {
      fail(ErrorCode::FoldShorterThanBlock,
           fmt::format("fold {} has {} rows, shorter than the {}-row block", f, e - b, block));
    }
    std::vector<Block> blocks;
    for (std::size_t s = b; s < e; s += block) blocks.push_back(Block{s, std::min(block, e - s)});
    out.push_back(std::move(blocks));
  }
  return out;
}

void check_shapes(const Matrix& a, const Matrix& b, const encoder::FoldSpec& folds) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) fail(ErrorCode::ShapeMismatch, "prediction and response shapes differ");
  if (folds.n_rows != static_cast<std::size_t>(a.rows())) fail(ErrorCode::ShapeMismatch, "fold spec does not match row count");
}

}  // namespace

void StatsConfig::validate() const {
  if (block < 1) fail(ErrorCode::InvalidArgument, "block size must be >= 1");
  if (!(q > 0.0 && q <= 1.0)) fail(ErrorCode::InvalidArgument, "FDR q must be in (0, 1]");
}

Vector pooled_r2(const Matrix& predicted, const Matrix& actual) {
  return encoder::r2_score(actual, predicted);
}

Vector block_permutation_test(const Matrix& predicted, const Matrix& actual,
                              const encoder::FoldSpec& folds, const StatsConfig& cfg) {
  cfg.validate();
  check_shapes(predicted, actual, folds);
  const auto blocks = fold_blocks(folds, cfg.block);
  const Eigen::Index V = actual.cols();

  // Only the cross term sum_t y_t p_pi(t) of the residual sum of squares
  // depends on the permutation. A block can only land at offsets j*L or
  // j*L + r (r = short block length), so every (block, offset) product is
  // precomputed.
  struct FoldTable {
    std::vector<int> offset_index;  // relative row -> column in table, -1 if impossible
    std::size_t n_offsets = 0;
    Matrix table;                   // (block * n_offsets + offset) x V
  };
  std::vector<FoldTable> tables;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    const auto [fb, fe] = folds.folds[f];
    const std::size_t n = fe - fb;
    const std::size_t r = n % cfg.block;
    FoldTable t;
    t.offset_index.assign(n + 1, -1);
    for (std::size_t j = 0; j * cfg.block < n; ++j) {
      for (std::size_t s : {j * cfg.block, j * cfg.block + r}) {
        if (s < n && t.offset_index[s] < 0) t.offset_index[s] = static_cast<int>(t.n_offsets++);
      }
    }
    const auto& bl = blocks[f];
    t.table = Matrix::Zero(static_cast<Eigen::Index>(bl.size() * t.n_offsets), V);
    for (std::size_t k = 0; k < bl.size(); ++k) {
      for (std::size_t s = 0; s < n; ++s) {
        if (t.offset_index[s] < 0 || s + bl[k].length > n) continue;
        const auto len = static_cast<Eigen::Index>(bl[k].length);
        const auto row = static_cast<Eigen::Index>(k * t.n_offsets + static_cast<std::size_t>(t.offset_index[s]));
        t.table.row(row) = actual.middleRows(static_cast<Eigen::Index>(fb + s), len)
                               .cwiseProduct(predicted.middleRows(static_cast<Eigen::Index>(bl[k].begin), len))
                               .colwise()
                               .sum();
      }
    }
    tables.push_back(std::move(t));
  }

  auto cross_term = [&](const std::vector<std::vector<std::size_t>>& orders) {
    Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(V);
    for (std::size_t f = 0; f < tables.size(); ++f) {
      std::size_t s = 0;
      for (auto k : orders[f]) {
        const auto row = k * tables[f].n_offsets + static_cast<std::size_t>(tables[f].offset_index[s]);
        acc += tables[f].table.row(static_cast<Eigen::Index>(row));
        s += blocks[f][k].length;
      }
    }
    return acc;
  };

  std::vector<std::vector<std::size_t>> orders;
  for (const auto& bl : blocks) {
    std::vector<std::size_t> o(bl.size());
    std::iota(o.begin(), o.end(), 0);
    orders.push_back(std::move(o));
  }
  const Eigen::RowVectorXd observed = cross_term(orders);
  const Eigen::RowVectorXd tol = 1e-12 * (observed.array().abs() + 1.0);
  Eigen::VectorXd exceed = Eigen::VectorXd::Zero(V);
  Rng rng(derive_seed(cfg.seed, "block-permutation"));
  for (std::size_t it = 0; it < cfg.n_permutations; ++it) {
    for (auto& o : orders) {
      std::iota(o.begin(), o.end(), 0);
      rng.shuffle(o.begin(), o.end());
    }
    const Eigen::RowVectorXd c = cross_term(orders);
    for (Eigen::Index v = 0; v < V; ++v) {
      if (c[v] >= observed[v] - tol[v]) exceed[v] += 1.0;
    }
  }
  return (exceed.array() + 1.0) / static_cast<double>(cfg.n_permutations + 1);
}

Vector bootstrap_diff_test(const Matrix& pred_a, const Matrix& pred_b, const Matrix& actual,
                           const encoder::FoldSpec& folds, const StatsConfig& cfg) {
  cfg.validate();
  check_shapes(pred_a, actual, folds);
  check_shapes(pred_b, actual, folds);
  const auto blocks = fold_blocks(folds, cfg.block);
  const Eigen::Index V = actual.cols();

  std::vector<Block> all;
  for (const auto& bl : blocks) all.insert(all.end(), bl.begin(), bl.end());
  const auto nb = static_cast<Eigen::Index>(all.size());
  Vector count(nb);
  Matrix sy(nb, V), syy(nb, V), sa(nb, V), sb(nb, V);
  for (Eigen::Index i = 0; i < nb; ++i) {
    const auto b = static_cast<Eigen::Index>(all[static_cast<std::size_t>(i)].begin);
    const auto len = static_cast<Eigen::Index>(all[static_cast<std::size_t>(i)].length);
    const auto y = actual.middleRows(b, len);
    count[i] = static_cast<double>(len);
    sy.row(i) = y.colwise().sum();
    syy.row(i) = y.colwise().squaredNorm();
    sa.row(i) = (y - pred_a.middleRows(b, len)).colwise().squaredNorm();
    sb.row(i) = (y - pred_b.middleRows(b, len)).colwise().squaredNorm();
  }

  // Rows of `weights` are block multiplicities; returns R^2_A - R^2_B per row.
  auto diff = [&](const Matrix& weights) {
    const Vector n = weights * count;
    const Matrix ty = weights * sy;
    const Matrix tyy = weights * syy;
    const Matrix ta = weights * sa;
    const Matrix tb = weights * sb;
    Matrix d(weights.rows(), V);
    for (Eigen::Index r = 0; r < weights.rows(); ++r) {
      for (Eigen::Index v = 0; v < V; ++v) {
        const double ss_tot = tyy(r, v) - ty(r, v) * ty(r, v) / n[r];
        d(r, v) = ss_tot > 0.0 ? (tb(r, v) - ta(r, v)) / ss_tot : 0.0;
      }
    }
    return d;
  };

  const Eigen::RowVectorXd observed = diff(Matrix::Ones(1, nb)).row(0);
  Vector exceed = Vector::Zero(V);
  Rng rng(derive_seed(cfg.seed, "block-bootstrap"));
  constexpr std::size_t kBatch = 256;
  for (std::size_t done = 0; done < cfg.n_bootstrap; done += kBatch) {
    const auto rows = static_cast<Eigen::Index>(std::min(kBatch, cfg.n_bootstrap - done));
    Matrix weights = Matrix::Zero(rows, nb);
    for (Eigen::Index r = 0; r < rows; ++r) {
      std::size_t offset = 0;
      for (const auto& bl : blocks) {
        for (std::size_t k = 0; k < bl.size(); ++k) {
          weights(r, static_cast<Eigen::Index>(offset + rng.uniform_index(bl.size()))) += 1.0;
        }
        offset += bl.size();
      }
    }
    const Matrix d = diff(weights);
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index v = 0; v < V; ++v) {
        if (d(r, v) - observed[v] >= observed[v]) exceed[v] += 1.0;
      }
    }
  }
  return (exceed.array() + 1.0) / static_cast<double>(cfg.n_bootstrap + 1);
}

FdrResult bh_fdr(const std::vector<double>& pvals, double q) {
  if (!(q > 0.0 && q <= 1.0)) fail(ErrorCode::InvalidArgument, "FDR q must be in (0, 1]");
  for (double p : pvals) {
    if (!(p > 0.0 && p <= 1.0)) fail(ErrorCode::InvalidArgument, "p-values must lie in (0, 1]");
  }
  FdrResult out;
  out.reject.assign(pvals.size(), false);
  const double m = static_cast<double>(pvals.size());
  std::vector<double> sorted = pvals;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t k = sorted.size(); k-- > 0;) {
    if (sorted[k] <= q * static_cast<double>(k + 1) / m) {
      out.threshold = sorted[k];
      break;
    }
  }
  if (!out.threshold) return out;
  for (std::size_t i = 0; i < pvals.size(); ++i) {
    if (pvals[i] <= *out.threshold) {
      out.reject[i] = true;
      ++out.n_rejected;
    }
  }
  return out;
}

RoiReport roi_aggregate(const std::string& analysis, const std::vector<SubjectResult>& subjects) {
  RoiReport report;
  report.analysis = analysis;
  for (const auto& s : subjects) {
    if (!s.labels || s.labels->size() != s.significant.size() ||
        static_cast<std::size_t>(s.r2.size()) != s.significant.size()) {
      fail(ErrorCode::UnknownParcel,
           fmt::format("subject {}: {} voxel scores but {} parcel labels", s.subject, s.significant.size(),
                       s.labels ? s.labels->size() : 0));
    }
  }
  for (const auto& roi : atlas::language_rois()) {
    for (auto hemi : {atlas::Hemisphere::Left, atlas::Hemisphere::Right}) {
      std::vector<double> pct;
      std::vector<double> r2;
      for (const auto& s : subjects) {
        const auto members = atlas::roi_members(roi.name, hemi, *s.labels);
        if (members.empty()) continue;
        double sig = 0.0;
        double sum_r2 = 0.0;
        for (auto v : members) {
          sig += s.significant[v] ? 1.0 : 0.0;
          sum_r2 += s.r2[static_cast<Eigen::Index>(v)];
        }
        RoiSubjectRow row;
        row.roi = roi.name;
        row.hemisphere = hemi;
        row.subject = s.subject;
        row.n_voxels = members.size();
        row.pct_significant = 100.0 * sig / static_cast<double>(members.size());
        row.mean_r2 = sum_r2 / static_cast<double>(members.size());
        pct.push_back(row.pct_significant);
        r2.push_back(row.mean_r2);
        report.subjects.push_back(std::move(row));
      }
      if (pct.empty()) continue;
      auto mean_se = [](const std::vector<double>& x) {
        const double n = static_cast<double>(x.size());
        const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
        double ss = 0.0;
        for (double v : x) ss += (v - mean) * (v - mean);
        return std::pair{mean, std::sqrt(ss / n) / std::sqrt(n)};
      };
      RoiSummaryRow row;
      row.roi = roi.name;
      row.hemisphere = hemi;
      row.n_subjects = pct.size();
      std::tie(row.mean_pct, row.se_pct) = mean_se(pct);
      std::tie(row.mean_r2, row.se_r2) = mean_se(r2);
      report.summary.push_back(std::move(row));
    }
  }
  return report;
}

}  // namespace synenc::stats

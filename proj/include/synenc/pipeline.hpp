#pragma once

#include <functional>
#include <string>
#include <vector>

#include "synenc/atlas.hpp"
#include "synenc/config.hpp"
#include "synenc/encoder.hpp"
#include "synenc/report.hpp"
#include "synenc/syntax_features.hpp"
#include "synenc/treebank.hpp"

namespace synenc::pipeline {

// Output layout under cfg.out:
//   features/<SPACE>.bmat, features/<SPACE>.json
//   encode/<GROUP>/<subject>.pred.bmat   held-out predictions, TR x V
//   encode/<GROUP>/<subject>.r2.bmat     row 0 pooled R^2, rows 1..K per fold
//   encode/<GROUP>/<subject>.json
//   compare/<ANALYSIS>/<subject>.p.bmat, <subject>.sig.bmat, significance.json, roi_report.{csv,json}
//   report/report.{csv,json}, report/report_{L,R}.svg
std::string features_dir(const RunConfig& cfg);
std::string encode_dir(const RunConfig& cfg, const Group& g);
std::string compare_dir(const RunConfig& cfg, const std::string& analysis);

// Trees (+ CoNLL-U when configured) with timing attached when configured.
treebank::StimulusCorpus load_corpus(const RunConfig& cfg);

features::FeatureMatrix build_space(const RunConfig& cfg, const treebank::StimulusCorpus& corpus,
                                    features::FeatureSpace space);

// Z-score the word rows of one space, resample to n_tr and FIR-expand; the
// transform the encoder sees.
Matrix aligned_design(const RunConfig& cfg, const treebank::StimulusCorpus& corpus, const Matrix& word_features,
                      std::size_t n_tr);

struct Subject {
  std::string id;
  Matrix fmri;  // TR x V
  atlas::ParcelLabels labels;
};

// Loads every configured subject; TrMismatch if TR counts differ, and
// UnknownParcel if labels do not cover the voxels.
std::vector<Subject> load_subjects(const RunConfig& cfg);

// Runs fn(i) for i in [0, n) on up to `jobs` threads. The first exception
// (lowest index) is rethrown after all workers stop.
void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn);

void cmd_features(const RunConfig& cfg);
void cmd_encode(const RunConfig& cfg);
std::vector<stats::RoiReport> cmd_compare(const RunConfig& cfg);
report::Report cmd_report(const RunConfig& cfg);

struct ProbeRow {
  features::FeatureSpace space;
  double r2 = 0.0;
};
std::vector<ProbeRow> cmd_probe(const RunConfig& cfg);

// Quick built-in checks of the numerical core; prints one line each.
bool cmd_selftest(std::ostream& out);

}  // namespace synenc::pipeline

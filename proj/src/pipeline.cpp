#include "synenc/pipeline.hpp"

#include <atomic>
#include <exception>
#include <filesystem>
#include <map>
#include <ostream>
#include <thread>

#include "synenc/bmat.hpp"
#include "synenc/gcn.hpp"
#include "synenc/incparser.hpp"
#include "synenc/signal.hpp"
#include "synenc/stats.hpp"

namespace synenc::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;
using features::FeatureSpace;

namespace {

std::string space_name(FeatureSpace s) { return std::string(features::to_string(s)); }

void write_json(const std::string& path, const json& j) { write_file(path, j.dump(2) + "\n"); }

json read_json(const std::string& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::exception& e) {
    fail(ErrorCode::IoError, path + ": " + e.what());
  }
}

// Fails with `code` when the sidecar was produced under another config.
void check_hash(const json& sidecar, const RunConfig& cfg, const std::string& path, ErrorCode code) {
  const auto it = sidecar.find("config_hash");
  const std::string found = it == sidecar.end() ? "<none>" : it->get<std::string>();
  if (found != cfg.hash()) {
    fail(code, fmt::format("{} was written with config hash {}, current config is {}", path, found, cfg.hash()));
  }
}

Matrix load_space(const RunConfig& cfg, FeatureSpace s) {
  const auto base = features_dir(cfg) + "/" + space_name(s);
  if (!fs::exists(base + ".bmat") || !fs::exists(base + ".json")) {
    fail(ErrorCode::MissingEncoding, "features for " + space_name(s) + " not found; run `features` first");
  }
  check_hash(read_json(base + ".json"), cfg, base + ".json", ErrorCode::HashMismatch);
  return bmat::read(base + ".bmat");
}

struct Encoded {
  Matrix predictions;
  json sidecar;
};

Encoded load_encoding(const RunConfig& cfg, const Group& g, const std::string& subject) {
  const auto base = encode_dir(cfg, g) + "/" + subject;
  if (!fs::exists(base + ".pred.bmat") || !fs::exists(base + ".json")) {
    fail(ErrorCode::MissingEncoding, "no encoding of " + group_name(g) + " for subject " + subject);
  }
  Encoded e;
  e.sidecar = read_json(base + ".json");
  check_hash(e.sidecar, cfg, base + ".json", ErrorCode::HashMismatch);
  e.predictions = bmat::read(base + ".pred.bmat");
  return e;
}

Matrix row_of(const std::vector<double>& v) {
  Matrix m(1, static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) m(0, static_cast<Eigen::Index>(i)) = v[i];
  return m;
}

std::string scope_name(FdrScope s) { return s == FdrScope::Global ? "global" : "per_analysis"; }

}  // namespace

std::string features_dir(const RunConfig& cfg) { return cfg.out + "/features"; }
std::string encode_dir(const RunConfig& cfg, const Group& g) { return cfg.out + "/encode/" + group_name(g); }
std::string compare_dir(const RunConfig& cfg, const std::string& analysis) {
  return cfg.out + "/compare/" + analysis;
}

treebank::StimulusCorpus load_corpus(const RunConfig& cfg) {
  if (cfg.trees.empty()) fail(ErrorCode::ConfigError, "'trees' is not configured");
  auto trees = treebank::parse_tree_file(read_file(cfg.trees));
  std::vector<treebank::DependencyGraph> graphs;
  if (!cfg.conllu.empty()) graphs = treebank::parse_conllu(read_file(cfg.conllu));
  auto corpus = treebank::StimulusCorpus::build(std::move(trees), std::move(graphs));
  if (!cfg.timing.empty()) corpus = corpus.with_timing(read_file(cfg.timing), cfg.run_duration_sec);
  return corpus;
}

features::FeatureMatrix build_space(const RunConfig& cfg, const treebank::StimulusCorpus& corpus,
                                    FeatureSpace space) {
  switch (space) {
    case FeatureSpace::PU:
      return features::punctuation_features(corpus, cfg.pu_attach);
    case FeatureSpace::CM:
      return features::complexity_metrics(corpus, features::FrequencyTable::parse(read_file(cfg.frequency)));
    case FeatureSpace::PD:
      return features::pos_dep_features(corpus);
    case FeatureSpace::CC:
      return features::cc_features(corpus, cfg.subtree);
    case FeatureSpace::CI:
      return features::ci_features(corpus, cfg.subtree);
    case FeatureSpace::INC: {
      const auto g = incparser::induce_pcfg(corpus.trees(), cfg.induce);
      auto res = incparser::inc_feature_matrix(corpus, g, cfg.parser, cfg.subtree);
      return std::move(res.features);
    }
    case FeatureSpace::DEP: {
      const auto model = gcn::gcn_train(corpus, cfg.gcn, cfg.gcn_train);
      return gcn::extract_dep_features(corpus, model);
    }
    case FeatureSpace::SEM: {
      features::FeatureMatrix raw;
      raw.space = FeatureSpace::SEM;
      raw.values = bmat::read(cfg.embeddings);
      if (static_cast<std::size_t>(raw.values.rows()) != corpus.token_count()) {
        fail(ErrorCode::CountMismatch, fmt::format("embeddings have {} rows, corpus has {} tokens", raw.values.rows(),
                                                   corpus.token_count()));
      }
      raw.meta = {{"space", "SEM"}, {"source_dim", raw.values.cols()}};
      if (static_cast<std::size_t>(raw.values.cols()) <= cfg.pca_dim) return raw;
      auto pca = features::pca_reduce(raw, cfg.pca_dim);
      pca.scores.space = FeatureSpace::SEM;
      pca.scores.meta["source_dim"] = raw.values.cols();
      return std::move(pca.scores);
    }
  }
  fail(ErrorCode::InvalidArgument, "unhandled feature space");
}

Matrix aligned_design(const RunConfig& cfg, const treebank::StimulusCorpus& corpus, const Matrix& word_features,
                      std::size_t n_tr) {
  const auto onsets = signal::word_onsets(corpus);
  const Matrix z = signal::zscore_apply(signal::zscore_fit(word_features, false), word_features);
  return signal::fir_expand(signal::resample_to_tr(z, onsets, cfg.resample, n_tr), cfg.fir);
}

std::vector<Subject> load_subjects(const RunConfig& cfg) {
  cfg.require_fmri_inputs();
  std::vector<Subject> out;
  for (const auto& s : cfg.subjects) {
    Subject sub;
    sub.id = s.id;
    sub.fmri = bmat::read(s.fmri);
    sub.labels = atlas::ParcelLabels::parse(read_file(s.parcels));
    if (sub.labels.size() != static_cast<std::size_t>(sub.fmri.cols())) {
      fail(ErrorCode::UnknownParcel, fmt::format("subject {}: {} voxels but {} parcel labels", s.id, sub.fmri.cols(),
                                                 sub.labels.size()));
    }
    if (!out.empty() && out.front().fmri.rows() != sub.fmri.rows()) {
      fail(ErrorCode::TrMismatch, fmt::format("subject {} has {} TRs, subject {} has {}", s.id, sub.fmri.rows(),
                                              out.front().id, out.front().fmri.rows()));
    }
    out.push_back(std::move(sub));
  }
  return out;
}

void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::min(std::max<std::size_t>(1, jobs), n);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

void cmd_features(const RunConfig& cfg) {
  cfg.require_feature_inputs();
  const auto corpus = load_corpus(cfg);
  const auto dir = features_dir(cfg);
  fs::create_directories(dir);
  std::vector<features::FeatureMatrix> built(cfg.spaces.size());
  parallel_for(cfg.spaces.size(), cfg.jobs, [&](std::size_t i) {
    log::info("building {}", space_name(cfg.spaces[i]));
    built[i] = build_space(cfg, corpus, cfg.spaces[i]);
    built[i].validate();
  });
  for (std::size_t i = 0; i < cfg.spaces.size(); ++i) {
    const auto& fm = built[i];
    const auto base = dir + "/" + space_name(cfg.spaces[i]);
    bmat::write(base + ".bmat", fm.values);
    write_json(base + ".json", {{"space", space_name(cfg.spaces[i])},
                                {"rows", fm.rows()},
                                {"dim", fm.dim()},
                                {"config_hash", cfg.hash()},
                                {"seed", cfg.seed},
                                {"meta", fm.meta}});
  }
}

void cmd_encode(const RunConfig& cfg) {
  const auto subjects = load_subjects(cfg);
  const auto corpus = load_corpus(cfg);
  const auto n_tr = static_cast<std::size_t>(subjects.front().fmri.rows());
  const auto folds = encoder::FoldSpec::contiguous(n_tr, cfg.folds);
  folds.validate(cfg.ridge.min_fold_rows);

  const auto groups = cfg.study.required_groups();
  std::map<FeatureSpace, Matrix> designs;
  for (const auto& g : groups) {
    for (auto s : g) {
      if (!designs.count(s)) designs[s] = aligned_design(cfg, corpus, load_space(cfg, s), n_tr);
    }
  }

  struct Unit {
    const Group* group;
    const Subject* subject;
  };
  std::vector<Unit> units;
  std::vector<Matrix> group_designs;
  group_designs.reserve(groups.size());
  for (const auto& g : groups) {
    Eigen::Index cols = 0;
    for (auto s : g) cols += designs[s].cols();
    Matrix x(static_cast<Eigen::Index>(n_tr), cols);
    Eigen::Index c = 0;
    for (auto s : g) {
      x.middleCols(c, designs[s].cols()) = designs[s];
      c += designs[s].cols();
    }
    group_designs.push_back(std::move(x));
    for (const auto& sub : subjects) units.push_back({&g, &sub});
  }

  std::vector<encoder::VoxelScores> scores(units.size());
  parallel_for(units.size(), cfg.jobs, [&](std::size_t i) {
    const auto gi = i / subjects.size();
    log::info("encoding {} for {}", group_name(*units[i].group), units[i].subject->id);
    scores[i] = encoder::cross_validate(group_designs[gi], units[i].subject->fmri, folds, cfg.ridge);
  });

  for (std::size_t i = 0; i < units.size(); ++i) {
    const auto& sc = scores[i];
    const auto dir = encode_dir(cfg, *units[i].group);
    fs::create_directories(dir);
    const auto base = dir + "/" + units[i].subject->id;
    bmat::write(base + ".pred.bmat", sc.predictions);
    Matrix r2(1 + sc.fold_r2.rows(), sc.pooled_r2.size());
    r2.row(0) = sc.pooled_r2.transpose();
    r2.bottomRows(sc.fold_r2.rows()) = sc.fold_r2;
    bmat::write(base + ".r2.bmat", r2);
    std::map<std::string, std::size_t> lambda_counts;
    for (Eigen::Index k = 0; k < sc.lambdas.size(); ++k) ++lambda_counts[format_double(sc.lambdas.data()[k])];
    json fold_list = json::array();
    for (const auto& [b, e] : folds.folds) fold_list.push_back({b, e});
    write_json(base + ".json", {{"group", group_name(*units[i].group)},
                                {"subject", units[i].subject->id},
                                {"config_hash", cfg.hash()},
                                {"seed", cfg.seed},
                                {"n_tr", n_tr},
                                {"n_voxels", sc.pooled_r2.size()},
                                {"design_columns", group_designs[i / subjects.size()].cols()},
                                {"folds", fold_list},
                                {"lambda_counts", lambda_counts},
                                {"mean_pooled_r2", sc.pooled_r2.mean()}});
  }
}

std::vector<stats::RoiReport> cmd_compare(const RunConfig& cfg) {
  const auto subjects = load_subjects(cfg);
  const auto n_tr = static_cast<std::size_t>(subjects.front().fmri.rows());
  const auto folds = encoder::FoldSpec::contiguous(n_tr, cfg.folds);

  struct Analysis {
    std::string name;
    Group b;
    std::optional<Group> a;  // set for comparisons
  };
  std::vector<Analysis> analyses;
  for (const auto& g : cfg.study.individual) analyses.push_back({group_name(g), g, std::nullopt});
  for (const auto& c : cfg.study.expand()) analyses.push_back({c.name(), c.b, c.a});

  // Everything is loaded before any statistics run.
  const std::size_t n_units = analyses.size() * subjects.size();
  std::vector<Matrix> pred_b(n_units);
  std::vector<Matrix> pred_a(n_units);
  for (std::size_t i = 0; i < n_units; ++i) {
    const auto& an = analyses[i / subjects.size()];
    const auto& sub = subjects[i % subjects.size()];
    pred_b[i] = load_encoding(cfg, an.b, sub.id).predictions;
    if (an.a) pred_a[i] = load_encoding(cfg, *an.a, sub.id).predictions;
    if (pred_b[i].rows() != sub.fmri.rows() || pred_b[i].cols() != sub.fmri.cols()) {
      fail(ErrorCode::TrMismatch, fmt::format("{} predictions for {} are {}x{}, fMRI is {}x{}", an.name, sub.id,
                                              pred_b[i].rows(), pred_b[i].cols(), sub.fmri.rows(), sub.fmri.cols()));
    }
  }

  std::vector<Vector> pvals(n_units);
  std::vector<Vector> effect(n_units);
  parallel_for(n_units, cfg.jobs, [&](std::size_t i) {
    const auto& an = analyses[i / subjects.size()];
    const auto& sub = subjects[i % subjects.size()];
    auto sc = cfg.stats;
    sc.seed = derive_seed(cfg.seed, "compare", an.name, sub.id);
    log::info("testing {} for {}", an.name, sub.id);
    if (an.a) {
      pvals[i] = stats::bootstrap_diff_test(pred_b[i], pred_a[i], sub.fmri, folds, sc);
      effect[i] = stats::pooled_r2(pred_b[i], sub.fmri) - stats::pooled_r2(pred_a[i], sub.fmri);
    } else {
      pvals[i] = stats::block_permutation_test(pred_b[i], sub.fmri, folds, sc);
      effect[i] = stats::pooled_r2(pred_b[i], sub.fmri);
    }
  });

  // FDR runs within each subject, pooling analyses when the scope is global.
  std::vector<std::vector<bool>> significant(n_units);
  std::vector<std::optional<double>> thresholds(n_units);
  for (std::size_t s = 0; s < subjects.size(); ++s) {
    std::vector<std::vector<std::size_t>> pools;
    if (cfg.fdr_scope == FdrScope::Global) {
      pools.emplace_back();
      for (std::size_t a = 0; a < analyses.size(); ++a) pools.back().push_back(a * subjects.size() + s);
    } else {
      for (std::size_t a = 0; a < analyses.size(); ++a) pools.push_back({a * subjects.size() + s});
    }
    for (const auto& pool : pools) {
      std::vector<double> p;
      for (auto i : pool) p.insert(p.end(), pvals[i].data(), pvals[i].data() + pvals[i].size());
      const auto res = stats::bh_fdr(p, cfg.stats.q);
      std::size_t offset = 0;
      for (auto i : pool) {
        const auto n = static_cast<std::size_t>(pvals[i].size());
        significant[i].assign(res.reject.begin() + static_cast<std::ptrdiff_t>(offset),
                              res.reject.begin() + static_cast<std::ptrdiff_t>(offset + n));
        thresholds[i] = res.threshold;
        offset += n;
      }
    }
  }

  std::vector<stats::RoiReport> reports;
  for (std::size_t a = 0; a < analyses.size(); ++a) {
    const auto& an = analyses[a];
    const auto dir = compare_dir(cfg, an.name);
    fs::create_directories(dir);
    std::vector<stats::SubjectResult> results;
    json record = {{"analysis", an.name},
                   {"test", an.a ? "block_bootstrap_difference" : "block_permutation"},
                   {"config_hash", cfg.hash()},
                   {"seed", cfg.seed},
                   {"q", cfg.stats.q},
                   {"fdr_scope", scope_name(cfg.fdr_scope)},
                   {"subjects", json::array()}};
    for (std::size_t s = 0; s < subjects.size(); ++s) {
      const auto i = a * subjects.size() + s;
      const auto& sub = subjects[s];
      std::vector<double> sig(significant[i].size());
      std::size_t n_sig = 0;
      for (std::size_t v = 0; v < sig.size(); ++v) {
        sig[v] = significant[i][v] ? 1.0 : 0.0;
        n_sig += significant[i][v] ? 1 : 0;
      }
      bmat::write(dir + "/" + sub.id + ".p.bmat", pvals[i].transpose());
      bmat::write(dir + "/" + sub.id + ".sig.bmat", row_of(sig));
      record["subjects"].push_back({{"subject", sub.id},
                                    {"threshold", thresholds[i] ? json(*thresholds[i]) : json(nullptr)},
                                    {"n_significant", n_sig},
                                    {"n_voxels", sig.size()}});
      results.push_back({sub.id, &sub.labels, significant[i], effect[i]});
    }
    write_json(dir + "/significance.json", record);
    auto rep = stats::roi_aggregate(an.name, results);
    report::write_roi_report(dir, rep, cfg.hash());
    reports.push_back(std::move(rep));
  }
  return reports;
}

report::Report cmd_report(const RunConfig& cfg) {
  std::vector<std::string> names;
  for (const auto& g : cfg.study.individual) names.push_back(group_name(g));
  for (const auto& c : cfg.study.expand()) names.push_back(c.name());
  std::vector<report::HashedReport> inputs;
  for (const auto& name : names) {
    const auto dir = compare_dir(cfg, name);
    if (!fs::exists(dir + "/roi_report.json")) {
      fail(ErrorCode::MissingEncoding, "no ROI report for " + name + "; run `compare` first");
    }
    report::HashedReport in;
    in.report = report::read_roi_report(dir, &in.config_hash);
    inputs.push_back(std::move(in));
  }
  auto rep = report::assemble(inputs);
  if (!inputs.empty() && rep.config_hash != cfg.hash()) {
    fail(ErrorCode::HashMismatch,
         fmt::format("ROI reports carry config hash {}, current config is {}", rep.config_hash, cfg.hash()));
  }
  rep.config_hash = cfg.hash();
  report::write_report(cfg.out + "/report", rep);
  return rep;
}

std::vector<ProbeRow> cmd_probe(const RunConfig& cfg) {
  if (cfg.probe_targets.empty()) fail(ErrorCode::ConfigError, "'probe_targets' is required for the probe");
  const Matrix targets = bmat::read(cfg.probe_targets);
  std::vector<ProbeRow> rows;
  std::string csv = "# config_hash=" + cfg.hash() + "\nspace,r2\n";
  json j = {{"config_hash", cfg.hash()}, {"seed", cfg.seed}, {"rows", json::array()}};
  for (auto s : cfg.probe_spaces) {
    const Matrix x = load_space(cfg, s);
    if (x.rows() != targets.rows()) {
      fail(ErrorCode::CountMismatch, fmt::format("{} has {} rows, probe targets have {}", space_name(s), x.rows(),
                                                 targets.rows()));
    }
    const double r2 = encoder::semantic_probe(x, targets);
    rows.push_back({s, r2});
    csv += space_name(s) + "," + format_double(r2) + "\n";
    j["rows"].push_back({{"space", space_name(s)}, {"r2", r2}});
  }
  fs::create_directories(cfg.out + "/probe");
  write_file(cfg.out + "/probe/probe.csv", csv);
  write_json(cfg.out + "/probe/probe.json", j);
  return rows;
}

bool cmd_selftest(std::ostream& out) {
  bool all = true;
  auto check = [&](const std::string& name, bool ok) {
    out << (ok ? "ok   " : "FAIL ") << name << "\n";
    all = all && ok;
  };
  check("lanczos weights at integers", signal::lanczos_weight(0.0, 3) == 1.0 && signal::lanczos_weight(1.0, 3) == 0.0 &&
                                           signal::lanczos_weight(-2.0, 3) == 0.0 &&
                                           signal::lanczos_weight(3.0, 3) == 0.0);
  {
    const auto res = stats::bh_fdr({0.01, 0.02, 0.5}, 0.05);
    check("benjamini-hochberg worked example", res.reject == std::vector<bool>{true, true, false});
  }
  {
    Matrix x(3, 2);
    x << 1, 0, 0, 1, 1, 1;
    Matrix y(3, 1);
    y << 1, 2, 3;
    // (X'X + I)^-1 X'y with X'X = [[2,1],[1,2]], X'y = [4,5].
    const auto m = encoder::ridge_fit(x, y, 1.0);
    check("ridge closed form", std::abs(m.W(0, 0) - 7.0 / 8.0) < 1e-12 && std::abs(m.W(1, 0) - 11.0 / 8.0) < 1e-12);
  }
  {
    Matrix m(2, 3);
    m << 0.5, -1.25, 3, 4, 1e-3, -7;
    const Matrix back = bmat::decode(bmat::encode(m));
    check("bmat round trip", back == bmat::round_to_f32(m));
  }
  {
    Matrix x = Matrix::Zero(4, 1);
    x(0, 0) = 1.0;
    const Matrix f = signal::fir_expand(x, {2, 3.0});
    check("fir impulse", f(1, 0) == 1.0 && f(2, 1) == 1.0 && f.sum() == 2.0);
  }
  return all;
}

}  // namespace synenc::pipeline

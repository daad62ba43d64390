#include "synenc/config.hpp"

#include <algorithm>
#include <filesystem>
#include <set>

namespace synenc::pipeline {

namespace {

const std::map<std::string, std::string>& defaults() {
  static const std::map<std::string, std::string> d = {
      {"trees", ""},
      {"conllu", ""},
      {"timing", ""},
      {"frequency", ""},
      {"embeddings", ""},
      {"probe_targets", ""},
      {"run_duration_sec", ""},
      {"fmri", ""},
      {"parcels", ""},
      {"spaces", "PU, CM, PD, CC, CI, INC, DEP, SEM"},
      {"out", "out"},
      {"seed", "0"},
      {"jobs", "1"},
      {"subtree_dim", "250"},
      {"subtree_mode", "hashed_production_counts"},
      {"subtree_max_depth", ""},
      {"subtree_lexicalized", "false"},
      {"pu_attach", "preceding_word"},
      {"pca_dim", "250"},
      {"beam_width", "10"},
      {"max_expansions", "25"},
      {"pcfg_add_k", "0"},
      {"pcfg_unk", "true"},
      {"gcn_layers", "2"},
      {"gcn_hidden", "250"},
      {"gcn_input_dim", "250"},
      {"gcn_epochs", "30"},
      {"gcn_lr", "0.05"},
      {"gcn_negatives", "5"},
      {"gcn_mask_fraction", "0.25"},
      {"tr_sec", "1.5"},
      {"resample", "lanczos"},
      {"lanczos_lobes", "3"},
      {"n_delays", "8"},
      {"fir_window_sec", "12"},
      {"lambdas", "0.001, 0.01, 0.1"},
      {"validation_fraction", "0.2"},
      {"folds", "4"},
      {"min_fold_rows", "20"},
      {"block", "10"},
      {"n_permutations", "5000"},
      {"n_bootstrap", "5000"},
      {"fdr_q", "0.05"},
      {"fdr_scope", "global"},
      {"individual", ""},
      {"hierarchical", ""},
      {"pairwise", ""},
      {"comparisons", ""},
      {"probe_spaces", ""},
  };
  return d;
}

const std::set<std::string> kPathKeys = {"trees", "conllu", "timing", "frequency", "embeddings", "probe_targets", "out"};

std::vector<std::string> list_of(std::string_view value, char sep = ',') {
  std::vector<std::string> out;
  for (const auto& item : split(value, sep)) {
    const auto t = trim(item);
    if (!t.empty()) out.emplace_back(t);
  }
  return out;
}

FeatureSpace space_of(std::string_view name) {
  const auto s = features::parse_space(name);
  if (!s) fail(ErrorCode::ConfigError, "unknown feature space '" + std::string(name) + "'");
  return *s;
}

std::string resolve(const std::string& base, const std::string& path) {
  if (path.empty() || base.empty()) return path;
  const std::filesystem::path p(path);
  if (p.is_absolute()) return path;
  return (std::filesystem::path(base) / p).lexically_normal().string();
}

}  // namespace

Group make_group(std::vector<FeatureSpace> spaces) {
  std::sort(spaces.begin(), spaces.end());
  spaces.erase(std::unique(spaces.begin(), spaces.end()), spaces.end());
  return spaces;
}

Group parse_group(std::string_view text) {
  std::vector<FeatureSpace> spaces;
  for (const auto& s : list_of(text, '+')) spaces.push_back(space_of(s));
  if (spaces.empty()) fail(ErrorCode::ConfigError, "empty feature group");
  return make_group(std::move(spaces));
}

std::string group_name(const Group& g) {
  std::string out;
  for (auto s : g) {
    if (!out.empty()) out += '+';
    out += features::to_string(s);
  }
  return out;
}

bool StudySpec::empty() const {
  return individual.empty() && hierarchical.empty() && pairwise.empty() && comparisons.empty();
}

std::vector<Comparison> StudySpec::expand() const {
  std::vector<Comparison> out;
  std::set<std::string> seen;
  auto add = [&](Comparison c) {
    if (seen.insert(c.name()).second) out.push_back(std::move(c));
  };
  std::vector<Group> branches{Group{}};
  for (std::size_t level = 0; level < hierarchical.size(); ++level) {
    std::vector<Group> next;
    for (const auto& base : branches) {
      for (const auto& alt : hierarchical[level]) {
        Group g = base;
        g.insert(g.end(), alt.begin(), alt.end());
        g = make_group(std::move(g));
        if (level > 0) {
          if (g.size() <= base.size()) {
            fail(ErrorCode::ConfigError, "hierarchical level " + std::to_string(level + 1) + " adds no new space to " +
                                             group_name(base));
          }
          add(Comparison{g, base});
        }
        next.push_back(std::move(g));
      }
    }
    branches = std::move(next);
  }
  for (auto x : pairwise) {
    for (auto y : pairwise) {
      if (x != y) add(Comparison{make_group({x, y}), Group{x}});
    }
  }
  for (const auto& c : comparisons) add(c);
  return out;
}

std::vector<Group> StudySpec::required_groups() const {
  std::vector<Group> out;
  std::set<std::string> seen;
  auto add = [&](const Group& g) {
    if (seen.insert(group_name(g)).second) out.push_back(g);
  };
  for (const auto& g : individual) add(g);
  for (const auto& c : expand()) {
    add(c.a);
    add(c.b);
  }
  return out;
}

RunConfig RunConfig::parse(std::string_view text, const std::string& base_dir) {
  RunConfig cfg;
  cfg.base_dir_ = base_dir;
  cfg.entries_ = defaults();
  std::size_t line_no = 0;
  std::set<std::string> given;
  for (const auto& raw : split(text, '\n')) {
    ++line_no;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string ctx = "config line " + std::to_string(line_no);
    if (eq == std::string_view::npos) fail(ErrorCode::ConfigError, ctx + ": expected key = value");
    const std::string key(trim(line.substr(0, eq)));
    std::string value(trim(line.substr(eq + 1)));
    if (!defaults().count(key)) fail(ErrorCode::ConfigError, ctx + ": unknown key '" + key + "'");
    if (!given.insert(key).second) fail(ErrorCode::ConfigError, ctx + ": key '" + key + "' set twice");
    cfg.entries_[key] = value;
  }
  for (const auto& key : kPathKeys) cfg.entries_[key] = resolve(base_dir, cfg.entries_[key]);
  try {
    cfg.rebuild();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConfigError) throw;
    fail(ErrorCode::ConfigError, e.what());
  }
  return cfg;
}

RunConfig RunConfig::load(const std::string& path) {
  const auto base = std::filesystem::path(path).parent_path().string();
  return parse(read_file(path), base.empty() ? "." : base);
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (!defaults().count(key)) fail(ErrorCode::ConfigError, "unknown key '" + key + "'");
  entries_[key] = kPathKeys.count(key) ? resolve(base_dir_, value) : value;
  try {
    rebuild();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConfigError) throw;
    fail(ErrorCode::ConfigError, e.what());
  }
}

void RunConfig::rebuild() {
  const auto& e = entries_;
  auto num = [&](const std::string& key) { return parse_double(e.at(key), "config key '" + key + "'"); };
  auto count = [&](const std::string& key) {
    const auto v = parse_int(e.at(key), "config key '" + key + "'");
    if (v < 0) fail(ErrorCode::ConfigError, "config key '" + key + "' must be >= 0");
    return static_cast<std::size_t>(v);
  };
  auto flag = [&](const std::string& key) {
    const auto v = to_lower(e.at(key));
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    fail(ErrorCode::ConfigError, "config key '" + key + "' must be true or false");
  };
  auto choice = [&](const std::string& key, std::initializer_list<std::string_view> options) {
    const auto v = to_lower(e.at(key));
    for (std::size_t i = 0; i < options.size(); ++i) {
      if (v == options.begin()[i]) return i;
    }
    fail(ErrorCode::ConfigError, "config key '" + key + "' has unsupported value '" + e.at(key) + "'");
  };

  trees = e.at("trees");
  conllu = e.at("conllu");
  timing = e.at("timing");
  frequency = e.at("frequency");
  embeddings = e.at("embeddings");
  probe_targets = e.at("probe_targets");
  run_duration_sec.reset();
  if (!e.at("run_duration_sec").empty()) run_duration_sec = num("run_duration_sec");

  subjects.clear();
  for (const auto& item : list_of(e.at("fmri"))) {
    const auto colon = item.find(':');
    if (colon == std::string::npos || colon == 0) {
      fail(ErrorCode::ConfigError, "fmri entries must be subject:path, got '" + item + "'");
    }
    SubjectInput s;
    s.id = std::string(trim(std::string_view(item).substr(0, colon)));
    s.fmri = resolve(base_dir_, std::string(trim(std::string_view(item).substr(colon + 1))));
    if (std::any_of(subjects.begin(), subjects.end(), [&](const SubjectInput& o) { return o.id == s.id; })) {
      fail(ErrorCode::ConfigError, "subject '" + s.id + "' listed twice");
    }
    subjects.push_back(std::move(s));
  }
  const auto parcel_items = list_of(e.at("parcels"));
  if (parcel_items.size() == 1 && parcel_items.front().find(':') == std::string::npos) {
    for (auto& s : subjects) s.parcels = resolve(base_dir_, parcel_items.front());
  } else {
    for (const auto& item : parcel_items) {
      const auto colon = item.find(':');
      if (colon == std::string::npos) fail(ErrorCode::ConfigError, "parcels entries must be subject:path");
      const std::string id(trim(std::string_view(item).substr(0, colon)));
      auto it = std::find_if(subjects.begin(), subjects.end(), [&](const SubjectInput& s) { return s.id == id; });
      if (it == subjects.end()) fail(ErrorCode::ConfigError, "parcels given for unknown subject '" + id + "'");
      it->parcels = resolve(base_dir_, std::string(trim(std::string_view(item).substr(colon + 1))));
    }
  }

  spaces.clear();
  for (const auto& s : list_of(e.at("spaces"))) spaces.push_back(space_of(s));
  spaces = make_group(spaces);
  if (spaces.empty()) fail(ErrorCode::ConfigError, "no feature spaces requested");
  out = e.at("out");
  seed = static_cast<std::uint64_t>(std::stoull(e.at("seed").empty() ? "0" : e.at("seed")));
  jobs = std::max<std::size_t>(1, count("jobs"));

  subtree = {};
  subtree.dim = count("subtree_dim");
  subtree.mode = choice("subtree_mode", {"hashed_production_counts", "seeded_random_projection"}) == 0
                     ? features::SubtreeEncodingConfig::Mode::HashedProductionCounts
                     : features::SubtreeEncodingConfig::Mode::SeededRandomProjection;
  subtree.seed = derive_seed(seed, "subtree");
  if (!e.at("subtree_max_depth").empty()) subtree.max_depth = count("subtree_max_depth");
  subtree.lexicalized = flag("subtree_lexicalized");
  subtree.validate();
  pu_attach = choice("pu_attach", {"preceding_word", "self_only"}) == 0
                  ? features::PunctuationAttachment::PrecedingWord
                  : features::PunctuationAttachment::SelfOnly;
  pca_dim = count("pca_dim");

  parser = {};
  parser.beam_width = count("beam_width");
  parser.max_expansions_per_word = count("max_expansions");
  induce.add_k = num("pcfg_add_k");
  induce.unknown_word_rules = flag("pcfg_unk");

  gcn.layers = count("gcn_layers");
  gcn.hidden = count("gcn_hidden");
  gcn.input_dim = count("gcn_input_dim");
  gcn.validate();
  gcn_train.epochs = count("gcn_epochs");
  gcn_train.learning_rate = num("gcn_lr");
  gcn_train.negatives = count("gcn_negatives");
  gcn_train.mask_fraction = num("gcn_mask_fraction");
  gcn_train.seed = derive_seed(seed, "gcn");
  gcn_train.validate();

  resample.tr_sec = num("tr_sec");
  resample.lobes = static_cast<int>(count("lanczos_lobes"));
  resample.mode = choice("resample", {"lanczos", "chunk_average"}) == 0 ? signal::ResampleMode::Lanczos
                                                                        : signal::ResampleMode::ChunkAverage;
  resample.validate();
  fir.n_delays = count("n_delays");
  fir.window_sec = num("fir_window_sec");
  fir.validate(resample.tr_sec);

  ridge.lambdas.clear();
  for (const auto& l : list_of(e.at("lambdas"))) ridge.lambdas.push_back(parse_double(l, "config key 'lambdas'"));
  ridge.validation_fraction = num("validation_fraction");
  ridge.min_fold_rows = count("min_fold_rows");
  ridge.validate();
  folds = count("folds");
  if (folds < 2) fail(ErrorCode::ConfigError, "folds must be >= 2");

  stats.block = count("block");
  stats.n_permutations = count("n_permutations");
  stats.n_bootstrap = count("n_bootstrap");
  stats.q = num("fdr_q");
  stats.seed = derive_seed(seed, "stats");
  stats.validate();
  fdr_scope = choice("fdr_scope", {"global", "per_analysis"}) == 0 ? FdrScope::Global : FdrScope::PerAnalysis;

  study = {};
  for (const auto& g : list_of(e.at("individual"))) study.individual.push_back(parse_group(g));
  for (const auto& level : list_of(e.at("hierarchical"))) {
    std::vector<Group> alts;
    for (const auto& alt : list_of(level, '|')) alts.push_back(parse_group(alt));
    study.hierarchical.push_back(std::move(alts));
  }
  for (const auto& s : list_of(e.at("pairwise"))) study.pairwise.push_back(space_of(s));
  study.pairwise = make_group(study.pairwise);
  for (const auto& item : list_of(e.at("comparisons"))) {
    const auto dash = item.find(" - ");
    if (dash == std::string::npos) fail(ErrorCode::ConfigError, "comparisons entries look like 'B - A', got '" + item + "'");
    study.comparisons.push_back(Comparison{parse_group(item.substr(0, dash)), parse_group(item.substr(dash + 3))});
  }
  if (study.empty()) {
    for (auto s : spaces) study.individual.push_back(Group{s});
  }
  for (const auto& g : study.required_groups()) {
    for (auto s : g) {
      if (!has_space(s)) {
        fail(ErrorCode::ConfigError, "study uses " + std::string(features::to_string(s)) + " but spaces does not include it");
      }
    }
  }
  probe_spaces.clear();
  for (const auto& s : list_of(e.at("probe_spaces"))) probe_spaces.push_back(space_of(s));
  if (probe_spaces.empty()) probe_spaces = spaces;
}

std::string RunConfig::to_text() const {
  std::string out_text;
  for (const auto& [k, v] : entries_) out_text += k + " = " + v + "\n";
  return out_text;
}

std::string RunConfig::hash() const {
  std::string text;
  for (const auto& [k, v] : entries_) {
    if (k == "out" || k == "jobs") continue;
    text += k + " = " + v + "\n";
  }
  return hex64(hash64(text));
}

bool RunConfig::has_space(FeatureSpace s) const {
  return std::find(spaces.begin(), spaces.end(), s) != spaces.end();
}

void RunConfig::require_feature_inputs() const {
  auto need = [](const std::string& value, const std::string& key, const std::string& why) {
    if (value.empty()) fail(ErrorCode::ConfigError, "'" + key + "' is required " + why);
    if (!std::filesystem::exists(value)) fail(ErrorCode::ConfigError, "'" + key + "' file not found: " + value);
  };
  need(trees, "trees", "to build any feature space");
  for (auto s : spaces) {
    const std::string why = "for " + std::string(features::to_string(s));
    switch (s) {
      case FeatureSpace::CM:
        need(frequency, "frequency", why);
        break;
      case FeatureSpace::PD:
      case FeatureSpace::DEP:
        need(conllu, "conllu", why);
        break;
      case FeatureSpace::SEM:
        need(embeddings, "embeddings", why);
        break;
      default:
        break;
    }
  }
}

void RunConfig::require_fmri_inputs() const {
  if (subjects.empty()) fail(ErrorCode::ConfigError, "'fmri' lists no subjects");
  if (timing.empty()) fail(ErrorCode::ConfigError, "'timing' is required to align features with fMRI");
  for (const auto& s : subjects) {
    if (s.parcels.empty()) fail(ErrorCode::ConfigError, "no parcel labels for subject '" + s.id + "'");
    for (const auto& path : {s.fmri, s.parcels}) {
      if (!std::filesystem::exists(path)) fail(ErrorCode::ConfigError, "file not found: " + path);
    }
  }
}

}  // namespace synenc::pipeline

#include "synenc/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <memory>
#include <set>

#include "synenc/atlas.hpp"
#include "synenc/bmat.hpp"
#include "synenc/config.hpp"
#include "synenc/pipeline.hpp"
#include "synenc/signal.hpp"

namespace synenc::synthetic {

namespace {

const std::vector<std::string> kDet = {"the", "a", "every", "this", "that"};
const std::vector<std::string> kNoun = {"dog",    "man",   "story",  "house",  "river",   "teacher", "window",
                                        "city",   "letter", "morning", "friend", "door",    "garden",  "child",
                                        "doctor", "train", "song",   "mountain", "kitchen", "painter"};
const std::vector<std::string> kAdj = {"old", "quiet", "bright", "small", "strange", "green", "tired", "careful"};
const std::vector<std::string> kPron = {"she", "he", "they", "we", "it"};
const std::vector<std::string> kTrans = {"saw", "found", "wrote", "opened", "watched", "liked", "carried", "followed"};
const std::vector<std::string> kIntrans = {"slept", "laughed", "waited", "left", "smiled", "arrived"};
const std::vector<std::string> kAdv = {"slowly", "quietly", "again", "today", "suddenly"};
const std::vector<std::string> kPrep = {"near", "behind", "under", "with", "across"};
const std::vector<std::string> kConj = {"and", "but"};

struct Node {
  std::string label;
  std::string word;  // preterminals only
  std::vector<std::unique_ptr<Node>> children;
  std::size_t head = 0;  // index of the head child
  std::string rel;       // relation to the parent's head when not the head child
  std::size_t token = 0;
};

using NodePtr = std::unique_ptr<Node>;

NodePtr leaf(std::string tag, std::string word, std::string rel = "") {
  auto n = std::make_unique<Node>();
  n->label = std::move(tag);
  n->word = std::move(word);
  n->rel = std::move(rel);
  return n;
}

NodePtr phrase(std::string label, std::size_t head, std::string rel, std::vector<NodePtr> kids) {
  auto n = std::make_unique<Node>();
  n->label = std::move(label);
  n->head = head;
  n->rel = std::move(rel);
  n->children = std::move(kids);
  return n;
}

template <typename... Kids>
std::vector<NodePtr> kids(Kids... k) {
  std::vector<NodePtr> v;
  (v.push_back(std::move(k)), ...);
  return v;
}

class Grammar {
 public:
  explicit Grammar(Rng& rng) : rng_(rng) {}

  NodePtr sentence() {
    const double u = rng_.uniform();
    const double e = rng_.uniform();
    auto end = leaf(".", e < 0.8 ? "." : (e < 0.9 ? "?" : "!"), "punct");
    if (u < 0.7) {
      auto s = clause(0, "");
      s->children.push_back(std::move(end));
      return s;
    }
    if (u < 0.9) {
      return phrase("S", 0, "",
                    kids(clause(0, ""), leaf(",", ",", "punct"), leaf("CC", pick(kConj), "cc"), clause(0, "conj"),
                         std::move(end)));
    }
    return phrase("S", 0, "", kids(clause(0, ""), leaf(":", ";", "punct"), clause(0, "parataxis"), std::move(end)));
  }

 private:
  const std::string& pick(const std::vector<std::string>& v) { return v[rng_.uniform_index(v.size())]; }

  NodePtr clause(int depth, std::string rel) { return phrase("S", 1, std::move(rel), kids(np(depth, "nsubj"), vp(depth))); }

  NodePtr np(int depth, std::string rel) {
    const double u = rng_.uniform();
    if (u < 0.25) return phrase("NP", 0, std::move(rel), kids(leaf("PRP", pick(kPron))));
    if (u < 0.65) return phrase("NP", 1, std::move(rel), kids(leaf("DT", pick(kDet), "det"), leaf("NN", pick(kNoun))));
    if (u < 0.85 || depth >= 2) {
      return phrase("NP", 2, std::move(rel),
                    kids(leaf("DT", pick(kDet), "det"), leaf("JJ", pick(kAdj), "amod"), leaf("NN", pick(kNoun))));
    }
    return phrase("NP", 0, std::move(rel), kids(np(depth + 1, ""), pp(depth + 1)));
  }

  NodePtr pp(int depth) {
    return phrase("PP", 0, "prep", kids(leaf("IN", pick(kPrep)), np(depth, "pobj")));
  }

  NodePtr vp(int depth) {
    const double u = rng_.uniform();
    if (u < 0.2) return phrase("VP", 0, "", kids(leaf("VBD", pick(kIntrans))));
    if (u < 0.4) {
      return phrase("VP", 0, "", kids(leaf("VBD", pick(kIntrans)), phrase("ADVP", 0, "advmod", kids(leaf("RB", pick(kAdv))))));
    }
    if (u < 0.8 || depth >= 2) return phrase("VP", 0, "", kids(leaf("VBD", pick(kTrans)), np(depth + 1, "dobj")));
    return phrase("VP", 0, "", kids(leaf("VBD", pick(kTrans)), np(depth + 1, "dobj"), pp(depth + 1)));
  }

  Rng& rng_;
};

struct Tok {
  std::string word, tag;
  std::size_t head = 0;  // 1-based, 0 for root
  std::string rel;
};

void collect(Node& n, std::vector<Tok>& toks) {
  if (n.children.empty()) {
    n.token = toks.size();
    toks.push_back({n.word, n.label, 0, ""});
    return;
  }
  for (auto& c : n.children) collect(*c, toks);
}

std::size_t lex_head(const Node& n) { return n.children.empty() ? n.token : lex_head(*n.children[n.head]); }

void attach(const Node& n, std::vector<Tok>& toks) {
  if (n.children.empty()) return;
  const auto h = lex_head(n);
  for (std::size_t i = 0; i < n.children.size(); ++i) {
    const auto& c = *n.children[i];
    if (i != n.head) {
      auto& t = toks[lex_head(c)];
      t.head = h + 1;
      t.rel = c.rel.empty() ? "dep" : c.rel;
    }
    attach(c, toks);
  }
}

std::string bracketed(const Node& n) {
  if (n.children.empty()) return "(" + n.label + " " + n.word + ")";
  std::string s = "(" + n.label;
  for (const auto& c : n.children) s += " " + bracketed(*c);
  return s + ")";
}

std::string upos(const std::string& tag) {
  static const std::map<std::string, std::string> m = {{"DT", "DET"},  {"NN", "NOUN"}, {"PRP", "PRON"},
                                                        {"JJ", "ADJ"},  {"VBD", "VERB"}, {"RB", "ADV"},
                                                        {"IN", "ADP"},  {"CC", "CCONJ"}};
  const auto it = m.find(tag);
  return it == m.end() ? "PUNCT" : it->second;
}

bool is_punct_tag(const std::string& tag) { return tag == "." || tag == "," || tag == ":"; }

Vector type_vector(const std::string& word, std::size_t dim, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "sem-type", word));
  Vector v(static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = rng.normal();
  return v;
}

std::string config_text(const SynthConfig& cfg, const SynthDataset& ds) {
  std::set<std::string> given;
  for (const auto& line : split(cfg.extra_config, '\n')) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) given.insert(std::string(trim(std::string_view(line).substr(0, eq))));
  }
  const std::string planted(features::to_string(cfg.planted_space));
  std::string fmri, parcels;
  for (const auto& s : ds.subjects) {
    fmri += (fmri.empty() ? "" : ", ") + s + ":" + s + ".bmat";
    parcels += (parcels.empty() ? "" : ", ") + s + ":" + s + "_parcels.tsv";
  }
  const std::vector<std::pair<std::string, std::string>> defaults = {
      {"trees", "trees.txt"},
      {"conllu", "deps.conllu"},
      {"timing", "timing.tsv"},
      {"frequency", "freq.tsv"},
      {"embeddings", "sem.bmat"},
      {"probe_targets", "probe.bmat"},
      {"run_duration_sec", format_double(static_cast<double>(cfg.n_tr) * cfg.tr_sec)},
      {"fmri", fmri},
      {"parcels", parcels},
      {"tr_sec", format_double(cfg.tr_sec)},
      {"spaces", planted == "PU" ? "PU" : "PU, " + planted},
      {"individual", planted == "PU" ? "PU" : "PU, " + planted},
      {"comparisons", planted == "PU" ? "" : "PU+" + planted + " - PU"},
      {"lambdas", "0.1, 1, 10, 100, 1000"},
      {"seed", std::to_string(cfg.seed)},
      {"out", "out"},
  };
  std::string text = "# generated synthetic study\n";
  for (const auto& [k, v] : defaults) {
    if (!given.count(k)) text += k + " = " + v + "\n";
  }
  text += cfg.extra_config;
  if (!text.empty() && text.back() != '\n') text += '\n';
  return text;
}

}  // namespace

SynthDataset generate(const SynthConfig& cfg, const std::string& dir) {
  if (cfg.n_subjects == 0 || cfg.n_voxels < 2 || cfg.n_tr == 0 || cfg.sem_dim == 0) {
    fail(ErrorCode::InvalidArgument, "synthetic dataset needs subjects, voxels, TRs and an embedding size");
  }
  std::filesystem::create_directories(dir);
  SynthDataset ds;
  ds.dir = dir;
  ds.config_path = dir + "/run.cfg";

  // Story, trees, dependencies and timing.
  Rng text_rng(derive_seed(cfg.seed, "synthetic-text"));
  Grammar grammar(text_rng);
  const double end_time = static_cast<double>(cfg.n_tr) * cfg.tr_sec - 3.0;
  std::string trees, conllu, timing = "word\tonset_sec\toffset_sec\tsentence_id\ttoken_id\n";
  std::set<std::string> vocab;
  std::vector<std::string> corpus_words;
  double t = 1.0;
  while (true) {
    auto root = grammar.sentence();
    std::vector<Tok> toks;
    collect(*root, toks);
    attach(*root, toks);
    double dur = 0.3;
    for (const auto& tok : toks) dur += is_punct_tag(tok.tag) ? 0.0 : 0.31 + 0.03 * static_cast<double>(tok.word.size());
    if (t + dur > end_time && ds.n_sentences > 0) break;
    trees += bracketed(*root) + "\n";
    conllu += "# sent_id = " + std::to_string(ds.n_sentences + 1) + "\n";
    for (std::size_t i = 0; i < toks.size(); ++i) {
      const auto& tok = toks[i];
      conllu += fmt::format("{}\t{}\t{}\t{}\t{}\t_\t{}\t{}\t_\t_\n", i + 1, tok.word, tok.word, upos(tok.tag), tok.tag,
                            tok.head, tok.head == 0 ? "root" : tok.rel);
      double onset = t;
      double offset = t;
      if (!is_punct_tag(tok.tag)) {
        offset = t + 0.28 + 0.03 * static_cast<double>(tok.word.size());
        t = offset + 0.03;
      }
      timing += fmt::format("{}\t{:.3f}\t{:.3f}\t{}\t{}\n", tok.word, onset, offset, ds.n_sentences, i);
      vocab.insert(tok.word);
      corpus_words.push_back(tok.word);
    }
    conllu += "\n";
    t += 0.3;
    ++ds.n_sentences;
    ds.n_tokens += toks.size();
  }
  write_file(dir + "/trees.txt", trees);
  write_file(dir + "/deps.conllu", conllu);
  write_file(dir + "/timing.tsv", timing);

  Rng freq_rng(derive_seed(cfg.seed, "synthetic-frequency"));
  std::string freq = "word\tper_billion\n";
  for (const auto& w : vocab) {
    const double log10f = 7.0 - 0.4 * static_cast<double>(w.size()) + 0.5 * freq_rng.normal();
    freq += w + "\t" + format_double(std::round(std::pow(10.0, std::clamp(log10f, 1.0, 8.0)))) + "\n";
  }
  write_file(dir + "/freq.tsv", freq);

  Rng sem_rng(derive_seed(cfg.seed, "synthetic-sem"));
  Matrix sem(static_cast<Eigen::Index>(ds.n_tokens), static_cast<Eigen::Index>(cfg.sem_dim));
  Matrix probe(sem.rows(), sem.cols());
  for (std::size_t i = 0; i < corpus_words.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    const Vector type = type_vector(corpus_words[i], cfg.sem_dim, cfg.seed);
    probe.row(r) = type.transpose();
    for (Eigen::Index c = 0; c < sem.cols(); ++c) sem(r, c) = type(c) + 0.3 * sem_rng.normal();
  }
  bmat::write(dir + "/sem.bmat", sem);
  bmat::write(dir + "/probe.bmat", probe);

  // Parcel labels: each hemisphere gets an equal share of ROI voxels spread
  // over the language ROIs, the rest over the other parcels.
  std::vector<std::string> other;
  for (const auto& p : atlas::glasser_parcels()) {
    if (!atlas::make_label(atlas::Hemisphere::Left, p).roi) other.push_back(p);
  }
  const auto& rois = atlas::language_rois();
  std::vector<atlas::VoxelLabel> labels;
  std::string parcel_tsv = "voxel_index\themisphere\tparcel\n";
  const std::size_t half = cfg.n_voxels / 2;
  for (std::size_t v = 0; v < cfg.n_voxels; ++v) {
    const bool left = v < half;
    const std::size_t local = left ? v : v - half;
    const std::size_t hemi_size = left ? half : cfg.n_voxels - half;
    const auto n_roi = static_cast<std::size_t>(std::llround(cfg.roi_fraction * static_cast<double>(hemi_size)));
    std::string parcel;
    if (local < n_roi) {
      const auto& roi = rois[local % rois.size()];
      parcel = roi.parcels[(local / rois.size()) % roi.parcels.size()];
    } else {
      parcel = other[(local - n_roi) % other.size()];
    }
    const char h = left ? 'L' : 'R';
    parcel_tsv += fmt::format("{}\t{}\t{}_{}_ROI\n", v, h, h, parcel);
    labels.push_back(atlas::make_label(left ? atlas::Hemisphere::Left : atlas::Hemisphere::Right, parcel));
  }

  for (std::size_t s = 0; s < cfg.n_subjects; ++s) ds.subjects.push_back(fmt::format("sub-{:02d}", s + 1));
  write_file(ds.config_path, config_text(cfg, ds));

  Matrix design;
  std::vector<std::size_t> planted;
  if (!cfg.null) {
    const auto roi_id = atlas::roi_index(cfg.planted_roi);
    if (!roi_id) fail(ErrorCode::UnknownRoi, "unknown ROI '" + cfg.planted_roi + "'");
    for (std::size_t v = 0; v < labels.size(); ++v) {
      if (labels[v].roi == roi_id) planted.push_back(v);
    }
    auto run = pipeline::RunConfig::load(ds.config_path);
    const auto corpus = pipeline::load_corpus(run);
    const auto fm = pipeline::build_space(run, corpus, cfg.planted_space);
    const Matrix x = pipeline::aligned_design(run, corpus, bmat::round_to_f32(fm.values), cfg.n_tr);
    design = signal::zscore_columns(x, x);
  }

  for (std::size_t s = 0; s < cfg.n_subjects; ++s) {
    const auto& id = ds.subjects[s];
    write_file(dir + "/" + id + "_parcels.tsv", parcel_tsv);
    Rng rng(derive_seed(cfg.seed, "synthetic-fmri", id));
    const auto n = static_cast<Eigen::Index>(cfg.n_tr);
    Matrix y(n, static_cast<Eigen::Index>(cfg.n_voxels));
    const double innov = std::sqrt(1.0 - cfg.ar_phi * cfg.ar_phi);
    for (Eigen::Index v = 0; v < y.cols(); ++v) {
      const double offset = 5.0 * rng.normal();
      double e = rng.normal();
      for (Eigen::Index r = 0; r < n; ++r) {
        if (r > 0) e = cfg.ar_phi * e + innov * rng.normal();
        y(r, v) = offset + e;
      }
    }
    for (auto v : planted) {
      Vector w(design.cols());
      for (Eigen::Index c = 0; c < w.size(); ++c) w(c) = rng.normal();
      Vector sig = design * w;
      const double var = (sig.array() - sig.mean()).square().mean();
      if (var > 0.0) sig *= std::sqrt(cfg.snr / var);
      y.col(static_cast<Eigen::Index>(v)) += sig;
    }
    bmat::write(dir + "/" + id + ".bmat", y);
    ds.planted_voxels.push_back(planted);
  }
  return ds;
}

}  // namespace synenc::synthetic

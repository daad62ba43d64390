#include <iostream>

#include <CLI11.hpp>

#include "synenc/synthetic.hpp"

using namespace synenc;

int main(int argc, char** argv) {
  CLI::App app{"Write a synthetic story/fMRI study with a planted signal"};
  synthetic::SynthConfig cfg;
  std::string dir;
  std::string planted = "CM";
  app.add_option("dir", dir, "Output directory")->required();
  app.add_option("--seed", cfg.seed, "Generator seed");
  app.add_option("--subjects", cfg.n_subjects, "Number of subjects");
  app.add_option("--voxels", cfg.n_voxels, "Voxels per subject");
  app.add_option("--trs", cfg.n_tr, "TRs per run");
  app.add_option("--snr", cfg.snr, "Signal to noise variance ratio in planted voxels");
  app.add_option("--planted-space", planted, "Feature space that drives the planted signal");
  app.add_option("--planted-roi", cfg.planted_roi, "ROI that carries the signal");
  app.add_flag("--null", cfg.null, "No planted signal");
  CLI11_PARSE(app, argc, argv);

  try {
    const auto space = features::parse_space(planted);
    if (!space) {
      std::cerr << "unknown feature space " << planted << "\n";
      return 2;
    }
    cfg.planted_space = *space;
    const auto ds = synthetic::generate(cfg, dir);
    std::cout << ds.config_path << "\n"
              << ds.n_sentences << " sentences, " << ds.n_tokens << " tokens, " << ds.subjects.size()
              << " subjects\n";
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "synenc/config.hpp"
#include "synenc/pipeline.hpp"

using namespace synenc;

int main(int argc, char** argv) {
  CLI::App app{"Syntactic feature encoding models for narrative fMRI"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> jobs;
  std::optional<std::string> out;
  bool verbose = false;
  app.add_option("--config", config_path, "Run configuration file");
  app.add_option("--seed", seed, "Master seed (overrides the config)");
  app.add_option("--jobs", jobs, "Worker threads");
  app.add_option("--out", out, "Output directory (overrides the config)");
  app.add_flag("-v,--verbose", verbose, "Progress logging");

  auto* features = app.add_subcommand("features", "Build feature matrices for the configured spaces");
  auto* encode = app.add_subcommand("encode", "Fit cross-validated ridge encoding models per subject");
  auto* compare = app.add_subcommand("compare", "Significance tests, FDR and ROI aggregation");
  auto* report = app.add_subcommand("report", "CSV, JSON and SVG summaries of the ROI reports");
  auto* probe = app.add_subcommand("probe", "Ridge probe from feature spaces to semantic targets");
  auto* selftest = app.add_subcommand("selftest", "Quick numerical self checks");
  for (auto* sub : {features, encode, compare, report, probe, selftest}) sub->fallthrough();

  CLI11_PARSE(app, argc, argv);
  log::set_verbose(verbose);

  try {
    if (selftest->parsed()) return pipeline::cmd_selftest(std::cout) ? 0 : 1;
    if (config_path.empty()) {
      std::cerr << "--config is required for this command\n";
      return 2;
    }
    auto cfg = pipeline::RunConfig::load(config_path);
    if (seed) cfg.set("seed", std::to_string(*seed));
    if (jobs) cfg.set("jobs", std::to_string(*jobs));
    if (out) cfg.set("out", std::filesystem::absolute(*out).string());

    if (features->parsed()) {
      pipeline::cmd_features(cfg);
    } else if (encode->parsed()) {
      pipeline::cmd_encode(cfg);
    } else if (compare->parsed()) {
      for (const auto& r : pipeline::cmd_compare(cfg)) {
        for (const auto& row : r.summary) {
          std::cout << r.analysis << "\t" << row.roi << "\t" << atlas::to_string(row.hemisphere) << "\t"
                    << format_double(row.mean_pct) << "\n";
        }
      }
    } else if (report->parsed()) {
      pipeline::cmd_report(cfg);
      std::cout << cfg.out << "/report\n";
    } else if (probe->parsed()) {
      for (const auto& row : pipeline::cmd_probe(cfg)) {
        std::cout << features::to_string(row.space) << "\t" << format_double(row.r2) << "\n";
      }
    }
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

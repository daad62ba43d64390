#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "synenc/atlas.hpp"
#include "synenc/stats.hpp"

namespace synenc::report {

// Per-analysis files. The CSV starts with "# config_hash=<hash>" followed by
// the header "roi,hemisphere,subject,pct_significant,mean_r2".
std::string roi_csv(const stats::RoiReport& r, const std::string& config_hash);
nlohmann::json roi_json(const stats::RoiReport& r, const std::string& config_hash);
stats::RoiReport roi_from_json(const nlohmann::json& j, std::string* config_hash = nullptr);

// Writes <dir>/roi_report.csv and <dir>/roi_report.json.
void write_roi_report(const std::string& dir, const stats::RoiReport& r, const std::string& config_hash);
stats::RoiReport read_roi_report(const std::string& dir, std::string* config_hash = nullptr);

struct Cell {
  std::string analysis;
  std::string roi;
  atlas::Hemisphere hemisphere = atlas::Hemisphere::Left;
  std::optional<stats::RoiSummaryRow> summary;  // empty when the ROI had no voxels
};

struct Report {
  std::string config_hash;
  std::vector<std::string> analyses;
  std::vector<std::string> rois;
  std::vector<Cell> cells;  // analyses x rois x hemispheres, in that nesting

  const Cell& cell(const std::string& analysis, const std::string& roi, atlas::Hemisphere h) const;
};

struct HashedReport {
  stats::RoiReport report;
  std::string config_hash;
};

// ROIs are those present in any input, in atlas order. Throws HashMismatch
// when the inputs disagree on the config hash.
Report assemble(const std::vector<HashedReport>& inputs);

std::string report_csv(const Report& r);
nlohmann::json report_json(const Report& r);
// Grouped bars per ROI, one bar per analysis, with SE whiskers.
std::string report_svg(const Report& r, atlas::Hemisphere h);

// report.csv, report.json, report_L.svg, report_R.svg.
void write_report(const std::string& dir, const Report& r);

}  // namespace synenc::report

#include "synenc/report.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>

namespace synenc::report {

namespace {

using atlas::Hemisphere;
using nlohmann::json;

constexpr Hemisphere kHemis[] = {Hemisphere::Left, Hemisphere::Right};

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

Hemisphere hemi_of(const json& j) {
  const auto h = atlas::parse_hemisphere(j.get<std::string>());
  if (!h) fail(ErrorCode::IoError, "bad hemisphere in report: " + j.dump());
  return *h;
}

json summary_json(const stats::RoiSummaryRow& s) {
  return {{"roi", s.roi},         {"hemisphere", atlas::to_string(s.hemisphere)},
          {"n_subjects", s.n_subjects}, {"mean_pct", s.mean_pct},
          {"se_pct", s.se_pct},   {"mean_r2", s.mean_r2},
          {"se_r2", s.se_r2}};
}

stats::RoiSummaryRow summary_from(const json& j) {
  stats::RoiSummaryRow s;
  s.roi = j.at("roi").get<std::string>();
  s.hemisphere = hemi_of(j.at("hemisphere"));
  s.n_subjects = j.at("n_subjects").get<std::size_t>();
  s.mean_pct = j.at("mean_pct").get<double>();
  s.se_pct = j.at("se_pct").get<double>();
  s.mean_r2 = j.at("mean_r2").get<double>();
  s.se_r2 = j.at("se_r2").get<double>();
  return s;
}

const char* const kPalette[] = {"#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3",
                                "#937860", "#da8bc3", "#8c8c8c", "#ccb974", "#64b5cd"};

}  // namespace

std::string roi_csv(const stats::RoiReport& r, const std::string& config_hash) {
  std::string out = "# config_hash=" + config_hash + "\n";
  out += "roi,hemisphere,subject,pct_significant,mean_r2\n";
  for (const auto& row : r.subjects) {
    out += fmt::format("{},{},{},{},{}\n", row.roi, atlas::to_string(row.hemisphere), row.subject,
                       format_double(row.pct_significant), format_double(row.mean_r2));
  }
  return out;
}

json roi_json(const stats::RoiReport& r, const std::string& config_hash) {
  json j;
  j["analysis"] = r.analysis;
  j["config_hash"] = config_hash;
  j["subjects"] = json::array();
  for (const auto& row : r.subjects) {
    j["subjects"].push_back({{"roi", row.roi},
                             {"hemisphere", atlas::to_string(row.hemisphere)},
                             {"subject", row.subject},
                             {"pct_significant", row.pct_significant},
                             {"mean_r2", row.mean_r2},
                             {"n_voxels", row.n_voxels}});
  }
  j["summary"] = json::array();
  for (const auto& s : r.summary) j["summary"].push_back(summary_json(s));
  return j;
}

stats::RoiReport roi_from_json(const json& j, std::string* config_hash) {
  stats::RoiReport r;
  try {
    r.analysis = j.at("analysis").get<std::string>();
    if (config_hash) *config_hash = j.at("config_hash").get<std::string>();
    for (const auto& row : j.at("subjects")) {
      stats::RoiSubjectRow s;
      s.roi = row.at("roi").get<std::string>();
      s.hemisphere = hemi_of(row.at("hemisphere"));
      s.subject = row.at("subject").get<std::string>();
      s.pct_significant = row.at("pct_significant").get<double>();
      s.mean_r2 = row.at("mean_r2").get<double>();
      s.n_voxels = row.at("n_voxels").get<std::size_t>();
      r.subjects.push_back(std::move(s));
    }
    for (const auto& row : j.at("summary")) r.summary.push_back(summary_from(row));
  } catch (const json::exception& e) {
    fail(ErrorCode::IoError, std::string("malformed ROI report: ") + e.what());
  }
  return r;
}

void write_roi_report(const std::string& dir, const stats::RoiReport& r, const std::string& config_hash) {
  std::filesystem::create_directories(dir);
  write_file(dir + "/roi_report.csv", roi_csv(r, config_hash));
  write_file(dir + "/roi_report.json", roi_json(r, config_hash).dump(2) + "\n");
}

stats::RoiReport read_roi_report(const std::string& dir, std::string* config_hash) {
  const auto path = dir + "/roi_report.json";
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    fail(ErrorCode::IoError, path + ": " + e.what());
  }
  return roi_from_json(j, config_hash);
}

const Cell& Report::cell(const std::string& analysis, const std::string& roi, Hemisphere h) const {
  for (const auto& c : cells) {
    if (c.analysis == analysis && c.roi == roi && c.hemisphere == h) return c;
  }
  fail(ErrorCode::InvalidArgument, "no report cell " + analysis + "/" + roi + "/" + std::string(atlas::to_string(h)));
}

Report assemble(const std::vector<HashedReport>& inputs) {
  Report out;
  std::set<std::string> present;
  for (const auto& in : inputs) {
    if (out.analyses.empty()) {
      out.config_hash = in.config_hash;
    } else if (in.config_hash != out.config_hash) {
      fail(ErrorCode::HashMismatch, fmt::format("analysis {} has config hash {}, expected {}", in.report.analysis,
                                                in.config_hash, out.config_hash));
    }
    if (std::find(out.analyses.begin(), out.analyses.end(), in.report.analysis) != out.analyses.end()) {
      fail(ErrorCode::InvalidArgument, "analysis " + in.report.analysis + " given twice");
    }
    out.analyses.push_back(in.report.analysis);
    for (const auto& s : in.report.summary) present.insert(s.roi);
  }
  for (const auto& roi : atlas::language_rois()) {
    if (present.count(roi.name)) out.rois.push_back(roi.name);
  }
  for (const auto& in : inputs) {
    for (const auto& roi : out.rois) {
      for (auto h : kHemis) {
        Cell c{in.report.analysis, roi, h, std::nullopt};
        for (const auto& s : in.report.summary) {
          if (s.roi == roi && s.hemisphere == h) c.summary = s;
        }
        out.cells.push_back(std::move(c));
      }
    }
  }
  return out;
}

std::string report_csv(const Report& r) {
  std::string out = "# config_hash=" + r.config_hash + "\n";
  out += "analysis,roi,hemisphere,n_subjects,mean_pct,se_pct,mean_r2,se_r2\n";
  for (const auto& c : r.cells) {
    out += fmt::format("{},{},{},", c.analysis, c.roi, atlas::to_string(c.hemisphere));
    if (c.summary) {
      const auto& s = *c.summary;
      out += fmt::format("{},{},{},{},{}\n", s.n_subjects, format_double(s.mean_pct), format_double(s.se_pct),
                         format_double(s.mean_r2), format_double(s.se_r2));
    } else {
      out += "0,,,,\n";
    }
  }
  return out;
}

json report_json(const Report& r) {
  json j;
  j["config_hash"] = r.config_hash;
  j["analyses"] = r.analyses;
  j["rois"] = r.rois;
  j["rows"] = json::array();
  for (const auto& c : r.cells) {
    json row = c.summary ? summary_json(*c.summary)
                         : json{{"roi", c.roi}, {"hemisphere", atlas::to_string(c.hemisphere)}, {"n_subjects", 0},
                                {"mean_pct", nullptr}, {"se_pct", nullptr}, {"mean_r2", nullptr}, {"se_r2", nullptr}};
    row["analysis"] = c.analysis;
    j["rows"].push_back(std::move(row));
  }
  return j;
}

std::string report_svg(const Report& r, Hemisphere h) {
  const double bar_w = 18.0;
  const double group_gap = 24.0;
  const double left = 60.0;
  const double top = 40.0;
  const double plot_h = 240.0;
  const double legend_h = 18.0 * static_cast<double>(r.analyses.size());
  const std::size_t n_bars = std::max<std::size_t>(1, r.analyses.size());
  const double group_w = bar_w * static_cast<double>(n_bars) + group_gap;
  const double plot_w = group_w * static_cast<double>(std::max<std::size_t>(1, r.rois.size()));
  const double width = left + plot_w + 20.0;
  const double height = top + plot_h + 40.0 + legend_h + 30.0;

  double y_max = 0.0;
  std::size_t max_subjects = 0;
  for (const auto& c : r.cells) {
    if (c.hemisphere != h || !c.summary) continue;
    y_max = std::max(y_max, c.summary->mean_pct + c.summary->se_pct);
    max_subjects = std::max(max_subjects, c.summary->n_subjects);
  }
  y_max = std::clamp(std::ceil(y_max / 10.0) * 10.0, 10.0, 100.0);
  auto y_of = [&](double v) { return top + plot_h * (1.0 - std::clamp(v, 0.0, y_max) / y_max); };

  std::string s = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\" "
      "font-family=\"sans-serif\" font-size=\"11\">\n",
      width, height, width, height);
  s += "<desc>config_hash=" + xml_escape(r.config_hash) + "</desc>\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += fmt::format("<text x=\"{}\" y=\"20\" font-size=\"13\">{} hemisphere</text>\n", left,
                   h == Hemisphere::Left ? "Left" : "Right");

  for (int tick = 0; tick <= 5; ++tick) {
    const double v = y_max * tick / 5.0;
    const double y = y_of(v);
    s += fmt::format("<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#ddd\"/>\n", left, y, left + plot_w, y);
    s += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n", left - 6, y + 4, format_double(v));
  }
  s += fmt::format("<text x=\"14\" y=\"{}\" transform=\"rotate(-90 14 {})\" text-anchor=\"middle\">% significant voxels</text>\n",
                   top + plot_h / 2, top + plot_h / 2);

  for (std::size_t g = 0; g < r.rois.size(); ++g) {
    const double gx = left + group_w * static_cast<double>(g) + group_gap / 2;
    for (std::size_t a = 0; a < r.analyses.size(); ++a) {
      const auto& c = r.cell(r.analyses[a], r.rois[g], h);
      if (!c.summary) continue;
      const auto& sm = *c.summary;
      const double x = gx + bar_w * static_cast<double>(a);
      const double y = y_of(sm.mean_pct);
      s += fmt::format("<g><title>{} {} {}: mean_pct={} se_pct={} n_subjects={}</title>\n", xml_escape(c.analysis),
                       c.roi, atlas::to_string(h), format_double(sm.mean_pct), format_double(sm.se_pct),
                       sm.n_subjects);
      s += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\"/>\n", x, y, bar_w - 2,
                       top + plot_h - y, kPalette[a % std::size(kPalette)]);
      const double cx = x + (bar_w - 2) / 2;
      const double lo = y_of(sm.mean_pct - sm.se_pct);
      const double hi = y_of(sm.mean_pct + sm.se_pct);
      s += fmt::format("<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n", cx, lo, cx, hi);
      s += fmt::format("<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n", cx - 3, hi, cx + 3, hi);
      s += fmt::format("<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n", cx - 3, lo, cx + 3, lo);
      s += "</g>\n";
    }
    s += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", gx + bar_w * n_bars / 2.0,
                     top + plot_h + 16, r.rois[g]);
  }
  s += fmt::format("<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n", left, top + plot_h,
                   left + plot_w, top + plot_h);

  double ly = top + plot_h + 36;
  for (std::size_t a = 0; a < r.analyses.size(); ++a, ly += 18) {
    s += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"12\" height=\"12\" fill=\"{}\"/>\n", left, ly - 10,
                     kPalette[a % std::size(kPalette)]);
    s += fmt::format("<text x=\"{}\" y=\"{}\">{}</text>\n", left + 18, ly, xml_escape(r.analyses[a]));
  }
  s += fmt::format("<text x=\"{}\" y=\"{}\" font-style=\"italic\">Bars: mean % significant voxels per ROI; "
                   "error bars: standard error across {} subjects.</text>\n",
                   left, ly + 8, max_subjects);
  s += "</svg>\n";
  return s;
}

void write_report(const std::string& dir, const Report& r) {
  std::filesystem::create_directories(dir);
  write_file(dir + "/report.csv", report_csv(r));
  write_file(dir + "/report.json", report_json(r).dump(2) + "\n");
  write_file(dir + "/report_L.svg", report_svg(r, Hemisphere::Left));
  write_file(dir + "/report_R.svg", report_svg(r, Hemisphere::Right));
}

}  // namespace synenc::report

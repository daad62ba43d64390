#include "synenc/atlas.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace synenc::atlas {

namespace {

const std::vector<std::string> kGlasser = {
    "V1",     "MST",    "V6",     "V2",     "V3",     "V4",     "V8",     "4",      "3b",     "FEF",
    "PEF",    "55b",    "V3A",    "RSC",    "POS2",   "V7",     "IPS1",   "FFC",    "V3B",    "LO1",
    "LO2",    "PIT",    "MT",     "A1",     "PSL",    "SFL",    "PCV",    "STV",    "7Pm",    "7m",
    "POS1",   "23d",    "v23ab",  "d23ab",  "31pv",   "5m",     "5mv",    "23c",    "5L",     "24dd",
    "24dv",   "7AL",    "SCEF",   "6ma",    "7Am",    "7PL",    "7PC",    "LIPv",   "VIP",    "MIP",
    "1",      "2",      "3a",     "6d",     "6mp",    "6v",     "p24pr",  "33pr",   "a24pr",  "p32pr",
    "a24",    "d32",    "8BM",    "p32",    "10r",    "47m",    "8Av",    "8Ad",    "9m",     "8BL",
    "9p",     "10d",    "8C",     "44",     "45",     "47l",    "a47r",   "6r",     "IFJa",   "IFJp",
    "IFSp",   "IFSa",   "p9-46v", "46",     "a9-46v", "9-46d",  "9a",     "10v",    "a10p",   "10pp",
    "11l",    "13l",    "OFC",    "47s",    "LIPd",   "6a",     "i6-8",   "s6-8",   "43",     "OP4",
    "OP1",    "OP2-3",  "52",     "RI",     "PFcm",   "PoI2",   "TA2",    "FOP4",   "MI",     "Pir",
    "AVI",    "AAIC",   "FOP1",   "FOP3",   "FOP2",   "PFt",    "AIP",    "EC",     "PreS",   "H",
    "ProS",   "PeEc",   "STGa",   "PBelt",  "A5",     "PHA1",   "PHA3",   "STSda",  "STSdp",  "STSvp",
    "TGd",    "TE1a",   "TE1p",   "TE2a",   "TF",     "TE2p",   "PHT",    "PH",     "TPOJ1",  "TPOJ2",
    "TPOJ3",  "DVT",    "PGp",    "IP2",    "IP1",    "IP0",    "PFop",   "PF",     "PFm",    "PGi",
    "PGs",    "V6A",    "VMV1",   "VMV3",   "PHA2",   "V4t",    "FST",    "V3CD",   "LO3",    "VMV2",
    "31pd",   "31a",    "VVC",    "25",     "s32",    "pOFC",   "PoI1",   "Ig",     "FOP5",   "p10p",
    "p47r",   "TGv",    "MBelt",  "LBelt",  "A4",     "STSva",  "TE1m",   "PI",     "a32pr",  "p24",
};

const std::vector<RoiSpec> kRois = {
    {"AG", {"PFm", "PGs", "PGi", "TPOJ2", "TPOJ3"}},
    {"ATL", {"STSda", "STSva", "STGa", "TE1a", "TE2a", "TGv", "TGd"}},
    {"PTL", {"A5", "STSdp", "STSvp", "PSL", "STV", "TPOJ1"}},
    {"IFG", {"44", "45", "IFJa", "IFSp"}},
    {"MFG", {"55b"}},
    {"IFGOrb", {"a47r", "p47r", "a9-46v"}},
    {"PCC", {"31pv", "31pd", "PCV", "7m", "23", "RSC"}},
    {"dmPFC", {"9m", "10d", "d32"}},
};

const std::map<std::string, std::size_t>& roi_by_parcel() {
  static const auto table = [] {
    std::map<std::string, std::size_t> m;
    for (std::size_t r = 0; r < kRois.size(); ++r) {
      for (const auto& p : kRois[r].parcels) m.emplace(normalize_parcel(p), r);
    }
    return m;
  }();
  return table;
}

const std::set<std::string>& known_parcels() {
  static const auto table = [] {
    std::set<std::string> s;
    for (const auto& p : kGlasser) s.insert(normalize_parcel(p));
    for (const auto& [p, r] : roi_by_parcel()) s.insert(p);
    return s;
  }();
  return table;
}

}  // namespace

std::string_view to_string(Hemisphere h) { return h == Hemisphere::Left ? "L" : "R"; }

std::optional<Hemisphere> parse_hemisphere(std::string_view text) {
  const auto t = to_lower(trim(text));
  if (t == "l" || t == "left" || t == "lh") return Hemisphere::Left;
  if (t == "r" || t == "right" || t == "rh") return Hemisphere::Right;
  return std::nullopt;
}

const std::vector<RoiSpec>& language_rois() { return kRois; }

std::optional<std::size_t> roi_index(std::string_view name) {
  const auto n = to_lower(trim(name));
  for (std::size_t r = 0; r < kRois.size(); ++r) {
    if (to_lower(kRois[r].name) == n) return r;
  }
  return std::nullopt;
}

std::string normalize_parcel(std::string_view name) {
  std::string s = to_lower(trim(name));
  if (s.size() > 2 && (s.starts_with("l_") || s.starts_with("r_"))) s = s.substr(2);
  if (s.size() > 4 && s.ends_with("_roi")) s.resize(s.size() - 4);
  std::replace(s.begin(), s.end(), '-', '_');
  return s;
}

bool is_known_parcel(std::string_view name) { return known_parcels().count(normalize_parcel(name)) > 0; }

const std::vector<std::string>& glasser_parcels() { return kGlasser; }

VoxelLabel make_label(Hemisphere h, std::string_view parcel) {
  VoxelLabel l;
  l.hemisphere = h;
  l.parcel = std::string(trim(parcel));
  const auto norm = normalize_parcel(parcel);
  l.known = known_parcels().count(norm) > 0;
  if (const auto it = roi_by_parcel().find(norm); it != roi_by_parcel().end()) l.roi = it->second;
  return l;
}

ParcelLabels ParcelLabels::from_labels(std::vector<VoxelLabel> labels) {
  ParcelLabels out;
  out.labels_ = std::move(labels);
  return out;
}

ParcelLabels ParcelLabels::parse(std::string_view tsv) {
  std::map<std::size_t, VoxelLabel> rows;
  std::size_t line_no = 0;
  std::size_t unknown = 0;
  std::string first_unknown;
  for (const auto& raw : split(tsv, '\n')) {
    ++line_no;
    if (trim(raw).empty()) continue;
    const auto cols = split(trim(raw), '\t');
    const std::string ctx = "labels line " + std::to_string(line_no);
    if (cols.size() != 3) fail(ErrorCode::MalformedLabels, ctx + ": expected voxel_index<TAB>hemisphere<TAB>parcel");
    if (rows.empty() && to_lower(trim(cols[0])) == "voxel_index") continue;
    long long idx = 0;
    try {
      idx = parse_int(cols[0], ctx);
    } catch (const Error& e) {
      fail(ErrorCode::MalformedLabels, e.what());
    }
    if (idx < 0) fail(ErrorCode::MalformedLabels, ctx + ": negative voxel index");
    const auto hemi = parse_hemisphere(cols[1]);
    if (!hemi) fail(ErrorCode::MalformedLabels, ctx + ": unknown hemisphere '" + cols[1] + "'");
    auto label = make_label(*hemi, cols[2]);
    if (!label.known) {
      if (unknown++ == 0) first_unknown = label.parcel;
    }
    if (!rows.emplace(static_cast<std::size_t>(idx), std::move(label)).second) {
      fail(ErrorCode::DuplicateVoxel, ctx + ": voxel " + std::to_string(idx) + " listed twice");
    }
  }
  ParcelLabels out;
  std::size_t expect = 0;
  for (auto& [idx, label] : rows) {
    if (idx != expect) fail(ErrorCode::IndexGap, "voxel index " + std::to_string(expect) + " is missing");
    out.labels_.push_back(std::move(label));
    ++expect;
  }
  if (unknown > 0) {
    log::warn("{} voxels carry parcels outside the atlas (first: '{}'); they belong to no ROI", unknown,
              first_unknown);
  }
  return out;
}

std::size_t ParcelLabels::unknown_count() const {
  return static_cast<std::size_t>(std::count_if(labels_.begin(), labels_.end(), [](const VoxelLabel& l) { return !l.known; }));
}

std::vector<std::size_t> roi_members(std::string_view roi, Hemisphere h, const ParcelLabels& labels) {
  const auto r = roi_index(roi);
  if (!r) fail(ErrorCode::UnknownRoi, "unknown ROI '" + std::string(roi) + "'");
  std::vector<std::size_t> out;
  for (std::size_t v = 0; v < labels.size(); ++v) {
    const auto& l = labels.label(v);
    if (l.hemisphere == h && l.roi == r) out.push_back(v);
  }
  return out;
}

nlohmann::json roi_table_json() {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : kRois) {
    for (auto h : {Hemisphere::Left, Hemisphere::Right}) {
      j.push_back({{"roi", r.name}, {"hemisphere", std::string(to_string(h))}, {"parcels", r.parcels}});
    }
  }
  return j;
}

}  // namespace synenc::atlas

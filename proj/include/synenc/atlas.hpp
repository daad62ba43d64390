#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "synenc/common.hpp"

namespace synenc::atlas {

enum class Hemisphere { Left, Right };

std::string_view to_string(Hemisphere h);
// Accepts L/R, left/right, lh/rh (any case).
std::optional<Hemisphere> parse_hemisphere(std::string_view text);

struct RoiSpec {
  std::string name;
  std::vector<std::string> parcels;  // same list in both hemispheres
};

// AG, ATL, PTL, IFG, MFG, IFGOrb, PCC, dmPFC.
const std::vector<RoiSpec>& language_rois();
std::optional<std::size_t> roi_index(std::string_view name);

// Lower-case, drops "L_"/"R_" prefixes and "_ROI" suffixes, maps '-' to '_'.
std::string normalize_parcel(std::string_view name);
// The 180 areas of the multi-modal parcellation plus every ROI parcel.
bool is_known_parcel(std::string_view name);
const std::vector<std::string>& glasser_parcels();

struct VoxelLabel {
  Hemisphere hemisphere = Hemisphere::Left;
  std::string parcel;
  std::optional<std::size_t> roi;  // index into language_rois()
  bool known = true;
};

class ParcelLabels {
 public:
  // "voxel_index<TAB>hemisphere<TAB>parcel"; optional header. Indices must be
  // unique (DuplicateVoxel) and cover 0..n-1 (IndexGap).
  static ParcelLabels parse(std::string_view tsv);
  static ParcelLabels from_labels(std::vector<VoxelLabel> labels);

  std::size_t size() const { return labels_.size(); }
  const VoxelLabel& label(std::size_t voxel) const { return labels_.at(voxel); }
  std::size_t unknown_count() const;

 private:
  std::vector<VoxelLabel> labels_;
};

VoxelLabel make_label(Hemisphere h, std::string_view parcel);

// Voxels of one ROI in one hemisphere, ascending. Throws UnknownRoi.
std::vector<std::size_t> roi_members(std::string_view roi, Hemisphere h, const ParcelLabels& labels);

nlohmann::json roi_table_json();

}  // namespace synenc::atlas

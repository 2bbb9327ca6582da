#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "s2r/error.hpp"

namespace s2r {

// Tissue-class ids are stable across the whole repository; 0 is background.
enum class TissueClass : uint8_t {
  background = 0,
  body = 1,
  lung = 2,
  myocardium = 3,
  lv_blood = 4,
  rv_blood = 5,
};

constexpr int kNumTissueClasses = 6;

const char* tissue_class_name(TissueClass c);
TissueClass tissue_class_from_id(uint8_t id);  // throws ValidationError

enum class CardiacPhase : uint8_t { ED, ES };

const char* phase_name(CardiacPhase p);
CardiacPhase phase_from_name(const std::string& s);

// 3D tissue-class voxel grid with spacing metadata; the anatomical ground
// truth. Voxels are row-major, x fastest.
struct LabelVolume {
  int nx = 0, ny = 0, nz = 0;
  double sx = 0, sy = 0, sz = 0;  // mm/voxel
  CardiacPhase phase = CardiacPhase::ED;
  std::vector<uint8_t> voxels;

  uint8_t& at(int x, int y, int z) {
    return voxels[(static_cast<size_t>(z) * ny + y) * nx + x];
  }
  uint8_t at(int x, int y, int z) const {
    return voxels[(static_cast<size_t>(z) * ny + y) * nx + x];
  }

  void validate() const;

  bool operator==(const LabelVolume&) const = default;
};

// One axial slice of a LabelVolume.
struct LabelSlice {
  int nx = 0, ny = 0;
  double sx = 0, sy = 0;
  CardiacPhase phase = CardiacPhase::ED;
  int slice_index = 0;
  std::vector<uint8_t> labels;

  uint8_t at(int x, int y) const {
    return labels[static_cast<size_t>(y) * nx + x];
  }
};

// Parameters of one virtual subject. Lengths in mm.
struct VirtualSubjectSpec {
  std::string subject_id;
  double lv_radius_ed = 25.0;
  double lv_radius_es = 18.0;
  double myo_thickness_ed = 8.0;
  double myo_thickness_es = 11.0;
  double rv_scale = 1.0;
  double global_scale = 1.0;
  uint64_t seed = 0;

  void validate() const;  // throws ValidationError on broken invariants
};

struct SubjectDims {
  int nx = 96, ny = 96, nz = 32;
};
struct Spacing3 {
  double sx = 1.5, sy = 1.5, sz = 3.0;
};

struct SubjectVolumes {
  LabelVolume ed;
  LabelVolume es;
};

// Procedural ellipsoid/crescent cardiac phantom: LV blood pool wrapped by a
// myocardial shell, RV crescent attached to the shell, embedded in body and
// lungs. Deterministic for a fixed spec.
SubjectVolumes generate_virtual_subject(const VirtualSubjectSpec& spec,
                                        const SubjectDims& dims,
                                        const Spacing3& spacing);

// LV blood-pool volume in mL.
double lv_volume_ml(const LabelVolume& vol);

// The n axial slices centered on the z-centroid of lv_blood voxels
// (ties broken toward lower z), ordered by ascending z.
std::vector<LabelSlice> extract_midventricular_slices(const LabelVolume& vol,
                                                      int n);

void save_label_volume(const LabelVolume& vol, const std::string& path);
LabelVolume load_label_volume(const std::string& path);

LabelSlice slice_of(const LabelVolume& vol, int z);

// Uniform ranges for population sampling; the paper gives no distribution.
struct PopulationRanges {
  double lv_radius_ed_min = 20.0, lv_radius_ed_max = 30.0;
  double ef_min = 0.35, ef_max = 0.65;  // radius-derived ejection fraction
  double myo_thickness_ed_min = 6.0, myo_thickness_ed_max = 10.0;
  double wall_thickening_min = 1.15, wall_thickening_max = 1.6;
  double rv_scale_min = 0.85, rv_scale_max = 1.15;
  double global_scale_min = 0.9, global_scale_max = 1.1;
};

VirtualSubjectSpec sample_subject_spec(const PopulationRanges& r,
                                       uint64_t master_seed, int index);

}  // namespace s2r

#pragma once

#include <map>
#include <string>
#include <vector>

#include "s2r/image.hpp"
#include "s2r/phantom.hpp"

namespace s2r {

// Relaxation times in ms; pd is dimensionless proton density.
struct TissueProperties {
  double t1 = 1000.0;
  double t2 = 100.0;
  double t2_star = 70.0;
  double pd = 1.0;

  void validate() const;  // 0 < t2_star <= t2 <= t1, pd in (0, 1.2]
};

using TissueTable = std::map<TissueClass, TissueProperties>;

// Literature-typical 1.5T values; configuration defaults, not ground truth.
TissueTable default_tissue_table();

struct PropertyMaps {
  int nx = 0, ny = 0;
  std::vector<double> t1, t2, t2_star, pd;

  size_t size() const { return static_cast<size_t>(nx) * ny; }
};

enum class SequenceKind { SPGR, bSSFP };

const char* sequence_kind_name(SequenceKind k);
SequenceKind sequence_kind_from_name(const std::string& s);

struct SequenceParams {
  SequenceKind kind = SequenceKind::bSSFP;
  double tr_ms = 3.0;
  double te_ms = 1.5;
  double flip_deg = 45.0;
  double noise_sd = 0.0;  // fraction of peak signal
  uint64_t seed = 0;

  void validate() const;
};

// Expand a label slice into per-pixel property maps. Each class's properties
// are perturbed once per (slice, seed) by independent uniform factors in
// [1-variation_pct, 1+variation_pct]; background pd = 0.
PropertyMaps assign_tissue_properties(const LabelSlice& slice,
                                      const TissueTable& table,
                                      double variation_pct, uint64_t seed);

// Steady-state spoiled gradient echo:
//   S = pd * sin(a) * (1 - E1) / (1 - cos(a) * E1) * exp(-te/t2*)
Image2D signal_spgr(const PropertyMaps& props, const SequenceParams& seq);

// On-resonance balanced SSFP:
//   S = pd * sin(a) * (1 - E1) / (1 - (E1 - E2) cos(a) - E1 E2) * exp(-te/t2)
Image2D signal_bssfp(const PropertyMaps& props, const SequenceParams& seq);

// Forward 2D DFT, i.i.d. complex Gaussian noise of sd
// noise_sd * max(img) * sqrt(nx*ny) per component, inverse DFT, magnitude.
// A zero image uses reference amplitude 1 so the noise floor is meaningful.
Image2D inject_kspace_noise(const Image2D& img, double noise_sd,
                            uint64_t seed);

struct SimulatedSlice {
  Image2D image;
  LabelSlice labels;
};

// Full per-subject chain: generate -> slice -> properties -> signal -> noise.
// Returns 2*n_slices pairs (ED then ES), meta recording provenance.
std::vector<SimulatedSlice> simulate_subject(const VirtualSubjectSpec& spec,
                                             const SubjectDims& dims,
                                             const Spacing3& spacing,
                                             const SequenceParams& seq,
                                             const TissueTable& table,
                                             double variation_pct,
                                             int n_slices);

}  // namespace s2r

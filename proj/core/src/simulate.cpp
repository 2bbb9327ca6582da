#include "s2r/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

#include <fftw3.h>

#include "s2r/rng.hpp"

namespace s2r {

void TissueProperties::validate() const {
  if (!(t2_star > 0 && t2_star <= t2 && t2 <= t1))
    throw ValidationError(
        "TissueProperties: requires 0 < t2_star <= t2 <= t1");
  if (!(pd > 0 && pd <= 1.2))
    throw ValidationError("TissueProperties: pd must be in (0, 1.2]");
}

TissueTable default_tissue_table() {
  // literature-typical 1.5T values; configuration, not ground truth
  TissueTable t;
  t[TissueClass::body] = {500, 50, 35, 0.7};
  t[TissueClass::lung] = {1200, 80, 30, 0.2};
  t[TissueClass::myocardium] = {950, 50, 35, 0.8};
  t[TissueClass::lv_blood] = {1550, 240, 180, 0.95};
  t[TissueClass::rv_blood] = {1550, 240, 180, 0.95};
  return t;
}

const char* sequence_kind_name(SequenceKind k) {
  return k == SequenceKind::SPGR ? "SPGR" : "bSSFP";
}

SequenceKind sequence_kind_from_name(const std::string& s) {
  if (s == "SPGR" || s == "spgr") return SequenceKind::SPGR;
  if (s == "bSSFP" || s == "bssfp") return SequenceKind::bSSFP;
  throw ValidationError("unknown sequence kind '" + s + "'");
}

void SequenceParams::validate() const {
  if (!(te_ms > 0 && te_ms < tr_ms))
    throw ValidationError("SequenceParams: requires 0 < te < tr");
  if (!(flip_deg > 0 && flip_deg < 180))
    throw ValidationError("SequenceParams: flip angle must be in (0, 180)");
  if (noise_sd < 0)
    throw ValidationError("SequenceParams: noise_sd must be >= 0");
}

PropertyMaps assign_tissue_properties(const LabelSlice& slice,
                                      const TissueTable& table,
                                      double variation_pct, uint64_t seed) {
  if (variation_pct < 0 || variation_pct > 0.3)
    throw ValidationError("variation_pct must be in [0, 0.3]");

  // one perturbation per class per (slice, seed); drawn for all classes in
  // id order so the stream does not depend on which classes are present
  Rng rng(derive_seed(seed, "simulate.properties"));
  std::array<TissueProperties, kNumTissueClasses> perturbed;
  std::array<bool, kNumTissueClasses> mapped{};
  for (int id = 0; id < kNumTissueClasses; ++id) {
    double f1 = rng.uniform(1 - variation_pct, 1 + variation_pct);
    double f2 = rng.uniform(1 - variation_pct, 1 + variation_pct);
    double f3 = rng.uniform(1 - variation_pct, 1 + variation_pct);
    double f4 = rng.uniform(1 - variation_pct, 1 + variation_pct);
    auto it = table.find(static_cast<TissueClass>(id));
    if (it == table.end()) continue;
    TissueProperties p = it->second;
    p.t1 *= f1;
    p.t2 = std::min(p.t2 * f2, p.t1);
    p.t2_star = std::min(p.t2_star * f3, p.t2);
    p.pd = std::min(p.pd * f4, 1.2);
    p.validate();
    perturbed[id] = p;
    mapped[id] = true;
  }

  PropertyMaps maps;
  maps.nx = slice.nx;
  maps.ny = slice.ny;
  size_t n = maps.size();
  maps.t1.resize(n);
  maps.t2.resize(n);
  maps.t2_star.resize(n);
  maps.pd.resize(n);
  for (size_t i = 0; i < n; ++i) {
    uint8_t id = slice.labels[i];
    if (id == static_cast<uint8_t>(TissueClass::background)) {
      maps.t1[i] = 1000;
      maps.t2[i] = 100;
      maps.t2_star[i] = 70;
      maps.pd[i] = 0;
      continue;
    }
    if (id >= kNumTissueClasses || !mapped[id])
      throw ValidationError("unmapped tissue class " + std::to_string(id));
    const TissueProperties& p = perturbed[id];
    maps.t1[i] = p.t1;
    maps.t2[i] = p.t2;
    maps.t2_star[i] = p.t2_star;
    maps.pd[i] = p.pd;
  }
  return maps;
}

namespace {

template <typename F>
Image2D per_pixel_signal(const PropertyMaps& props, F&& f) {
  Image2D img(props.nx, props.ny);
  for (size_t i = 0; i < props.size(); ++i) {
    if (props.pd[i] <= 0) {
      img.pixels[i] = 0.0f;
      continue;
    }
    double s = f(i);
    if (!std::isfinite(s)) throw NumericError("non-finite signal value");
    img.pixels[i] = static_cast<float>(s);
  }
  return img;
}

}  // namespace

Image2D signal_spgr(const PropertyMaps& props, const SequenceParams& seq) {
  seq.validate();
  if (seq.kind != SequenceKind::SPGR)
    throw ValidationError("signal_spgr: sequence kind must be SPGR");
  double a = seq.flip_deg * M_PI / 180.0;
  double sa = std::sin(a), ca = std::cos(a);
  Image2D img = per_pixel_signal(props, [&](size_t i) {
    double e1 = std::exp(-seq.tr_ms / props.t1[i]);
    return props.pd[i] * sa * (1 - e1) / (1 - ca * e1) *
           std::exp(-seq.te_ms / props.t2_star[i]);
  });
  img.add_meta("sequence", "SPGR");
  return img;
}

Image2D signal_bssfp(const PropertyMaps& props, const SequenceParams& seq) {
  seq.validate();
  if (seq.kind != SequenceKind::bSSFP)
    throw ValidationError("signal_bssfp: sequence kind must be bSSFP");
  double a = seq.flip_deg * M_PI / 180.0;
  double sa = std::sin(a), ca = std::cos(a);
  Image2D img = per_pixel_signal(props, [&](size_t i) {
    double e1 = std::exp(-seq.tr_ms / props.t1[i]);
    double e2 = std::exp(-seq.tr_ms / props.t2[i]);
    return props.pd[i] * sa * (1 - e1) /
           (1 - (e1 - e2) * ca - e1 * e2) *
           std::exp(-seq.te_ms / props.t2[i]);
  });
  img.add_meta("sequence", "bSSFP");
  return img;
}

Image2D inject_kspace_noise(const Image2D& img, double noise_sd,
                            uint64_t seed) {
  img.validate();
  if (noise_sd < 0) throw ValidationError("noise_sd must be >= 0");
  int nx = img.width, ny = img.height;
  size_t n = img.size();

  std::vector<std::complex<double>> buf(n), kspace(n);
  for (size_t i = 0; i < n; ++i) buf[i] = img.pixels[i];

  fftw_plan fwd = fftw_plan_dft_2d(
      ny, nx, reinterpret_cast<fftw_complex*>(buf.data()),
      reinterpret_cast<fftw_complex*>(kspace.data()), FFTW_FORWARD,
      FFTW_ESTIMATE);
  fftw_execute(fwd);
  fftw_destroy_plan(fwd);

  if (noise_sd > 0) {
    // reference amplitude falls back to 1 for an all-zero image so the
    // requested noise floor is still meaningful
    double amp = image_max(img);
    if (amp <= 0) amp = 1.0;
    double sd = noise_sd * amp * std::sqrt(static_cast<double>(n));
    Rng rng(derive_seed(seed, "simulate.kspace_noise"));
    for (size_t i = 0; i < n; ++i)
      kspace[i] += std::complex<double>(rng.normal(0, sd), rng.normal(0, sd));
  }

  fftw_plan bwd = fftw_plan_dft_2d(
      ny, nx, reinterpret_cast<fftw_complex*>(kspace.data()),
      reinterpret_cast<fftw_complex*>(buf.data()), FFTW_BACKWARD,
      FFTW_ESTIMATE);
  fftw_execute(bwd);
  fftw_destroy_plan(bwd);

  Image2D out(nx, ny);
  out.meta = img.meta;
  double inv = 1.0 / static_cast<double>(n);
  for (size_t i = 0; i < n; ++i)
    out.pixels[i] = static_cast<float>(std::abs(buf[i] * inv));
  out.add_meta("noise_sd", std::to_string(noise_sd));
  out.validate();
  return out;
}

std::vector<SimulatedSlice> simulate_subject(const VirtualSubjectSpec& spec,
                                             const SubjectDims& dims,
                                             const Spacing3& spacing,
                                             const SequenceParams& seq,
                                             const TissueTable& table,
                                             double variation_pct,
                                             int n_slices) {
  SubjectVolumes vols = generate_virtual_subject(spec, dims, spacing);
  std::vector<SimulatedSlice> out;
  int slice_counter = 0;
  for (const LabelVolume* vol : {&vols.ed, &vols.es}) {
    auto slices = extract_midventricular_slices(*vol, n_slices);
    for (auto& sl : slices) {
      uint64_t slice_seed = derive_seed(
          spec.seed, "simulate.slice", static_cast<uint64_t>(slice_counter));
      PropertyMaps props =
          assign_tissue_properties(sl, table, variation_pct, slice_seed);
      Image2D img = seq.kind == SequenceKind::SPGR ? signal_spgr(props, seq)
                                                   : signal_bssfp(props, seq);
      img = inject_kspace_noise(img, seq.noise_sd, slice_seed);
      img.add_meta("subject", spec.subject_id);
      img.add_meta("phase", phase_name(vol->phase));
      img.add_meta("slice", std::to_string(sl.slice_index));
      out.push_back({std::move(img), std::move(sl)});
      ++slice_counter;
    }
  }
  return out;
}

}  // namespace s2r

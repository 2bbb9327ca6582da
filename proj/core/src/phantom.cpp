#include "s2r/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "s2r/rng.hpp"

namespace s2r {

const char* tissue_class_name(TissueClass c) {
  switch (c) {
    case TissueClass::background: return "background";
    case TissueClass::body: return "body";
    case TissueClass::lung: return "lung";
    case TissueClass::myocardium: return "myocardium";
    case TissueClass::lv_blood: return "lv_blood";
    case TissueClass::rv_blood: return "rv_blood";
  }
  return "?";
}

TissueClass tissue_class_from_id(uint8_t id) {
  if (id >= kNumTissueClasses)
    throw ValidationError("unknown tissue id " + std::to_string(id));
  return static_cast<TissueClass>(id);
}

const char* phase_name(CardiacPhase p) {
  return p == CardiacPhase::ED ? "ED" : "ES";
}

CardiacPhase phase_from_name(const std::string& s) {
  if (s == "ED") return CardiacPhase::ED;
  if (s == "ES") return CardiacPhase::ES;
  throw ValidationError("unknown cardiac phase '" + s + "'");
}

void LabelVolume::validate() const {
  if (nx < 16 || ny < 16 || nz < 4)
    throw ValidationError("LabelVolume: dims below minimum (16,16,4)");
  if (sx <= 0 || sy <= 0 || sz <= 0)
    throw ValidationError("LabelVolume: spacing must be positive");
  if (voxels.size() != static_cast<size_t>(nx) * ny * nz)
    throw ValidationError("LabelVolume: voxel count does not match dims");
  for (uint8_t v : voxels) tissue_class_from_id(v);
}

void VirtualSubjectSpec::validate() const {
  if (lv_radius_ed <= 0 || lv_radius_es <= 0 || myo_thickness_ed <= 0 ||
      myo_thickness_es <= 0 || rv_scale <= 0 || global_scale <= 0)
    throw ValidationError("VirtualSubjectSpec: all lengths/scales must be > 0");
  if (lv_radius_es >= lv_radius_ed)
    throw ValidationError(
        "VirtualSubjectSpec: lv_radius_es must be < lv_radius_ed");
  if (myo_thickness_es < myo_thickness_ed)
    throw ValidationError(
        "VirtualSubjectSpec: myo_thickness_es must be >= myo_thickness_ed");
}

namespace {

struct Geometry {
  double cx, cy, cz;      // LV center, mm
  double ax, ay;          // xy anisotropy jitter
  double z_ratio = 1.6;   // long-axis over short-axis
};

inline bool inside_ellipsoid(double x, double y, double z, double cx,
                             double cy, double cz, double rx, double ry,
                             double rz) {
  double dx = (x - cx) / rx, dy = (y - cy) / ry, dz = (z - cz) / rz;
  return dx * dx + dy * dy + dz * dz <= 1.0;
}

LabelVolume paint_phase(const VirtualSubjectSpec& spec, const SubjectDims& d,
                        const Spacing3& sp, const Geometry& g,
                        CardiacPhase phase) {
  double r = (phase == CardiacPhase::ED ? spec.lv_radius_ed
                                        : spec.lv_radius_es) *
             spec.global_scale;
  double th = (phase == CardiacPhase::ED ? spec.myo_thickness_ed
                                         : spec.myo_thickness_es) *
              spec.global_scale;

  double lv_rx = r * g.ax, lv_ry = r * g.ay, lv_rz = r * g.z_ratio;
  double epi_rx = lv_rx + th, epi_ry = lv_ry + th, epi_rz = lv_rz + th;

  // RV crescent: an ellipsoid offset toward -x, carved by the epicardium
  double rv_off = (lv_rx + th) * 0.8;
  double rv_rx = (lv_rx + th) * 1.05 * spec.rv_scale;
  double rv_ry = lv_ry * 0.95 * spec.rv_scale;
  double rv_rz = lv_rz * 0.85;
  double rv_cx = g.cx - rv_off;

  double Lx = d.nx * sp.sx, Ly = d.ny * sp.sy, Lz = d.nz * sp.sz;

  auto check_fits = [&](const char* what, double cx, double cy, double cz,
                        double rx, double ry, double rz) {
    if (cx - rx < 0 || cx + rx > Lx || cy - ry < 0 || cy + ry > Ly ||
        cz - rz < 0 || cz + rz > Lz)
      throw ValidationError(std::string("anatomy out of bounds: ") + what);
  };
  check_fits("lv epicardium", g.cx, g.cy, g.cz, epi_rx, epi_ry, epi_rz);
  check_fits("rv crescent", rv_cx, g.cy, g.cz, rv_rx, rv_ry, rv_rz);

  // body torso ellipse (all z) and two lung ellipsoids
  double body_cx = Lx / 2, body_cy = Ly / 2;
  double body_rx = Lx * 0.46, body_ry = Ly * 0.42;
  double lung_rz = Lz * 0.48, lung_cz = Lz / 2;
  double lung_rx = Lx * 0.16, lung_ry = Ly * 0.24;
  double lungL_cx = body_cx - Lx * 0.28, lungR_cx = body_cx + Lx * 0.28;
  double lung_cy = body_cy - Ly * 0.05;

  LabelVolume vol;
  vol.nx = d.nx;
  vol.ny = d.ny;
  vol.nz = d.nz;
  vol.sx = sp.sx;
  vol.sy = sp.sy;
  vol.sz = sp.sz;
  vol.phase = phase;
  vol.voxels.assign(static_cast<size_t>(d.nx) * d.ny * d.nz,
                    static_cast<uint8_t>(TissueClass::background));

  for (int k = 0; k < d.nz; ++k) {
    double z = (k + 0.5) * sp.sz;
    for (int j = 0; j < d.ny; ++j) {
      double y = (j + 0.5) * sp.sy;
      for (int i = 0; i < d.nx; ++i) {
        double x = (i + 0.5) * sp.sx;
        TissueClass c = TissueClass::background;
        double bx = (x - body_cx) / body_rx, by = (y - body_cy) / body_ry;
        if (bx * bx + by * by <= 1.0) c = TissueClass::body;
        if (c == TissueClass::body) {
          if (inside_ellipsoid(x, y, z, lungL_cx, lung_cy, lung_cz, lung_rx,
                               lung_ry, lung_rz) ||
              inside_ellipsoid(x, y, z, lungR_cx, lung_cy, lung_cz, lung_rx,
                               lung_ry, lung_rz))
            c = TissueClass::lung;
        }
        bool in_epi = inside_ellipsoid(x, y, z, g.cx, g.cy, g.cz, epi_rx,
                                       epi_ry, epi_rz);
        if (in_epi) {
          c = inside_ellipsoid(x, y, z, g.cx, g.cy, g.cz, lv_rx, lv_ry, lv_rz)
                  ? TissueClass::lv_blood
                  : TissueClass::myocardium;
        } else if (inside_ellipsoid(x, y, z, rv_cx, g.cy, g.cz, rv_rx, rv_ry,
                                    rv_rz)) {
          c = TissueClass::rv_blood;
        }
        vol.at(i, j, k) = static_cast<uint8_t>(c);
      }
    }
  }
  vol.validate();
  return vol;
}

}  // namespace

SubjectVolumes generate_virtual_subject(const VirtualSubjectSpec& spec,
                                        const SubjectDims& dims,
                                        const Spacing3& spacing) {
  spec.validate();
  if (dims.nx < 16 || dims.ny < 16 || dims.nz < 4)
    throw ValidationError("subject dims below minimum (16,16,4)");
  if (spacing.sx <= 0 || spacing.sy <= 0 || spacing.sz <= 0)
    throw ValidationError("spacing must be positive");

  Rng rng(derive_seed(spec.seed, "phantom.jitter"));
  Geometry g;
  g.cx = dims.nx * spacing.sx / 2 + rng.uniform(-1.5, 1.5);
  g.cy = dims.ny * spacing.sy / 2 + rng.uniform(-1.5, 1.5);
  g.cz = dims.nz * spacing.sz / 2;
  g.ax = rng.uniform(0.95, 1.05);
  g.ay = rng.uniform(0.95, 1.05);

  SubjectVolumes out;
  out.ed = paint_phase(spec, dims, spacing, g, CardiacPhase::ED);
  out.es = paint_phase(spec, dims, spacing, g, CardiacPhase::ES);
  return out;
}

double lv_volume_ml(const LabelVolume& vol) {
  vol.validate();
  size_t count = 0;
  for (uint8_t v : vol.voxels)
    if (v == static_cast<uint8_t>(TissueClass::lv_blood)) ++count;
  return static_cast<double>(count) * vol.sx * vol.sy * vol.sz / 1000.0;
}

LabelSlice slice_of(const LabelVolume& vol, int z) {
  LabelSlice s;
  s.nx = vol.nx;
  s.ny = vol.ny;
  s.sx = vol.sx;
  s.sy = vol.sy;
  s.phase = vol.phase;
  s.slice_index = z;
  s.labels.assign(vol.voxels.begin() + static_cast<size_t>(z) * vol.nx * vol.ny,
                  vol.voxels.begin() +
                      static_cast<size_t>(z + 1) * vol.nx * vol.ny);
  return s;
}

std::vector<LabelSlice> extract_midventricular_slices(const LabelVolume& vol,
                                                      int n) {
  vol.validate();
  if (n < 1) throw ValidationError("slice count must be >= 1");

  double zsum = 0;
  size_t count = 0;
  for (int k = 0; k < vol.nz; ++k)
    for (int j = 0; j < vol.ny; ++j)
      for (int i = 0; i < vol.nx; ++i)
        if (vol.at(i, j, k) == static_cast<uint8_t>(TissueClass::lv_blood)) {
          zsum += k;
          ++count;
        }
  if (count == 0)
    throw ValidationError("insufficient ventricular extent: no lv_blood");

  // ties at .5 break toward lower z
  int center = static_cast<int>(std::floor(zsum / static_cast<double>(count)));
  int start = center - (n - 1) / 2;

  std::vector<LabelSlice> out;
  for (int k = start; k < start + n; ++k) {
    if (k < 0 || k >= vol.nz)
      throw ValidationError("insufficient ventricular extent");
    LabelSlice s = slice_of(vol, k);
    bool has_lv = false, has_myo = false;
    for (uint8_t v : s.labels) {
      has_lv |= v == static_cast<uint8_t>(TissueClass::lv_blood);
      has_myo |= v == static_cast<uint8_t>(TissueClass::myocardium);
    }
    if (!has_lv || !has_myo)
      throw ValidationError("insufficient ventricular extent");
    out.push_back(std::move(s));
  }
  return out;
}

void save_label_volume(const LabelVolume& vol, const std::string& path) {
  vol.validate();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for write: " + path);
  char buf[128];
  os << "S2R-LABELS 1\n";
  os << "dims: " << vol.nx << " " << vol.ny << " " << vol.nz << "\n";
  std::snprintf(buf, sizeof buf, "spacing: %.17g %.17g %.17g\n", vol.sx,
                vol.sy, vol.sz);
  os << buf;
  os << "phase: " << phase_name(vol.phase) << "\n";
  os << "classes:";
  for (int i = 0; i < kNumTissueClasses; ++i)
    os << " " << i << "=" << tissue_class_name(static_cast<TissueClass>(i));
  os << "\n---\n";
  os.write(reinterpret_cast<const char*>(vol.voxels.data()),
           static_cast<std::streamsize>(vol.voxels.size()));
  if (!os) throw IoError("short write: " + path);
}

LabelVolume load_label_volume(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open: " + path);
  std::string line;
  if (!std::getline(is, line) || line != "S2R-LABELS 1")
    throw IoError("malformed header: not an S2R-LABELS file: " + path);
  LabelVolume vol;
  bool have_dims = false;
  while (std::getline(is, line)) {
    if (line == "---") break;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "dims:") {
      ls >> vol.nx >> vol.ny >> vol.nz;
      have_dims = true;
    } else if (key == "spacing:") {
      ls >> vol.sx >> vol.sy >> vol.sz;
    } else if (key == "phase:") {
      std::string p;
      ls >> p;
      vol.phase = phase_from_name(p);
    } else if (key == "classes:") {
      // informational; ids are validated against the fixed table below
    } else {
      throw IoError("malformed header key '" + key + "' in " + path);
    }
  }
  if (!have_dims) throw IoError("malformed header: missing dims in " + path);
  if (vol.sx <= 0 || vol.sy <= 0 || vol.sz <= 0)
    throw ValidationError("invalid spacing in " + path);
  size_t n = static_cast<size_t>(vol.nx) * vol.ny * vol.nz;
  vol.voxels.resize(n);
  is.read(reinterpret_cast<char*>(vol.voxels.data()),
          static_cast<std::streamsize>(n));
  if (static_cast<size_t>(is.gcount()) != n || is.peek() != EOF)
    throw IoError("dims/payload mismatch in " + path);
  vol.validate();
  return vol;
}

VirtualSubjectSpec sample_subject_spec(const PopulationRanges& r,
                                       uint64_t master_seed, int index) {
  Rng rng(derive_seed(master_seed, "phantom.population",
                      static_cast<uint64_t>(index)));
  VirtualSubjectSpec s;
  char id[32];
  std::snprintf(id, sizeof id, "subj_%04d", index);
  s.subject_id = id;
  s.lv_radius_ed = rng.uniform(r.lv_radius_ed_min, r.lv_radius_ed_max);
  double ef = rng.uniform(r.ef_min, r.ef_max);
  s.lv_radius_es = s.lv_radius_ed * std::cbrt(1.0 - ef);
  s.myo_thickness_ed =
      rng.uniform(r.myo_thickness_ed_min, r.myo_thickness_ed_max);
  s.myo_thickness_es =
      s.myo_thickness_ed * rng.uniform(r.wall_thickening_min,
                                       r.wall_thickening_max);
  s.rv_scale = rng.uniform(r.rv_scale_min, r.rv_scale_max);
  s.global_scale = rng.uniform(r.global_scale_min, r.global_scale_max);
  s.seed = derive_seed(master_seed, "phantom.subject",
                       static_cast<uint64_t>(index));
  s.validate();
  return s;
}

}  // namespace s2r

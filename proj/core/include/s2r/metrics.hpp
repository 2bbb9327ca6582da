#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "s2r/image.hpp"
#include "s2r/phantom.hpp"

namespace s2r {

// (mean, covariance) summary of a feature distribution.
struct FeatureStats {
  int64_t n = 0;
  std::vector<double> mu;             // d
  std::vector<double> sigma;          // d*d row-major, symmetric
  std::string extractor_id;           // must match between compared stats

  int dim() const { return static_cast<int>(mu.size()); }
};

enum class ExtractorKind { random_conv, pixel_stats };

const char* extractor_kind_name(ExtractorKind k);
ExtractorKind extractor_kind_from_name(const std::string& s);

struct FeatureExtractor {
  ExtractorKind kind = ExtractorKind::pixel_stats;
  uint64_t seed = 0;

  std::string id() const;
  int output_dim() const;
};

// random_conv: fixed-seed 3-layer strided conv stack with global average
// pooling, weights frozen at initialization. pixel_stats: 32-bin intensity
// histogram + mean/variance/gradient-magnitude statistics.
std::vector<std::vector<double>> extract_features(
    const std::vector<Image2D>& images, const FeatureExtractor& extractor);

// Sample mean and unbiased covariance, symmetrized by (S + S^T)/2.
FeatureStats gaussian_stats(const std::vector<std::vector<double>>& vectors,
                            const std::string& extractor_id = "");

// Eigendecomposition square root; negative eigenvalues clamped to 0.
// d*d row-major in and out; throws on asymmetry beyond 1e-8 (relative).
std::vector<double> matrix_sqrt_psd(const std::vector<double>& m, int d);

// ||mu_a - mu_b||^2 + Tr(S_a + S_b - 2 (S_a^1/2 S_b S_a^1/2)^1/2);
// tiny negative rounding (> -1e-6) clamps to 0.
double frechet_distance(const FeatureStats& a, const FeatureStats& b);

struct Mask2D {
  int nx = 0, ny = 0;
  double sx = 1.0, sy = 1.0;  // mm
  TissueClass cls = TissueClass::lv_blood;
  std::vector<uint8_t> in;  // 0/1 membership

  bool at(int x, int y) const {
    return in[static_cast<size_t>(y) * nx + x] != 0;
  }
};

Mask2D mask_for_class(const LabelSlice& slice, TissueClass cls);

// 2|A and B| / (|A| + |B|); both empty -> 1.
double dice(const Mask2D& a, const Mask2D& b);

// Exact symmetric Hausdorff distance between boundary pixel centers, in mm.
// percentile in (0, 100]; 100 is the maximum. Empty masks are an error.
double hausdorff(const Mask2D& a, const Mask2D& b, double percentile = 100.0);

struct RealismRow {
  std::string pair;  // e.g. "sim_vs_real"
  double fid = 0.0;
  int64_t n_a = 0, n_b = 0;
};

struct RealismReport {
  std::string extractor_id;
  std::vector<RealismRow> rows;
};

// FID(sim, real) and, when translated is non-empty, FID(translated, real).
RealismReport evaluate_realism(const std::vector<Image2D>& sim,
                               const std::vector<Image2D>& real,
                               const std::vector<Image2D>& translated,
                               const FeatureExtractor& extractor);

void write_realism_csv(const RealismReport& report, const std::string& path);

}  // namespace s2r

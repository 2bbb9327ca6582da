#include "s2r/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <Eigen/Dense>

#include "s2r/rng.hpp"

namespace s2r {

const char* extractor_kind_name(ExtractorKind k) {
  return k == ExtractorKind::random_conv ? "random_conv" : "pixel_stats";
}

ExtractorKind extractor_kind_from_name(const std::string& s) {
  if (s == "random_conv") return ExtractorKind::random_conv;
  if (s == "pixel_stats") return ExtractorKind::pixel_stats;
  throw ValidationError("unknown extractor kind '" + s + "'");
}

std::string FeatureExtractor::id() const {
  return std::string(extractor_kind_name(kind)) + ":" + std::to_string(seed);
}

int FeatureExtractor::output_dim() const {
  return kind == ExtractorKind::random_conv ? 32 : 35;
}

namespace {

// 32-bin histogram over [0,1] + mean, variance, mean gradient magnitude
std::vector<double> pixel_stats_features(const Image2D& img) {
  constexpr int kBins = 32;
  std::vector<double> f(kBins + 3, 0.0);
  size_t n = img.size();
  double mean = 0;
  for (float p : img.pixels) {
    double v = std::clamp(static_cast<double>(p), 0.0, 1.0);
    int bin = std::min(kBins - 1, static_cast<int>(v * kBins));
    f[bin] += 1.0;
    mean += v;
  }
  for (int b = 0; b < kBins; ++b) f[b] /= static_cast<double>(n);
  mean /= static_cast<double>(n);
  double var = 0;
  for (float p : img.pixels) {
    double d = std::clamp(static_cast<double>(p), 0.0, 1.0) - mean;
    var += d * d;
  }
  var /= static_cast<double>(n);
  double grad = 0;
  size_t gn = 0;
  for (int y = 0; y + 1 < img.height; ++y)
    for (int x = 0; x + 1 < img.width; ++x) {
      double gx = img.at(x + 1, y) - img.at(x, y);
      double gy = img.at(x, y + 1) - img.at(x, y);
      grad += std::sqrt(gx * gx + gy * gy);
      ++gn;
    }
  f[kBins] = mean;
  f[kBins + 1] = var;
  f[kBins + 2] = gn ? grad / static_cast<double>(gn) : 0.0;
  return f;
}

struct RandomConvNet {
  // three strided 3x3 layers, 1->8->16->32, weights frozen at init
  static constexpr int kChannels[4] = {1, 8, 16, 32};
  std::vector<std::vector<double>> w;  // per layer [co][ci][3][3]
  std::vector<std::vector<double>> b;

  explicit RandomConvNet(uint64_t seed) {
    Rng rng(derive_seed(seed, "metrics.random_conv"));
    for (int l = 0; l < 3; ++l) {
      int ci = kChannels[l], co = kChannels[l + 1];
      std::vector<double> wl(static_cast<size_t>(co) * ci * 9);
      double sd = std::sqrt(2.0 / (ci * 9));
      for (auto& x : wl) x = rng.normal(0, sd);
      w.push_back(std::move(wl));
      std::vector<double> bl(co);
      for (auto& x : bl) x = rng.normal(0, 0.1);
      b.push_back(std::move(bl));
    }
  }

  std::vector<double> features(const Image2D& img) const {
    int H = img.height, W = img.width;
    std::vector<double> cur(img.pixels.begin(), img.pixels.end());
    int C = 1;
    for (int l = 0; l < 3; ++l) {
      int co = kChannels[l + 1];
      int Ho = (H + 2 - 3) / 2 + 1, Wo = (W + 2 - 3) / 2 + 1;
      std::vector<double> next(static_cast<size_t>(co) * Ho * Wo, 0.0);
      for (int f = 0; f < co; ++f)
        for (int oh = 0; oh < Ho; ++oh)
          for (int ow = 0; ow < Wo; ++ow) {
            double acc = b[l][f];
            for (int c = 0; c < C; ++c)
              for (int r = 0; r < 3; ++r) {
                int ih = oh * 2 - 1 + r;
                if (ih < 0 || ih >= H) continue;
                for (int s = 0; s < 3; ++s) {
                  int iw = ow * 2 - 1 + s;
                  if (iw < 0 || iw >= W) continue;
                  acc += w[l][((static_cast<size_t>(f) * C + c) * 3 + r) * 3 +
                              s] *
                         cur[(static_cast<size_t>(c) * H + ih) * W + iw];
                }
              }
            // leaky relu
            next[(static_cast<size_t>(f) * Ho + oh) * Wo + ow] =
                acc >= 0 ? acc : 0.2 * acc;
          }
      cur = std::move(next);
      C = co;
      H = Ho;
      W = Wo;
    }
    std::vector<double> out(C);
    for (int c = 0; c < C; ++c) {
      double acc = 0;
      for (int i = 0; i < H * W; ++i)
        acc += cur[static_cast<size_t>(c) * H * W + i];
      out[c] = acc / (H * W);
    }
    return out;
  }
};

}  // namespace

std::vector<std::vector<double>> extract_features(
    const std::vector<Image2D>& images, const FeatureExtractor& extractor) {
  if (images.empty()) return {};
  int w = images[0].width, h = images[0].height;
  for (const auto& img : images)
    if (img.width != w || img.height != h)
      throw ValidationError("extract_features: image dims mismatch");

  std::vector<std::vector<double>> out(images.size());
  if (extractor.kind == ExtractorKind::pixel_stats) {
    for (size_t i = 0; i < images.size(); ++i)
      out[i] = pixel_stats_features(images[i]);
  } else {
    RandomConvNet net(extractor.seed);
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < static_cast<int64_t>(images.size()); ++i)
      out[i] = net.features(images[i]);
  }
  return out;
}

FeatureStats gaussian_stats(const std::vector<std::vector<double>>& vectors,
                            const std::string& extractor_id) {
  if (vectors.size() < 2)
    throw ValidationError("gaussian_stats: needs at least 2 vectors");
  int64_t n = static_cast<int64_t>(vectors.size());
  int d = static_cast<int>(vectors[0].size());
  for (const auto& v : vectors)
    if (static_cast<int>(v.size()) != d)
      throw ValidationError("gaussian_stats: vector dims mismatch");

  FeatureStats st;
  st.n = n;
  st.extractor_id = extractor_id;
  st.mu.assign(d, 0.0);
  for (const auto& v : vectors)
    for (int i = 0; i < d; ++i) st.mu[i] += v[i];
  for (int i = 0; i < d; ++i) st.mu[i] /= static_cast<double>(n);

  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(d, d);
  Eigen::VectorXd mu = Eigen::Map<Eigen::VectorXd>(st.mu.data(), d);
  for (const auto& v : vectors) {
    Eigen::VectorXd x =
        Eigen::Map<const Eigen::VectorXd>(v.data(), d) - mu;
    S.noalias() += x * x.transpose();
  }
  S /= static_cast<double>(n - 1);  // unbiased
  S = ((S + S.transpose()) / 2).eval();
  st.sigma.assign(S.data(), S.data() + static_cast<size_t>(d) * d);
  return st;
}

std::vector<double> matrix_sqrt_psd(const std::vector<double>& m, int d) {
  if (static_cast<int>(m.size()) != d * d)
    throw ValidationError("matrix_sqrt_psd: size mismatch");
  Eigen::Map<const Eigen::MatrixXd> M(m.data(), d, d);
  double scale = std::max(1.0, M.norm());
  if ((M - M.transpose()).norm() / scale > 1e-8)
    throw ValidationError("matrix_sqrt_psd: matrix not symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
      (M + M.transpose()) / 2);
  if (es.info() != Eigen::Success)
    throw NumericError("matrix_sqrt_psd: eigendecomposition failed");
  Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  Eigen::MatrixXd R =
      es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
  return std::vector<double>(R.data(), R.data() + static_cast<size_t>(d) * d);
}

double frechet_distance(const FeatureStats& a, const FeatureStats& b) {
  if (a.dim() != b.dim())
    throw ValidationError("frechet_distance: dimension mismatch");
  if (!a.extractor_id.empty() && !b.extractor_id.empty() &&
      a.extractor_id != b.extractor_id)
    throw ValidationError("frechet_distance: extractor mismatch");
  int d = a.dim();

  double mu_term = 0;
  for (int i = 0; i < d; ++i) {
    double diff = a.mu[i] - b.mu[i];
    mu_term += diff * diff;
  }

  Eigen::Map<const Eigen::MatrixXd> Sa(a.sigma.data(), d, d);
  Eigen::Map<const Eigen::MatrixXd> Sb(b.sigma.data(), d, d);

  std::vector<double> ra = matrix_sqrt_psd(a.sigma, d);
  Eigen::Map<const Eigen::MatrixXd> Ra(ra.data(), d, d);
  Eigen::MatrixXd inner = Ra * Sb * Ra;
  inner = ((inner + inner.transpose()) / 2).eval();
  std::vector<double> inner_v(inner.data(),
                              inner.data() + static_cast<size_t>(d) * d);
  std::vector<double> cross = matrix_sqrt_psd(inner_v, d);
  Eigen::Map<const Eigen::MatrixXd> Cr(cross.data(), d, d);

  double result = mu_term + Sa.trace() + Sb.trace() - 2.0 * Cr.trace();
  if (result < 0) {
    if (result > -1e-6) return 0.0;
    throw NumericError("frechet_distance: negative beyond tolerance");
  }
  return result;
}

Mask2D mask_for_class(const LabelSlice& slice, TissueClass cls) {
  Mask2D m;
  m.nx = slice.nx;
  m.ny = slice.ny;
  m.sx = slice.sx;
  m.sy = slice.sy;
  m.cls = cls;
  m.in.resize(slice.labels.size());
  for (size_t i = 0; i < slice.labels.size(); ++i)
    m.in[i] = slice.labels[i] == static_cast<uint8_t>(cls) ? 1 : 0;
  return m;
}

double dice(const Mask2D& a, const Mask2D& b) {
  if (a.nx != b.nx || a.ny != b.ny)
    throw ValidationError("dice: dims mismatch");
  if (a.cls != b.cls) throw ValidationError("dice: class mismatch");
  size_t na = 0, nb = 0, inter = 0;
  for (size_t i = 0; i < a.in.size(); ++i) {
    na += a.in[i] != 0;
    nb += b.in[i] != 0;
    inter += (a.in[i] != 0 && b.in[i] != 0);
  }
  if (na + nb == 0) return 1.0;  // both empty
  return 2.0 * static_cast<double>(inter) / static_cast<double>(na + nb);
}

namespace {

std::vector<std::pair<int, int>> boundary_pixels(const Mask2D& m) {
  std::vector<std::pair<int, int>> out;
  for (int y = 0; y < m.ny; ++y)
    for (int x = 0; x < m.nx; ++x) {
      if (!m.at(x, y)) continue;
      bool edge = x == 0 || x == m.nx - 1 || y == 0 || y == m.ny - 1 ||
                  !m.at(x - 1, y) || !m.at(x + 1, y) || !m.at(x, y - 1) ||
                  !m.at(x, y + 1);
      if (edge) out.emplace_back(x, y);
    }
  return out;
}

// directed distances from each boundary pixel of a to the closest of b
void directed_dists(const std::vector<std::pair<int, int>>& a,
                    const std::vector<std::pair<int, int>>& b, double sx,
                    double sy, std::vector<double>& out) {
  for (const auto& [ax, ay] : a) {
    double best = 1e300;
    for (const auto& [bx, by] : b) {
      double dx = (ax - bx) * sx, dy = (ay - by) * sy;
      best = std::min(best, dx * dx + dy * dy);
    }
    out.push_back(std::sqrt(best));
  }
}

}  // namespace

double hausdorff(const Mask2D& a, const Mask2D& b, double percentile) {
  if (a.nx != b.nx || a.ny != b.ny)
    throw ValidationError("hausdorff: dims mismatch");
  if (a.sx != b.sx || a.sy != b.sy)
    throw ValidationError("hausdorff: spacing mismatch");
  if (percentile <= 0 || percentile > 100)
    throw ValidationError("hausdorff: percentile must be in (0, 100]");
  auto ba = boundary_pixels(a);
  auto bb = boundary_pixels(b);
  if (ba.empty() || bb.empty())
    throw ValidationError("undefined HD for empty mask");
  std::vector<double> dists;
  directed_dists(ba, bb, a.sx, a.sy, dists);
  directed_dists(bb, ba, a.sx, a.sy, dists);
  if (percentile >= 100.0)
    return *std::max_element(dists.begin(), dists.end());
  std::sort(dists.begin(), dists.end());
  size_t k = static_cast<size_t>(
      std::ceil(percentile / 100.0 * static_cast<double>(dists.size())));
  k = std::clamp<size_t>(k, 1, dists.size());
  return dists[k - 1];
}

RealismReport evaluate_realism(const std::vector<Image2D>& sim,
                               const std::vector<Image2D>& real,
                               const std::vector<Image2D>& translated,
                               const FeatureExtractor& extractor) {
  RealismReport report;
  report.extractor_id = extractor.id();
  auto stats_of = [&](const std::vector<Image2D>& imgs) {
    return gaussian_stats(extract_features(imgs, extractor), extractor.id());
  };
  FeatureStats real_stats = stats_of(real);
  FeatureStats sim_stats = stats_of(sim);
  report.rows.push_back({"sim_vs_real", frechet_distance(sim_stats, real_stats),
                         sim_stats.n, real_stats.n});
  if (!translated.empty()) {
    FeatureStats tr_stats = stats_of(translated);
    report.rows.push_back({"translated_vs_real",
                           frechet_distance(tr_stats, real_stats), tr_stats.n,
                           real_stats.n});
  }
  return report;
}

void write_realism_csv(const RealismReport& report, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open for write: " + path);
  os << "pair,extractor,n_a,n_b,fid\n";
  char buf[64];
  for (const auto& r : report.rows) {
    std::snprintf(buf, sizeof buf, "%.10g", r.fid);
    os << r.pair << "," << report.extractor_id << "," << r.n_a << "," << r.n_b
       << "," << buf << "\n";
  }
}

}  // namespace s2r

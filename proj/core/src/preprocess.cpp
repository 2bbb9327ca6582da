#include "s2r/preprocess.hpp"

#include <algorithm>
#include <cmath>

namespace s2r {

namespace {

bool is_heart_class(uint8_t id) {
  return id == static_cast<uint8_t>(TissueClass::myocardium) ||
         id == static_cast<uint8_t>(TissueClass::lv_blood) ||
         id == static_cast<uint8_t>(TissueClass::rv_blood);
}

}  // namespace

CropRect bbox_from_labels(const LabelSlice& slice, int margin_px) {
  if (margin_px < 0) throw ValidationError("margin must be >= 0");
  int xmin = slice.nx, xmax = -1, ymin = slice.ny, ymax = -1;
  for (int y = 0; y < slice.ny; ++y)
    for (int x = 0; x < slice.nx; ++x)
      if (is_heart_class(slice.at(x, y))) {
        xmin = std::min(xmin, x);
        xmax = std::max(xmax, x);
        ymin = std::min(ymin, y);
        ymax = std::max(ymax, y);
      }
  if (xmax < 0) throw ValidationError("empty heart mask");
  int x0 = std::max(0, xmin - margin_px);
  int y0 = std::max(0, ymin - margin_px);
  int x1 = std::min(slice.nx - 1, xmax + margin_px);
  int y1 = std::min(slice.ny - 1, ymax + margin_px);
  return {x0, y0, x1 - x0 + 1, y1 - y0 + 1};
}

Image2D crop(const Image2D& img, const CropRect& rect) {
  if (rect.width <= 0 || rect.height <= 0)
    throw ValidationError("crop rect must have positive extent");
  if (rect.x0 < 0 || rect.y0 < 0 || rect.x0 + rect.width > img.width ||
      rect.y0 + rect.height > img.height)
    throw ValidationError("crop exceeds image");
  Image2D out(rect.width, rect.height);
  out.meta = img.meta;
  for (int y = 0; y < rect.height; ++y)
    for (int x = 0; x < rect.width; ++x)
      out.at(x, y) = img.at(rect.x0 + x, rect.y0 + y);
  return out;
}

Image2D center_crop(const Image2D& img, int out_w, int out_h) {
  if (img.width < out_w || img.height < out_h)
    throw ValidationError("crop exceeds image");
  CropRect r{(img.width - out_w) / 2, (img.height - out_h) / 2, out_w, out_h};
  Image2D out = crop(img, r);
  out.add_meta("center_crop",
               std::to_string(out_w) + "x" + std::to_string(out_h));
  return out;
}

Image2D resize_bilinear(const Image2D& img, int out_w, int out_h) {
  img.validate();
  if (out_w <= 0 || out_h <= 0)
    throw ValidationError("resize target must be positive");
  Image2D out(out_w, out_h);
  out.meta = img.meta;
  double sx = static_cast<double>(img.width) / out_w;
  double sy = static_cast<double>(img.height) / out_h;
  for (int y = 0; y < out_h; ++y) {
    double fy = (y + 0.5) * sy - 0.5;
    int y0 = static_cast<int>(std::floor(fy));
    double wy = fy - y0;
    int y0c = std::clamp(y0, 0, img.height - 1);
    int y1c = std::clamp(y0 + 1, 0, img.height - 1);
    for (int x = 0; x < out_w; ++x) {
      double fx = (x + 0.5) * sx - 0.5;
      int x0 = static_cast<int>(std::floor(fx));
      double wx = fx - x0;
      int x0c = std::clamp(x0, 0, img.width - 1);
      int x1c = std::clamp(x0 + 1, 0, img.width - 1);
      double v = (1 - wy) * ((1 - wx) * img.at(x0c, y0c) +
                             wx * img.at(x1c, y0c)) +
                 wy * ((1 - wx) * img.at(x0c, y1c) + wx * img.at(x1c, y1c));
      out.at(x, y) = static_cast<float>(v);
    }
  }
  out.add_meta("resize_scale", std::to_string(1.0 / sx) + "," +
                                   std::to_string(1.0 / sy));
  return out;
}

Image2D normalize01(const Image2D& img) {
  img.validate();
  float lo = image_min(img), hi = image_max(img);
  Image2D out(img.width, img.height);
  out.meta = img.meta;
  if (hi > lo) {
    float range = hi - lo;
    for (size_t i = 0; i < img.size(); ++i)
      out.pixels[i] = (img.pixels[i] - lo) / range;
  }  // constant image maps to zeros
  out.add_meta("normalized", "01");
  return out;
}

Image2D preprocess_sim(const Image2D& img, const LabelSlice& labels,
                       const PreprocessParams& p) {
  if (img.width != labels.nx || img.height != labels.ny)
    throw ValidationError("image/label dims mismatch");
  CropRect rect = bbox_from_labels(labels, p.margin_px);
  Image2D out = crop(img, rect);
  out = resize_bilinear(out, p.out_w, p.out_h);
  return normalize01(out);
}

Image2D preprocess_real(const Image2D& img, const PreprocessParams& p) {
  // minimal scale-to-cover resize, so an input already at target dims
  // passes through the geometry unchanged
  double scale = std::max(static_cast<double>(p.out_w) / img.width,
                          static_cast<double>(p.out_h) / img.height);
  int rw = std::max(p.out_w, static_cast<int>(std::lround(img.width * scale)));
  int rh =
      std::max(p.out_h, static_cast<int>(std::lround(img.height * scale)));
  Image2D out = (rw == img.width && rh == img.height)
                    ? img
                    : resize_bilinear(img, rw, rh);
  out = center_crop(out, p.out_w, p.out_h);
  return normalize01(out);
}

LabelSlice preprocess_sim_labels(const LabelSlice& labels,
                                 const PreprocessParams& p) {
  CropRect rect = bbox_from_labels(labels, p.margin_px);
  LabelSlice out;
  out.nx = p.out_w;
  out.ny = p.out_h;
  out.sx = labels.sx * rect.width / p.out_w;
  out.sy = labels.sy * rect.height / p.out_h;
  out.phase = labels.phase;
  out.slice_index = labels.slice_index;
  out.labels.resize(static_cast<size_t>(p.out_w) * p.out_h);
  // nearest-neighbor with the same half-pixel-centered mapping as the image
  double sx = static_cast<double>(rect.width) / p.out_w;
  double sy = static_cast<double>(rect.height) / p.out_h;
  for (int y = 0; y < p.out_h; ++y) {
    int syi = std::clamp(static_cast<int>(std::floor((y + 0.5) * sy)), 0,
                         rect.height - 1);
    for (int x = 0; x < p.out_w; ++x) {
      int sxi = std::clamp(static_cast<int>(std::floor((x + 0.5) * sx)), 0,
                           rect.width - 1);
      out.labels[static_cast<size_t>(y) * p.out_w + x] =
          labels.at(rect.x0 + sxi, rect.y0 + syi);
    }
  }
  return out;
}

}  // namespace s2r

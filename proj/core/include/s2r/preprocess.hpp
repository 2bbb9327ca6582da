#pragma once

#include "s2r/image.hpp"
#include "s2r/phantom.hpp"

namespace s2r {

struct CropRect {
  int x0 = 0, y0 = 0;  // inclusive
  int width = 0, height = 0;
};

// Tightest rect covering all heart-class pixels (myocardium, lv_blood,
// rv_blood), expanded by margin_px per side, clamped to image bounds.
CropRect bbox_from_labels(const LabelSlice& slice, int margin_px);

Image2D crop(const Image2D& img, const CropRect& rect);

// offset = floor((in - out) / 2) per axis
Image2D center_crop(const Image2D& img, int out_w = 128, int out_h = 126);

// Bilinear with half-pixel-centered sampling.
Image2D resize_bilinear(const Image2D& img, int out_w, int out_h);

// (p - min) / (max - min); constant images map to all zeros.
Image2D normalize01(const Image2D& img);

struct PreprocessParams {
  int out_w = 128;
  int out_h = 126;
  int margin_px = 8;
};

// Simulated path: label bbox crop -> resize -> normalize.
Image2D preprocess_sim(const Image2D& img, const LabelSlice& labels,
                       const PreprocessParams& p);

// Real path: resize (scale-to-cover) -> center crop -> normalize.
// An input already at (out_w, out_h) with range [0,1] passes unchanged.
Image2D preprocess_real(const Image2D& img, const PreprocessParams& p);

// The same crop applied to a label slice (nearest-neighbor on resize).
LabelSlice preprocess_sim_labels(const LabelSlice& labels,
                                 const PreprocessParams& p);

}  // namespace s2r

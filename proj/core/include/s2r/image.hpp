#pragma once

#include <string>
#include <utility>
#include <vector>

#include "s2r/error.hpp"

namespace s2r {

// Single-channel real-valued image. Pixels are row-major, x fastest.
// meta carries the provenance chain (subject, phase, sequence, processing).
struct Image2D {
  int width = 0;
  int height = 0;
  std::vector<float> pixels;
  std::vector<std::pair<std::string, std::string>> meta;

  Image2D() = default;
  Image2D(int w, int h, float fill = 0.0f)
      : width(w), height(h), pixels(static_cast<size_t>(w) * h, fill) {}

  float& at(int x, int y) { return pixels[static_cast<size_t>(y) * width + x]; }
  float at(int x, int y) const {
    return pixels[static_cast<size_t>(y) * width + x];
  }
  size_t size() const { return pixels.size(); }

  void add_meta(std::string key, std::string value) {
    meta.emplace_back(std::move(key), std::move(value));
  }
  const std::string* find_meta(const std::string& key) const {
    for (const auto& [k, v] : meta)
      if (k == key) return &v;
    return nullptr;
  }

  void validate() const;  // finite pixels, positive dims
};

float image_min(const Image2D& img);
float image_max(const Image2D& img);

// Text header + raw float32 LE payload. Round-trips bit-exactly.
void save_image(const Image2D& img, const std::string& path);
Image2D load_image(const std::string& path);

// 16-bit PGM (linear rescale to [0, 65535]) for human viewing.
void save_pgm16(const Image2D& img, const std::string& path);

// Paths of every *.s2i file in a directory, sorted by name.
std::vector<std::string> list_images(const std::string& dir);

}  // namespace s2r

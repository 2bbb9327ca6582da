#include "s2r/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace s2r {

namespace {

void write_exact(std::ostream& os, const void* p, size_t n) {
  os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

}  // namespace

void Image2D::validate() const {
  if (width <= 0 || height <= 0)
    throw ValidationError("Image2D: dims must be positive");
  if (pixels.size() != static_cast<size_t>(width) * height)
    throw ValidationError("Image2D: pixel count does not match dims");
  for (float p : pixels)
    if (!std::isfinite(p)) throw NumericError("Image2D: non-finite pixel");
}

float image_min(const Image2D& img) {
  return *std::min_element(img.pixels.begin(), img.pixels.end());
}

float image_max(const Image2D& img) {
  return *std::max_element(img.pixels.begin(), img.pixels.end());
}

void save_image(const Image2D& img, const std::string& path) {
  img.validate();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for write: " + path);
  os << "S2R-IMAGE 1\n";
  os << "dims: " << img.width << " " << img.height << "\n";
  for (const auto& [k, v] : img.meta) os << "meta: " << k << "=" << v << "\n";
  os << "---\n";
  // float32 LE payload; this code assumes a little-endian host
  write_exact(os, img.pixels.data(), img.pixels.size() * sizeof(float));
  if (!os) throw IoError("short write: " + path);
}

Image2D load_image(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open: " + path);
  std::string line;
  if (!std::getline(is, line) || line != "S2R-IMAGE 1")
    throw IoError("not an S2R-IMAGE file: " + path);
  Image2D img;
  while (std::getline(is, line)) {
    if (line == "---") break;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "dims:") {
      ls >> img.width >> img.height;
    } else if (key == "meta:") {
      std::string rest = line.substr(line.find("meta:") + 6);
      auto eq = rest.find('=');
      if (eq == std::string::npos)
        throw IoError("malformed meta line in " + path);
      img.meta.emplace_back(rest.substr(0, eq), rest.substr(eq + 1));
    } else {
      throw IoError("unknown header key '" + key + "' in " + path);
    }
  }
  if (img.width <= 0 || img.height <= 0)
    throw IoError("missing or invalid dims in " + path);
  size_t n = static_cast<size_t>(img.width) * img.height;
  img.pixels.resize(n);
  is.read(reinterpret_cast<char*>(img.pixels.data()),
          static_cast<std::streamsize>(n * sizeof(float)));
  if (static_cast<size_t>(is.gcount()) != n * sizeof(float))
    throw IoError("dims/payload mismatch in " + path);
  img.validate();
  return img;
}

void save_pgm16(const Image2D& img, const std::string& path) {
  img.validate();
  float lo = image_min(img), hi = image_max(img);
  float range = (hi > lo) ? (hi - lo) : 1.0f;
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for write: " + path);
  os << "P5\n" << img.width << " " << img.height << "\n65535\n";
  for (float p : img.pixels) {
    auto v = static_cast<uint16_t>(
        std::lround((p - lo) / range * 65535.0f));
    unsigned char be[2] = {static_cast<unsigned char>(v >> 8),
                           static_cast<unsigned char>(v & 0xff)};
    write_exact(os, be, 2);
  }
}

std::vector<std::string> list_images(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir);
  std::vector<std::string> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".s2i")
      out.push_back(e.path().string());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace s2r

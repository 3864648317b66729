#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

#include "rmf/types.hpp"

namespace rmf {

// Linear RGB image, row-major, three doubles per pixel.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<double> data;

  Image() = default;
  Image(int w, int h, const Vec3& fill = Vec3::Zero());

  std::size_t offset(int u, int v) const {
    return 3 * (static_cast<std::size_t>(v) * width + u);
  }
  Vec3 pixel(int u, int v) const {
    const std::size_t o = offset(u, v);
    return Vec3(data[o], data[o + 1], data[o + 2]);
  }
  void set(int u, int v, const Vec3& c) {
    const std::size_t o = offset(u, v);
    data[o] = c.x();
    data[o + 1] = c.y();
    data[o + 2] = c.z();
  }
  bool same_shape(const Image& other) const {
    return width == other.width && height == other.height;
  }
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// round(255 * clamp(v, 0, 1)), no transfer curve.
std::uint8_t to_byte(double v);

/// Binary P6, 8 bits per channel.
void write_ppm(const std::filesystem::path& path, const Image& image);
Image read_ppm(const std::filesystem::path& path);

/// 8-bit RGB PNG.
void write_png(const std::filesystem::path& path, const Image& image);
Image read_png(const std::filesystem::path& path);

/// Dispatches on extension (.ppm or .png). Throws IoError on failure.
void write_image(const std::filesystem::path& path, const Image& image);
Image read_image(const std::filesystem::path& path);

}  // namespace rmf

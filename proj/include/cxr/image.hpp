#pragma once
// Grayscale images with values in [0,1], 8-bit PGM (P5) and PNG I/O.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace cxr {

struct Image {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> pixels;  // row-major

  Image() = default;
  Image(std::size_t h, std::size_t w, double fill = 0.0) : height(h), width(w), pixels(h * w, fill) {}

  double& at(std::size_t y, std::size_t x) { return pixels[y * width + x]; }
  double at(std::size_t y, std::size_t x) const { return pixels[y * width + x]; }

  bool operator==(const Image&) const = default;
};

// Nearest 8-bit level, clamped.
std::uint8_t to_byte(double v);

// Reads PGM (P5, maxval <= 255) or PNG (converted to 8-bit gray) by content.
Image read_image(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const Image& image);
void write_png(const std::filesystem::path& path, const Image& image);
// Chooses the format from the extension (.png, otherwise PGM).
void write_image(const std::filesystem::path& path, const Image& image);

// RGB 8-bit, interleaved; used for heatmap overlays.
struct RgbImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> rgb;
};
void write_png_rgb(const std::filesystem::path& path, const RgbImage& image);
void write_ppm(const std::filesystem::path& path, const RgbImage& image);

enum class Resample { Bilinear, Nearest };

// Pixel-center aligned resampling to the requested extents.
Image resize(const Image& src, std::size_t height, std::size_t width,
             Resample mode = Resample::Bilinear);

}  // namespace cxr

#include "cxr/image.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <memory>
#include <string>

#include "cxr/error.hpp"

namespace cxr {
namespace {

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open image " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Image decode_pgm(const std::string& bytes, const std::filesystem::path& path) {
  std::size_t pos = 2;
  const auto next_token = [&]() -> long {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
    long v = 0;
    bool any = false;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      v = v * 10 + (bytes[pos++] - '0');
      any = true;
      if (v > 1'000'000) break;
    }
    if (!any) throw DataError(path.string() + ": malformed PGM header");
    return v;
  };
  const long w = next_token(), h = next_token(), maxval = next_token();
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255)
    throw DataError(path.string() + ": unsupported PGM (need 8-bit P5)");
  ++pos;  // single whitespace before raster
  const std::size_t n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  if (bytes.size() < pos + n) throw DataError(path.string() + ": truncated PGM raster");
  Image img(static_cast<std::size_t>(h), static_cast<std::size_t>(w));
  for (std::size_t i = 0; i < n; ++i)
    img.pixels[i] = static_cast<unsigned char>(bytes[pos + i]) / static_cast<double>(maxval);
  return img;
}

Image decode_png(const std::filesystem::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str()))
    throw DataError(path.string() + ": " + image.message);
  image.format = PNG_FORMAT_GRAY;
  std::vector<png_byte> buf(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buf.data(), 0, nullptr)) {
    png_image_free(&image);
    throw DataError(path.string() + ": " + image.message);
  }
  Image img(image.height, image.width);
  for (std::size_t i = 0; i < buf.size(); ++i) img.pixels[i] = buf[i] / 255.0;
  return img;
}

}  // namespace

std::uint8_t to_byte(double v) {
  const double c = std::clamp(v, 0.0, 1.0);
  return static_cast<std::uint8_t>(std::lround(c * 255.0));
}

Image read_image(const std::filesystem::path& path) {
  const std::string bytes = slurp(path);
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '5') return decode_pgm(bytes, path);
  if (bytes.size() >= 8 && static_cast<unsigned char>(bytes[0]) == 0x89 && bytes[1] == 'P')
    return decode_png(path);
  throw DataError(path.string() + ": not a PGM (P5) or PNG image");
}

void write_pgm(const std::filesystem::path& path, const Image& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << "P5\n" << image.width << ' ' << image.height << "\n255\n";
  std::string raster(image.pixels.size(), '\0');
  for (std::size_t i = 0; i < raster.size(); ++i) raster[i] = static_cast<char>(to_byte(image.pixels[i]));
  out.write(raster.data(), static_cast<std::streamsize>(raster.size()));
  if (!out) throw DataError("write failed for " + path.string());
}

void write_png(const std::filesystem::path& path, const Image& image) {
  std::vector<png_byte> buf(image.pixels.size());
  for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = to_byte(image.pixels[i]);
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(image.width);
  png.height = static_cast<png_uint_32>(image.height);
  png.format = PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&png, path.c_str(), 0, buf.data(), 0, nullptr))
    throw DataError("cannot write " + path.string() + ": " + png.message);
}

void write_image(const std::filesystem::path& path, const Image& image) {
  if (path.extension() == ".png")
    write_png(path, image);
  else
    write_pgm(path, image);
}

void write_png_rgb(const std::filesystem::path& path, const RgbImage& image) {
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(image.width);
  png.height = static_cast<png_uint_32>(image.height);
  png.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&png, path.c_str(), 0, image.rgb.data(), 0, nullptr))
    throw DataError("cannot write " + path.string() + ": " + png.message);
}

void write_ppm(const std::filesystem::path& path, const RgbImage& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << "P6\n" << image.width << ' ' << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.rgb.data()),
            static_cast<std::streamsize>(image.rgb.size()));
}

Image resize(const Image& src, std::size_t height, std::size_t width, Resample mode) {
  if (src.height == 0 || src.width == 0 || height == 0 || width == 0)
    throw ShapeError("resize: empty extents");
  if (src.height == height && src.width == width) return src;
  Image out(height, width);
  const double sy = static_cast<double>(src.height) / static_cast<double>(height);
  const double sx = static_cast<double>(src.width) / static_cast<double>(width);
  for (std::size_t y = 0; y < height; ++y) {
    const double fy = (static_cast<double>(y) + 0.5) * sy - 0.5;
    for (std::size_t x = 0; x < width; ++x) {
      const double fx = (static_cast<double>(x) + 0.5) * sx - 0.5;
      if (mode == Resample::Nearest) {
        const auto ny = static_cast<std::size_t>(
            std::clamp<long>(std::lround(fy), 0, static_cast<long>(src.height) - 1));
        const auto nx = static_cast<std::size_t>(
            std::clamp<long>(std::lround(fx), 0, static_cast<long>(src.width) - 1));
        out.at(y, x) = src.at(ny, nx);
        continue;
      }
      const double cy = std::clamp(fy, 0.0, static_cast<double>(src.height - 1));
      const double cx = std::clamp(fx, 0.0, static_cast<double>(src.width - 1));
      const auto y0 = static_cast<std::size_t>(cy);
      const auto x0 = static_cast<std::size_t>(cx);
      const std::size_t y1 = std::min(y0 + 1, src.height - 1);
      const std::size_t x1 = std::min(x0 + 1, src.width - 1);
      const double ty = cy - static_cast<double>(y0), tx = cx - static_cast<double>(x0);
      out.at(y, x) = (1 - ty) * ((1 - tx) * src.at(y0, x0) + tx * src.at(y0, x1)) +
                     ty * ((1 - tx) * src.at(y1, x0) + tx * src.at(y1, x1));
    }
  }
  return out;
}

}  // namespace cxr

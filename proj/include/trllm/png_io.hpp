#pragma once

// Thin wrappers over libpng's simplified API.

#include <png.h>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "trllm/errors.hpp"

namespace trllm::png {

struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major
};

struct RgbaImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major, 4 bytes per pixel
};

// Any PNG color type is converted to 8-bit grayscale.
inline GrayImage read_gray(const std::filesystem::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.string().c_str())) {
    throw IoError("cannot read PNG '" + path.string() + "': " + image.message);
  }
  image.format = PNG_FORMAT_GRAY;
  GrayImage out;
  out.width = static_cast<int>(image.width);
  out.height = static_cast<int>(image.height);
  out.pixels.resize(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, out.pixels.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw IoError("cannot decode PNG '" + path.string() + "': " + msg);
  }
  return out;
}

namespace detail {
inline void write(const std::filesystem::path& path, int width, int height, std::uint32_t format,
                  const std::uint8_t* data) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(width);
  image.height = static_cast<png_uint_32>(height);
  image.format = format;
  if (!png_image_write_to_file(&image, path.string().c_str(), 0, data, 0, nullptr)) {
    throw IoError("cannot write PNG '" + path.string() + "': " + image.message);
  }
}
}  // namespace detail

inline void write_gray(const std::filesystem::path& path, const GrayImage& img) {
  detail::write(path, img.width, img.height, PNG_FORMAT_GRAY, img.pixels.data());
}

inline void write_rgba(const std::filesystem::path& path, const RgbaImage& img) {
  detail::write(path, img.width, img.height, PNG_FORMAT_RGBA, img.pixels.data());
}

}  // namespace trllm::png

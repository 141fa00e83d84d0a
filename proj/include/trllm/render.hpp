#pragma once

// Prediction overlays (RGBA PNG) and raw heatmap dumps.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "trllm/errors.hpp"
#include "trllm/png_io.hpp"
#include "trllm/probability.hpp"
#include "trllm/scene.hpp"
#include "trllm/trajectory.hpp"
#include "trllm/weights.hpp"

namespace trllm {

// ---------------------------------------------------------------------------
// TRLH: "TRLH", u32 height, u32 width, u32 reserved (0), then height*width float32,
// row-major, little-endian.

namespace detail {

inline std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
         static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

}  // namespace detail

inline std::vector<std::uint8_t> serialize_heatmap(const Heatmap& heatmap) {
  const auto& g = heatmap.geometry();
  std::vector<std::uint8_t> out{'T', 'R', 'L', 'H'};
  detail::put_u32(out, static_cast<std::uint32_t>(g.height_px));
  detail::put_u32(out, static_cast<std::uint32_t>(g.width_px));
  detail::put_u32(out, 0);
  out.reserve(out.size() + 4 * g.cell_count());
  for (double v : heatmap.values()) detail::put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  return out;
}

// The dump carries no metric extent; the caller supplies it.
inline Heatmap deserialize_heatmap(const std::vector<std::uint8_t>& bytes, double extent_m = 10.0) {
  if (bytes.size() < 16) throw LengthError("heatmap dump: shorter than the 16-byte header");
  if (std::memcmp(bytes.data(), "TRLH", 4) != 0) throw FormatError("heatmap dump: bad magic");
  const auto h = detail::get_u32(bytes.data() + 4);
  const auto w = detail::get_u32(bytes.data() + 8);
  if (detail::get_u32(bytes.data() + 12) != 0) throw FormatError("heatmap dump: reserved field is not zero");
  const GridGeometry g{static_cast<int>(w), static_cast<int>(h), extent_m};
  g.validate();
  const auto expected = 16 + 4 * static_cast<std::uint64_t>(h) * w;
  if (bytes.size() != expected) {
    throw LengthError("heatmap dump: expected " + std::to_string(expected) + " bytes, got " +
                      std::to_string(bytes.size()));
  }
  std::vector<double> values(g.cell_count());
  for (std::size_t i = 0; i < values.size(); ++i) {
    values[i] = std::bit_cast<float>(detail::get_u32(bytes.data() + 16 + 4 * i));
  }
  return Heatmap(g, std::move(values));
}

inline void save_heatmap(const Heatmap& heatmap, const std::filesystem::path& path) {
  const auto bytes = serialize_heatmap(heatmap);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("write to '" + path.string() + "' failed");
}

inline Heatmap load_heatmap(const std::filesystem::path& path, double extent_m = 10.0) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return deserialize_heatmap(bytes, extent_m);
}

// ---------------------------------------------------------------------------

namespace render {

struct Canvas {
  png::RgbaImage img;

  void blend(int row, int col, Rgb c, double alpha) {
    if (row < 0 || col < 0 || row >= img.height || col >= img.width) return;
    auto* p = &img.pixels[4 * (static_cast<std::size_t>(row) * img.width + col)];
    alpha = std::clamp(alpha, 0.0, 1.0);
    p[0] = static_cast<std::uint8_t>(std::lround(p[0] * (1 - alpha) + c.r * alpha));
    p[1] = static_cast<std::uint8_t>(std::lround(p[1] * (1 - alpha) + c.g * alpha));
    p[2] = static_cast<std::uint8_t>(std::lround(p[2] * (1 - alpha) + c.b * alpha));
  }

  void dot(Pixel center, int radius, Rgb c) {
    for (int dr = -radius; dr <= radius; ++dr) {
      for (int dc = -radius; dc <= radius; ++dc) {
        if (dr * dr + dc * dc <= radius * radius) blend(center.row + dr, center.col + dc, c, 1.0);
      }
    }
  }

  void line(Pixel a, Pixel b, Rgb c) {
    const int n = std::max({std::abs(b.row - a.row), std::abs(b.col - a.col), 1});
    for (int i = 0; i <= n; ++i) {
      const double u = static_cast<double>(i) / n;
      blend(static_cast<int>(std::lround(a.row + u * (b.row - a.row))),
            static_cast<int>(std::lround(a.col + u * (b.col - a.col))), c, 1.0);
    }
  }
};

// Blue (lowest) to red (highest) by rank; a uniform map gets the mid colour.
inline Rgb rank_color(std::size_t rank, std::size_t count, bool uniform) {
  const double u = uniform || count < 2 ? 0.5 : 1.0 - static_cast<double>(rank) / static_cast<double>(count - 1);
  return {static_cast<std::uint8_t>(std::lround(255 * u)), 40, static_cast<std::uint8_t>(std::lround(255 * (1 - u)))};
}

}  // namespace render

// Walkable map in gray, heatmap in yellow (alpha proportional to value / max), objects
// coloured by probability rank, observed trajectory in green with start (red) and current
// (green) markers.
inline png::RgbaImage render_prediction(const Scene& scene, const Heatmap& heatmap, const ObjectProbabilityMap& probs,
                                        const Trajectory* observed = nullptr) {
  const auto& g = scene.geometry();
  if (!(heatmap.geometry() == g)) throw DimensionError("render: heatmap geometry does not match scene geometry");
  render::Canvas cv;
  cv.img.width = g.width_px;
  cv.img.height = g.height_px;
  cv.img.pixels.assign(4 * g.cell_count(), 255);
  for (int r = 0; r < g.height_px; ++r) {
    for (int c = 0; c < g.width_px; ++c) {
      const std::uint8_t v = scene.map.walkable({r, c}) ? 235 : 60;
      auto* p = &cv.img.pixels[4 * linear_index(g, {r, c})];
      p[0] = p[1] = p[2] = v;
    }
  }

  const double peak = heatmap.max();
  if (peak > 0.0) {
    for (int r = 0; r < g.height_px; ++r) {
      for (int c = 0; c < g.width_px; ++c) cv.blend(r, c, {255, 220, 0}, 0.8 * heatmap.at({r, c}) / peak);
    }
  }

  std::vector<std::size_t> order(probs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const auto p = probs.probabilities();
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] > p[b]; });
  const bool uniform = std::all_of(p.begin(), p.end(), [&](double v) { return v == p.front(); });
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    const auto* region = scene.find(probs.labels()[order[rank]]);
    if (!region) continue;
    const auto color = render::rank_color(rank, order.size(), uniform);
    for (auto px : region->mask) cv.blend(px.row, px.col, color, 0.9);
  }

  if (observed) {
    const auto& s = observed->samples();
    for (std::size_t i = 1; i < s.size(); ++i) {
      cv.line(world_to_pixel(g, {s[i - 1].x, s[i - 1].y}), world_to_pixel(g, {s[i].x, s[i].y}), {0, 160, 0});
    }
    cv.dot(world_to_pixel(g, {s.front().x, s.front().y}), 3, {220, 0, 0});
    cv.dot(world_to_pixel(g, {s.back().x, s.back().y}), 3, {0, 200, 0});
  }
  return cv.img;
}

}  // namespace trllm

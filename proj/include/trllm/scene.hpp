#pragma once

// Scene geometry: walkable grids, labeled object masks, the world/pixel mapping and
// grid geodesics.
//
// World frame: x runs along columns, y along rows, origin at pixel (0, 0).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include <json.hpp>

#include "trllm/errors.hpp"
#include "trllm/png_io.hpp"

namespace trllm {

struct GridGeometry {
  int width_px = 256;
  int height_px = 256;
  double extent_m = 10.0;

  double meters_per_pixel() const { return extent_m / width_px; }
  std::size_t cell_count() const { return static_cast<std::size_t>(width_px) * height_px; }

  void validate() const {
    if (width_px <= 0 || height_px <= 0) throw ValidationError("geometry: pixel dimensions must be positive");
    if (width_px != height_px) throw ValidationError("geometry: grid must be square");
    if (!(extent_m > 0.0) || !std::isfinite(extent_m)) throw ValidationError("geometry: extent_m must be positive");
  }

  bool operator==(const GridGeometry&) const = default;
};

struct Pixel {
  int row = 0;
  int col = 0;
  auto operator<=>(const Pixel&) const = default;
};

struct WorldPoint {
  double x = 0.0;
  double y = 0.0;
};

inline bool in_bounds(const GridGeometry& g, Pixel p) {
  return p.row >= 0 && p.col >= 0 && p.row < g.height_px && p.col < g.width_px;
}

inline std::size_t linear_index(const GridGeometry& g, Pixel p) {
  return static_cast<std::size_t>(p.row) * g.width_px + p.col;
}

inline Pixel pixel_at(const GridGeometry& g, std::size_t index) {
  return {static_cast<int>(index / g.width_px), static_cast<int>(index % g.width_px)};
}

// (0, 0) m lands on pixel (0, 0) and (extent, extent) on the far corner; points outside
// the extent clamp to the border.
inline Pixel world_to_pixel(const GridGeometry& g, WorldPoint p) {
  auto axis = [&](double v, int n) {
    double scaled = std::floor(v / g.extent_m * (n - 1));
    if (!(scaled >= 0.0)) return 0;  // also catches NaN
    if (scaled > n - 1) return n - 1;
    return static_cast<int>(scaled);
  };
  return {axis(p.y, g.height_px), axis(p.x, g.width_px)};
}

// Centre of the world interval that world_to_pixel maps onto p.
inline WorldPoint pixel_to_world(const GridGeometry& g, Pixel p) {
  auto axis = [&](int v, int n) {
    if (n <= 1) return 0.5 * g.extent_m;
    return std::min((v + 0.5) * g.extent_m / (n - 1), g.extent_m);
  };
  return {axis(p.col, g.width_px), axis(p.row, g.height_px)};
}

// Binary walkable grid (1 = walkable).
class SceneMap {
public:
  SceneMap() = default;

  SceneMap(GridGeometry geometry, std::vector<std::uint8_t> cells)
      : geometry_(geometry), cells_(std::move(cells)) {
    geometry_.validate();
    if (cells_.size() != geometry_.cell_count()) {
      throw DimensionError("scene map: cell count does not match geometry");
    }
    bool any = false;
    for (auto c : cells_) {
      if (c > 1) throw ValidationError("scene map: cells must be 0 or 1");
      any = any || c == 1;
    }
    if (!any) throw ValidationError("scene map: no walkable cell");
  }

  const GridGeometry& geometry() const { return geometry_; }
  std::span<const std::uint8_t> cells() const { return cells_; }

  bool walkable(Pixel p) const { return in_bounds(geometry_, p) && cells_[linear_index(geometry_, p)] == 1; }
  bool walkable(std::size_t index) const { return cells_[index] == 1; }

private:
  GridGeometry geometry_;
  std::vector<std::uint8_t> cells_;
};

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;
  bool operator==(const Rgb&) const = default;
};

struct ObjectRegion {
  std::string label;
  std::vector<Pixel> mask;  // sorted, unique
  Rgb display_color;
};

struct Scene {
  std::string name;
  SceneMap map;
  std::vector<ObjectRegion> objects;

  const GridGeometry& geometry() const { return map.geometry(); }

  const ObjectRegion* find(std::string_view label) const {
    for (const auto& o : objects) {
      if (o.label == label) return &o;
    }
    return nullptr;
  }

  std::vector<std::string> labels() const {
    std::vector<std::string> out;
    out.reserve(objects.size());
    for (const auto& o : objects) out.push_back(o.label);
    return out;
  }

  void validate() const {
    map.geometry().validate();
    if (objects.empty()) throw ValidationError("scene '" + name + "': no objects");
    std::unordered_set<std::string> seen;
    for (const auto& o : objects) {
      if (o.label.empty()) throw ValidationError("scene '" + name + "': empty object label");
      if (!seen.insert(o.label).second) {
        throw ValidationError("scene '" + name + "': duplicate object label '" + o.label + "'");
      }
      if (o.mask.empty()) throw ValidationError("object '" + o.label + "': empty mask");
      for (auto p : o.mask) {
        if (!in_bounds(map.geometry(), p)) {
          throw ValidationError("object '" + o.label + "': mask pixel out of bounds");
        }
      }
    }
  }
};

// Non-negative field over the grid.
class Heatmap {
public:
  Heatmap() = default;
  explicit Heatmap(GridGeometry geometry, double fill = 0.0)
      : geometry_(geometry), values_(geometry.cell_count(), fill) {}
  Heatmap(GridGeometry geometry, std::vector<double> values) : geometry_(geometry), values_(std::move(values)) {
    if (values_.size() != geometry_.cell_count()) throw DimensionError("heatmap: value count does not match geometry");
  }

  const GridGeometry& geometry() const { return geometry_; }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }

  double at(Pixel p) const { return values_[linear_index(geometry_, p)]; }
  double& at(Pixel p) { return values_[linear_index(geometry_, p)]; }

  double max() const { return values_.empty() ? 0.0 : *std::max_element(values_.begin(), values_.end()); }

private:
  GridGeometry geometry_;
  std::vector<double> values_;
};

inline double object_overlap_mass(const Heatmap& heatmap, const ObjectRegion& region,
                                  const GridGeometry& scene_geometry) {
  if (!(heatmap.geometry() == scene_geometry)) {
    throw DimensionError("overlap: heatmap geometry does not match scene geometry");
  }
  double mass = 0.0;
  for (auto p : region.mask) mass += heatmap.at(p);
  return mass;
}

// ---------------------------------------------------------------------------
// Geodesics: 8-connected Dijkstra, axial step = meters_per_pixel, diagonal = sqrt(2) x that.
// A diagonal step is allowed only when both orthogonal neighbours are walkable, so paths
// never squeeze between two obstacle cells touching at a corner.
//
// Costs are tracked as (axial steps, diagonal steps) and converted with one fixed
// expression, which keeps the result independent of relaxation order.

inline constexpr double kSqrt2 = 1.41421356237309504880;

struct GeodesicField {
  GridGeometry geometry;
  std::vector<double> meters;          // +inf where unreachable
  std::vector<std::int32_t> parent;    // -1 for the source and unreachable cells

  bool reachable(Pixel p) const { return std::isfinite(meters[linear_index(geometry, p)]); }
  double at(Pixel p) const { return meters[linear_index(geometry, p)]; }
};

namespace detail {

struct StepCount {
  std::int32_t axial = 0;
  std::int32_t diagonal = 0;
  double key() const { return axial + diagonal * kSqrt2; }
};

inline constexpr int kDr[8] = {-1, 1, 0, 0, -1, -1, 1, 1};
inline constexpr int kDc[8] = {0, 0, -1, 1, -1, 1, -1, 1};

}  // namespace detail

namespace detail {

struct SearchState {
  std::vector<std::uint8_t> done;
  std::vector<StepCount> steps;
  std::vector<double> key;
  std::vector<std::int32_t> parent;
  std::vector<std::pair<double, std::uint32_t>> heap;
};

// Settles cells in distance order from `source` (walkable). With `stop_at` the search is A*
// under the octile bound and stops once that cell is settled.
inline void geodesic_search(const SceneMap& map, Pixel source, std::optional<std::size_t> stop_at,
                            SearchState& st) {
  const auto& g = map.geometry();
  const auto n = g.cell_count();
  const auto cells = map.cells();
  st.done.assign(n, 0);
  st.steps.assign(n, StepCount{});
  st.key.assign(n, std::numeric_limits<double>::infinity());
  st.parent.assign(n, -1);
  st.heap.clear();
  auto open = [&](std::int64_t r, std::int64_t c) {
    return r >= 0 && c >= 0 && r < g.height_px && c < g.width_px && cells[static_cast<std::size_t>(r * g.width_px + c)];
  };

  const int tr = stop_at ? static_cast<int>(*stop_at / static_cast<std::size_t>(g.width_px)) : 0;
  const int tc = stop_at ? static_cast<int>(*stop_at % static_cast<std::size_t>(g.width_px)) : 0;
  auto bound = [&](int r, int c) {
    if (!stop_at) return 0.0;
    const int dr = std::abs(r - tr), dc = std::abs(c - tc);
    return std::abs(dr - dc) + std::min(dr, dc) * kSqrt2;
  };

  const auto s = linear_index(g, source);
  st.key[s] = 0.0;
  st.heap.push_back({bound(source.row, source.col), static_cast<std::uint32_t>(s)});
  while (!st.heap.empty()) {
    std::pop_heap(st.heap.begin(), st.heap.end(), std::greater<>{});
    const auto idx = st.heap.back().second;
    st.heap.pop_back();
    if (st.done[idx]) continue;
    st.done[idx] = 1;
    if (stop_at && idx == *stop_at) break;
    const int r = static_cast<int>(idx / static_cast<std::uint32_t>(g.width_px));
    const int c = static_cast<int>(idx % static_cast<std::uint32_t>(g.width_px));
    for (int d = 0; d < 8; ++d) {
      const int qr = r + kDr[d], qc = c + kDc[d];
      if (!open(qr, qc)) continue;
      const bool diagonal = d >= 4;
      if (diagonal && !(open(qr, c) && open(r, qc))) continue;
      const auto qi = static_cast<std::size_t>(qr) * static_cast<std::size_t>(g.width_px) + static_cast<std::size_t>(qc);
      if (st.done[qi]) continue;
      auto next = st.steps[idx];
      (diagonal ? next.diagonal : next.axial) += 1;
      const double nk = next.key();
      if (nk < st.key[qi]) {
        st.key[qi] = nk;
        st.steps[qi] = next;
        st.parent[qi] = static_cast<std::int32_t>(idx);
        st.heap.push_back({nk + bound(qr, qc), static_cast<std::uint32_t>(qi)});
        std::push_heap(st.heap.begin(), st.heap.end(), std::greater<>{});
      }
    }
  }
}

}  // namespace detail

// Distances from `source` to every cell. A non-walkable source yields an all-unreachable field.
inline GeodesicField geodesic_field(const SceneMap& map, Pixel source) {
  const auto& g = map.geometry();
  const auto n = g.cell_count();
  GeodesicField field{g, std::vector<double>(n, std::numeric_limits<double>::infinity()),
                      std::vector<std::int32_t>(n, -1)};
  if (!map.walkable(source)) return field;
  detail::SearchState st;
  detail::geodesic_search(map, source, std::nullopt, st);
  const double mpp = g.meters_per_pixel();
  for (std::size_t i = 0; i < n; ++i) {
    if (st.done[i]) field.meters[i] = st.steps[i].key() * mpp;
  }
  field.parent = std::move(st.parent);
  return field;
}

// nullopt when either endpoint is non-walkable or no path exists.
inline std::optional<double> geodesic_distance(const SceneMap& map, Pixel a, Pixel b) {
  if (!map.walkable(a) || !map.walkable(b)) return std::nullopt;
  if (a == b) return 0.0;
  thread_local detail::SearchState st;
  const auto bi = linear_index(map.geometry(), b);
  detail::geodesic_search(map, a, bi, st);
  if (!st.done[bi]) return std::nullopt;
  return st.steps[bi].key() * map.geometry().meters_per_pixel();
}

// Cells from the field's source to `target`, inclusive. Empty when unreachable.
inline std::vector<Pixel> trace_path(const GeodesicField& field, Pixel target) {
  std::vector<Pixel> path;
  if (!field.reachable(target)) return path;
  auto idx = static_cast<std::int32_t>(linear_index(field.geometry, target));
  while (idx >= 0) {
    path.push_back(pixel_at(field.geometry, static_cast<std::size_t>(idx)));
    idx = field.parent[static_cast<std::size_t>(idx)];
  }
  std::reverse(path.begin(), path.end());
  return path;
}

// Nearest walkable cell by Euclidean pixel distance; ties go to the lowest row-major index.
inline Pixel nearest_walkable(const SceneMap& map, Pixel p) {
  if (map.walkable(p)) return p;
  const auto& g = map.geometry();
  long best = std::numeric_limits<long>::max();
  Pixel out = p;
  for (std::size_t i = 0; i < g.cell_count(); ++i) {
    if (!map.walkable(i)) continue;
    const Pixel q = pixel_at(g, i);
    const long dr = q.row - p.row;
    const long dc = q.col - p.col;
    const long d2 = dr * dr + dc * dc;
    if (d2 < best) {
      best = d2;
      out = q;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Scene descriptor I/O

// Run-length encoding over row-major indices: [start0, len0, start1, len1, ...].
inline std::vector<std::int64_t> encode_mask_rle(const GridGeometry& g, std::span<const Pixel> mask) {
  std::vector<std::int64_t> idx;
  idx.reserve(mask.size());
  for (auto p : mask) idx.push_back(static_cast<std::int64_t>(linear_index(g, p)));
  std::sort(idx.begin(), idx.end());
  idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
  std::vector<std::int64_t> rle;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i + 1;
    while (j < idx.size() && idx[j] == idx[j - 1] + 1) ++j;
    rle.push_back(idx[i]);
    rle.push_back(static_cast<std::int64_t>(j - i));
    i = j;
  }
  return rle;
}

inline std::vector<Pixel> decode_mask_rle(const GridGeometry& g, std::span<const std::int64_t> rle,
                                          const std::string& label) {
  if (rle.size() % 2 != 0) throw ParseError("object '" + label + "': mask_rle must hold start/length pairs");
  const auto total = static_cast<std::int64_t>(g.cell_count());
  std::vector<std::int64_t> idx;
  for (std::size_t i = 0; i < rle.size(); i += 2) {
    const auto start = rle[i];
    const auto len = rle[i + 1];
    if (start < 0 || len < 0) throw ParseError("object '" + label + "': mask_rle values must be non-negative");
    if (start + len > total) throw ValidationError("object '" + label + "': mask pixel out of bounds");
    for (std::int64_t k = 0; k < len; ++k) idx.push_back(start + k);
  }
  std::sort(idx.begin(), idx.end());
  idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
  std::vector<Pixel> mask;
  mask.reserve(idx.size());
  for (auto i : idx) mask.push_back(pixel_at(g, static_cast<std::size_t>(i)));
  return mask;
}

namespace detail {

inline const nlohmann::json& field(const nlohmann::json& j, const char* name, const std::string& where) {
  if (!j.is_object() || !j.contains(name)) throw ParseError(where + ": missing field '" + name + "'");
  return j.at(name);
}

template <typename T>
T get_field(const nlohmann::json& j, const char* name, const std::string& where) {
  const auto& v = field(j, name, where);
  try {
    return v.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ParseError(where + ": field '" + name + "' has the wrong type");
  }
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("'" + path.string() + "': " + e.what());
  }
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace detail

// Walkable PNG pixels >= 128 count as walkable.
inline Scene scene_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  const std::string where = "scene descriptor";
  Scene scene;
  scene.name = detail::get_field<std::string>(j, "name", where);
  const auto& gj = detail::field(j, "geometry", where);
  GridGeometry geom{detail::get_field<int>(gj, "width_px", where + ".geometry"),
                    detail::get_field<int>(gj, "height_px", where + ".geometry"),
                    detail::get_field<double>(gj, "extent_m", where + ".geometry")};
  geom.validate();

  const auto png_rel = detail::get_field<std::string>(j, "walkable_png", where);
  const auto img = png::read_gray(base_dir / png_rel);
  if (img.width != geom.width_px || img.height != geom.height_px) {
    throw ValidationError("walkable_png: image size does not match geometry");
  }
  std::vector<std::uint8_t> cells(img.pixels.size());
  std::transform(img.pixels.begin(), img.pixels.end(), cells.begin(),
                 [](std::uint8_t v) { return static_cast<std::uint8_t>(v >= 128 ? 1 : 0); });
  scene.map = SceneMap(geom, std::move(cells));

  const auto& objs = detail::field(j, "objects", where);
  if (!objs.is_array()) throw ParseError(where + ": field 'objects' must be an array");
  for (std::size_t i = 0; i < objs.size(); ++i) {
    const std::string ow = where + ".objects[" + std::to_string(i) + "]";
    ObjectRegion region;
    region.label = detail::get_field<std::string>(objs[i], "label", ow);
    const auto color = detail::get_field<std::vector<int>>(objs[i], "color_rgb", ow);
    if (color.size() != 3 || std::any_of(color.begin(), color.end(), [](int c) { return c < 0 || c > 255; })) {
      throw ParseError(ow + ": field 'color_rgb' must be three values in [0, 255]");
    }
    region.display_color = {static_cast<std::uint8_t>(color[0]), static_cast<std::uint8_t>(color[1]),
                            static_cast<std::uint8_t>(color[2])};
    const auto rle = detail::get_field<std::vector<std::int64_t>>(objs[i], "mask_rle", ow);
    region.mask = decode_mask_rle(geom, rle, region.label);
    scene.objects.push_back(std::move(region));
  }
  scene.validate();
  return scene;
}

inline Scene load_scene(const std::filesystem::path& path) {
  return scene_from_json(detail::read_json_file(path), path.parent_path());
}

// Writes the descriptor at `path` and the walkable grid as `<stem>_walkable.png` beside it.
inline void save_scene(const Scene& scene, const std::filesystem::path& path) {
  const auto& g = scene.geometry();
  const std::string png_name = path.stem().string() + "_walkable.png";
  png::GrayImage img{g.width_px, g.height_px, {}};
  img.pixels.reserve(g.cell_count());
  for (auto c : scene.map.cells()) img.pixels.push_back(c ? 255 : 0);
  png::write_gray(path.parent_path() / png_name, img);

  nlohmann::ordered_json j;
  j["name"] = scene.name;
  j["geometry"] = {{"width_px", g.width_px}, {"height_px", g.height_px}, {"extent_m", g.extent_m}};
  j["walkable_png"] = png_name;
  auto objs = nlohmann::ordered_json::array();
  for (const auto& o : scene.objects) {
    nlohmann::ordered_json oj;
    oj["label"] = o.label;
    oj["color_rgb"] = {o.display_color.r, o.display_color.g, o.display_color.b};
    oj["mask_rle"] = encode_mask_rle(g, o.mask);
    objs.push_back(std::move(oj));
  }
  j["objects"] = std::move(objs);
  detail::write_text_file(path, j.dump(2) + "\n");
}

}  // namespace trllm

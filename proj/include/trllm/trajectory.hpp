#pragma once

// Observed human paths: progress distance, fixed-epoch resampling, headings and the
// 181-channel raster consumed by the goal network.

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "trllm/errors.hpp"
#include "trllm/scene.hpp"

namespace trllm {

inline constexpr int kEpochs = 90;
inline constexpr int kRasterChannels = 2 * kEpochs + 1;
inline constexpr double kHeadingLookAheadM = 0.3;
inline constexpr double kDefaultSigmaPx = 3.0;

struct TrajectorySample {
  double t = 0.0;
  double x = 0.0;
  double y = 0.0;
  bool operator==(const TrajectorySample&) const = default;
};

// At least two samples, strictly increasing time.
class Trajectory {
public:
  Trajectory() = default;
  explicit Trajectory(std::vector<TrajectorySample> samples) : samples_(std::move(samples)) {
    if (samples_.size() < 2) throw ValidationError("trajectory: at least two samples required");
    for (std::size_t i = 0; i < samples_.size(); ++i) {
      const auto& s = samples_[i];
      if (!std::isfinite(s.t) || !std::isfinite(s.x) || !std::isfinite(s.y)) {
        throw ValidationError("trajectory: non-finite sample " + std::to_string(i));
      }
      if (i > 0 && !(s.t > samples_[i - 1].t)) {
        throw ValidationError("trajectory: time must be strictly increasing at sample " + std::to_string(i));
      }
    }
  }

  const std::vector<TrajectorySample>& samples() const { return samples_; }
  std::size_t size() const { return samples_.size(); }
  const TrajectorySample& front() const { return samples_.front(); }
  const TrajectorySample& back() const { return samples_.back(); }
  const TrajectorySample& operator[](std::size_t i) const { return samples_[i]; }

  WorldPoint start() const { return {front().x, front().y}; }
  WorldPoint current() const { return {back().x, back().y}; }

  bool operator==(const Trajectory&) const = default;

private:
  std::vector<TrajectorySample> samples_;
};

inline double segment_length(const TrajectorySample& a, const TrajectorySample& b) {
  return std::hypot(b.x - a.x, b.y - a.y);
}

inline double progress_distance(const Trajectory& traj) {
  double total = 0.0;
  for (std::size_t i = 1; i < traj.size(); ++i) total += segment_length(traj[i - 1], traj[i]);
  return total;
}

// Position at time t (clamped to the trajectory's time span), linearly interpolated.
inline TrajectorySample sample_at(const Trajectory& traj, double t) {
  const auto& s = traj.samples();
  if (t <= s.front().t) return s.front();
  if (t >= s.back().t) return s.back();
  auto it = std::upper_bound(s.begin(), s.end(), t, [](double v, const TrajectorySample& x) { return v < x.t; });
  const auto& b = *it;
  const auto& a = *(it - 1);
  if (t == a.t) return a;
  const double u = (t - a.t) / (b.t - a.t);
  return {t, a.x + u * (b.x - a.x), a.y + u * (b.y - a.y)};
}

// Uniform in time over [t_first, t_last]; endpoints preserved exactly.
inline Trajectory resample_to_epochs(const Trajectory& traj, int n = kEpochs) {
  if (n < 2) throw ContractError("resample: need at least two epochs");
  const double t0 = traj.front().t;
  const double t1 = traj.back().t;
  std::vector<TrajectorySample> out;
  out.reserve(static_cast<std::size_t>(n));
  out.push_back(traj.front());
  for (int k = 1; k < n - 1; ++k) {
    const double t = t0 + (t1 - t0) * k / (n - 1);
    out.push_back(sample_at(traj, t));
  }
  out.push_back(traj.back());
  return Trajectory(std::move(out));
}

// Heading of the segment leaving each sample. Stationary segments keep the previous
// heading (0 before any motion); the last sample copies its predecessor.
inline std::vector<double> headings(const Trajectory& traj) {
  constexpr double kStationaryM = 1e-6;
  std::vector<double> out(traj.size(), 0.0);
  double previous = 0.0;
  for (std::size_t i = 0; i + 1 < traj.size(); ++i) {
    const auto& a = traj[i];
    const auto& b = traj[i + 1];
    if (segment_length(a, b) >= kStationaryM) previous = std::atan2(b.y - a.y, b.x - a.x);
    out[i] = previous;
  }
  out.back() = out[traj.size() - 2];
  return out;
}

// ---------------------------------------------------------------------------
// Raster stack

// Channels [0, 90) past positions oldest to newest, [90, 180) headings, [180] walkable map.
class RasterStack {
public:
  RasterStack() = default;
  RasterStack(GridGeometry geometry, int channels)
      : geometry_(geometry), channels_(channels), data_(geometry.cell_count() * channels, 0.0f) {}

  const GridGeometry& geometry() const { return geometry_; }
  int channels() const { return channels_; }
  int height() const { return geometry_.height_px; }
  int width() const { return geometry_.width_px; }

  std::span<const float> channel(int c) const {
    return {data_.data() + static_cast<std::size_t>(c) * geometry_.cell_count(), geometry_.cell_count()};
  }
  std::span<float> channel(int c) {
    return {data_.data() + static_cast<std::size_t>(c) * geometry_.cell_count(), geometry_.cell_count()};
  }
  std::span<const float> data() const { return data_; }
  std::span<float> data() { return data_; }

  bool operator==(const RasterStack&) const = default;

private:
  GridGeometry geometry_;
  int channels_ = 0;
  std::vector<float> data_;
};

// Unnormalized isotropic Gaussian, peak 1.0 at `centre`, truncated at 3 sigma.
inline void splat_gaussian(std::span<float> channel, const GridGeometry& g, Pixel centre, double sigma_px) {
  const double cutoff = 3.0 * sigma_px;
  const int r = static_cast<int>(std::floor(cutoff));
  const double inv_two_var = 1.0 / (2.0 * sigma_px * sigma_px);
  for (int dr = -r; dr <= r; ++dr) {
    for (int dc = -r; dc <= r; ++dc) {
      const Pixel p{centre.row + dr, centre.col + dc};
      if (!in_bounds(g, p)) continue;
      const double d2 = static_cast<double>(dr * dr + dc * dc);
      if (d2 > cutoff * cutoff) continue;
      channel[linear_index(g, p)] = static_cast<float>(std::exp(-d2 * inv_two_var));
    }
  }
}

inline RasterStack rasterize(const Trajectory& traj, const SceneMap& map, double sigma_px = kDefaultSigmaPx) {
  if (traj.size() != static_cast<std::size_t>(kEpochs)) {
    throw ContractError("rasterize: trajectory must hold exactly " + std::to_string(kEpochs) + " epochs, got " +
                        std::to_string(traj.size()));
  }
  if (!(sigma_px > 0.0)) throw ContractError("rasterize: sigma_px must be positive");
  const auto& g = map.geometry();
  RasterStack stack(g, kRasterChannels);
  const auto heads = headings(traj);
  for (int k = 0; k < kEpochs; ++k) {
    const auto& s = traj[static_cast<std::size_t>(k)];
    splat_gaussian(stack.channel(k), g, world_to_pixel(g, {s.x, s.y}), sigma_px);
    const WorldPoint ahead{s.x + kHeadingLookAheadM * std::cos(heads[static_cast<std::size_t>(k)]),
                           s.y + kHeadingLookAheadM * std::sin(heads[static_cast<std::size_t>(k)])};
    splat_gaussian(stack.channel(kEpochs + k), g, world_to_pixel(g, ahead), sigma_px);
  }
  auto map_channel = stack.channel(2 * kEpochs);
  const auto cells = map.cells();
  for (std::size_t i = 0; i < cells.size(); ++i) map_channel[i] = cells[i] ? 1.0f : 0.0f;
  return stack;
}

// ---------------------------------------------------------------------------
// CSV I/O: header `t,x,y`, LF or CRLF.

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view text, const std::string& where) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t')) text.remove_suffix(1);
  double v = 0.0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw ParseError(where + ": not a number: '" + std::string(text) + "'");
  }
  return v;
}

}  // namespace detail

inline Trajectory parse_trajectory_csv(std::istream& in, const std::string& name = "trajectory") {
  std::string line;
  std::vector<TrajectorySample> samples;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!header_seen) {
      if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // BOM
      if (line != "t,x,y") throw ParseError(name + ": expected header 't,x,y'");
      header_seen = true;
      continue;
    }
    if (line.empty()) continue;
    std::string_view sv(line);
    const auto c1 = sv.find(',');
    const auto c2 = c1 == std::string_view::npos ? c1 : sv.find(',', c1 + 1);
    if (c2 == std::string_view::npos || sv.find(',', c2 + 1) != std::string_view::npos) {
      throw ParseError(name + ":" + std::to_string(line_no) + ": expected three columns");
    }
    const std::string where = name + ":" + std::to_string(line_no);
    samples.push_back({detail::parse_double(sv.substr(0, c1), where),
                       detail::parse_double(sv.substr(c1 + 1, c2 - c1 - 1), where),
                       detail::parse_double(sv.substr(c2 + 1), where)});
  }
  if (!header_seen) throw ParseError(name + ": empty file");
  return Trajectory(std::move(samples));
}

inline Trajectory load_trajectory(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  return parse_trajectory_csv(in, path.string());
}

inline std::string format_trajectory_csv(const Trajectory& traj) {
  std::string out = "t,x,y\n";
  for (const auto& s : traj.samples()) {
    out += detail::format_double(s.t) + "," + detail::format_double(s.x) + "," + detail::format_double(s.y) + "\n";
  }
  return out;
}

inline void save_trajectory(const Trajectory& traj, const std::filesystem::path& path) {
  detail::write_text_file(path, format_trajectory_csv(traj));
}

}  // namespace trllm

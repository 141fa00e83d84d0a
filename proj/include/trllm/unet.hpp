#pragma once

// Five-level U-Net inference over exported weights.
//
// Layout (H and W must be multiples of 16):
//   enc1..enc5   two 3x3 convs (pad 1) + ReLU each, 2x2 max-pool between levels
//   dec1         two 3x3 convs + ReLU on the bottleneck (enc5 output)
//   dec2..dec5   bilinear 2x upsample (half-pixel centres), concat [upsampled, skip enc(6-i)],
//                two 3x3 convs + ReLU
//   head         1x1 conv + sigmoid
// Tensor names: enc{i}.conv{j}.weight [out, in, 3, 3], enc{i}.conv{j}.bias [out],
// likewise dec{i}.conv{j}.*, head.weight [out, in, 1, 1], head.bias [out].

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <mutex>
#include <random>
#include <tuple>
#include <string>
#include <vector>

#include "trllm/errors.hpp"
#include "trllm/scene.hpp"
#include "trllm/trajectory.hpp"
#include "trllm/weights.hpp"

namespace trllm {

struct UNetSpec {
  std::array<int, 5> encoder_channels{256, 256, 512, 512, 512};
  std::array<int, 5> decoder_channels{512, 512, 512, 256, 256};
  int in_channels = kRasterChannels;
  int out_channels = 1;

  void validate() const {
    if (in_channels != kRasterChannels) throw ShapeError("unet: in_channels must be 181");
    if (out_channels < 1) throw ShapeError("unet: out_channels must be >= 1");
    for (int c : encoder_channels) {
      if (c < 1) throw ShapeError("unet: channel widths must be positive");
    }
    for (int c : decoder_channels) {
      if (c < 1) throw ShapeError("unet: channel widths must be positive");
    }
  }
  bool operator==(const UNetSpec&) const = default;
};

struct TensorSlot {
  std::string name;
  std::vector<std::uint32_t> dims;
};

// Every tensor the network reads, in a fixed order.
inline std::vector<TensorSlot> unet_schema(const UNetSpec& spec) {
  spec.validate();
  std::vector<TensorSlot> slots;
  auto u = [](int v) { return static_cast<std::uint32_t>(v); };
  auto conv_block = [&](const std::string& prefix, int in, int out) {
    slots.push_back({prefix + ".conv1.weight", {u(out), u(in), 3, 3}});
    slots.push_back({prefix + ".conv1.bias", {u(out)}});
    slots.push_back({prefix + ".conv2.weight", {u(out), u(out), 3, 3}});
    slots.push_back({prefix + ".conv2.bias", {u(out)}});
  };
  const auto& enc = spec.encoder_channels;
  const auto& dec = spec.decoder_channels;
  for (int i = 0; i < 5; ++i) conv_block("enc" + std::to_string(i + 1), i == 0 ? spec.in_channels : enc[i - 1], enc[i]);
  conv_block("dec1", enc[4], dec[0]);
  for (int i = 1; i < 5; ++i) conv_block("dec" + std::to_string(i + 1), dec[i - 1] + enc[4 - i], dec[i]);
  slots.push_back({"head.weight", {u(spec.out_channels), u(dec[4]), 1, 1}});
  slots.push_back({"head.bias", {u(spec.out_channels)}});
  return slots;
}

inline void validate_unet_weights(const UNetSpec& spec, const WeightContainer& weights) {
  for (const auto& slot : unet_schema(spec)) {
    const auto* t = weights.find(slot.name);
    if (!t) throw SchemaError("unet: missing tensor '" + slot.name + "'");
    if (t->dims != slot.dims) throw ShapeError("unet: tensor '" + slot.name + "' has unexpected dims");
  }
}

// Reads channel widths back from a container's conv weights.
inline UNetSpec infer_unet_spec(const WeightContainer& weights) {
  UNetSpec spec;
  auto out_dim = [&](const std::string& name) {
    const auto* t = weights.find(name);
    if (!t) throw SchemaError("unet: missing tensor '" + name + "'");
    if (t->dims.size() != 4) throw ShapeError("unet: tensor '" + name + "' must be 4-D");
    return static_cast<int>(t->dims[0]);
  };
  for (int i = 0; i < 5; ++i) {
    spec.encoder_channels[i] = out_dim("enc" + std::to_string(i + 1) + ".conv1.weight");
    spec.decoder_channels[i] = out_dim("dec" + std::to_string(i + 1) + ".conv1.weight");
  }
  spec.out_channels = out_dim("head.weight");
  validate_unet_weights(spec, weights);
  return spec;
}

// Values drawn uniformly from [lo, hi) with a portable mt19937 stream.
inline WeightContainer make_random_unet_weights(const UNetSpec& spec, std::uint32_t seed, float lo = -0.05f,
                                                float hi = 0.05f) {
  std::mt19937 rng(seed);
  WeightContainer wc;
  for (auto& slot : unet_schema(spec)) {
    Tensor t{slot.name, slot.dims, {}};
    t.data.resize(t.element_count());
    for (auto& v : t.data) {
      const float unit = static_cast<float>(rng() >> 8) * (1.0f / 16777216.0f);
      v = lo + (hi - lo) * unit;
    }
    wc.add(std::move(t));
  }
  return wc;
}

inline WeightContainer make_zero_unet_weights(const UNetSpec& spec) {
  WeightContainer wc;
  for (auto& slot : unet_schema(spec)) {
    Tensor t{slot.name, slot.dims, {}};
    t.data.assign(t.element_count(), 0.0f);
    wc.add(std::move(t));
  }
  return wc;
}

namespace nn {

struct Feature {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<float> data;  // channel-major

  Feature() = default;
  Feature(int c, int h, int w) : channels(c), height(h), width(w), data(static_cast<std::size_t>(c) * h * w, 0.0f) {}
  std::size_t plane() const { return static_cast<std::size_t>(height) * width; }
  float* channel(int c) { return data.data() + c * plane(); }
  const float* channel(int c) const { return data.data() + c * plane(); }
};

using RowMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// GEMM blocking in Eigen depends on the cache sizes it detects; pin them so results do not
// vary from machine to machine.
inline void pin_gemm_blocking() {
  static std::once_flag once;
  std::call_once(once, [] { Eigen::setCpuCacheSizes(32 * 1024, 1024 * 1024, 8 * 1024 * 1024); });
}

// 3x3 (pad 1) or 1x1 convolution via row-tiled im2col + GEMM.
inline Feature conv2d(const Feature& in, const Tensor& weight, const Tensor& bias, bool relu) {
  const int out_c = static_cast<int>(weight.dims[0]);
  const int in_c = static_cast<int>(weight.dims[1]);
  const int k = static_cast<int>(weight.dims[2]);
  if (in_c != in.channels) throw ShapeError("unet: '" + weight.name + "' expects " + std::to_string(in_c) +
                                            " input channels, got " + std::to_string(in.channels));
  const int pad = k / 2;
  const int h = in.height;
  const int w = in.width;
  const int depth = in_c * k * k;
  Feature out(out_c, h, w);

  Eigen::Map<const RowMatrix> wmat(weight.data.data(), out_c, depth);
  constexpr std::size_t kColBudget = 16u * 1024 * 1024;  // floats per im2col tile
  const int rows_per_tile =
      std::max(1, static_cast<int>(std::min<std::size_t>(h, kColBudget / (static_cast<std::size_t>(depth) * w))));
  RowMatrix col;
  RowMatrix res;
  for (int y0 = 0; y0 < h; y0 += rows_per_tile) {
    const int rows = std::min(rows_per_tile, h - y0);
    const int n = rows * w;
    col.resize(depth, n);
    for (int ci = 0; ci < in_c; ++ci) {
      const float* src = in.channel(ci);
      for (int ky = 0; ky < k; ++ky) {
        for (int kx = 0; kx < k; ++kx) {
          float* dst = col.data() + static_cast<std::size_t>((ci * k + ky) * k + kx) * n;
          for (int r = 0; r < rows; ++r) {
            const int sy = y0 + r + ky - pad;
            float* drow = dst + static_cast<std::size_t>(r) * w;
            if (sy < 0 || sy >= h) {
              std::fill(drow, drow + w, 0.0f);
              continue;
            }
            const float* srow = src + static_cast<std::size_t>(sy) * w;
            for (int x = 0; x < w; ++x) {
              const int sx = x + kx - pad;
              drow[x] = (sx < 0 || sx >= w) ? 0.0f : srow[sx];
            }
          }
        }
      }
    }
    res.noalias() = wmat * col;
    for (int co = 0; co < out_c; ++co) {
      float* dst = out.channel(co) + static_cast<std::size_t>(y0) * w;
      const float* row = res.data() + static_cast<std::size_t>(co) * n;
      const float b = bias.data[static_cast<std::size_t>(co)];
      for (int i = 0; i < n; ++i) {
        const float v = row[i] + b;
        dst[i] = relu ? std::max(v, 0.0f) : v;
      }
    }
  }
  return out;
}

inline Feature max_pool2(const Feature& in) {
  Feature out(in.channels, in.height / 2, in.width / 2);
  for (int c = 0; c < in.channels; ++c) {
    const float* src = in.channel(c);
    float* dst = out.channel(c);
    for (int y = 0; y < out.height; ++y) {
      for (int x = 0; x < out.width; ++x) {
        const float* p = src + static_cast<std::size_t>(2 * y) * in.width + 2 * x;
        dst[static_cast<std::size_t>(y) * out.width + x] =
            std::max(std::max(p[0], p[1]), std::max(p[in.width], p[in.width + 1]));
      }
    }
  }
  return out;
}

// Bilinear 2x upsampling with half-pixel centres (align_corners = false).
inline Feature upsample2(const Feature& in) {
  Feature out(in.channels, in.height * 2, in.width * 2);
  auto taps = [](int o, int n) {
    const float src = std::max(0.0f, (static_cast<float>(o) + 0.5f) * 0.5f - 0.5f);
    const int i0 = std::min(static_cast<int>(src), n - 1);
    const int i1 = std::min(i0 + 1, n - 1);
    return std::tuple<int, int, float>{i0, i1, src - static_cast<float>(i0)};
  };
  for (int c = 0; c < in.channels; ++c) {
    const float* src = in.channel(c);
    float* dst = out.channel(c);
    for (int y = 0; y < out.height; ++y) {
      const auto [y0, y1, fy] = taps(y, in.height);
      for (int x = 0; x < out.width; ++x) {
        const auto [x0, x1, fx] = taps(x, in.width);
        const float top = src[y0 * in.width + x0] * (1.0f - fx) + src[y0 * in.width + x1] * fx;
        const float bot = src[y1 * in.width + x0] * (1.0f - fx) + src[y1 * in.width + x1] * fx;
        dst[static_cast<std::size_t>(y) * out.width + x] = top * (1.0f - fy) + bot * fy;
      }
    }
  }
  return out;
}

inline Feature concat(const Feature& a, const Feature& b) {
  Feature out(a.channels + b.channels, a.height, a.width);
  std::copy(a.data.begin(), a.data.end(), out.data.begin());
  std::copy(b.data.begin(), b.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(a.data.size()));
  return out;
}

}  // namespace nn

// Sigmoid heatmap of the first output channel, same H x W as the input.
inline Heatmap unet_forward(const UNetSpec& spec, const WeightContainer& weights, const RasterStack& input) {
  validate_unet_weights(spec, weights);
  if (input.channels() != spec.in_channels) {
    throw ShapeError("unet: input has " + std::to_string(input.channels()) + " channels, expected " +
                     std::to_string(spec.in_channels));
  }
  if (input.height() % 16 != 0 || input.width() % 16 != 0) {
    throw ShapeError("unet: input height and width must be multiples of 16");
  }
  nn::pin_gemm_blocking();
  auto t = [&](const std::string& name) -> const Tensor& { return *weights.find(name); };
  auto block = [&](const nn::Feature& x, const std::string& prefix) {
    auto y = nn::conv2d(x, t(prefix + ".conv1.weight"), t(prefix + ".conv1.bias"), true);
    return nn::conv2d(y, t(prefix + ".conv2.weight"), t(prefix + ".conv2.bias"), true);
  };

  nn::Feature x(input.channels(), input.height(), input.width());
  std::copy(input.data().begin(), input.data().end(), x.data.begin());

  std::array<nn::Feature, 5> skips;
  for (int i = 0; i < 5; ++i) {
    skips[i] = block(i == 0 ? x : nn::max_pool2(skips[i - 1]), "enc" + std::to_string(i + 1));
  }
  auto y = block(skips[4], "dec1");
  for (int i = 1; i < 5; ++i) {
    y = block(nn::concat(nn::upsample2(y), skips[4 - i]), "dec" + std::to_string(i + 1));
  }
  const auto logits = nn::conv2d(y, t("head.weight"), t("head.bias"), false);

  Heatmap out(input.geometry());
  auto values = out.values();
  const float* z = logits.channel(0);
  for (std::size_t i = 0; i < values.size(); ++i) {
    values[i] = 1.0 / (1.0 + std::exp(-static_cast<double>(z[i])));
  }
  return out;
}

}  // namespace trllm

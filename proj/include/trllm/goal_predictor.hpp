#pragma once

// Target-area heatmaps from (scene, trajectory) and their conversion to per-object
// probabilities.

#include <cmath>
#include <memory>
#include <string>
#include <utility>
#include <variant>

#include "trllm/probability.hpp"
#include "trllm/scene.hpp"
#include "trllm/trajectory.hpp"
#include "trllm/unet.hpp"
#include "trllm/weights.hpp"

namespace trllm {

inline constexpr double kDefaultBeta = 1.0;

// Path-efficiency model: a walkable cell g scores exp(-beta * detour) where
// detour = max(0, observed_length + D(current, g) - D(start, g)) and D is the grid geodesic.
// Cells that are obstacles or unreachable from either end score 0. Not normalized.
inline Heatmap geometric_predict(const Scene& scene, const Trajectory& traj, double beta = kDefaultBeta) {
  if (!(beta > 0.0)) throw ContractError("geometric predictor: beta must be positive");
  const auto& g = scene.geometry();
  const auto& map = scene.map;
  const Pixel start = nearest_walkable(map, world_to_pixel(g, traj.start()));
  const Pixel current = nearest_walkable(map, world_to_pixel(g, traj.current()));
  const auto from_start = geodesic_field(map, start);
  if (!from_start.reachable(current)) {
    throw DegenerateInputError("geometric predictor: current position is not reachable from the start");
  }
  const auto from_current = geodesic_field(map, current);
  const double observed = progress_distance(traj);

  Heatmap out(g);
  auto values = out.values();
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double ds = from_start.meters[i];
    const double dc = from_current.meters[i];
    if (!std::isfinite(ds) || !std::isfinite(dc)) continue;
    const double detour = std::max(0.0, observed + dc - ds);
    values[i] = std::exp(-beta * detour);
  }
  return out;
}

// Constant heatmap over walkable cells.
inline Heatmap uniform_predict(const Scene& scene) {
  Heatmap out(scene.geometry());
  auto values = out.values();
  const auto cells = scene.map.cells();
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = cells[i] ? 1.0 : 0.0;
  return out;
}

inline Heatmap unet_predict(const UNetSpec& spec, const WeightContainer& weights, const Scene& scene,
                            const Trajectory& traj, double sigma_px = kDefaultSigmaPx) {
  return unet_forward(spec, weights, rasterize(resample_to_epochs(traj, kEpochs), scene.map, sigma_px));
}

// Overlap mass of each object over the total; uniform when the heatmap puts no mass on any
// object (telemetry->zero_mass_fallbacks counts those).
inline ObjectProbabilityMap object_probabilities(const Heatmap& heatmap, const Scene& scene,
                                                 Telemetry* telemetry = nullptr) {
  std::vector<double> mass;
  mass.reserve(scene.objects.size());
  for (const auto& o : scene.objects) mass.push_back(object_overlap_mass(heatmap, o, scene.geometry()));
  bool fell_back = false;
  auto out = ObjectProbabilityMap::from_weights(scene.labels(), std::move(mass), &fell_back);
  if (fell_back && telemetry) ++telemetry->zero_mass_fallbacks;
  return out;
}

// ---------------------------------------------------------------------------

struct UNetPredictor {
  std::shared_ptr<const WeightContainer> weights;
  UNetSpec spec;
};

struct GeometricPredictor {
  double beta = kDefaultBeta;
};

struct UniformPredictor {};

using GoalPredictorKind = std::variant<UNetPredictor, GeometricPredictor, UniformPredictor>;

inline std::string predictor_name(const GoalPredictorKind& kind) {
  return std::visit(
      [](const auto& p) -> std::string {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, UNetPredictor>) return "unet";
        else if constexpr (std::is_same_v<T, GeometricPredictor>) return "geometric";
        else return "uniform";
      },
      kind);
}

inline Heatmap predict_heatmap(const GoalPredictorKind& kind, const Scene& scene, const Trajectory& traj) {
  return std::visit(
      [&](const auto& p) -> Heatmap {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, UNetPredictor>) {
          if (!p.weights) throw ContractError("unet predictor: no weights loaded");
          return unet_predict(p.spec, *p.weights, scene, traj);
        } else if constexpr (std::is_same_v<T, GeometricPredictor>) {
          return geometric_predict(scene, traj, p.beta);
        } else {
          return uniform_predict(scene);
        }
      },
      kind);
}

}  // namespace trllm

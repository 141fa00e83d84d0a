#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "support.hpp"
#include "trllm/eval.hpp"
#include "trllm/goal_predictor.hpp"

using namespace trllm;
using testing_support::fixture;

namespace {

Trajectory two_point(WorldPoint a, WorldPoint b) { return Trajectory({{0.0, a.x, a.y}, {1.0, b.x, b.y}}); }

ObjectRegion rect_region(const std::string& label, int r0, int c0, int r1, int c1) {
  ObjectRegion o{label, {}, {}};
  for (int r = r0; r <= r1; ++r) {
    for (int c = c0; c <= c1; ++c) o.mask.push_back({r, c});
  }
  return o;
}

Scene open_scene(int n, double extent, std::vector<ObjectRegion> objects) {
  const GridGeometry g{n, n, extent};
  return Scene{"open", SceneMap(g, std::vector<std::uint8_t>(g.cell_count(), 1)), std::move(objects)};
}

double entropy(const ObjectProbabilityMap& p) {
  double h = 0.0;
  for (double v : p.probabilities()) {
    if (v > 0.0) h -= v * std::log(v);
  }
  return h;
}

}  // namespace

TEST(Geometric, ZeroProgressIsUniformOverReachable) {
  const auto scene = load_scene(fixture("scene_L.json"));
  const auto heat = geometric_predict(scene, two_point({5.0, 3.0}, {5.0, 3.0}));
  const auto cells = scene.map.cells();
  for (std::size_t i = 0; i < cells.size(); ++i) ASSERT_EQ(heat.values()[i], cells[i] ? 1.0 : 0.0);
}

TEST(Geometric, CorridorTwoMetersRightward) {
  const auto scene = load_scene(fixture("corridor.json"));
  const auto& g = scene.geometry();
  const double mpp = g.meters_per_pixel();
  // Start on a pixel centre and move exactly 51 pixel pitches of the geodesic metric, which
  // is 1.99 m; the observed length then equals D(s, c).
  const WorldPoint s{3.0, 5.0};
  const WorldPoint c{3.0 + 51 * mpp, 5.0};
  const Pixel ps = world_to_pixel(g, s), pc = world_to_pixel(g, c);
  ASSERT_EQ(pc.col - ps.col, 51);
  const auto heat = geometric_predict(scene, two_point(s, c));

  // Oracle: along an unobstructed row the geodesic is |dcol| * mpp.
  const double l_obs = 51 * mpp;
  EXPECT_NEAR(heat.at(ps), std::exp(-(l_obs + 51 * mpp)), 1e-12);
  EXPECT_NEAR(heat.at(ps), std::exp(-4.0), 0.02 * std::exp(-4.0));
  const Pixel ahead{pc.row, pc.col + 26};  // about 1 m further right
  EXPECT_NEAR(heat.at(ahead), 1.0, 1e-12);
  EXPECT_EQ(heat.at({0, 0}), 0.0);  // outside the corridor
}

TEST(Geometric, BetaScalesExponent) {
  const auto scene = load_scene(fixture("corridor.json"));
  const auto t = two_point({3.0, 5.0}, {5.0, 5.0});
  const auto h1 = geometric_predict(scene, t, 1.0);
  const auto h2 = geometric_predict(scene, t, 2.0);
  for (std::size_t i = 0; i < h1.values().size(); i += 97) {
    EXPECT_NEAR(h2.values()[i], h1.values()[i] * h1.values()[i], 1e-12);
  }
  EXPECT_THROW(geometric_predict(scene, t, 0.0), ContractError);
}

TEST(Geometric, BehindUnbrokenWallIsZero) {
  const GridGeometry g{32, 32, 3.2};
  std::vector<std::uint8_t> cells(g.cell_count(), 1);
  for (int r = 0; r < 32; ++r) cells[linear_index(g, {r, 16})] = 0;
  Scene scene{"wall", SceneMap(g, cells), {rect_region("a", 2, 2, 4, 4)}};
  const auto heat = geometric_predict(scene, two_point({0.5, 0.5}, {1.0, 1.0}));
  for (int r = 0; r < 32; ++r) {
    for (int c = 16; c < 32; ++c) ASSERT_EQ(heat.at({r, c}), 0.0);
  }
  EXPECT_GT(heat.at({5, 5}), 0.0);
}

TEST(Geometric, UnreachableCurrentIsDegenerate) {
  const GridGeometry g{32, 32, 3.2};
  std::vector<std::uint8_t> cells(g.cell_count(), 1);
  for (int r = 0; r < 32; ++r) cells[linear_index(g, {r, 16})] = 0;
  Scene scene{"wall", SceneMap(g, cells), {rect_region("a", 2, 2, 4, 4)}};
  EXPECT_THROW(geometric_predict(scene, two_point({0.5, 0.5}, {2.5, 0.5})), DegenerateInputError);
}

TEST(Geometric, MonotoneInDistanceFromCurrent) {
  std::mt19937 rng(21);
  const GridGeometry g{16, 16, 1.6};
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::uint8_t> cells(g.cell_count());
    std::bernoulli_distribution open(0.8);
    for (auto& c : cells) c = open(rng) ? 1 : 0;
    cells[0] = 1;
    SceneMap map(g, cells);
    Scene scene{"rand", map, {rect_region("a", 0, 0, 0, 0)}};
    std::uniform_real_distribution<double> u(0.0, 1.6);
    const WorldPoint s{u(rng), u(rng)}, c{u(rng), u(rng)};
    const Pixel ps = nearest_walkable(map, world_to_pixel(g, s));
    const Pixel pc = nearest_walkable(map, world_to_pixel(g, c));
    const auto fs = geodesic_field(map, ps);
    if (!fs.reachable(pc)) continue;
    const auto fc = geodesic_field(map, pc);
    const auto heat = geometric_predict(scene, two_point(s, c));
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (!std::isfinite(fs.meters[i])) continue;
      for (std::size_t j = 0; j < cells.size(); ++j) {
        if (fs.meters[j] != fs.meters[i] || !(fc.meters[i] < fc.meters[j])) continue;
        ASSERT_GE(heat.values()[i], heat.values()[j]);
      }
    }
  }
}

TEST(Geometric, RefinesWithProgressOnCorridor) {
  const auto scene = load_scene(fixture("corridor.json"));
  const auto walk = load_trajectory(fixture("corridor_walk.csv"));
  double previous = std::log(static_cast<double>(scene.objects.size())) + 1e-9;
  for (double d : {1.0, 2.0, 3.0}) {
    const auto p = object_probabilities(geometric_predict(scene, truncate_at_progress(walk, d)), scene);
    const double h = entropy(p);
    EXPECT_LT(h, previous) << "d=" << d;
    previous = h;
  }
}

TEST(ObjectProbabilities, ProportionalToArea) {
  // 10 and 30 pixel objects on a uniform heatmap.
  const auto scene = open_scene(16, 1.6, {rect_region("small", 0, 0, 1, 4), rect_region("large", 5, 0, 7, 9)});
  const auto p = object_probabilities(uniform_predict(scene), scene);
  EXPECT_NEAR(p.at("small"), 0.25, 1e-12);
  EXPECT_NEAR(p.at("large"), 0.75, 1e-12);
}

TEST(ObjectProbabilities, Concentration) {
  const auto scene = open_scene(16, 1.6, {rect_region("a", 0, 0, 1, 1), rect_region("b", 8, 8, 9, 9)});
  Heatmap h(scene.geometry());
  h.at({0, 1}) = 3.0;
  h.at({12, 12}) = 5.0;  // outside every object
  const auto p = object_probabilities(h, scene);
  EXPECT_EQ(p.at("a"), 1.0);
  EXPECT_EQ(p.at("b"), 0.0);
}

TEST(ObjectProbabilities, ZeroMassFallsBackWithFlag) {
  const auto scene = open_scene(16, 1.6,
                                {rect_region("a", 0, 0, 0, 0), rect_region("b", 2, 2, 2, 2), rect_region("c", 4, 4, 4, 4),
                                 rect_region("d", 6, 6, 6, 6)});
  Telemetry t;
  const auto p = object_probabilities(Heatmap(scene.geometry()), scene, &t);
  for (double v : p.probabilities()) EXPECT_EQ(v, 0.25);
  EXPECT_EQ(t.zero_mass_fallbacks, 1);
}

TEST(ObjectProbabilities, GeometryMismatch) {
  const auto scene = open_scene(16, 1.6, {rect_region("a", 0, 0, 0, 0)});
  EXPECT_THROW(object_probabilities(Heatmap(GridGeometry{32, 32, 1.6}), scene), DimensionError);
}

TEST(ObjectProbabilities, ScaleInvariantAndNormalized) {
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto scene = open_scene(16, 1.6,
                                {rect_region("a", 0, 0, 3, 3), rect_region("b", 4, 4, 9, 6), rect_region("c", 10, 0, 15, 15)});
  for (int trial = 0; trial < 100; ++trial) {
    Heatmap h(scene.geometry());
    for (auto& v : h.values()) v = u(rng);
    Heatmap scaled = h;
    const double k = 0.001 + 1000.0 * u(rng);
    for (auto& v : scaled.values()) v *= k;
    const auto p = object_probabilities(h, scene);
    const auto q = object_probabilities(scaled, scene);
    double sum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      EXPECT_NEAR(p.probabilities()[i], q.probabilities()[i], 1e-12);
      sum += p.probabilities()[i];
    }
    EXPECT_NEAR(sum, 1.0, 1e-9);
  }
}

TEST(Predictors, DispatchAndNames) {
  const auto scene = load_scene(fixture("scene_L.json"));
  const auto t = two_point({5.0, 3.0}, {6.0, 3.0});
  EXPECT_EQ(predictor_name(GeometricPredictor{}), "geometric");
  EXPECT_EQ(predictor_name(UniformPredictor{}), "uniform");
  EXPECT_EQ(predictor_name(UNetPredictor{}), "unet");
  EXPECT_THROW(predict_heatmap(UNetPredictor{}, scene, t), ContractError);
  const auto u = predict_heatmap(UniformPredictor{}, scene, t);
  EXPECT_EQ(u.values()[linear_index(scene.geometry(), {0, 0})], 0.0);
}

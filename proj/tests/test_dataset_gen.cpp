#include <deque>
#include <set>

#include <gtest/gtest.h>

#include "support.hpp"
#include "trllm/dataset_gen.hpp"

using namespace trllm;

namespace {

// Descriptor text plus the walkable grid as run-length pairs, independent of PNG encoding.
std::string scene_fingerprint(const Scene& scene) {
  const auto dir = testing_support::scratch("fingerprint");
  save_scene(scene, dir / "scene.json");
  std::vector<Pixel> walkable;
  const auto& g = scene.geometry();
  for (std::size_t i = 0; i < g.cell_count(); ++i) {
    if (scene.map.walkable(i)) walkable.push_back(pixel_at(g, i));
  }
  auto j = nlohmann::ordered_json::parse(testing_support::read_file(dir / "scene.json"));
  j["walkable_rle"] = encode_mask_rle(g, walkable);
  return j.dump(1) + "\n";
}

std::size_t bfs_reach(const SceneMap& map, Pixel from) {
  const auto& g = map.geometry();
  std::vector<std::uint8_t> seen(g.cell_count(), 0);
  std::deque<Pixel> queue{from};
  seen[linear_index(g, from)] = 1;
  std::size_t count = 0;
  while (!queue.empty()) {
    const auto p = queue.front();
    queue.pop_front();
    ++count;
    for (int dr = -1; dr <= 1; ++dr) {
      for (int dc = -1; dc <= 1; ++dc) {
        if (dr == 0 && dc == 0) continue;
        const Pixel q{p.row + dr, p.col + dc};
        if (!map.walkable(q) || seen[linear_index(g, q)]) continue;
        if (dr != 0 && dc != 0 && !(map.walkable({p.row + dr, p.col}) && map.walkable({p.row, p.col + dc}))) continue;
        seen[linear_index(g, q)] = 1;
        queue.push_back(q);
      }
    }
  }
  return count;
}

Scene empty_room_with_goal() {
  const GridGeometry g;
  ObjectRegion goal{"goal", {}, {}};
  for (int r = 120; r <= 130; ++r) {
    for (int c = 150; c <= 160; ++c) goal.mask.push_back({r, c});
  }
  return Scene{"empty", SceneMap(g, std::vector<std::uint8_t>(g.cell_count(), 1)), {goal}};
}

bool adjacent_to_mask(const Scene& scene, const ObjectRegion& o, Pixel p) {
  const std::set<Pixel> mask(o.mask.begin(), o.mask.end());
  if (mask.count(p)) return false;
  for (int dr = -1; dr <= 1; ++dr) {
    for (int dc = -1; dc <= 1; ++dc) {
      if (mask.count({p.row + dr, p.col + dc})) return true;
    }
  }
  (void)scene;
  return false;
}

}  // namespace

TEST(GenScene, GoldenSeed7) {
  testing_support::expect_golden("gen_scene_seed7_r2_o6.json", scene_fingerprint(gen_scene(7, RoomSpec{2, 6})));
}

TEST(GenScene, DeterministicPerSeed) {
  EXPECT_EQ(scene_fingerprint(gen_scene(11, RoomSpec{3, 9})), scene_fingerprint(gen_scene(11, RoomSpec{3, 9})));
  EXPECT_NE(scene_fingerprint(gen_scene(11, RoomSpec{3, 9})), scene_fingerprint(gen_scene(12, RoomSpec{3, 9})));
}

TEST(GenScene, Errors) {
  EXPECT_THROW(gen_scene(1, RoomSpec{1, 0}), GenerationError);
  EXPECT_THROW(gen_scene(1, RoomSpec{0, 3}), GenerationError);
  EXPECT_THROW(gen_scene(1, RoomSpec{9, 9}), GenerationError);
  EXPECT_THROW(gen_scene(1, RoomSpec{1, 200}), GenerationError);
}

TEST(GenScene, InvariantsAcrossSeeds) {
  for (std::uint64_t seed = 1; seed <= 12; ++seed) {
    const RoomSpec spec{1 + static_cast<int>(seed % 5), 3 + static_cast<int>(seed % 8)};
    const auto scene = gen_scene(seed, spec);
    EXPECT_NO_THROW(scene.validate());
    EXPECT_EQ(scene.objects.size(), static_cast<std::size_t>(spec.objects));
    // Every walkable cell is reachable from any other.
    std::size_t walkable = 0;
    Pixel first{-1, -1};
    for (std::size_t i = 0; i < scene.geometry().cell_count(); ++i) {
      if (!scene.map.walkable(i)) continue;
      if (walkable++ == 0) first = pixel_at(scene.geometry(), i);
    }
    EXPECT_EQ(bfs_reach(scene.map, first), walkable) << "seed " << seed;
    for (const auto& o : scene.objects) EXPECT_FALSE(goal_approach_cells(scene, o).empty()) << o.label;
  }
}

TEST(Synthesize, KinematicsOnEmptyMap) {
  const auto scene = empty_room_with_goal();
  const auto& g = scene.geometry();
  const auto target = pixel_to_world(g, {125, 149});
  const WorldPoint start{target.x - 2.0, target.y};
  const auto t = synthesize_trajectory(scene, start, "goal", 1.0);
  // Oracle: distance / speed plus one ramp time (two half ramps at average half speed).
  EXPECT_NEAR(t.back().t, 2.0 / 1.0 + 0.5, 1e-9);
  EXPECT_NEAR(t.back().x, target.x, 10.0 / 255.0);
  EXPECT_NEAR(t.back().y, target.y, 10.0 / 255.0);
  EXPECT_NEAR(progress_distance(t), 2.0, 1e-9);
  for (std::size_t i = 1; i + 1 < t.size(); ++i) EXPECT_NEAR(t[i].t - t[i - 1].t, 0.1, 1e-12);
  // Constant cruise speed in the middle.
  EXPECT_NEAR(segment_length(t[12], t[13]) / 0.1, 1.0, 1e-9);
  // Ramp: distance after 0.2 s is a/2 t^2 with a = 2 m/s^2.
  EXPECT_NEAR(segment_length(t[0], t[2]), 0.5 * 2.0 * 0.04, 1e-9);
}

TEST(Synthesize, AdjacentStartIsMinimal) {
  const auto scene = empty_room_with_goal();
  const auto start = pixel_to_world(scene.geometry(), {125, 149});
  const auto t = synthesize_trajectory(scene, start, "goal");
  EXPECT_EQ(t.size(), 2u);
  EXPECT_LT(progress_distance(t), 0.1);
}

TEST(Synthesize, Errors) {
  auto scene = empty_room_with_goal();
  std::vector<std::uint8_t> cells(scene.geometry().cell_count(), 1);
  for (int r = 0; r < 256; ++r) cells[linear_index(scene.geometry(), {r, 100})] = 0;
  scene.map = SceneMap(scene.geometry(), cells);
  EXPECT_THROW(synthesize_trajectory(scene, {1.0, 1.0}, "goal"), GenerationError);
  try {
    synthesize_trajectory(scene, {1.0, 1.0}, "goal");
  } catch (const GenerationError& e) {
    EXPECT_NE(std::string(e.what()).find("goal"), std::string::npos);
  }
  EXPECT_THROW(synthesize_trajectory(scene, {8.0, 1.0}, "piano"), GenerationError);
  EXPECT_THROW(synthesize_trajectory(scene, {8.0, 1.0}, "goal", 0.0), ContractError);
}

TEST(Synthesize, BundledTrajectoriesArePlausible) {
  for (const auto& pair : bundled_pairs(7).pairs) {
    const auto& scene = *pair.scene;
    const auto& g = scene.geometry();
    const auto& t = pair.trajectory;
    for (const auto& s : t.samples()) ASSERT_TRUE(scene.map.walkable(world_to_pixel(g, {s.x, s.y}))) << pair.scenario.id;
    const auto* goal = scene.find(pair.scenario.gt_target_object);
    EXPECT_TRUE(adjacent_to_mask(scene, *goal, world_to_pixel(g, t.current()))) << pair.scenario.id;

    // Oracle path length: Dijkstra from the start pixel to the nearest approach cell.
    const auto start_px = nearest_walkable(scene.map, world_to_pixel(g, pair.scenario.start_location));
    const auto field = geodesic_field(scene.map, start_px);
    double best = std::numeric_limits<double>::infinity();
    for (auto p : goal_approach_cells(scene, *goal)) {
      if (field.reachable(p)) best = std::min(best, field.meters[linear_index(g, p)]);
    }
    const double pitch = 10.0 / 255.0;
    EXPECT_LE(progress_distance(t), 1.15 * best + 2 * pitch) << pair.scenario.id << " " << scene.name;
    EXPECT_GT(progress_distance(t), 3.0) << "bundled starts are at least 3 m away";
  }
}

TEST(BuildPairs, CountMatchesLabelMembership) {
  const auto scenes = bundled_scenes(7);
  const auto scenarios = bundled_scenarios();
  std::size_t expected = 0;
  for (const auto& s : scenarios) {
    for (const auto& m : scenes) expected += m.find(s.gt_target_object) ? 1 : 0;
  }
  const auto built = bundled_pairs(7);
  EXPECT_EQ(built.pairs.size(), expected);
  EXPECT_EQ(expected, 24u);
  EXPECT_TRUE(built.unmatched_scenarios.empty());
  // Scenario-major order.
  std::size_t pos = 0;
  for (const auto& s : scenarios) {
    for (const auto& m : scenes) {
      if (!m.find(s.gt_target_object)) continue;
      ASSERT_EQ(built.pairs[pos].scenario.id, s.id);
      ASSERT_EQ(built.pairs[pos].scene->name, m.name);
      ++pos;
    }
  }
}

TEST(BuildPairs, UnmatchedScenarioIsFlagged) {
  auto scenarios = bundled_scenarios();
  scenarios.resize(1);
  auto lost = scenarios[0];
  lost.id = "lost";
  lost.gt_target_object = "grand piano";
  scenarios.push_back(lost);
  std::vector<std::shared_ptr<const Scene>> scenes{std::make_shared<const Scene>(bundled_scenes(7, 1)[0])};
  const auto built = build_pairs(scenarios, scenes);
  EXPECT_EQ(built.unmatched_scenarios, std::vector<std::string>{"lost"});
  EXPECT_THROW(build_pairs({}, scenes), ContractError);
}

TEST(WriteDataset, ByteIdenticalAcrossRuns) {
  const auto a = testing_support::scratch("ds_a");
  const auto b = testing_support::scratch("ds_b");
  const auto fa = write_dataset(a, bundled_scenes(7), bundled_scenarios());
  write_dataset(b, bundled_scenes(7), bundled_scenarios());
  EXPECT_EQ(fa.pair_count, 24u);
  std::size_t files = 0;
  for (const auto& e : std::filesystem::recursive_directory_iterator(a)) {
    if (!e.is_regular_file()) continue;
    ++files;
    const auto rel = std::filesystem::relative(e.path(), a);
    EXPECT_EQ(testing_support::read_file(e.path()), testing_support::read_file(b / rel)) << rel;
  }
  EXPECT_EQ(files, 6u * 2 + 8 + 24 + 1);
}

TEST(Bundled, ScenariosAreMarkedSynthetic) {
  const auto scenarios = bundled_scenarios();
  EXPECT_EQ(scenarios.size(), 8u);
  for (const auto& s : scenarios) EXPECT_EQ(s.source, "synthetic");
  EXPECT_EQ(bundled_scenes(7).size(), 6u);
}

#pragma once

// Synthetic scenes, scenarios and trajectories for running the pipeline offline.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "trllm/errors.hpp"
#include "trllm/eval.hpp"
#include "trllm/household.hpp"
#include "trllm/scene.hpp"
#include "trllm/trajectory.hpp"

namespace trllm {

struct RoomPlan {
  std::string type;
  std::vector<std::string> labels;
};

struct SceneBlueprint {
  std::string name;
  std::vector<RoomPlan> rooms;
};

struct RoomSpec {
  int rooms = 3;
  int objects = 12;
};

namespace gen {

inline constexpr int kHouseTop = 40;
inline constexpr int kHouseBottom = 215;
inline constexpr int kHouseLeft = 16;
inline constexpr int kHouseRight = 239;
inline constexpr int kWall = 3;
inline constexpr int kDoor = 28;
inline constexpr int kMinRoom = 44;
inline constexpr int kMaxRooms = 8;

struct Rect {
  int top, left, bottom, right;  // inclusive
  bool intersects(const Rect& o, int margin = 0) const {
    return !(o.left > right + margin || o.right < left - margin || o.top > bottom + margin ||
             o.bottom < top - margin);
  }
};

// Portable integer draw in [lo, hi].
inline int uniform(std::mt19937_64& rng, int lo, int hi) {
  if (hi <= lo) return lo;
  return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
}

// Splits [lo, hi] into n spans of at least `min_len`, separated by `gap` cells.
inline std::vector<std::pair<int, int>> split_span(std::mt19937_64& rng, int lo, int hi, int n, int min_len, int gap) {
  const int total = hi - lo + 1 - (n - 1) * gap;
  if (total < n * min_len) throw GenerationError("scene generator: too many rooms for the floor plan");
  std::vector<int> lengths(static_cast<std::size_t>(n), min_len);
  int slack = total - n * min_len;
  // Spread slack evenly, then jitter.
  for (int i = 0; i < n; ++i) lengths[static_cast<std::size_t>(i)] += slack / n;
  slack -= (slack / n) * n;
  lengths.back() += slack;
  for (int i = 0; i + 1 < n; ++i) {
    const int shift = uniform(rng, -(lengths[static_cast<std::size_t>(i)] - min_len),
                              lengths[static_cast<std::size_t>(i) + 1] - min_len) / 2;
    lengths[static_cast<std::size_t>(i)] += shift;
    lengths[static_cast<std::size_t>(i) + 1] -= shift;
  }
  std::vector<std::pair<int, int>> spans;
  int pos = lo;
  for (int len : lengths) {
    spans.emplace_back(pos, pos + len - 1);
    pos += len + gap;
  }
  return spans;
}

inline Rgb palette(std::size_t i) {
  // Evenly spaced hues, full saturation.
  const double h = std::fmod(static_cast<double>(i) * 0.61803398875, 1.0) * 6.0;
  const double x = 1.0 - std::fabs(std::fmod(h, 2.0) - 1.0);
  double r = 0, g = 0, b = 0;
  switch (static_cast<int>(h)) {
    case 0: r = 1; g = x; break;
    case 1: r = x; g = 1; break;
    case 2: g = 1; b = x; break;
    case 3: g = x; b = 1; break;
    case 4: r = x; b = 1; break;
    default: r = 1; b = x; break;
  }
  auto c = [](double v) { return static_cast<std::uint8_t>(std::lround(60 + 195 * v)); };
  return {c(r), c(g), c(b)};
}

}  // namespace gen

// Rectangular rooms inside a fixed house footprint on a 256 px / 10 m grid, joined by
// door gaps; objects are small walkable rectangles flush against room walls.
inline Scene gen_scene(std::uint64_t seed, const SceneBlueprint& blueprint) {
  using gen::Rect;
  const int n_rooms = static_cast<int>(blueprint.rooms.size());
  std::size_t n_objects = 0;
  for (const auto& r : blueprint.rooms) n_objects += r.labels.size();
  if (n_rooms < 1 || n_objects < 1) throw GenerationError("scene generator: need at least one room and one object");
  if (n_rooms > gen::kMaxRooms) throw GenerationError("scene generator: at most 8 rooms supported");

  std::mt19937_64 rng(seed);
  const GridGeometry geom{256, 256, 10.0};
  std::vector<std::uint8_t> cells(geom.cell_count(), 0);
  auto fill = [&](const Rect& r, std::uint8_t v) {
    for (int y = r.top; y <= r.bottom; ++y) {
      for (int x = r.left; x <= r.right; ++x) cells[linear_index(geom, {y, x})] = v;
    }
  };

  const int n_rows = n_rooms <= 3 ? 1 : 2;
  std::vector<int> per_row;
  if (n_rows == 1) {
    per_row = {n_rooms};
  } else {
    per_row = {(n_rooms + 1) / 2, n_rooms / 2};
  }
  const auto row_spans = gen::split_span(rng, gen::kHouseTop, gen::kHouseBottom, n_rows, gen::kMinRoom + 20, gen::kWall);

  std::vector<Rect> rooms;
  std::vector<Rect> keep_clear;  // around doors
  std::vector<std::vector<Rect>> row_rooms(static_cast<std::size_t>(n_rows));
  for (int r = 0; r < n_rows; ++r) {
    const auto [top, bottom] = row_spans[static_cast<std::size_t>(r)];
    const auto col_spans = gen::split_span(rng, gen::kHouseLeft, gen::kHouseRight, per_row[static_cast<std::size_t>(r)],
                                           gen::kMinRoom, gen::kWall);
    for (std::size_t c = 0; c < col_spans.size(); ++c) {
      Rect room{top, col_spans[c].first, bottom, col_spans[c].second};
      fill(room, 1);
      rooms.push_back(room);
      row_rooms[static_cast<std::size_t>(r)].push_back(room);
      if (c > 0) {
        const int door_top = gen::uniform(rng, top + 8, bottom - 8 - gen::kDoor);
        const Rect door{door_top, col_spans[c - 1].second + 1, door_top + gen::kDoor - 1, room.left - 1};
        fill(door, 1);
        keep_clear.push_back({door.top - 4, door.left - 14, door.bottom + 4, door.right + 14});
      }
    }
  }
  if (n_rows == 2) {
    const auto& top_row = row_rooms[0];
    for (const auto& room : row_rooms[1]) {
      bool placed = false;
      for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
        const int left = gen::uniform(rng, room.left + 6, room.right - 6 - gen::kDoor);
        const int right = left + gen::kDoor - 1;
        for (const auto& above : top_row) {
          if (left >= above.left + 6 && right <= above.right - 6) {
            const Rect door{above.bottom + 1, left, room.top - 1, right};
            fill(door, 1);
            keep_clear.push_back({door.top - 14, door.left - 4, door.bottom + 14, door.right + 4});
            placed = true;
            break;
          }
        }
      }
      if (!placed) throw GenerationError("scene generator: cannot connect the room rows");
    }
  }

  Scene scene;
  scene.name = blueprint.name;
  std::vector<Rect> placed;
  std::size_t color_index = 0;
  for (std::size_t ri = 0; ri < blueprint.rooms.size(); ++ri) {
    const Rect& room = rooms[ri];
    for (const auto& label : blueprint.rooms[ri].labels) {
      bool ok = false;
      for (int attempt = 0; attempt < 400 && !ok; ++attempt) {
        const int long_side = gen::uniform(rng, 12, 20);
        const int short_side = gen::uniform(rng, 8, 12);
        const int side = gen::uniform(rng, 0, 3);  // 0 top, 1 bottom, 2 left, 3 right
        const bool horizontal = side < 2;
        const int h = horizontal ? short_side : long_side;
        const int w = horizontal ? long_side : short_side;
        if (room.bottom - room.top + 1 < h + 2 || room.right - room.left + 1 < w + 2) continue;
        Rect r{};
        if (horizontal) {
          r.left = gen::uniform(rng, room.left, room.right - w + 1);
          r.top = side == 0 ? room.top : room.bottom - h + 1;
        } else {
          r.top = gen::uniform(rng, room.top, room.bottom - h + 1);
          r.left = side == 2 ? room.left : room.right - w + 1;
        }
        r.bottom = r.top + h - 1;
        r.right = r.left + w - 1;
        if (std::any_of(placed.begin(), placed.end(), [&](const Rect& o) { return o.intersects(r, 3); })) continue;
        if (std::any_of(keep_clear.begin(), keep_clear.end(), [&](const Rect& o) { return o.intersects(r); })) continue;
        placed.push_back(r);
        ObjectRegion region{label, {}, gen::palette(color_index++)};
        for (int y = r.top; y <= r.bottom; ++y) {
          for (int x = r.left; x <= r.right; ++x) region.mask.push_back({y, x});
        }
        scene.objects.push_back(std::move(region));
        ok = true;
      }
      if (!ok) {
        throw GenerationError("scene generator: not enough wall space for object '" + label + "' in room " +
                              std::to_string(ri + 1));
      }
    }
  }
  scene.map = SceneMap(geom, std::move(cells));
  scene.validate();
  return scene;
}

// Random room types and labels drawn from the household vocabulary.
inline Scene gen_scene(std::uint64_t seed, const RoomSpec& spec) {
  if (spec.rooms < 1 || spec.objects < 1) throw GenerationError("scene generator: need at least one room and one object");
  if (spec.rooms > gen::kMaxRooms) throw GenerationError("scene generator: at most 8 rooms supported");
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  const auto& types = household::room_types();
  std::vector<std::size_t> order(types.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);

  SceneBlueprint bp;
  bp.name = "scene_s" + std::to_string(seed);
  std::vector<std::vector<std::string_view>> pools;
  for (int r = 0; r < spec.rooms; ++r) {
    const auto& type = types[order[static_cast<std::size_t>(r) % order.size()]];
    bp.rooms.push_back({std::string(type.name), {}});
    auto pool = type.objects;
    for (std::size_t i = pool.size(); i > 1; --i) std::swap(pool[i - 1], pool[rng() % i]);
    pools.push_back(std::move(pool));
  }
  std::vector<std::string> used;
  for (int k = 0; k < spec.objects; ++k) {
    const auto r = static_cast<std::size_t>(k % spec.rooms);
    const auto round = static_cast<std::size_t>(k / spec.rooms);
    const auto& pool = pools[r];
    std::string label(pool[round % pool.size()]);
    if (round >= pool.size()) label += " " + std::to_string(round / pool.size() + 1);
    while (std::find(used.begin(), used.end(), label) != used.end()) label += "'";
    used.push_back(label);
    bp.rooms[r].labels.push_back(label);
  }
  return gen_scene(seed, bp);
}

// ---------------------------------------------------------------------------
// Trajectory synthesis: grid geodesic to the goal, corner-cut, then a trapezoidal speed
// profile sampled at 10 Hz.

inline constexpr double kSampleRateHz = 10.0;
inline constexpr double kRampS = 0.5;
inline constexpr double kDefaultSpeedMps = 1.2;

// Walkable cells outside the mask that touch it (8-neighbourhood).
inline std::vector<Pixel> goal_approach_cells(const Scene& scene, const ObjectRegion& goal) {
  const auto& g = scene.geometry();
  std::vector<std::uint8_t> in_mask(g.cell_count(), 0);
  for (auto p : goal.mask) in_mask[linear_index(g, p)] = 1;
  std::vector<std::uint8_t> seen(g.cell_count(), 0);
  std::vector<Pixel> out;
  for (auto p : goal.mask) {
    for (int dr = -1; dr <= 1; ++dr) {
      for (int dc = -1; dc <= 1; ++dc) {
        const Pixel q{p.row + dr, p.col + dc};
        if (!in_bounds(g, q) || !scene.map.walkable(q)) continue;
        const auto qi = linear_index(g, q);
        if (in_mask[qi] || seen[qi]) continue;
        seen[qi] = 1;
        out.push_back(q);
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline Trajectory synthesize_trajectory(const Scene& scene, WorldPoint start, const std::string& goal_object,
                                        double speed_mps = kDefaultSpeedMps) {
  if (!(speed_mps > 0.0)) throw ContractError("trajectory synthesis: speed must be positive");
  const auto* goal = scene.find(goal_object);
  if (!goal) throw GenerationError("trajectory synthesis: object '" + goal_object + "' is not in the scene");
  const auto& g = scene.geometry();
  const auto& map = scene.map;
  const Pixel raw_start = world_to_pixel(g, start);
  const Pixel start_px = nearest_walkable(map, raw_start);
  const WorldPoint origin = start_px == raw_start ? start : pixel_to_world(g, start_px);

  const auto field = geodesic_field(map, start_px);
  const auto targets = goal_approach_cells(scene, *goal);
  const Pixel* best = nullptr;
  for (const auto& t : targets) {
    if (field.reachable(t) && (!best || field.at(t) < field.at(*best))) best = &t;
  }
  if (!best) throw GenerationError("trajectory synthesis: object '" + goal_object + "' is unreachable");

  const auto cells = trace_path(field, *best);
  std::vector<WorldPoint> pts;
  pts.reserve(cells.size());
  pts.push_back(origin);
  for (std::size_t i = 1; i < cells.size(); ++i) pts.push_back(pixel_to_world(g, cells[i]));
  for (int pass = 0; pass < 3; ++pass) {
    auto prev = pts;
    for (std::size_t i = 1; i + 1 < pts.size(); ++i) {
      pts[i] = {0.5 * (prev[i - 1].x + prev[i + 1].x), 0.5 * (prev[i - 1].y + prev[i + 1].y)};
    }
  }

  std::vector<double> arc(pts.size(), 0.0);
  for (std::size_t i = 1; i < pts.size(); ++i) {
    arc[i] = arc[i - 1] + std::hypot(pts[i].x - pts[i - 1].x, pts[i].y - pts[i - 1].y);
  }
  const double length = arc.back();
  const double accel = speed_mps / kRampS;
  double duration = 0.0;
  double cruise_speed = speed_mps;
  double ramp = kRampS;
  if (length >= speed_mps * kRampS) {
    duration = length / speed_mps + kRampS;
  } else {
    ramp = std::sqrt(length / accel);
    cruise_speed = accel * ramp;
    duration = 2.0 * ramp;
  }
  auto distance_at = [&](double t) {
    if (t <= 0.0) return 0.0;
    if (t >= duration) return length;
    if (t < ramp) return 0.5 * accel * t * t;
    const double cruise_end = duration - ramp;
    if (t <= cruise_end) return 0.5 * accel * ramp * ramp + cruise_speed * (t - ramp);
    const double left = duration - t;
    return length - 0.5 * accel * left * left;
  };
  auto point_at = [&](double s) {
    auto it = std::lower_bound(arc.begin(), arc.end(), s);
    if (it == arc.begin()) return pts.front();
    if (it == arc.end()) return pts.back();
    const auto i = static_cast<std::size_t>(it - arc.begin());
    const double seg = arc[i] - arc[i - 1];
    const double u = seg > 0.0 ? (s - arc[i - 1]) / seg : 1.0;
    return WorldPoint{pts[i - 1].x + u * (pts[i].x - pts[i - 1].x), pts[i - 1].y + u * (pts[i].y - pts[i - 1].y)};
  };
  auto reproject = [&](WorldPoint p) {
    const Pixel px = world_to_pixel(g, p);
    if (map.walkable(px)) return p;
    return pixel_to_world(g, nearest_walkable(map, px));
  };

  std::vector<TrajectorySample> samples;
  const double dt = 1.0 / kSampleRateHz;
  for (int k = 0;; ++k) {
    const double t = k * dt;
    if (t > duration - 1e-9) break;
    const auto p = reproject(point_at(distance_at(t)));
    samples.push_back({t, p.x, p.y});
  }
  const auto end = reproject(pts.back());
  const double t_end = samples.empty() ? 0.0 : std::max(duration, samples.back().t + dt * 0.5);
  if (samples.empty()) samples.push_back({0.0, origin.x, origin.y});
  samples.push_back({std::max(t_end, dt), end.x, end.y});
  return Trajectory(std::move(samples));
}

struct PairBuildResult {
  std::vector<EvalPair> pairs;
  std::vector<std::string> unmatched_scenarios;  // contributed no pair
};

// Scenario-major Cartesian product, keeping pairs whose target exists in the scene.
inline PairBuildResult build_pairs(const std::vector<Scenario>& scenarios,
                                   const std::vector<std::shared_ptr<const Scene>>& scenes,
                                   double speed_mps = kDefaultSpeedMps) {
  if (scenarios.empty() || scenes.empty()) throw ContractError("build_pairs: scenarios and scenes must be non-empty");
  PairBuildResult out;
  for (const auto& s : scenarios) {
    bool any = false;
    for (const auto& scene : scenes) {
      if (!scene->find(s.gt_target_object)) continue;
      out.pairs.push_back({s, scene, synthesize_trajectory(*scene, s.start_location, s.gt_target_object, speed_mps)});
      any = true;
    }
    if (!any) out.unmatched_scenarios.push_back(s.id);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Bundled synthetic dataset: 6 scenes x 8 scenarios, 24 valid pairs. Scenario texts are
// original to this project.

inline std::vector<SceneBlueprint> bundled_blueprints() {
  const RoomPlan living_a{"living room", {"sofa", "aquarium", "armchair", "bookshelf", "coffee table"}};
  const RoomPlan living_b{"living room", {"sofa", "tv", "armchair", "aquarium", "floor lamp"}};
  const RoomPlan living_c{"living room", {"sofa", "armchair", "bookshelf", "fireplace", "aquarium"}};
  const RoomPlan kitchen_a{"kitchen", {"fridge", "kettle", "coffee maker", "sink", "stove"}};
  const RoomPlan kitchen_b{"kitchen", {"fridge", "kettle", "coffee maker", "microwave", "dining table"}};
  const RoomPlan kitchen_c{"kitchen", {"fridge", "kettle", "coffee maker", "toaster", "trash can"}};
  const RoomPlan bedroom_a{"bedroom", {"bed", "wardrobe", "nightstand", "mirror", "dresser"}};
  const RoomPlan bedroom_b{"bedroom", {"bed", "wardrobe", "laundry basket", "alarm clock", "vanity table"}};
  const RoomPlan bedroom_c{"bedroom", {"bed", "wardrobe", "alarm clock", "bench", "reading chair"}};
  const RoomPlan bathroom_a{"bathroom", {"washbasin", "toilet", "bathtub", "towel rack", "medicine cabinet"}};
  const RoomPlan bathroom_b{"bathroom", {"washbasin", "shower", "toilet", "washing machine", "hair dryer"}};
  const RoomPlan bathroom_c{"bathroom", {"washbasin", "toilet", "towel rack", "bathtub", "cabinet"}};
  const RoomPlan office_a{"office", {"desk", "printer", "computer", "filing cabinet", "bookcase"}};
  const RoomPlan office_b{"office", {"desk", "printer", "whiteboard", "office chair", "lamp"}};
  const RoomPlan office_c{"office", {"desk", "printer", "shredder", "globe", "file tray"}};
  return {
      {"house_01", {living_a, kitchen_a, bedroom_a}},  {"house_02", {living_b, kitchen_b, office_a}},
      {"house_03", {living_c, bathroom_a, bedroom_b}}, {"house_04", {living_a, kitchen_c, bathroom_b}},
      {"house_05", {living_b, office_b, bedroom_c}},   {"house_06", {living_c, bathroom_c, office_c}},
  };
}

inline std::vector<Scenario> bundled_scenarios() {
  std::vector<Scenario> s;
  s.push_back({"s01_cold_drink", "Saturday, 14:00", "Office worker in their thirties, relaxing at home",
               "just inside the front door", {1.2, 4.4}, "fridge", "take a cold bottle of juice out of the fridge",
               {"came back from a run", "left the running shoes by the door"},
               {"Partner: It is so hot today. Is there anything cold in the fridge?", "Person: I will go and check."},
               "synthetic"});
  s.push_back({"s02_tea_break", "Sunday, 16:30", "Retired teacher who enjoys tea in the afternoon",
               "just inside the front door", {1.0, 5.2}, "kettle", "boil water in the kettle to make tea",
               {"came back from a walk", "rinsed a mug at the sink"},
               {"Friend (on the phone): Are you having your usual afternoon tea?",
                "Person: Yes, let me put the kettle on before we continue."},
               "synthetic"});
  s.push_back({"s03_morning_coffee", "Monday, 07:10", "Software developer getting ready for work",
               "by the front door, about to leave", {1.4, 3.6}, "coffee maker",
               "brew a cup of coffee with the coffee maker",
               {"woke up and checked the phone", "took the milk out of the fridge"},
               {"Partner: You look sleepy. Do you want a coffee before you leave?",
                "Person: Definitely, a strong one. Did you see my keys near the toaster?"},
               "synthetic"});
  s.push_back({"s04_dress_up", "Friday, 18:45", "University student preparing to go out with friends",
               "at the entrance, back from class", {1.1, 6.0}, "wardrobe", "pick an outfit from the wardrobe",
               {"took a shower", "dried their hair with the hair dryer", "checked their look in the mirror"},
               {"Friend (text): Dinner at eight, dress nicely!",
                "Person: Okay, I need to find a jacket. Have you seen the mirror I bought?"},
               "synthetic"});
  s.push_back({"s05_wash_hands", "Wednesday, 12:20", "Parent who just came back from gardening",
               "just inside the front door", {1.3, 5.6}, "washbasin", "wash their hands at the washbasin",
               {"watered the plants outside", "put the garden tools away", "grabbed a clean towel from the towel rack"},
               {"Child: Your hands are all muddy!",
                "Person: I know, I will clean them at the washbasin before lunch. Then we can sit at the dining table."},
               "synthetic"});
  s.push_back({"s06_report_due", "Tuesday, 21:00", "Accountant working from home this week",
               "at the entrance, back from the gym", {1.0, 4.0}, "desk", "sit at the desk and finish the report",
               {"printed the draft on the printer", "had dinner at the dining table"},
               {"Colleague (call): The report is due tomorrow morning, can you finish the last section tonight?",
                "Person: Sure, I will sit down and get it done after I check the printer."},
               "synthetic"});
  s.push_back({"s07_boarding_pass", "Thursday, 06:30", "Consultant about to leave for an early flight",
               "by the front door with a suitcase", {1.5, 6.4}, "printer", "print the boarding pass on the printer",
               {"packed a suitcase", "made coffee with the coffee maker", "switched off the alarm clock"},
               {"Partner: Did you print your boarding pass?",
                "Person: Not yet, the printer should have paper. Can you grab my charger from the desk?"},
               "synthetic"});
  s.push_back({"s08_afternoon_nap", "Sunday, 13:30", "Night-shift nurse resting on a day off",
               "just inside the front door", {1.2, 3.2}, "bed", "lie down on the bed and take a nap",
               {"came home from the night shift", "set the alarm clock for three", "closed the wardrobe"},
               {"Partner: You look exhausted after last night's shift.",
                "Person: I am. I will lie down for an hour, please wake me up at three."},
               "synthetic"});
  return s;
}

struct DatasetFiles {
  std::vector<std::filesystem::path> scenes;
  std::vector<std::filesystem::path> scenarios;
  std::vector<std::filesystem::path> trajectories;
  std::filesystem::path manifest;
  std::size_t pair_count = 0;
  std::vector<std::string> unmatched_scenarios;
};

// Writes scenes/, scenarios/, trajectories/ and manifest.json under `out_dir`.
inline DatasetFiles write_dataset(const std::filesystem::path& out_dir, const std::vector<Scene>& scenes,
                                  const std::vector<Scenario>& scenarios, double speed_mps = kDefaultSpeedMps) {
  namespace fs = std::filesystem;
  std::error_code ec;
  for (const char* sub : {"scenes", "scenarios", "trajectories"}) {
    fs::create_directories(out_dir / sub, ec);
    if (ec) throw IoError("cannot create '" + (out_dir / sub).string() + "': " + ec.message());
  }
  DatasetFiles files;
  std::vector<std::shared_ptr<const Scene>> shared;
  std::map<const Scene*, std::string> scene_rel;
  for (const auto& scene : scenes) {
    const auto rel = fs::path("scenes") / (scene.name + ".json");
    save_scene(scene, out_dir / rel);
    files.scenes.push_back(out_dir / rel);
    shared.push_back(std::make_shared<const Scene>(scene));
    scene_rel[shared.back().get()] = rel.generic_string();
  }
  std::map<std::string, std::string> scenario_rel;
  for (const auto& s : scenarios) {
    const auto rel = fs::path("scenarios") / (s.id + ".json");
    save_scenario(s, out_dir / rel);
    files.scenarios.push_back(out_dir / rel);
    scenario_rel[s.id] = rel.generic_string();
  }
  const auto built = build_pairs(scenarios, shared, speed_mps);
  auto manifest = nlohmann::ordered_json::array();
  for (const auto& pair : built.pairs) {
    const auto rel = fs::path("trajectories") / (pair.scenario.id + "__" + pair.scene->name + ".csv");
    save_trajectory(pair.trajectory, out_dir / rel);
    files.trajectories.push_back(out_dir / rel);
    manifest.push_back({{"scenario", scenario_rel[pair.scenario.id]},
                        {"scene", scene_rel[pair.scene.get()]},
                        {"trajectory", rel.generic_string()}});
  }
  files.manifest = out_dir / "manifest.json";
  detail::write_text_file(files.manifest, manifest.dump(2) + "\n");
  files.pair_count = built.pairs.size();
  files.unmatched_scenarios = built.unmatched_scenarios;
  return files;
}

// Scene i uses seed * 1000 + i.
inline std::vector<Scene> bundled_scenes(std::uint64_t seed, int count = 6) {
  const auto blueprints = bundled_blueprints();
  std::vector<Scene> scenes;
  for (int i = 0; i < count; ++i) {
    auto bp = blueprints[static_cast<std::size_t>(i) % blueprints.size()];
    if (i >= static_cast<int>(blueprints.size())) bp.name += "_" + std::to_string(i / blueprints.size() + 1);
    scenes.push_back(gen_scene(seed * 1000 + static_cast<std::uint64_t>(i), bp));
  }
  return scenes;
}

// The bundled scenes and scenarios joined in memory, without touching the filesystem.
inline PairBuildResult bundled_pairs(std::uint64_t seed, double speed_mps = kDefaultSpeedMps) {
  std::vector<std::shared_ptr<const Scene>> shared;
  for (auto& s : bundled_scenes(seed)) shared.push_back(std::make_shared<const Scene>(std::move(s)));
  return build_pairs(bundled_scenarios(), shared, speed_mps);
}

}  // namespace trllm

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "support.hpp"
#include "trllm/trajectory.hpp"

using namespace trllm;
using testing_support::fixture;

namespace {

Trajectory line(std::initializer_list<std::array<double, 3>> pts) {
  std::vector<TrajectorySample> s;
  for (const auto& p : pts) s.push_back({p[0], p[1], p[2]});
  return Trajectory(std::move(s));
}

SceneMap open_map() { return SceneMap(GridGeometry{}, std::vector<std::uint8_t>(256 * 256, 1)); }

Trajectory stationary(double x, double y) {
  std::vector<TrajectorySample> s;
  for (int k = 0; k < kEpochs; ++k) s.push_back({k * 0.1, x, y});
  return Trajectory(std::move(s));
}

}  // namespace

TEST(TrajectoryType, Invariants) {
  EXPECT_THROW(line({{0, 0, 0}}), ValidationError);
  EXPECT_THROW(line({{0, 0, 0}, {0, 1, 1}}), ValidationError);
  EXPECT_THROW(line({{1, 0, 0}, {0.5, 1, 1}}), ValidationError);
  EXPECT_THROW(line({{0, 0, 0}, {1, NAN, 1}}), ValidationError);
}

TEST(Progress, Examples) {
  EXPECT_DOUBLE_EQ(progress_distance(line({{0, 0, 0}, {1, 1, 0}})), 1.0);
  EXPECT_DOUBLE_EQ(progress_distance(line({{0, 0, 0}, {1, 1, 0}, {2, 2, 0}})), 2.0);
  EXPECT_DOUBLE_EQ(progress_distance(load_trajectory(fixture("square_loop.csv"))), 4.0);
}

TEST(Progress, ConcatenationAddsGap) {
  std::mt19937 rng(9);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<TrajectorySample> a, b, ab;
    double t = 0.0;
    for (int i = 0; i < 5; ++i) a.push_back({t += 0.5, u(rng), u(rng)});
    for (int i = 0; i < 4; ++i) b.push_back({t += 0.5, u(rng), u(rng)});
    ab = a;
    ab.insert(ab.end(), b.begin(), b.end());
    const double gap = segment_length(a.back(), b.front());
    EXPECT_NEAR(progress_distance(Trajectory(ab)),
                progress_distance(Trajectory(a)) + progress_distance(Trajectory(b)) + gap, 1e-9);
  }
}

TEST(Progress, RigidMotionInvariance) {
  std::mt19937 rng(10);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<TrajectorySample> s;
    for (int i = 0; i < 8; ++i) s.push_back({i * 0.1, u(rng), u(rng)});
    const double th = u(rng), tx = u(rng), ty = u(rng);
    auto moved = s;
    for (auto& p : moved) {
      const double x = p.x * std::cos(th) - p.y * std::sin(th) + tx;
      const double y = p.x * std::sin(th) + p.y * std::cos(th) + ty;
      p.x = x;
      p.y = y;
    }
    EXPECT_NEAR(progress_distance(Trajectory(s)), progress_distance(Trajectory(moved)), 1e-9);
  }
}

TEST(Resample, MidpointInserted) {
  const auto r = resample_to_epochs(line({{0, 0, 0}, {2, 4, 2}}), 3);
  ASSERT_EQ(r.size(), 3u);
  EXPECT_EQ(r[1], (TrajectorySample{1.0, 2.0, 1.0}));
}

TEST(Resample, IdempotentOnUniformInput) {
  std::vector<TrajectorySample> s;
  for (int k = 0; k < kEpochs; ++k) s.push_back({k * 0.25, 0.1 * k, 0.05 * k * k});
  const Trajectory t(s);
  EXPECT_EQ(resample_to_epochs(t), t);
}

TEST(Resample, CollinearLengthPreserved) {
  const auto t = load_trajectory(fixture("collinear7.csv"));
  ASSERT_EQ(t.size(), 7u);
  const auto r = resample_to_epochs(t);
  ASSERT_EQ(r.size(), 90u);
  EXPECT_EQ(r.front(), t.front());
  EXPECT_EQ(r.back(), t.back());
  EXPECT_NEAR(progress_distance(r), progress_distance(t), 1e-9);
  for (std::size_t i = 1; i < r.size(); ++i) {
    EXPECT_NEAR(r[i].t - r[i - 1].t, (t.back().t - t.front().t) / 89.0, 1e-12);
  }
}

TEST(Headings, AxisAligned) {
  for (double h : headings(line({{0, 0, 0}, {1, 1, 0}, {2, 2, 0}}))) EXPECT_EQ(h, 0.0);
  for (double h : headings(line({{0, 0, 0}, {1, 0, 1}, {2, 0, 2}}))) EXPECT_DOUBLE_EQ(h, std::numbers::pi / 2);
}

TEST(Headings, SquareLoop) {
  const auto h = headings(load_trajectory(fixture("square_loop.csv")));
  ASSERT_EQ(h.size(), 5u);
  EXPECT_DOUBLE_EQ(h[0], 0.0);
  EXPECT_DOUBLE_EQ(h[1], std::numbers::pi / 2);
  EXPECT_DOUBLE_EQ(h[2], std::numbers::pi);
  EXPECT_DOUBLE_EQ(h[3], -std::numbers::pi / 2);
  EXPECT_DOUBLE_EQ(h[4], -std::numbers::pi / 2);
}

TEST(Headings, StationaryRules) {
  const auto h = headings(line({{0, 1, 1}, {1, 1, 1}, {2, 1, 2}, {3, 1, 2}, {4, 0, 2}}));
  EXPECT_EQ(h[0], 0.0);  // no motion yet
  EXPECT_DOUBLE_EQ(h[1], std::numbers::pi / 2);
  EXPECT_DOUBLE_EQ(h[2], std::numbers::pi / 2);  // stationary copies previous
  EXPECT_DOUBLE_EQ(h[3], std::numbers::pi);
  EXPECT_DOUBLE_EQ(h[4], std::numbers::pi);
}

TEST(Rasterize, LayoutAndMapChannel) {
  std::vector<std::uint8_t> cells(256 * 256, 1);
  cells[7] = 0;
  const SceneMap map(GridGeometry{}, cells);
  const auto stack = rasterize(stationary(5.0, 5.0), map);
  EXPECT_EQ(stack.channels(), 181);
  const auto c0 = stack.channel(0);
  for (int k = 1; k < kEpochs; ++k) {
    const auto ck = stack.channel(k);
    EXPECT_TRUE(std::equal(c0.begin(), c0.end(), ck.begin()));
  }
  EXPECT_EQ(c0[linear_index(map.geometry(), {127, 127})], 1.0f);
  EXPECT_EQ(stack.channel(180)[7], 0.0f);
  EXPECT_EQ(stack.channel(180)[8], 1.0f);
  for (int c = 0; c < 180; ++c) {
    for (float v : stack.channel(c)) EXPECT_GE(v, 0.0f);
  }
}

TEST(Rasterize, HeadingSplatAtLookAhead) {
  std::vector<TrajectorySample> s;
  for (int k = 0; k < kEpochs; ++k) s.push_back({k * 0.1, 2.0 + 0.02 * k, 5.0});
  const Trajectory t(s);
  const auto map = open_map();
  const auto stack = rasterize(t, map);
  const auto& g = map.geometry();
  for (int k = 0; k < kEpochs; ++k) {
    const auto expect = world_to_pixel(g, {t[k].x + 0.3, t[k].y});
    EXPECT_EQ(stack.channel(kEpochs + k)[linear_index(g, expect)], 1.0f);
  }
}

TEST(Rasterize, WrongEpochCountIsContractError) {
  EXPECT_THROW(rasterize(line({{0, 1, 1}, {1, 2, 2}}), open_map()), ContractError);
}

TEST(Rasterize, Deterministic) {
  const auto t = resample_to_epochs(load_trajectory(fixture("collinear7.csv")));
  EXPECT_EQ(rasterize(t, open_map()), rasterize(t, open_map()));
}

TEST(Rasterize, TruncatedGaussianMassBounds) {
  // Oracle: direct sum of exp(-d^2 / 2 sigma^2) over the 3-sigma disc.
  const double sigma = 3.0;
  double oracle = 0.0;
  for (int dr = -20; dr <= 20; ++dr) {
    for (int dc = -20; dc <= 20; ++dc) {
      const double d2 = dr * dr + dc * dc;
      if (d2 <= 9.0 * sigma * sigma) oracle += std::exp(-d2 / (2.0 * sigma * sigma));
    }
  }
  const auto stack = rasterize(stationary(5.0, 5.0), open_map(), sigma);
  double mass = 0.0;
  for (float v : stack.channel(0)) mass += v;
  EXPECT_NEAR(mass, oracle, 1e-4);
  const double continuous = 2.0 * std::numbers::pi * sigma * sigma;
  EXPECT_GE(mass, continuous * 0.95);
  EXPECT_LE(mass, continuous * 1.01);
}

TEST(Rasterize, ArgmaxAtSamplePixelFuzz) {
  std::mt19937 rng(1234);
  std::uniform_real_distribution<double> u(-0.5, 10.5);
  const GridGeometry g;
  std::vector<float> channel(g.cell_count());
  for (int i = 0; i < 10000; ++i) {
    const WorldPoint p{u(rng), u(rng)};
    const auto px = world_to_pixel(g, p);
    std::fill(channel.begin(), channel.end(), 0.0f);
    splat_gaussian(channel, g, px, kDefaultSigmaPx);
    const auto best = std::max_element(channel.begin(), channel.end()) - channel.begin();
    ASSERT_EQ(pixel_at(g, static_cast<std::size_t>(best)), px);
    ASSERT_EQ(channel[static_cast<std::size_t>(best)], 1.0f);
  }
}

TEST(Csv, RoundTripAndTolerance) {
  const auto t = load_trajectory(fixture("collinear7.csv"));
  std::istringstream in(format_trajectory_csv(t));
  EXPECT_EQ(parse_trajectory_csv(in), t);

  std::istringstream crlf("\xEF\xBB\xBFt,x,y\r\n0,1,2\r\n0.5,1.5,2.5\r\n");
  const auto c = parse_trajectory_csv(crlf);
  EXPECT_EQ(c.size(), 2u);
  EXPECT_EQ(c[1], (TrajectorySample{0.5, 1.5, 2.5}));
}

TEST(Csv, Errors) {
  std::istringstream bad_header("time,x,y\n0,0,0\n1,1,1\n");
  EXPECT_THROW(parse_trajectory_csv(bad_header), ParseError);
  std::istringstream bad_number("t,x,y\n0,0,zero\n1,1,1\n");
  EXPECT_THROW(parse_trajectory_csv(bad_number), ParseError);
  std::istringstream one("t,x,y\n0,0,0\n");
  EXPECT_THROW(parse_trajectory_csv(one), ValidationError);
  EXPECT_THROW(load_trajectory(fixture("missing.csv")), IoError);
}

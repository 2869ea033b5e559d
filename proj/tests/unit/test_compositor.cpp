#include <gtest/gtest.h>

#include <cmath>

#include "morphfit/compositor.hpp"
#include "morphfit/error.hpp"
#include "morphfit/synthkit.hpp"
#include "test_support.hpp"

namespace morphfit {
namespace {

// Sliding-window maximum: pixel p is set when any mask pixel lies in p + [-k/2, k-1-k/2]^2.
Mask dilate_oracle(const Mask& m, int k) {
  Mask out(m.width(), m.height());
  const int lo = -(k / 2);
  const int hi = k - 1 - k / 2;
  for (int y = 0; y < m.height(); ++y) {
    for (int x = 0; x < m.width(); ++x) {
      bool any = false;
      for (int dy = lo; dy <= hi && !any; ++dy)
        for (int dx = lo; dx <= hi && !any; ++dx) any = m.test(x + dx, y + dy);
      out.at(x, y) = any ? 1 : 0;
    }
  }
  return out;
}

Mask random_mask(Rng& rng, int w, int h, double density) {
  Mask m(w, h);
  for (auto& v : m.data()) v = rng.uniform() < density ? 1 : 0;
  return m;
}

TEST(Dilation, MatchesSlidingWindowOracleBitExactly) {
  Rng rng(12);
  for (int k : {12, 1, 2, 3, 5, 12}) {
    for (double density : {0.001, 0.01, 0.2}) {
      const Mask m = random_mask(rng, 73, 51, density);
      EXPECT_EQ(dilate(m, k), dilate_oracle(m, k)) << "kernel " << k << " density " << density;
    }
  }
  EXPECT_THROW(dilate(Mask(4, 4), 0), Error);
}

TEST(Dilation, SinglePixelGrowsIntoAnchoredSquare) {
  Mask m(40, 40);
  m.at(20, 20) = 1;
  const Mask d = dilate(m, 12);
  EXPECT_EQ(d.count(), 144u);
  // The square spans 20 - (k-1-k/2) .. 20 + k/2 = 15 .. 26.
  EXPECT_TRUE(d.test(15, 15));
  EXPECT_TRUE(d.test(26, 26));
  EXPECT_FALSE(d.test(14, 20));
  EXPECT_FALSE(d.test(27, 20));
  const Mask ring = margin(m, 12);
  EXPECT_EQ(ring.count(), 143u);
  EXPECT_FALSE(ring.test(20, 20));
}

TEST(BlendAlpha, DefaultsMatchTheGaussianFalloff) {
  EXPECT_EQ(blend_alpha(0.0), 1.0);
  EXPECT_NEAR(blend_alpha(2.0), std::exp(-1.0), 1e-15);
  double prev = 1.0;
  for (double d = 0.05; d < 10.0; d += 0.05) {
    const double a = blend_alpha(d);
    EXPECT_LT(a, prev);
    EXPECT_GE(a, 0.0);
    prev = a;
  }
  BlendConfig wide;
  wide.sigma2 = 9.0;
  EXPECT_NEAR(blend_alpha(3.0, wide), std::exp(-1.0), 1e-15);
  wide.sigma2 = 0.0;
  EXPECT_THROW(validate(wide), Error);
}

struct BlendCase {
  Image rendered{48, 40, 3};
  Image input{48, 40, 3};
  Mask coverage{48, 40};
  Image distance{48, 40, 1};
};

BlendCase make_case(std::uint64_t seed) {
  Rng rng(seed);
  BlendCase c;
  for (auto& v : c.rendered.data()) v = rng.uniform();
  for (auto& v : c.input.data()) v = rng.uniform();
  for (int y = 12; y < 28; ++y)
    for (int x = 15; x < 30; ++x) {
      c.coverage.at(x, y) = 1;
      c.distance.at(x, y, 0) = rng.uniform(0.0, 4.0);
    }
  return c;
}

TEST(Blend, OutsideDilatedMaskIsUntouched) {
  const BlendCase c = make_case(1);
  const Image out = blend(c.rendered, c.input, c.coverage, c.distance);
  const Mask grown = dilate(c.coverage, 12);
  int untouched = 0;
  for (int y = 0; y < 40; ++y)
    for (int x = 0; x < 48; ++x) {
      if (grown.at(x, y)) continue;
      for (int ch = 0; ch < 3; ++ch) ASSERT_EQ(out.at(x, y, ch), c.input.at(x, y, ch));
      ++untouched;
    }
  EXPECT_GT(untouched, 0);
}

TEST(Blend, CoverageFollowsAlphaInBothOrientations) {
  const BlendCase c = make_case(2);
  const Image out = blend(c.rendered, c.input, c.coverage, c.distance);
  BlendConfig flipped;
  flipped.alpha_weights_input = false;
  const Image out_flipped = blend(c.rendered, c.input, c.coverage, c.distance, flipped);
  for (int y = 12; y < 28; ++y)
    for (int x = 15; x < 30; ++x) {
      const double a = blend_alpha(c.distance.at(x, y, 0));
      for (int ch = 0; ch < 3; ++ch) {
        EXPECT_NEAR(out.at(x, y, ch), a * c.input.at(x, y, ch) + (1 - a) * c.rendered.at(x, y, ch), 1e-14);
        EXPECT_NEAR(out_flipped.at(x, y, ch), a * c.rendered.at(x, y, ch) + (1 - a) * c.input.at(x, y, ch), 1e-14);
      }
    }
}

TEST(Blend, ZeroDistanceKeepsInputEverywhere) {
  BlendCase c = make_case(3);
  c.distance = Image(48, 40, 1, 0.0);
  const Image out = blend(c.rendered, c.input, c.coverage, c.distance);
  for (std::size_t i = 0; i < out.data().size(); ++i) EXPECT_NEAR(out.data()[i], c.input.data()[i], 1e-15);
}

TEST(Blend, MarginFeathersBetweenBlendAndInput) {
  BlendCase c = make_case(4);
  c.rendered = Image(48, 40, 3, 1.0);
  c.input = Image(48, 40, 3, 0.0);
  c.distance = Image(48, 40, 1, 100.0);  // alpha ~ 0: covered pixels take the render
  const Image out = blend(c.rendered, c.input, c.coverage, c.distance);
  // Moving away from the covered block along a row, the feather decays monotonically.
  double prev = out.at(29, 20, 0);
  EXPECT_NEAR(prev, 1.0, 1e-12);
  for (int x = 30; x < 48; ++x) {
    const double v = out.at(x, 20, 0);
    EXPECT_LE(v, prev);
    EXPECT_GE(v, 0.0);
    prev = v;
  }
  EXPECT_GT(out.at(30, 20, 0), 0.0);
  EXPECT_LT(out.at(30, 20, 0), 1.0);
}

TEST(Blend, SizeMismatchFails) {
  const BlendCase c = make_case(5);
  EXPECT_THROW(blend(c.rendered, Image(10, 10, 3), c.coverage, c.distance), Error);
}

TEST(DistancePlane, UnchangedShapeGivesZeroDistance) {
  const auto& kit = testing::default_kit();
  const Scene scene = sample_scene(kit, 3);
  const DistancePlane same = vertex_distance_plane(kit.model, scene.shape, scene.shape, scene.pose, 128, 128);
  EXPECT_GT(same.coverage.count(), 500u);
  for (double v : same.distance.data()) EXPECT_EQ(v, 0.0);

  Shape moved = scene.shape;
  for (Index v = 0; v < moved.vertex_count(); ++v) moved.set_vertex(v, moved.vertex(v) + Eigen::Vector3d(0.0, 0.0, 1.5));
  const DistancePlane shifted = vertex_distance_plane(kit.model, scene.shape, moved, scene.pose, 128, 128);
  for (int y = 0; y < 128; ++y)
    for (int x = 0; x < 128; ++x) {
      if (!shifted.coverage.at(x, y)) continue;
      EXPECT_NEAR(shifted.distance.at(x, y, 0), 1.5, 1e-12);
    }
}

}  // namespace
}  // namespace morphfit

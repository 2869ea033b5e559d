#include <gtest/gtest.h>

#include "morphfit/error.hpp"
#include "morphfit/ganmath.hpp"
#include "test_support.hpp"

namespace morphfit {
namespace {

Eigen::ArrayXd random_map(Rng& rng, Index n) {
  Eigen::ArrayXd a(n);
  for (Index i = 0; i < n; ++i) a[i] = rng.uniform(-0.5, 1.5);
  return a;
}

double sq_to_one(const Eigen::ArrayXd& x) {
  double s = 0.0;
  for (Index i = 0; i < x.size(); ++i) s += (x[i] - 1.0) * (x[i] - 1.0);
  return s;
}

double sq(const Eigen::ArrayXd& x) {
  double s = 0.0;
  for (Index i = 0; i < x.size(); ++i) s += x[i] * x[i];
  return s;
}

TEST(GanLosses, MatchHandExpandedFormulas) {
  Rng rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    const Index n = trial % 3 == 0 ? 1 : 1 + static_cast<Index>(rng.below(64));
    DiscriminatorOutputs d;
    d.real_on_real = random_map(rng, n);
    d.real_on_fake = random_map(rng, n);
    d.pair_matched_real = random_map(rng, n);
    d.pair_matched_fake = random_map(rng, n);
    d.pair_mismatched_real = random_map(rng, n);
    d.iden_real_real = random_map(rng, n);
    d.iden_real_fake = random_map(rng, n);
    d.iden_real_other = random_map(rng, n);
    EXPECT_NO_THROW(validate(d));

    const double real = sq_to_one(d.real_on_real) + sq(d.real_on_fake);
    const double pair = 2.0 * sq_to_one(d.pair_matched_real) + sq(d.pair_matched_fake) + sq(d.pair_mismatched_real);
    const double iden = 2.0 * sq_to_one(d.iden_real_real) + sq(d.iden_real_fake) + sq(d.iden_real_other);
    EXPECT_LE(testing::relative_error(loss_real(d), real), 1e-12);
    EXPECT_LE(testing::relative_error(loss_pair(d), pair), 1e-12);
    EXPECT_LE(testing::relative_error(loss_iden(d), iden), 1e-12);
    EXPECT_LE(testing::relative_error(loss_gan(d), real + pair + iden), 1e-12);
  }
}

TEST(GanLosses, PerfectDiscriminatorScoresZero) {
  for (Index n : {1, 16}) {
    DiscriminatorOutputs d;
    const Eigen::ArrayXd ones = Eigen::ArrayXd::Ones(n);
    const Eigen::ArrayXd zeros = Eigen::ArrayXd::Zero(n);
    d.real_on_real = ones;
    d.real_on_fake = zeros;
    d.pair_matched_real = ones;
    d.pair_matched_fake = zeros;
    d.pair_mismatched_real = zeros;
    d.iden_real_real = ones;
    d.iden_real_fake = zeros;
    d.iden_real_other = zeros;
    EXPECT_EQ(loss_real(d), 0.0);
    EXPECT_EQ(loss_pair(d), 0.0);
    EXPECT_EQ(loss_iden(d), 0.0);
    EXPECT_EQ(loss_gan(d), 0.0);
  }
}

TEST(GanLosses, ValidationRejectsBadMaps) {
  DiscriminatorOutputs d;
  d.real_on_real = Eigen::ArrayXd::Ones(4);
  d.real_on_fake = Eigen::ArrayXd::Ones(5);
  try {
    validate(d);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSizing);
  }
  d.real_on_fake = Eigen::ArrayXd::Constant(4, std::numeric_limits<double>::infinity());
  try {
    validate(d);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvalidArgument);
  }
}

TEST(GeneratorObjective, DefaultWeights) {
  EXPECT_EQ(generator_objective(1.0, 1.0, 1.0), 21.0);
  EXPECT_EQ(generator_objective(2.0, 0.0, 0.0), 2.0);
  EXPECT_EQ(generator_objective(0.0, 0.5, 0.25, {4.0, 8.0}), 4.0);
  EXPECT_THROW(generator_objective(0.0, 1.0, 1.0, {-1.0, 1.0}), Error);
}

TEST(L1Loss, AveragesOverMaskedChannels) {
  Image a(3, 2, 2, 0.0), b(3, 2, 2, 0.0);
  b.at(0, 0, 0) = 1.0;
  b.at(0, 0, 1) = 3.0;
  b.at(2, 1, 1) = 100.0;  // outside the mask
  Mask m(3, 2);
  m.at(0, 0) = 1;
  m.at(1, 0) = 1;
  EXPECT_DOUBLE_EQ(l1_loss(a, b, m), 4.0 / 4.0);
  EXPECT_THROW(l1_loss(a, b, Mask(3, 2)), Error);
  EXPECT_THROW(l1_loss(a, Image(2, 2, 2), m), Error);
}

TEST(AttentionCompose, EndpointsAndInterpolation) {
  Image source(2, 1, 3, 0.8), color(2, 1, 3, 0.2), att(2, 1, 3, 1.0);
  EXPECT_EQ(attention_compose(att, color, source).image, source);
  EXPECT_EQ(attention_compose(att, color, source, AttentionOrientation::kColor).image, color);
  att = Image(2, 1, 3, 0.0);
  EXPECT_EQ(attention_compose(att, color, source).image, color);
  att = Image(2, 1, 3, 0.25);
  const auto mid = attention_compose(att, color, source);
  EXPECT_NEAR(mid.image.at(1, 0, 2), 0.25 * 0.8 + 0.75 * 0.2, 1e-15);
  const auto flipped = attention_compose(att, color, source, AttentionOrientation::kColor);
  EXPECT_NEAR(flipped.image.at(1, 0, 2), 0.25 * 0.2 + 0.75 * 0.8, 1e-15);
  EXPECT_EQ(mid.clamped, 0);
}

TEST(AttentionCompose, ClampsAndCounts) {
  Image source(2, 2, 1, 1.0), color(2, 2, 1, 0.0), att(2, 2, 1, 0.5);
  att.at(0, 0, 0) = 1.7;
  att.at(1, 1, 0) = -0.3;
  const auto r = attention_compose(att, color, source);
  EXPECT_EQ(r.clamped, 2);
  EXPECT_EQ(r.image.at(0, 0, 0), 1.0);
  EXPECT_EQ(r.image.at(1, 1, 0), 0.0);
  EXPECT_THROW(attention_compose(Image(2, 2, 3), color, source), Error);
}

}  // namespace
}  // namespace morphfit

#pragma once

#include <Eigen/Core>

#include "morphfit/image.hpp"

namespace morphfit {

/// Discriminator responses, each a scalar (size 1) or a flattened patch map. Naming follows
/// <discriminator>_<input pair>.
struct DiscriminatorOutputs {
  Eigen::ArrayXd real_on_real;
  Eigen::ArrayXd real_on_fake;
  Eigen::ArrayXd pair_matched_real;
  Eigen::ArrayXd pair_matched_fake;
  Eigen::ArrayXd pair_mismatched_real;
  Eigen::ArrayXd iden_real_real;
  Eigen::ArrayXd iden_real_fake;
  Eigen::ArrayXd iden_real_other;
};

/// Throws kInvalidArgument on non-finite values and kSizing when patch maps differ in size.
void validate(const DiscriminatorOutputs& out);

/// sum (x - 1)^2
double lbar2(const Eigen::ArrayXd& x);
/// sum x^2
double l2(const Eigen::ArrayXd& x);

double loss_real(const DiscriminatorOutputs& out);
/// The matched-real term is doubled, balancing the two negative terms.
double loss_pair(const DiscriminatorOutputs& out);
double loss_iden(const DiscriminatorOutputs& out);
double loss_gan(const DiscriminatorOutputs& out);

struct LossWeights {
  double l1 = 10.0;
  double perceptual = 10.0;
};

double generator_objective(double gan, double l1, double perceptual, const LossWeights& weights = {});

/// Mean absolute difference over all channels of the masked pixels. Throws on an empty mask.
double l1_loss(const Image& a, const Image& b, const Mask& mask);

struct ComposeResult {
  Image image;
  long clamped = 0;  // attention values moved into [0, 1]
};

/// Which input the attention map weights.
enum class AttentionOrientation { kSource, kColor };

/// kSource: out = A * source + (1 - A) * color per channel, with A clamped to [0, 1].
/// kColor swaps the roles of source and color.
ComposeResult attention_compose(const Image& attention, const Image& color, const Image& source,
                                AttentionOrientation orientation = AttentionOrientation::kSource);

}  // namespace morphfit

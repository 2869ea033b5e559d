#include "morphfit/ganmath.hpp"

#include <algorithm>
#include <cmath>

#include "morphfit/error.hpp"

namespace morphfit {

void validate(const DiscriminatorOutputs& out) {
  const Eigen::ArrayXd* fields[] = {&out.real_on_real,      &out.real_on_fake,
                                    &out.pair_matched_real, &out.pair_matched_fake,
                                    &out.pair_mismatched_real, &out.iden_real_real,
                                    &out.iden_real_fake,    &out.iden_real_other};
  Eigen::Index map_size = -1;
  for (const auto* f : fields) {
    if (!f->allFinite()) fail(ErrorCode::kInvalidArgument, "discriminator outputs must be finite");
    if (f->size() > 1) {
      if (map_size >= 0 && map_size != f->size()) {
        fail(ErrorCode::kSizing, "discriminator patch maps differ in size");
      }
      map_size = f->size();
    }
  }
}

double lbar2(const Eigen::ArrayXd& x) { return (x - 1.0).square().sum(); }

double l2(const Eigen::ArrayXd& x) { return x.square().sum(); }

double loss_real(const DiscriminatorOutputs& out) {
  return lbar2(out.real_on_real) + l2(out.real_on_fake);
}

double loss_pair(const DiscriminatorOutputs& out) {
  return 2.0 * lbar2(out.pair_matched_real) + l2(out.pair_matched_fake) +
         l2(out.pair_mismatched_real);
}

double loss_iden(const DiscriminatorOutputs& out) {
  return 2.0 * lbar2(out.iden_real_real) + l2(out.iden_real_fake) + l2(out.iden_real_other);
}

double loss_gan(const DiscriminatorOutputs& out) {
  return loss_real(out) + loss_pair(out) + loss_iden(out);
}

double generator_objective(double gan, double l1, double perceptual, const LossWeights& weights) {
  if (weights.l1 < 0.0 || weights.perceptual < 0.0) {
    fail(ErrorCode::kInvalidArgument, "loss weights must be non-negative");
  }
  return gan + weights.l1 * l1 + weights.perceptual * perceptual;
}

double l1_loss(const Image& a, const Image& b, const Mask& mask) {
  if (!a.same_size(b) || a.channels() != b.channels() || mask.width() != a.width() ||
      mask.height() != a.height()) {
    fail(ErrorCode::kSizing, "l1_loss inputs differ in size");
  }
  double sum = 0.0;
  std::size_t count = 0;
  for (int y = 0; y < a.height(); ++y) {
    for (int x = 0; x < a.width(); ++x) {
      if (!mask.at(x, y)) continue;
      for (int c = 0; c < a.channels(); ++c) sum += std::abs(a.at(x, y, c) - b.at(x, y, c));
      count += static_cast<std::size_t>(a.channels());
    }
  }
  if (count == 0) fail(ErrorCode::kInvalidArgument, "l1_loss mask selects no pixels");
  return sum / static_cast<double>(count);
}

ComposeResult attention_compose(const Image& attention, const Image& color, const Image& source,
                                AttentionOrientation orientation) {
  if (!attention.same_size(color) || !attention.same_size(source) ||
      attention.channels() != color.channels() || attention.channels() != source.channels()) {
    fail(ErrorCode::kSizing, "attention, color and source must have identical shapes");
  }
  ComposeResult result{Image(source.width(), source.height(), source.channels()), 0};
  const auto a = attention.data();
  const bool source_weighted = orientation == AttentionOrientation::kSource;
  const auto col = source_weighted ? color.data() : source.data();
  const auto src = source_weighted ? source.data() : color.data();
  auto out = result.image.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double w = std::clamp(a[i], 0.0, 1.0);
    if (w != a[i]) ++result.clamped;
    out[i] = w * src[i] + (1.0 - w) * col[i];
  }
  return result;
}

}  // namespace morphfit

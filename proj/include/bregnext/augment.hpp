#pragma once

#include <array>
#include <span>

#include "bregnext/random.hpp"
#include "bregnext/tensor.hpp"

namespace bnx {

/// With probability `probability` an image goes through the whole chain:
/// flip (p = 0.5), hue shift, saturation scale, brightness shift, contrast
/// scale and a centre zoom resampled back to the original size.
struct AugmentConfig {
  double probability = 0.25;
  bool flip = true;
  double hue_delta = 0.08;  // fraction of the hue circle
  std::array<double, 2> saturation{0.8, 1.2};
  double brightness_delta = 0.1;
  std::array<double, 2> contrast{0.8, 1.2};
  std::array<double, 2> zoom{1.0, 1.15};

  void validate() const;
  static AugmentConfig disabled() {
    AugmentConfig c;
    c.probability = 0.0;
    return c;
  }
};

/// image is (H,W,3) in [0,1]; output is clipped to [0,1].
Tensor augment(const Tensor& image, const AugmentConfig& cfg, Rng& rng);

Tensor horizontal_flip(const Tensor& image);
Tensor adjust_hue(const Tensor& image, double delta);
Tensor adjust_saturation(const Tensor& image, double factor);
Tensor adjust_brightness(const Tensor& image, double delta);
/// Per-channel (x - mean) * factor + mean.
Tensor adjust_contrast(const Tensor& image, double factor);
/// Crops the central 1/factor region and resizes it back.
Tensor zoom_center(const Tensor& image, double factor);

/// Subtracts channel means from the last axis of any tensor.
void zero_center(Tensor& batch, std::span<const double> means);

}  // namespace bnx

#include "bregnext/augment.hpp"

#include <algorithm>
#include <cmath>

#include "bregnext/data.hpp"
#include "bregnext/error.hpp"

namespace bnx {
namespace {

void require_image(const Tensor& image) {
  if (image.rank() != 3 || image.dim(2) != 3)
    throw ShapeError("augment", "expected (H,W,3), got " + shape_str(image.shape()));
}

void clip(Tensor& t) {
  for (auto& v : t.data()) v = std::clamp(v, 0.0f, 1.0f);
}

std::array<double, 3> rgb_to_hsv(double r, double g, double b) {
  const double mx = std::max({r, g, b}), mn = std::min({r, g, b});
  const double d = mx - mn;
  double h = 0.0;
  if (d > 0.0) {
    if (mx == r) h = std::fmod((g - b) / d, 6.0);
    else if (mx == g) h = (b - r) / d + 2.0;
    else h = (r - g) / d + 4.0;
    h /= 6.0;
    if (h < 0.0) h += 1.0;
  }
  return {h, mx > 0.0 ? d / mx : 0.0, mx};
}

std::array<double, 3> hsv_to_rgb(double h, double s, double v) {
  h = h - std::floor(h);
  const double hh = h * 6.0;
  const int sector = std::min(5, static_cast<int>(hh));
  const double f = hh - sector;
  const double p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
  switch (sector) {
    case 0: return {v, t, p};
    case 1: return {q, v, p};
    case 2: return {p, v, t};
    case 3: return {p, q, v};
    case 4: return {t, p, v};
    default: return {v, p, q};
  }
}

template <typename F>
Tensor map_hsv(const Tensor& image, F&& f) {
  require_image(image);
  Tensor out(image.shape());
  for (std::size_t i = 0; i < image.size(); i += 3) {
    auto hsv = rgb_to_hsv(image[i], image[i + 1], image[i + 2]);
    f(hsv);
    const auto rgb = hsv_to_rgb(hsv[0], std::clamp(hsv[1], 0.0, 1.0), hsv[2]);
    for (std::size_t c = 0; c < 3; ++c) out[i + c] = static_cast<float>(rgb[c]);
  }
  return out;
}

}  // namespace

void AugmentConfig::validate() const {
  if (!(probability >= 0.0 && probability <= 1.0)) throw ConfigError("augmentation probability must lie in [0,1]");
  if (hue_delta < 0.0 || brightness_delta < 0.0) throw ConfigError("augmentation deltas must be non-negative");
  if (saturation[0] > saturation[1] || contrast[0] > contrast[1] || zoom[0] > zoom[1])
    throw ConfigError("augmentation ranges must be ordered");
  if (!(zoom[0] >= 1.0)) throw ConfigError("zoom factors must be >= 1");
}

Tensor horizontal_flip(const Tensor& image) {
  require_image(image);
  const std::size_t h = image.dim(0), w = image.dim(1), c = image.dim(2);
  Tensor out(image.shape());
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t k = 0; k < c; ++k) out[(y * w + x) * c + k] = image[(y * w + (w - 1 - x)) * c + k];
  return out;
}

Tensor adjust_hue(const Tensor& image, double delta) {
  return map_hsv(image, [delta](std::array<double, 3>& hsv) { hsv[0] += delta; });
}

Tensor adjust_saturation(const Tensor& image, double factor) {
  return map_hsv(image, [factor](std::array<double, 3>& hsv) { hsv[1] *= factor; });
}

Tensor adjust_brightness(const Tensor& image, double delta) {
  require_image(image);
  Tensor out = image;
  for (auto& v : out.data()) v = static_cast<float>(v + delta);
  clip(out);
  return out;
}

Tensor adjust_contrast(const Tensor& image, double factor) {
  require_image(image);
  const std::size_t pixels = image.dim(0) * image.dim(1);
  std::array<double, 3> mean{0, 0, 0};
  for (std::size_t i = 0; i < image.size(); ++i) mean[i % 3] += image[i];
  for (auto& m : mean) m /= static_cast<double>(pixels);
  Tensor out(image.shape());
  for (std::size_t i = 0; i < image.size(); ++i)
    out[i] = static_cast<float>((image[i] - mean[i % 3]) * factor + mean[i % 3]);
  clip(out);
  return out;
}

Tensor zoom_center(const Tensor& image, double factor) {
  require_image(image);
  if (!(factor >= 1.0)) throw ConfigError("zoom factor must be >= 1");
  const std::size_t h = image.dim(0), w = image.dim(1);
  const auto ch = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(h / factor)));
  const auto cw = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(w / factor)));
  if (ch == h && cw == w) return image;
  const std::size_t top = (h - ch) / 2, left = (w - cw) / 2;
  std::vector<float> crop(ch * cw * 3);
  for (std::size_t y = 0; y < ch; ++y)
    for (std::size_t x = 0; x < cw; ++x)
      for (std::size_t k = 0; k < 3; ++k) crop[(y * cw + x) * 3 + k] = image[((top + y) * w + left + x) * 3 + k];
  return Tensor(image.shape(), resize_bilinear(crop, ch, cw, 3, h, w));
}

Tensor augment(const Tensor& image, const AugmentConfig& cfg, Rng& rng) {
  require_image(image);
  if (cfg.probability <= 0.0 || !rng.bernoulli(cfg.probability)) return image;
  Tensor out = image;
  if (cfg.flip && rng.bernoulli(0.5)) out = horizontal_flip(out);
  out = adjust_hue(out, rng.uniform(-cfg.hue_delta, cfg.hue_delta));
  out = adjust_saturation(out, rng.uniform(cfg.saturation[0], cfg.saturation[1]));
  out = adjust_brightness(out, rng.uniform(-cfg.brightness_delta, cfg.brightness_delta));
  out = adjust_contrast(out, rng.uniform(cfg.contrast[0], cfg.contrast[1]));
  out = zoom_center(out, rng.uniform(cfg.zoom[0], cfg.zoom[1]));
  clip(out);
  return out;
}

void zero_center(Tensor& batch, std::span<const double> means) {
  if (batch.rank() == 0 || batch.shape().back() != means.size())
    throw ShapeError("zero_center", "last axis of " + shape_str(batch.shape()) + " vs " +
                                        std::to_string(means.size()) + " means");
  const std::size_t c = means.size();
  float* p = batch.raw();
  for (std::size_t i = 0; i < batch.size(); ++i) p[i] = static_cast<float>(p[i] - means[i % c]);
}

}  // namespace bnx

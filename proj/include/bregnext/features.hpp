#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "bregnext/network.hpp"

namespace bnx {

/// 8-bit grayscale PNG.
void write_png_gray(const std::filesystem::path& path, std::span<const std::uint8_t> pixels, std::size_t width,
                    std::size_t height);

/// Channel grid of one (H,W,C) activation: ceil(sqrt(C)) columns, each map
/// min-max scaled to 0..255 on its own (constant maps become 128).
struct FeatureGrid {
  std::size_t width = 0, height = 0, columns = 0, rows = 0;
  std::vector<std::uint8_t> pixels;
};
FeatureGrid feature_grid(const Tensor& activation);

/// Depth d selects the d-th weight layer in network order: 1 is the stem,
/// 2k and 2k+1 are the convolutions of unit k, and the final depth
/// (weight_layers()) is the last unit output feeding the classifier.
NodeId feature_node(const Model& model, std::size_t depth);

/// Runs `image` (H,W,3 in [0,1], zero-centred here) through the model and
/// writes depth_<d>.png per selector. Unknown depths throw ConfigError before
/// anything is written.
std::vector<std::filesystem::path> dump_feature_maps(Model& model, const Tensor& image,
                                                     std::span<const std::size_t> depths,
                                                     const std::filesystem::path& out_dir, Mode mode = Mode::Infer);

}  // namespace bnx

#include "bregnext/features.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

#include "bregnext/augment.hpp"
#include "bregnext/error.hpp"

namespace bnx {

void write_png_gray(const std::filesystem::path& path, std::span<const std::uint8_t> pixels, std::size_t width,
                    std::size_t height) {
  if (pixels.size() != width * height || width == 0 || height == 0)
    throw DataError("png: " + std::to_string(pixels.size()) + " pixels for " + std::to_string(width) + "x" +
                    std::to_string(height));
  std::unique_ptr<FILE, int (*)(FILE*)> file(std::fopen(path.c_str(), "wb"), &std::fclose);
  if (!file) throw DataError("cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw DataError("png: out of memory");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw DataError("png: write failed for " + path.string());
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (std::size_t y = 0; y < height; ++y)
    png_write_row(png, const_cast<png_bytep>(pixels.data() + y * width));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

FeatureGrid feature_grid(const Tensor& activation) {
  if (activation.rank() != 3) throw ShapeError("feature_grid", "expected (H,W,C), got " + shape_str(activation.shape()));
  const std::size_t h = activation.dim(0), w = activation.dim(1), c = activation.dim(2);
  FeatureGrid g;
  g.columns = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(c))));
  g.rows = (c + g.columns - 1) / g.columns;
  g.width = g.columns * w;
  g.height = g.rows * h;
  g.pixels.assign(g.width * g.height, 0);
  for (std::size_t k = 0; k < c; ++k) {
    float lo = activation[k], hi = activation[k];
    for (std::size_t i = 0; i < h * w; ++i) {
      lo = std::min(lo, activation[i * c + k]);
      hi = std::max(hi, activation[i * c + k]);
    }
    const std::size_t oy = (k / g.columns) * h, ox = (k % g.columns) * w;
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        const float v = activation[(y * w + x) * c + k];
        const double scaled = hi > lo ? 255.0 * (static_cast<double>(v) - lo) / (static_cast<double>(hi) - lo) : 128.0;
        g.pixels[(oy + y) * g.width + ox + x] = static_cast<std::uint8_t>(std::lround(std::clamp(scaled, 0.0, 255.0)));
      }
  }
  return g;
}

NodeId feature_node(const Model& model, std::size_t depth) {
  if (depth >= 1 && depth <= model.conv_outputs.size()) return model.conv_outputs[depth - 1];
  if (depth == model.config.weight_layers()) return model.features;
  throw ConfigError("unknown feature depth " + std::to_string(depth) + " (1.." +
                    std::to_string(model.conv_outputs.size()) + " or " + std::to_string(model.config.weight_layers()) +
                    ")");
}

std::vector<std::filesystem::path> dump_feature_maps(Model& model, const Tensor& image,
                                                     std::span<const std::size_t> depths,
                                                     const std::filesystem::path& out_dir, Mode mode) {
  std::vector<NodeId> nodes;
  for (auto d : depths) nodes.push_back(feature_node(model, d));
  std::vector<std::filesystem::path> written;
  if (nodes.empty()) return written;
  if (image.rank() != 3 || image.dim(2) != model.config.input_channels)
    throw ShapeError("input", "expected (H,W," + std::to_string(model.config.input_channels) + "), got " +
                                  shape_str(image.shape()));

  Tensor batch = image;
  batch.reshape(Shape{1, image.dim(0), image.dim(1), image.dim(2)});
  const auto& means = model.params[model.channel_means].value;
  zero_center(batch, std::vector<double>(means.data().begin(), means.data().end()));
  Feeds<float> feeds{{"input", batch}};
  const auto values = model.graph.run(model.params, feeds, nodes, mode);

  std::filesystem::create_directories(out_dir);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    Tensor act = values[i];
    act.reshape(Shape{act.dim(1), act.dim(2), act.dim(3)});
    const auto grid = feature_grid(act);
    const auto path = out_dir / ("depth_" + std::to_string(depths[i]) + ".png");
    write_png_gray(path, grid.pixels, grid.width, grid.height);
    written.push_back(path);
  }
  return written;
}

}  // namespace bnx

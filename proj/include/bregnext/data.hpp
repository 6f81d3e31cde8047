#pragma once

// Datasets of 64x64x3 images stored as 8-bit pixels, plus the FER2013 CSV
// reader, the synthetic blob generator and dataset statistics.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "bregnext/tensor.hpp"

namespace bnx {

inline constexpr std::size_t kImageSide = 64;
inline constexpr std::size_t kImageChannels = 3;
inline constexpr std::size_t kImageValues = kImageSide * kImageSide * kImageChannels;

enum class Split { Train, Validation, Test };

const char* split_name(Split split);
/// Accepts train/validation/test and the FER2013 Usage values.
Split split_from_name(const std::string& name);

struct Sample {
  std::vector<std::uint8_t> pixels;  // HWC, kImageValues bytes
  int label = -1;                    // class index, or -1 when absent
  std::array<float, 2> valence_arousal{0.0f, 0.0f};
  Split split = Split::Train;

  /// (64,64,3) in [0,1].
  Tensor image() const;
  void write_image(float* dst) const;
};

struct Dataset {
  std::vector<Sample> samples;
  std::size_t num_classes = 0;
  std::vector<std::string> class_names;
  bool has_dimensional = false;

  std::size_t size() const noexcept { return samples.size(); }
  bool empty() const noexcept { return samples.empty(); }
  Dataset subset(Split split) const;
  std::vector<std::size_t> class_histogram() const;
  std::vector<std::size_t> split_sizes() const;  // train, validation, test
  /// Per-channel mean over every pixel, in [0,1].
  std::array<double, 3> channel_means() const;
  /// FNV-1a over pixels and labels.
  std::uint64_t digest() const;
};

/// Native FER2013 label order: Angry, Disgust, Fear, Happy, Sad, Surprise, Neutral.
const std::vector<std::string>& fer2013_class_names();
inline constexpr std::size_t kFer2013Pixels = 48 * 48;

/// Header `emotion,pixels,Usage`; rows are validated and rejected with
/// RowError (1-based line number). Images are bilinearly resized 48 -> 64
/// and replicated to three channels.
Dataset load_fer2013(const std::filesystem::path& path);
Dataset parse_fer2013(std::istream& in);

/// Bilinear resize with half-pixel centres, edge clamped. src is HWC.
std::vector<float> resize_bilinear(std::span<const float> src, std::size_t h, std::size_t w, std::size_t c,
                                   std::size_t out_h, std::size_t out_w);

/// Synthetic K-class set (K <= 8): class k draws its own colour and shape
/// family with random placement, scale and pixel noise. Every sample also
/// carries a (valence, arousal) label at the class anchor plus N(0, 0.05)
/// noise clipped to [-1,1].
Dataset synth_blobs(std::size_t classes, std::size_t per_class, std::uint64_t seed);
std::array<float, 2> synth_anchor(std::size_t cls);

/// "synth:K=8,N=200,seed=1" or "fer2013:<path>".
Dataset load_dataset_spec(const std::string& spec, std::uint64_t default_seed = 1);

std::string dataset_stats_json(const Dataset& data);
/// Channel means from a document written by dataset_stats_json.
std::array<double, 3> parse_dataset_stats(const std::string& text);

}  // namespace bnx

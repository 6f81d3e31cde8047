#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "bregnext/checkpoint.hpp"
#include "bregnext/data.hpp"
#include "bregnext/error.hpp"
#include "bregnext/features.hpp"
#include "support.hpp"

namespace bnx {
namespace {

namespace fs = std::filesystem;

std::string fer_row(int label, const std::vector<int>& pixels, const std::string& usage) {
  std::string row = std::to_string(label) + ",";
  for (std::size_t i = 0; i < pixels.size(); ++i) row += (i ? " " : "") + std::to_string(pixels[i]);
  return row + "," + usage + "\n";
}

std::vector<int> constant_pixels(int v, std::size_t n = kFer2013Pixels) { return std::vector<int>(n, v); }

std::vector<int> ramp_pixels() {
  std::vector<int> p(kFer2013Pixels);
  for (std::size_t y = 0; y < 48; ++y)
    for (std::size_t x = 0; x < 48; ++x) p[y * 48 + x] = static_cast<int>(5 * x);
  return p;
}

Dataset parse(const std::string& text) {
  std::istringstream in(text);
  return parse_fer2013(in);
}

const std::string kHeader = "emotion,pixels,Usage\n";

TEST(Fer2013, ParsesRowsAndSplits) {
  const auto d = parse(kHeader + fer_row(3, constant_pixels(128), "Training") +
                       fer_row(0, constant_pixels(0), "PublicTest") + "\n" +
                       fer_row(6, constant_pixels(255), "PrivateTest"));
  ASSERT_EQ(d.size(), 3u);
  EXPECT_EQ(d.num_classes, 7u);
  EXPECT_EQ(d.class_names[3], "Happy");
  EXPECT_EQ(d.samples[0].label, 3);
  EXPECT_EQ(d.samples[1].split, Split::Validation);
  EXPECT_EQ(d.samples[2].split, Split::Test);
  EXPECT_EQ(d.split_sizes(), (std::vector<std::size_t>{1, 1, 1}));
  const auto hist = d.class_histogram();
  EXPECT_EQ(hist, (std::vector<std::size_t>{1, 0, 0, 1, 0, 0, 1}));
  for (auto v : d.samples[0].pixels) ASSERT_EQ(v, 128);
  for (auto v : d.samples[2].pixels) ASSERT_EQ(v, 255);
  const auto img = d.samples[0].image();
  EXPECT_EQ(img.shape(), (Shape{64, 64, 3}));
  EXPECT_FLOAT_EQ(img[0], 128.0f / 255.0f);
  EXPECT_EQ(d.subset(Split::Test).size(), 1u);
}

TEST(Fer2013, BilinearResizeOfARamp) {
  // Interpolation is exact on a linear ramp: column X samples source
  // position (X + 0.5) * 48/64 - 0.5, clamped to the edge.
  const auto d = parse(kHeader + fer_row(1, ramp_pixels(), "Training"));
  const auto& px = d.samples[0].pixels;
  for (std::size_t y : {0u, 31u, 63u})
    for (std::size_t x = 0; x < 64; ++x) {
      const double src = std::clamp((x + 0.5) * 0.75 - 0.5, 0.0, 47.0);
      const auto want = std::lround(5.0 * src);
      for (std::size_t c = 0; c < 3; ++c) ASSERT_EQ(px[(y * 64 + x) * 3 + c], want) << x;
    }
}

void expect_row_error(const std::string& text, std::size_t row) {
  try {
    parse(text);
    ADD_FAILURE() << "expected RowError";
  } catch (const RowError& e) {
    EXPECT_EQ(e.row(), row) << e.what();
  }
}

TEST(Fer2013, RejectsMalformedRows) {
  const auto good = fer_row(0, constant_pixels(1), "Training");
  expect_row_error("label,pixels,Usage\n" + good, 1);
  expect_row_error(kHeader + good + fer_row(7, constant_pixels(1), "Training"), 3);
  expect_row_error(kHeader + good + "x," + good.substr(2), 3);
  expect_row_error(kHeader + fer_row(0, constant_pixels(1), "Holdout"), 2);
  expect_row_error(kHeader + fer_row(0, constant_pixels(1, kFer2013Pixels - 1), "Training"), 2);
  expect_row_error(kHeader + fer_row(0, constant_pixels(1, kFer2013Pixels + 1), "Training"), 2);
  expect_row_error(kHeader + good + "\n" + fer_row(0, constant_pixels(256), "Training"), 4);
  expect_row_error(kHeader + "0,1 2 3\n", 2);
  EXPECT_THROW(parse(""), DataError);
  EXPECT_THROW(load_fer2013("/nonexistent/fer2013.csv"), DataError);
}

TEST(Fer2013, SplitNames) {
  EXPECT_EQ(split_from_name("Training"), Split::Train);
  EXPECT_EQ(split_from_name("PublicTest"), Split::Validation);
  EXPECT_EQ(split_from_name("test"), Split::Test);
  EXPECT_THROW(split_from_name("holdout"), DataError);
}

TEST(Resize, ConstantStaysConstantAndIdentityIsExact) {
  std::vector<float> flat(5 * 7 * 2, 0.3f);
  for (float v : resize_bilinear(flat, 5, 7, 2, 9, 4)) ASSERT_EQ(v, 0.3f);
  Rng rng(81);
  std::vector<float> src(6 * 6);
  for (auto& v : src) v = static_cast<float>(rng.uniform());
  EXPECT_EQ(resize_bilinear(src, 6, 6, 1, 6, 6), src);
  EXPECT_THROW(resize_bilinear(src, 5, 6, 1, 6, 6), DataError);
}

TEST(Synth, DeterministicAndBalanced) {
  const auto a = synth_blobs(2, 8, 3), b = synth_blobs(2, 8, 3), c = synth_blobs(2, 8, 4);
  EXPECT_EQ(a.size(), 16u);
  EXPECT_EQ(a.class_histogram(), (std::vector<std::size_t>{8, 8}));
  EXPECT_EQ(a.digest(), b.digest());
  EXPECT_NE(a.digest(), c.digest());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a.samples[i].pixels, b.samples[i].pixels);
  EXPECT_TRUE(a.has_dimensional);
  for (const auto& s : synth_blobs(8, 20, 5).samples) {
    EXPECT_EQ(s.pixels.size(), kImageValues);
    for (float v : s.valence_arousal) EXPECT_TRUE(v >= -1.0f && v <= 1.0f);
  }
  EXPECT_THROW(synth_blobs(9, 1, 1), ConfigError);
}

TEST(Synth, NearestCentroidSeparatesClasses) {
  const std::size_t k = 4;
  const auto train = synth_blobs(k, 50, 11), test = synth_blobs(k, 50, 12);
  std::vector<std::vector<double>> centroid(k, std::vector<double>(kImageValues, 0.0));
  for (const auto& s : train.samples)
    for (std::size_t i = 0; i < kImageValues; ++i) centroid[s.label][i] += s.pixels[i] / 50.0;
  std::size_t correct = 0;
  for (const auto& s : test.samples) {
    std::size_t best = 0;
    double best_d = INFINITY;
    for (std::size_t c = 0; c < k; ++c) {
      double d = 0;
      for (std::size_t i = 0; i < kImageValues; ++i) d += (s.pixels[i] - centroid[c][i]) * (s.pixels[i] - centroid[c][i]);
      if (d < best_d) best_d = d, best = c;
    }
    correct += static_cast<int>(best) == s.label;
  }
  EXPECT_GE(correct / 200.0, 0.8);
}

TEST(Synth, AnchorsAreDistinctAndInside) {
  for (std::size_t i = 0; i < 8; ++i) {
    const auto a = synth_anchor(i);
    EXPECT_LE(std::hypot(a[0], a[1]), 1.0);
    for (std::size_t j = 0; j < i; ++j) EXPECT_NE(synth_anchor(j), a);
  }
}

TEST(DatasetSpec, ParsesSynthAndRejectsJunk) {
  const auto d = load_dataset_spec("synth:K=3,N=2,seed=9");
  EXPECT_EQ(d.size(), 6u);
  EXPECT_EQ(d.digest(), synth_blobs(3, 2, 9).digest());
  EXPECT_THROW(load_dataset_spec("synth:K=3,M=2"), ConfigError);
  EXPECT_THROW(load_dataset_spec("synth:K=x"), ConfigError);
  EXPECT_THROW(load_dataset_spec("imagenet:foo"), ConfigError);
  EXPECT_THROW(load_dataset_spec("fer2013:"), ConfigError);
}

TEST(DatasetStats, JsonRoundTrip) {
  const auto d = synth_blobs(2, 3, 1);
  const auto means = parse_dataset_stats(dataset_stats_json(d));
  const auto want = d.channel_means();
  for (std::size_t c = 0; c < 3; ++c) EXPECT_DOUBLE_EQ(means[c], want[c]);
  EXPECT_THROW(parse_dataset_stats("{}"), DataError);
  EXPECT_THROW(parse_dataset_stats("not json"), DataError);
}

class CheckpointTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = fs::temp_directory_path() / ("bregnext_ckpt_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
                                      "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir);
  }
  void TearDown() override { fs::remove_all(dir); }
  fs::path dir;
};

Model trained_tiny() {
  auto m = build_network<float>(test::tiny_config(), 4);
  Rng rng(82);
  m.set_mapping_params(0.83, -0.21);
  // one training-mode pass moves the BN running statistics
  m.forward(test::random_tensor<float>({4, 32, 32, 3}, rng), Mode::Train);
  m.params[m.channel_means].value = Tensor::vector({0.1f, 0.2f, 0.3f});
  return m;
}

TEST_F(CheckpointTest, RoundTripIsBitwise) {
  auto m = trained_tiny();
  const auto path = dir / "m.bngx";
  save_checkpoint(m, path, "epoch,loss\n1,0.5\n");
  auto loaded = load_checkpoint(path, m.config);
  EXPECT_EQ(loaded.log_tail, "epoch,loss\n1,0.5\n");
  ASSERT_EQ(loaded.model.params.size(), m.params.size());
  for (std::size_t i = 0; i < m.params.size(); ++i) {
    EXPECT_EQ(loaded.model.params[i].name, m.params[i].name);
    EXPECT_EQ(loaded.model.params[i].value, m.params[i].value) << m.params[i].name;
  }
  EXPECT_EQ(loaded.model.mapping_params(1).alpha, m.mapping_params(1).alpha);
  Rng rng(83);
  const auto batch = test::random_tensor<float>({3, 32, 32, 3}, rng);
  EXPECT_EQ(loaded.model.forward(batch, Mode::Infer), m.forward(batch, Mode::Infer));
}

TEST_F(CheckpointTest, ErrorKinds) {
  const auto m = trained_tiny();
  const auto bytes = encode_checkpoint(m);
  EXPECT_THROW(decode_checkpoint(bytes.substr(0, bytes.size() / 2)), CheckpointTruncatedError);
  EXPECT_THROW(decode_checkpoint(bytes.substr(0, 6)), CheckpointTruncatedError);
  EXPECT_THROW(decode_checkpoint(bytes.substr(0, bytes.size() - 1)), CheckpointTruncatedError);
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(decode_checkpoint(bad_magic), DataError);
  auto bad_version = bytes;
  bad_version[4] = 9;
  EXPECT_THROW(decode_checkpoint(bad_version), CheckpointVersionError);
  auto flipped = bytes;
  flipped[bytes.size() / 2] ^= 0x40;
  try {
    decode_checkpoint(flipped);
    FAIL() << "expected a CRC failure";
  } catch (const CheckpointTruncatedError&) {
    FAIL() << "corruption reported as truncation";
  } catch (const DataError& e) {
    SUCCEED() << e.what();
  }
  auto other = test::tiny_config();
  other.stages[1].channels = 16;
  EXPECT_THROW(decode_checkpoint(bytes, other), CheckpointMismatchError);
  EXPECT_THROW(load_checkpoint(dir / "missing.bngx"), DataError);
}

TEST_F(CheckpointTest, LargerNetworkRequestIsRejected) {
  const auto small = build_network<float>(named_config("BReG-NeXt-32"), 0);
  const auto bytes = encode_checkpoint(small);
  EXPECT_THROW(decode_checkpoint(bytes, named_config("BReG-NeXt-50")), CheckpointMismatchError);
  EXPECT_NO_THROW(decode_checkpoint(bytes, named_config("BReG-NeXt-32")));
}

TEST_F(CheckpointTest, FeatureMapsPerSelector) {
  auto m = trained_tiny();
  const auto data = synth_blobs(3, 1, 2);
  const auto image = data.samples[0].image();
  const std::size_t depths[] = {1, 2, 5, 6};
  const auto files = dump_feature_maps(m, image, depths, dir);
  ASSERT_EQ(files.size(), 4u);
  for (const auto& f : files) EXPECT_TRUE(fs::exists(f)) << f;
  EXPECT_EQ(files[0].filename(), "depth_1.png");
  // stem is 32x32x4 (stride 2): 2x2 grid of 32x32 maps
  const auto stem = m.graph.value(feature_node(m, 1));
  const auto grid = feature_grid(Tensor(Shape{32, 32, 4}, std::vector<float>(stem.raw(), stem.raw() + 32 * 32 * 4)));
  EXPECT_EQ(grid.columns, 2u);
  EXPECT_EQ(grid.width, 64u);
  EXPECT_EQ(grid.height, 64u);
  const std::size_t none[] = {0};
  EXPECT_TRUE(dump_feature_maps(m, image, std::span<const std::size_t>(none, 0), dir / "empty").empty());
  const std::size_t bad[] = {1, 99};
  EXPECT_THROW(dump_feature_maps(m, image, bad, dir / "bad"), ConfigError);
  EXPECT_FALSE(fs::exists(dir / "bad" / "depth_1.png"));
}

TEST_F(CheckpointTest, ZeroInputZeroStemGivesMidGrey) {
  auto m = build_network<float>(test::tiny_config(), 4);
  m.params.at("stem/kernel").value.fill(0.0f);
  const Tensor image(Shape{64, 64, 3}, 0.0f);  // equals the stored (zero) means
  const std::size_t depth[] = {1};
  dump_feature_maps(m, image, depth, dir, Mode::Train);
  const auto stem = m.graph.value(feature_node(m, 1));
  const auto grid = feature_grid(Tensor(Shape{32, 32, 4}, std::vector<float>(stem.raw(), stem.raw() + 32 * 32 * 4)));
  for (auto p : grid.pixels) ASSERT_EQ(p, 128);
}

TEST(FeatureGrid, MinMaxPerMap) {
  Tensor act(Shape{2, 2, 2});
  const float vals[] = {0, 10, 1, 10, 2, 10, 3, 10};
  std::copy(vals, vals + 8, act.raw());
  const auto g = feature_grid(act);
  EXPECT_EQ(g.columns, 2u);
  EXPECT_EQ(g.rows, 1u);
  EXPECT_EQ(g.width, 4u);
  EXPECT_EQ(g.pixels[0], 0);
  EXPECT_EQ(g.pixels[g.width + 1], 255);
  EXPECT_EQ(g.pixels[2], 128);  // channel 1 is constant
}

}  // namespace
}  // namespace bnx

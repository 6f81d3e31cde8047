#include "bregnext/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>

#include "json.hpp"

#include "bregnext/error.hpp"
#include "bregnext/random.hpp"

namespace bnx {
namespace {

std::string trim(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == '\n' || s.back() == ' ')) s.pop_back();
  std::size_t i = 0;
  while (i < s.size() && s[i] == ' ') ++i;
  return s.substr(i);
}

std::uint8_t quantize(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

std::array<double, 3> hsv_to_rgb(double h, double s, double v) {
  const double hh = std::fmod(h, 1.0) * 6.0;
  const int sector = static_cast<int>(hh) % 6;
  const double f = hh - std::floor(hh);
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

// Shape family membership for pixel (y, x) relative to centre (cy, cx).
bool inside(std::size_t family, double dy, double dx, double size, double period, double phase) {
  const double r = std::hypot(dy, dx);
  const bool in_box = std::abs(dy) <= size && std::abs(dx) <= size;
  const auto stripe = [&](double u) { return std::fmod(u + phase + 1000.0 * period, period) < period / 2; };
  switch (family) {
    case 0: return r <= size;
    case 1: return std::abs(dy) <= size * 0.8 && std::abs(dx) <= size * 0.8;
    case 2: return in_box && stripe(dy);
    case 3: return in_box && stripe(dx);
    case 4: return in_box && (stripe(dy) != stripe(dx));
    case 5: return r <= size && r >= size * 0.55;
    case 6: return in_box && stripe((dx + dy) / std::numbers::sqrt2);
    default: return (std::abs(dy) <= size * 0.3 && std::abs(dx) <= size) || (std::abs(dx) <= size * 0.3 && std::abs(dy) <= size);
  }
}

}  // namespace

const char* split_name(Split split) {
  switch (split) {
    case Split::Train: return "train";
    case Split::Validation: return "validation";
    case Split::Test: return "test";
  }
  return "?";
}

Split split_from_name(const std::string& name) {
  if (name == "train" || name == "Training") return Split::Train;
  if (name == "validation" || name == "PublicTest") return Split::Validation;
  if (name == "test" || name == "PrivateTest") return Split::Test;
  throw DataError("unknown split '" + name + "'");
}

Tensor Sample::image() const {
  Tensor t(Shape{kImageSide, kImageSide, kImageChannels});
  write_image(t.raw());
  return t;
}

void Sample::write_image(float* dst) const {
  if (pixels.size() != kImageValues) throw DataError("sample has " + std::to_string(pixels.size()) + " pixel values");
  for (std::size_t i = 0; i < kImageValues; ++i) dst[i] = static_cast<float>(pixels[i]) / 255.0f;
}

Dataset Dataset::subset(Split split) const {
  Dataset out;
  out.num_classes = num_classes;
  out.class_names = class_names;
  out.has_dimensional = has_dimensional;
  for (const auto& s : samples)
    if (s.split == split) out.samples.push_back(s);
  return out;
}

std::vector<std::size_t> Dataset::class_histogram() const {
  std::vector<std::size_t> h(num_classes, 0);
  for (const auto& s : samples)
    if (s.label >= 0 && static_cast<std::size_t>(s.label) < num_classes) ++h[static_cast<std::size_t>(s.label)];
  return h;
}

std::vector<std::size_t> Dataset::split_sizes() const {
  std::vector<std::size_t> n(3, 0);
  for (const auto& s : samples) ++n[static_cast<std::size_t>(s.split)];
  return n;
}

std::array<double, 3> Dataset::channel_means() const {
  std::array<std::uint64_t, 3> sum{0, 0, 0};
  for (const auto& s : samples)
    for (std::size_t i = 0; i < s.pixels.size(); ++i) sum[i % 3] += s.pixels[i];
  std::array<double, 3> out{0, 0, 0};
  if (samples.empty()) return out;
  const double n = static_cast<double>(samples.size()) * kImageSide * kImageSide * 255.0;
  for (std::size_t c = 0; c < 3; ++c) out[c] = static_cast<double>(sum[c]) / n;
  return out;
}

std::uint64_t Dataset::digest() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::uint8_t b) {
    h ^= b;
    h *= 0x100000001b3ULL;
  };
  for (const auto& s : samples) {
    for (auto p : s.pixels) mix(p);
    for (int k = 0; k < 4; ++k) mix(static_cast<std::uint8_t>(static_cast<std::uint32_t>(s.label) >> (8 * k)));
    for (float f : s.valence_arousal) {
      std::uint32_t bits;
      std::memcpy(&bits, &f, 4);
      for (int k = 0; k < 4; ++k) mix(static_cast<std::uint8_t>(bits >> (8 * k)));
    }
    mix(static_cast<std::uint8_t>(s.split));
  }
  return h;
}

const std::vector<std::string>& fer2013_class_names() {
  static const std::vector<std::string> names{"Angry", "Disgust", "Fear", "Happy", "Sad", "Surprise", "Neutral"};
  return names;
}

std::vector<float> resize_bilinear(std::span<const float> src, std::size_t h, std::size_t w, std::size_t c,
                                   std::size_t out_h, std::size_t out_w) {
  if (src.size() != h * w * c) throw DataError("resize_bilinear: source size mismatch");
  if (h == 0 || w == 0 || out_h == 0 || out_w == 0) throw DataError("resize_bilinear: empty image");
  std::vector<float> out(out_h * out_w * c);
  const double sy = static_cast<double>(h) / static_cast<double>(out_h);
  const double sx = static_cast<double>(w) / static_cast<double>(out_w);
  for (std::size_t y = 0; y < out_h; ++y) {
    const double fy = std::clamp((static_cast<double>(y) + 0.5) * sy - 0.5, 0.0, static_cast<double>(h - 1));
    const auto y0 = static_cast<std::size_t>(fy);
    const std::size_t y1 = std::min(y0 + 1, h - 1);
    const double ty = fy - static_cast<double>(y0);
    for (std::size_t x = 0; x < out_w; ++x) {
      const double fx = std::clamp((static_cast<double>(x) + 0.5) * sx - 0.5, 0.0, static_cast<double>(w - 1));
      const auto x0 = static_cast<std::size_t>(fx);
      const std::size_t x1 = std::min(x0 + 1, w - 1);
      const double tx = fx - static_cast<double>(x0);
      for (std::size_t k = 0; k < c; ++k) {
        const double a = src[(y0 * w + x0) * c + k], b = src[(y0 * w + x1) * c + k];
        const double d = src[(y1 * w + x0) * c + k], e = src[(y1 * w + x1) * c + k];
        // a + t (b - a) keeps constant images exactly constant
        const double top = a + tx * (b - a), bottom = d + tx * (e - d);
        out[(y * out_w + x) * c + k] = static_cast<float>(top + ty * (bottom - top));
      }
    }
  }
  return out;
}

Dataset parse_fer2013(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("FER2013: empty file");
  if (trim(line) != "emotion,pixels,Usage")
    throw RowError(1, "expected header 'emotion,pixels,Usage', got '" + trim(line) + "'");
  Dataset data;
  data.num_classes = 7;
  data.class_names = fer2013_class_names();
  std::size_t row = 1;
  std::vector<float> gray(kFer2013Pixels);
  while (std::getline(in, line)) {
    ++row;
    line = trim(line);
    if (line.empty()) continue;
    const auto c1 = line.find(',');
    const auto c2 = c1 == std::string::npos ? std::string::npos : line.find(',', c1 + 1);
    if (c2 == std::string::npos || line.find(',', c2 + 1) != std::string::npos)
      throw RowError(row, "expected three comma-separated fields");
    const std::string emotion = line.substr(0, c1), pixels = line.substr(c1 + 1, c2 - c1 - 1);
    const std::string usage = trim(line.substr(c2 + 1));

    Sample s;
    int label = -1;
    auto [p, ec] = std::from_chars(emotion.data(), emotion.data() + emotion.size(), label);
    if (ec != std::errc() || p != emotion.data() + emotion.size() || label < 0 || label > 6)
      throw RowError(row, "bad emotion label '" + emotion + "'");
    s.label = label;
    try {
      s.split = split_from_name(usage);
    } catch (const DataError&) {
      throw RowError(row, "bad Usage '" + usage + "'");
    }

    std::size_t count = 0;
    const char* cur = pixels.data();
    const char* end = pixels.data() + pixels.size();
    while (cur < end) {
      while (cur < end && *cur == ' ') ++cur;
      if (cur == end) break;
      int v = 0;
      auto [q, err] = std::from_chars(cur, end, v);
      if (err != std::errc() || v < 0 || v > 255 || (q < end && *q != ' '))
        throw RowError(row, "bad pixel value near column " + std::to_string(count + 1));
      if (count < kFer2013Pixels) gray[count] = static_cast<float>(v) / 255.0f;
      ++count;
      cur = q;
    }
    if (count != kFer2013Pixels)
      throw RowError(row, "expected " + std::to_string(kFer2013Pixels) + " pixels, got " + std::to_string(count));

    const auto big = resize_bilinear(gray, 48, 48, 1, kImageSide, kImageSide);
    s.pixels.resize(kImageValues);
    for (std::size_t i = 0; i < big.size(); ++i) {
      const auto q = quantize(big[i]);
      s.pixels[3 * i] = s.pixels[3 * i + 1] = s.pixels[3 * i + 2] = q;
    }
    data.samples.push_back(std::move(s));
  }
  return data;
}

Dataset load_fer2013(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return parse_fer2013(in);
}

std::array<float, 2> synth_anchor(std::size_t cls) {
  const double angle = 2.0 * std::numbers::pi * static_cast<double>(cls) / 8.0 + std::numbers::pi / 8.0;
  return {static_cast<float>(0.7 * std::cos(angle)), static_cast<float>(0.7 * std::sin(angle))};
}

Dataset synth_blobs(std::size_t classes, std::size_t per_class, std::uint64_t seed) {
  if (classes == 0 || classes > 8) throw ConfigError("synth_blobs supports 1..8 classes");
  Dataset data;
  data.num_classes = classes;
  data.has_dimensional = true;
  for (std::size_t k = 0; k < classes; ++k) data.class_names.push_back("blob" + std::to_string(k));
  Rng rng(seed);
  for (std::size_t i = 0; i < per_class; ++i) {
    for (std::size_t k = 0; k < classes; ++k) {
      Sample s;
      s.label = static_cast<int>(k);
      const auto color = hsv_to_rgb(static_cast<double>(k) / 8.0 + rng.uniform(-0.02, 0.02), 0.85, rng.uniform(0.8, 1.0));
      const double background = rng.uniform(0.1, 0.25);
      const double cy = rng.uniform(22, 42), cx = rng.uniform(22, 42);
      const double size = rng.uniform(12, 19);
      const double period = rng.uniform(6, 10);
      const double phase = rng.uniform(0, period);
      s.pixels.resize(kImageValues);
      for (std::size_t y = 0; y < kImageSide; ++y)
        for (std::size_t x = 0; x < kImageSide; ++x) {
          const bool on = inside(k, static_cast<double>(y) - cy, static_cast<double>(x) - cx, size, period, phase);
          for (std::size_t c = 0; c < 3; ++c) {
            const double v = (on ? color[c] : background) + rng.normal(0.0, 0.04);
            s.pixels[(y * kImageSide + x) * 3 + c] = quantize(v);
          }
        }
      const auto anchor = synth_anchor(k);
      for (std::size_t d = 0; d < 2; ++d)
        s.valence_arousal[d] = static_cast<float>(std::clamp(anchor[d] + rng.normal(0.0, 0.05), -1.0, 1.0));
      data.samples.push_back(std::move(s));
    }
  }
  return data;
}

Dataset load_dataset_spec(const std::string& spec, std::uint64_t default_seed) {
  const auto colon = spec.find(':');
  const std::string kind = spec.substr(0, colon);
  const std::string rest = colon == std::string::npos ? "" : spec.substr(colon + 1);
  if (kind == "fer2013") {
    if (rest.empty()) throw ConfigError("fer2013 dataset needs a path: fer2013:<file.csv>");
    return load_fer2013(rest);
  }
  if (kind != "synth") throw ConfigError("unknown dataset spec '" + spec + "' (synth:K=..,N=..,seed=.. | fer2013:<path>)");
  std::size_t k = 8, n = 200;
  std::uint64_t seed = default_seed;
  std::stringstream ss(rest);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ConfigError("bad dataset option '" + item + "'");
    const std::string key = item.substr(0, eq), value = item.substr(eq + 1);
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc() || p != value.data() + value.size()) throw ConfigError("bad dataset option '" + item + "'");
    if (key == "K") k = v;
    else if (key == "N") n = v;
    else if (key == "seed") seed = v;
    else throw ConfigError("unknown dataset option '" + key + "'");
  }
  return synth_blobs(k, n, seed);
}

std::string dataset_stats_json(const Dataset& data) {
  const auto means = data.channel_means();
  nlohmann::json j{{"format", "bregnext-dataset-stats"},
                   {"version", 1},
                   {"samples", data.size()},
                   {"channel_means", {means[0], means[1], means[2]}},
                   {"class_names", data.class_names},
                   {"class_counts", data.class_histogram()},
                   {"split_sizes", data.split_sizes()}};
  return j.dump(2);
}

std::array<double, 3> parse_dataset_stats(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.value("format", "") != "bregnext-dataset-stats") throw DataError("not a dataset statistics document");
    const auto m = j.at("channel_means").get<std::vector<double>>();
    if (m.size() != 3) throw DataError("channel_means must hold three values");
    return {m[0], m[1], m[2]};
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("dataset statistics: ") + e.what());
  }
}

}  // namespace bnx

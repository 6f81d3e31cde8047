#include "bregnext/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "bregnext/error.hpp"

namespace bnx {
namespace {

constexpr char kMagic[4] = {'B', 'N', 'G', 'X'};
constexpr char kEnd[4] = {'E', 'N', 'D', '!'};

class Writer {
 public:
  void bytes(const void* p, std::size_t n) { out_.append(static_cast<const char*>(p), n); }
  template <typename U>
  void uint(U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void text(const std::string& s) {
    uint<std::uint64_t>(s.size());
    out_ += s;
  }
  std::string& str() { return out_; }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(const std::string& data) : data_(data) {}
  const char* take(std::size_t n) {
    if (n > data_.size() - pos_) throw CheckpointTruncatedError("checkpoint truncated at byte " + std::to_string(pos_));
    const char* p = data_.data() + pos_;
    pos_ += n;
    return p;
  }
  template <typename U>
  U uint() {
    const auto* p = reinterpret_cast<const unsigned char*>(take(sizeof(U)));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<U>(p[i]) << (8 * i));
    return v;
  }
  std::string text() {
    const auto n = uint<std::uint64_t>();
    if (n > data_.size() - pos_) throw CheckpointTruncatedError("checkpoint truncated in a string field");
    return std::string(take(static_cast<std::size_t>(n)), static_cast<std::size_t>(n));
  }
  std::size_t pos() const { return pos_; }

 private:
  const std::string& data_;
  std::size_t pos_ = 0;
};

std::uint32_t crc(const char* p, std::size_t n) {
  return static_cast<std::uint32_t>(::crc32(0L, reinterpret_cast<const Bytef*>(p), static_cast<uInt>(n)));
}

}  // namespace

std::string encode_checkpoint(const Model& model, const std::string& log_tail) {
  Writer w;
  w.bytes(kMagic, 4);
  w.uint<std::uint32_t>(kCheckpointVersion);
  w.text(config_to_text(model.config));
  w.text(log_tail);
  const auto entries = model.params.entries();
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(entries.size()));
  for (const auto& e : entries) {
    w.text(e.name);
    w.text(role_name(e.role));
    w.uint<std::uint8_t>(e.trainable ? 1 : 0);
    w.uint<std::uint32_t>(static_cast<std::uint32_t>(e.value.rank()));
    for (auto d : e.value.shape()) w.uint<std::uint64_t>(d);
    for (float v : e.value.data()) w.uint<std::uint32_t>(std::bit_cast<std::uint32_t>(v));
  }
  w.uint<std::uint32_t>(crc(w.str().data(), w.str().size()));
  w.bytes(kEnd, 4);
  return std::move(w.str());
}

CheckpointContents decode_checkpoint(const std::string& bytes, const std::optional<NetworkConfig>& expected) {
  Reader r(bytes);
  if (bytes.size() < 8) throw CheckpointTruncatedError("checkpoint shorter than its header");
  if (std::memcmp(r.take(4), kMagic, 4) != 0) throw DataError("not a .bngx checkpoint (bad magic)");
  const auto version = r.uint<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw CheckpointVersionError("checkpoint format version " + std::to_string(version) + ", expected " +
                                 std::to_string(kCheckpointVersion));
  const std::string config_text = r.text();
  std::string log_tail = r.text();

  struct Raw {
    std::string name;
    std::string role;
    bool trainable;
    Shape shape;
    std::vector<float> values;
  };
  std::vector<Raw> raw;
  const auto count = r.uint<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    Raw e;
    e.name = r.text();
    e.role = r.text();
    e.trainable = r.uint<std::uint8_t>() != 0;
    const auto rank = r.uint<std::uint32_t>();
    if (rank > 8) throw DataError("checkpoint entry '" + e.name + "' has rank " + std::to_string(rank));
    for (std::uint32_t d = 0; d < rank; ++d) e.shape.push_back(static_cast<std::size_t>(r.uint<std::uint64_t>()));
    const std::size_t n = shape_size(e.shape);
    if (n > (bytes.size() - r.pos()) / 4) throw CheckpointTruncatedError("checkpoint truncated in '" + e.name + "'");
    e.values.resize(n);
    for (auto& v : e.values) v = std::bit_cast<float>(r.uint<std::uint32_t>());
    raw.push_back(std::move(e));
  }
  const std::size_t body = r.pos();
  const auto stored_crc = r.uint<std::uint32_t>();
  if (std::memcmp(r.take(4), kEnd, 4) != 0) throw CheckpointTruncatedError("checkpoint end marker missing");
  if (stored_crc != crc(bytes.data(), body)) throw DataError("checkpoint CRC mismatch (corrupt file)");

  NetworkConfig cfg;
  try {
    cfg = config_from_text(config_text);
  } catch (const ConfigError& e) {
    throw DataError(std::string("checkpoint config: ") + e.what());
  }
  if (expected && config_to_text(*expected) != config_text)
    throw CheckpointMismatchError("checkpoint holds '" + cfg.name + "', requested '" + expected->name + "'");

  CheckpointContents out{build_network<float>(cfg, 0), std::move(log_tail)};
  auto& store = out.model.params;
  if (raw.size() != store.size())
    throw CheckpointMismatchError("checkpoint has " + std::to_string(raw.size()) + " entries, model " +
                                  std::to_string(store.size()));
  for (auto& e : raw) {
    const auto idx = store.find(e.name);
    if (!idx) throw CheckpointMismatchError("checkpoint entry '" + e.name + "' not in model");
    auto& dst = store[*idx];
    if (dst.value.shape() != e.shape)
      throw CheckpointMismatchError("entry '" + e.name + "' has shape " + shape_str(e.shape) + ", model " +
                                    shape_str(dst.value.shape()));
    if (role_name(dst.role) != e.role || dst.trainable != e.trainable)
      throw CheckpointMismatchError("entry '" + e.name + "' role differs from the model");
    dst.value = Tensor(e.shape, std::move(e.values));
  }
  return out;
}

void save_checkpoint(const Model& model, const std::filesystem::path& path, const std::string& log_tail) {
  const auto bytes = encode_checkpoint(model, log_tail);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed for " + path.string());
}

CheckpointContents load_checkpoint(const std::filesystem::path& path, const std::optional<NetworkConfig>& expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes, expected);
}

}  // namespace bnx

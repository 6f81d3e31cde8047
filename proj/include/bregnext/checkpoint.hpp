#pragma once

// .bngx checkpoints: magic "BNGX", format version, the network config
// document, an optional training-log tail, every store entry (name, role,
// trainable flag, shape, little-endian float32 values), a CRC-32 of all
// preceding bytes and an end marker.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "bregnext/network.hpp"

namespace bnx {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointContents {
  Model model;
  std::string log_tail;
};

std::string encode_checkpoint(const Model& model, const std::string& log_tail = {});
/// Throws CheckpointVersionError, CheckpointTruncatedError,
/// CheckpointMismatchError (when `expected` differs from the stored config or
/// entries do not fit it) or DataError (bad magic, CRC failure). Nothing is
/// returned on failure.
CheckpointContents decode_checkpoint(const std::string& bytes, const std::optional<NetworkConfig>& expected = {});

void save_checkpoint(const Model& model, const std::filesystem::path& path, const std::string& log_tail = {});
CheckpointContents load_checkpoint(const std::filesystem::path& path,
                                   const std::optional<NetworkConfig>& expected = {});

}  // namespace bnx

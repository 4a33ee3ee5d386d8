#pragma once

#include "hetmm/types.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>

namespace hetmm {

// FTN tensor file:
//   [0..3]  magic "FTN1"
//   [4]     dtype code, 0x01 = f32
//   [5]     ndim, always 3
//   [6..7]  reserved, zero
//   ndim x u32 LE dims (H, W, C)
//   H*W*C f32 LE values, row-major, channel fastest
inline constexpr std::array<std::uint8_t, 4> kFtnMagic = {0x46, 0x54, 0x4E, 0x31};
inline constexpr std::uint8_t kFtnDtypeF32 = 0x01;
inline constexpr std::uint8_t kFtnNdim = 3;
inline constexpr std::size_t kFtnHeaderBytes = 8 + 3 * 4;

enum class TensorErrorKind {
  kIo,
  kBadMagic,
  kVersionMismatch,
  kTruncated,
  kDimensionMismatch,
  kNonFinite,
};

const char* to_string(TensorErrorKind kind);

class TensorFormatError : public DataError {
 public:
  TensorFormatError(TensorErrorKind kind, const std::string& what,
                    std::optional<std::size_t> flat_index = std::nullopt)
      : DataError(what), kind_(kind), flat_index_(flat_index) {}

  TensorErrorKind kind() const { return kind_; }
  /// Offending element for kNonFinite.
  std::optional<std::size_t> flat_index() const { return flat_index_; }

 private:
  TensorErrorKind kind_;
  std::optional<std::size_t> flat_index_;
};

void write_tensor(const std::filesystem::path& path, const FeatureMap& t);
FeatureMap read_tensor(const std::filesystem::path& path, int layer_id = 0);

/// Single-channel maps (anomaly maps, ground-truth masks) use C = 1.
void write_map(const std::filesystem::path& path, const AnomalyMap& map);
AnomalyMap read_map(const std::filesystem::path& path);

FeatureMap map_to_tensor(const AnomalyMap& map);
AnomalyMap tensor_to_map(const FeatureMap& t);

}  // namespace hetmm

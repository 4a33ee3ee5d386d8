#include "hetmm/tensor_store.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <vector>

namespace hetmm {

static_assert(std::endian::native == std::endian::little,
              "FTN I/O assumes a little-endian host");

std::string to_string(const Shape& s) {
  return std::to_string(s.height) + "x" + std::to_string(s.width) + "x" +
         std::to_string(s.channels);
}

const char* to_string(TensorErrorKind kind) {
  switch (kind) {
    case TensorErrorKind::kIo: return "io";
    case TensorErrorKind::kBadMagic: return "bad-magic";
    case TensorErrorKind::kVersionMismatch: return "version-mismatch";
    case TensorErrorKind::kTruncated: return "truncated";
    case TensorErrorKind::kDimensionMismatch: return "dimension-mismatch";
    case TensorErrorKind::kNonFinite: return "non-finite";
  }
  return "unknown";
}

namespace {

void put_u32(std::uint8_t* out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out[i] = static_cast<std::uint8_t>(v >> (8 * i));
}

std::uint32_t get_u32(const std::uint8_t* in) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in[i]) << (8 * i);
  return v;
}

}  // namespace

void write_tensor(const std::filesystem::path& path, const FeatureMap& t) {
  const Shape s = t.shape();
  if (s.height < 1 || s.width < 1 || s.channels < 1)
    throw TensorFormatError(TensorErrorKind::kDimensionMismatch,
                            "write_tensor: empty shape " + to_string(s));
  const float* values = t.data().data();
  const auto count = static_cast<std::size_t>(t.data().size());
  for (std::size_t i = 0; i < count; ++i) {
    if (!std::isfinite(values[i]))
      throw TensorFormatError(TensorErrorKind::kNonFinite,
                              "write_tensor: non-finite value at flat index " + std::to_string(i) +
                                  " (" + path.string() + ")",
                              i);
  }

  std::array<std::uint8_t, kFtnHeaderBytes> header{};
  std::memcpy(header.data(), kFtnMagic.data(), kFtnMagic.size());
  header[4] = kFtnDtypeF32;
  header[5] = kFtnNdim;
  put_u32(header.data() + 8, static_cast<std::uint32_t>(s.height));
  put_u32(header.data() + 12, static_cast<std::uint32_t>(s.width));
  put_u32(header.data() + 16, static_cast<std::uint32_t>(s.channels));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw TensorFormatError(TensorErrorKind::kIo, "write_tensor: cannot open " + path.string());
  out.write(reinterpret_cast<const char*>(header.data()), header.size());
  out.write(reinterpret_cast<const char*>(values),
            static_cast<std::streamsize>(count * sizeof(float)));
  if (!out)
    throw TensorFormatError(TensorErrorKind::kIo, "write_tensor: write failed " + path.string());
}

FeatureMap read_tensor(const std::filesystem::path& path, int layer_id) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw TensorFormatError(TensorErrorKind::kIo, "read_tensor: cannot open " + path.string());

  std::array<std::uint8_t, kFtnHeaderBytes> header{};
  in.read(reinterpret_cast<char*>(header.data()), header.size());
  const auto got = static_cast<std::size_t>(in.gcount());
  if (got < 4 || std::memcmp(header.data(), kFtnMagic.data(), 3) != 0)
    throw TensorFormatError(TensorErrorKind::kBadMagic,
                            "read_tensor: not an FTN file: " + path.string());
  if (header[3] != kFtnMagic[3])
    throw TensorFormatError(TensorErrorKind::kVersionMismatch,
                            "read_tensor: unsupported FTN version '" +
                                std::string(1, static_cast<char>(header[3])) + "' in " +
                                path.string());
  if (got < header.size())
    throw TensorFormatError(TensorErrorKind::kTruncated,
                            "read_tensor: truncated header in " + path.string());
  if (header[4] != kFtnDtypeF32)
    throw TensorFormatError(TensorErrorKind::kVersionMismatch,
                            "read_tensor: unsupported dtype code " + std::to_string(header[4]) +
                                " in " + path.string());
  if (header[5] != kFtnNdim || header[6] != 0 || header[7] != 0)
    throw TensorFormatError(TensorErrorKind::kDimensionMismatch,
                            "read_tensor: expected ndim 3 with zero reserved bytes in " +
                                path.string());

  const Index h = get_u32(header.data() + 8);
  const Index w = get_u32(header.data() + 12);
  const Index c = get_u32(header.data() + 16);
  if (h < 1 || w < 1 || c < 1)
    throw TensorFormatError(TensorErrorKind::kDimensionMismatch,
                            "read_tensor: zero dimension in " + path.string());

  const std::size_t expected = static_cast<std::size_t>(h * w * c) * sizeof(float);
  in.seekg(0, std::ios::end);
  const auto file_size = static_cast<std::size_t>(in.tellg());
  const std::size_t payload = file_size - kFtnHeaderBytes;
  if (payload < expected)
    throw TensorFormatError(TensorErrorKind::kTruncated,
                            "read_tensor: payload has " + std::to_string(payload) +
                                " bytes, header implies " + std::to_string(expected) + " in " +
                                path.string());
  if (payload > expected)
    throw TensorFormatError(TensorErrorKind::kDimensionMismatch,
                            "read_tensor: payload has " + std::to_string(payload) +
                                " bytes, header implies " + std::to_string(expected) + " in " +
                                path.string());

  FeatureMap::Matrix data(h * w, c);
  in.seekg(static_cast<std::streamoff>(kFtnHeaderBytes));
  in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(expected));
  if (!in)
    throw TensorFormatError(TensorErrorKind::kIo, "read_tensor: read failed " + path.string());

  const float* values = data.data();
  for (std::size_t i = 0; i < static_cast<std::size_t>(data.size()); ++i) {
    if (!std::isfinite(values[i]))
      throw TensorFormatError(TensorErrorKind::kNonFinite,
                              "read_tensor: non-finite value at flat index " + std::to_string(i) +
                                  " in " + path.string(),
                              i);
  }
  return FeatureMap(layer_id, h, w, std::move(data));
}

FeatureMap map_to_tensor(const AnomalyMap& map) {
  FeatureMap::Matrix data = Eigen::Map<const FeatureMap::Matrix>(map.data(), map.size(), 1);
  return FeatureMap(0, map.rows(), map.cols(), std::move(data));
}

AnomalyMap tensor_to_map(const FeatureMap& t) {
  if (t.channels() != 1)
    throw ShapeMismatchError("expected a single-channel tensor, got " + to_string(t.shape()));
  return Eigen::Map<const AnomalyMap>(t.data().data(), t.height(), t.width());
}

void write_map(const std::filesystem::path& path, const AnomalyMap& map) {
  write_tensor(path, map_to_tensor(map));
}

AnomalyMap read_map(const std::filesystem::path& path) { return tensor_to_map(read_tensor(path)); }

}  // namespace hetmm

#pragma once

#include <filesystem>
#include <stdexcept>

#include "s2da/autodiff/tensor.hpp"

namespace s2da::data {

/// Frames of acoustic features, [T, D].
struct FeatureSequence {
  ad::Tensor frames;

  std::size_t length() const { return frames.empty() ? 0 : frames.rows(); }
  std::size_t dim() const { return frames.empty() ? 0 : frames.cols(); }
  bool empty() const { return frames.empty(); }
  friend bool operator==(const FeatureSequence&, const FeatureSequence&) = default;
};

class FeatureFileError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Feature file layout (little-endian):
//   char[4] magic "S2DF"
//   u32     version (1)
//   u32     frame count T
//   u32     dimension D
//   u32     CRC-32 (zlib polynomial) of the payload bytes
//   T*D     f32 payload, row-major
inline constexpr std::uint32_t kFeatureFileVersion = 1;
inline constexpr std::size_t kFeatureHeaderBytes = 20;

/// Values are stored as 32-bit floats; callers that need exact round-trips
/// should keep frames representable in float.
void write_feature_file(const std::filesystem::path& path, const FeatureSequence& features);
FeatureSequence read_feature_file(const std::filesystem::path& path);

/// Rounds every frame value to the nearest 32-bit float.
void round_to_float(FeatureSequence& features);

}  // namespace s2da::data

#pragma once

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>

#include "s2da/autodiff/parameter.hpp"

namespace s2da::ad {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Checkpoint layout (all integers little-endian):
//   char[8]  magic "S2DACKPT"
//   u32      format version (1)
//   u64      metadata length, then that many bytes of UTF-8 metadata (JSON by convention)
//   u32      parameter count
//   per parameter, in name order:
//     u32 name length, name bytes
//     u32 rank, rank x u64 dims
//     numel x f64 payload
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::string metadata;
  std::map<std::string, Tensor> tensors;
};

void save_checkpoint(const std::filesystem::path& path, const ParameterStore& store,
                     const std::string& metadata);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Copies checkpoint tensors into the store. Every store parameter must be
/// present with an identical shape, and the checkpoint must not carry extras.
void restore_parameters(const Checkpoint& ckpt, ParameterStore& store);

}  // namespace s2da::ad

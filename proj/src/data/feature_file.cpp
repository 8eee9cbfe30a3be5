#include "s2da/data/feature_file.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <vector>

namespace s2da::data {
namespace {

static_assert(std::endian::native == std::endian::little,
              "feature file I/O assumes a little-endian host");

constexpr char kMagic[4] = {'S', '2', 'D', 'F'};

std::uint32_t payload_crc(const std::vector<float>& payload) {
  return static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(payload.data()),
            static_cast<uInt>(payload.size() * sizeof(float))));
}

}  // namespace

void write_feature_file(const std::filesystem::path& path, const FeatureSequence& features) {
  if (features.empty()) throw FeatureFileError("refusing to write an empty feature sequence");
  std::vector<float> payload(features.frames.size());
  for (std::size_t i = 0; i < payload.size(); ++i) {
    payload[i] = static_cast<float>(features.frames[i]);
  }
  const std::uint32_t header[4] = {kFeatureFileVersion,
                                   static_cast<std::uint32_t>(features.length()),
                                   static_cast<std::uint32_t>(features.dim()),
                                   payload_crc(payload)};
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FeatureFileError("cannot open feature file for writing: " + path.string());
  out.write(kMagic, sizeof(kMagic));
  out.write(reinterpret_cast<const char*>(header), sizeof(header));
  out.write(reinterpret_cast<const char*>(payload.data()),
            static_cast<std::streamsize>(payload.size() * sizeof(float)));
  if (!out) throw FeatureFileError("failed writing feature file: " + path.string());
}

FeatureSequence read_feature_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FeatureFileError("cannot open feature file: " + path.string());
  char magic[4];
  std::uint32_t header[4];
  in.read(magic, sizeof(magic));
  in.read(reinterpret_cast<char*>(header), sizeof(header));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw FeatureFileError("not a feature file (bad magic or short header): " + path.string());
  }
  if (header[0] != kFeatureFileVersion) {
    throw FeatureFileError("unsupported feature file version " + std::to_string(header[0]) +
                           " in " + path.string());
  }
  const std::size_t frames = header[1], dim = header[2];
  if (frames == 0 || dim == 0) throw FeatureFileError("empty feature file: " + path.string());
  const std::size_t expected = frames * dim * sizeof(float);
  const auto actual = std::filesystem::file_size(path) - kFeatureHeaderBytes;
  if (actual != expected) {
    throw FeatureFileError("feature file " + path.string() + " declares " +
                           std::to_string(frames) + "x" + std::to_string(dim) + " (" +
                           std::to_string(expected) + " payload bytes) but holds " +
                           std::to_string(actual));
  }
  std::vector<float> payload(frames * dim);
  in.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(expected));
  if (!in) throw FeatureFileError("truncated feature payload: " + path.string());
  if (payload_crc(payload) != header[3]) {
    throw FeatureFileError("checksum mismatch in feature file " + path.string());
  }
  std::vector<double> data(payload.begin(), payload.end());
  return {ad::Tensor(ad::Shape{frames, dim}, std::move(data))};
}

void round_to_float(FeatureSequence& features) {
  for (double& v : features.frames.data()) v = static_cast<double>(static_cast<float>(v));
}

}  // namespace s2da::data

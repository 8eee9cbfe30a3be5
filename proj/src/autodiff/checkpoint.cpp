#include "s2da/autodiff/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace s2da::ad {
namespace {

constexpr char kMagic[8] = {'S', '2', 'D', 'A', 'C', 'K', 'P', 'T'};

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

template <class T>
void write_pod(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_pod(std::istream& in, const char* what) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw CheckpointError(std::string("truncated checkpoint while reading ") + what);
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ParameterStore& store,
                     const std::string& metadata) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot open checkpoint for writing: " + path.string());
  out.write(kMagic, sizeof(kMagic));
  write_pod<std::uint32_t>(out, kCheckpointVersion);
  write_pod<std::uint64_t>(out, metadata.size());
  out.write(metadata.data(), static_cast<std::streamsize>(metadata.size()));
  const auto params = store.all();
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (const Parameter* p : params) {
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(p->name.size()));
    out.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
    const Shape& s = p->value.shape();
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(s.rank()));
    for (std::size_t i = 0; i < s.rank(); ++i) write_pod<std::uint64_t>(out, s[i]);
    auto d = p->value.data();
    out.write(reinterpret_cast<const char*>(d.data()),
              static_cast<std::streamsize>(d.size() * sizeof(double)));
  }
  if (!out) throw CheckpointError("failed writing checkpoint: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint: " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw CheckpointError("not a checkpoint file (bad magic): " + path.string());
  }
  const auto version = read_pod<std::uint32_t>(in, "version");
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ckpt;
  const auto meta_len = read_pod<std::uint64_t>(in, "metadata length");
  ckpt.metadata.resize(meta_len);
  in.read(ckpt.metadata.data(), static_cast<std::streamsize>(meta_len));
  if (!in) throw CheckpointError("truncated checkpoint metadata");
  const auto count = read_pod<std::uint32_t>(in, "parameter count");
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = read_pod<std::uint32_t>(in, "name length");
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    const auto rank = read_pod<std::uint32_t>(in, "rank");
    if (rank == 0 || rank > Shape::kMaxRank) {
      throw CheckpointError("parameter " + name + " has invalid rank " + std::to_string(rank));
    }
    std::vector<std::size_t> dims(rank);
    for (auto& d : dims) d = read_pod<std::uint64_t>(in, "dimension");
    Tensor t{Shape(std::span<const std::size_t>(dims))};
    auto data = t.data();
    in.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(double)));
    if (!in) throw CheckpointError("truncated payload for parameter " + name);
    ckpt.tensors.emplace(std::move(name), std::move(t));
  }
  return ckpt;
}

void restore_parameters(const Checkpoint& ckpt, ParameterStore& store) {
  const auto params = store.all();
  if (params.size() != ckpt.tensors.size()) {
    throw CheckpointError("checkpoint holds " + std::to_string(ckpt.tensors.size()) +
                          " parameters, model expects " + std::to_string(params.size()));
  }
  for (Parameter* p : params) {
    auto it = ckpt.tensors.find(p->name);
    if (it == ckpt.tensors.end()) throw CheckpointError("checkpoint lacks parameter " + p->name);
    if (!(it->second.shape() == p->value.shape())) {
      throw CheckpointError("shape mismatch for " + p->name + ": checkpoint " +
                            it->second.shape().str() + " vs model " + p->value.shape().str());
    }
    p->value = it->second;
  }
}

}  // namespace s2da::ad

#include "hprn/checkpoint.hpp"

#include <cstring>
#include <map>

namespace hprn {

namespace {
constexpr char kMagic[8] = {'H', 'P', 'R', 'N', 'C', 'K', 'P', 'T'};
}

void write_checkpoint_entries(const std::filesystem::path& path,
                              const std::vector<CheckpointEntry>& entries) {
  ByteWriter w;
  w.bytes(kMagic, sizeof(kMagic));
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(entries.size()));
  for (const auto& e : entries) {
    if (e.name.size() > 0xFFFF) throw CheckpointError("parameter name too long: " + e.name);
    if (e.dims.size() > 0xFF) throw CheckpointError("rank too large for " + e.name);
    w.u16(static_cast<std::uint16_t>(e.name.size()));
    w.bytes(e.name.data(), e.name.size());
    w.u8(static_cast<std::uint8_t>(e.dims.size()));
    std::size_t n = 1;
    for (auto d : e.dims) {
      w.u32(d);
      n *= d;
    }
    if (n != e.values.size()) throw CheckpointError("value count mismatch for " + e.name);
    for (float v : e.values) w.f32(v);
  }
  w.save(path);
}

namespace {
std::vector<CheckpointEntry> parse_entries(ByteReader& r, const std::filesystem::path& path) {
  char magic[8];
  r.bytes(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(magic)) != 0) {
    throw CheckpointError(path.string() + ": bad checkpoint magic at offset 0");
  }
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw CheckpointError(path.string() + ": unsupported checkpoint version " +
                          std::to_string(version));
  }
  const std::uint32_t count = r.u32();
  std::vector<CheckpointEntry> entries;
  entries.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    CheckpointEntry e;
    e.name.resize(r.u16());
    r.bytes(e.name.data(), e.name.size());
    const std::uint8_t rank = r.u8();
    std::uint64_t n = 1;
    for (std::uint8_t k = 0; k < rank; ++k) {
      e.dims.push_back(r.u32());
      n *= e.dims.back();
      if (n > r.remaining()) {
        throw CheckpointError(path.string() + ": parameter " + e.name + " exceeds file size");
      }
    }
    e.values.resize(n);
    for (auto& v : e.values) v = r.f32();
    entries.push_back(std::move(e));
  }
  if (r.remaining() != 0) {
    throw CheckpointError(path.string() + ": trailing bytes after last parameter");
  }
  return entries;
}
}  // namespace

std::vector<CheckpointEntry> read_checkpoint_entries(const std::filesystem::path& path) {
  ByteReader r = ByteReader::load(path);
  try {
    return parse_entries(r, path);
  } catch (const TruncatedInput& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  }
}

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const ParameterList<T>& params) {
  std::vector<CheckpointEntry> entries;
  entries.reserve(params.size());
  for (const auto& p : params) {
    CheckpointEntry e;
    e.name = p.name;
    for (auto d : p.tensor.shape().dims()) e.dims.push_back(static_cast<std::uint32_t>(d));
    e.values.reserve(p.tensor.numel());
    for (T v : p.tensor.data()) e.values.push_back(static_cast<float>(v));
    entries.push_back(std::move(e));
  }
  write_checkpoint_entries(path, entries);
}

template <typename T>
void load_checkpoint(const std::filesystem::path& path, ParameterList<T>& params) {
  auto entries = read_checkpoint_entries(path);
  std::map<std::string, const CheckpointEntry*> by_name;
  for (const auto& e : entries) by_name[e.name] = &e;
  for (auto& p : params) {
    auto it = by_name.find(p.name);
    if (it == by_name.end()) {
      throw CheckpointError("checkpoint " + path.string() + " lacks parameter " + p.name);
    }
    const auto& e = *it->second;
    std::vector<std::size_t> dims(e.dims.begin(), e.dims.end());
    if (dims != p.tensor.shape().dims()) {
      throw CheckpointError("parameter " + p.name + " has shape " + Shape(dims).str() +
                            " in checkpoint but " + p.tensor.shape().str() + " in model");
    }
    auto dst = p.tensor.mutable_data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<T>(e.values[i]);
  }
  if (entries.size() != params.size()) {
    throw CheckpointError("checkpoint " + path.string() + " has " +
                          std::to_string(entries.size()) + " parameters, model expects " +
                          std::to_string(params.size()));
  }
}

template void save_checkpoint(const std::filesystem::path&, const ParameterList<float>&);
template void save_checkpoint(const std::filesystem::path&, const ParameterList<double>&);
template void load_checkpoint(const std::filesystem::path&, ParameterList<float>&);
template void load_checkpoint(const std::filesystem::path&, ParameterList<double>&);

}  // namespace hprn

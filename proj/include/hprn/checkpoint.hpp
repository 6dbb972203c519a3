#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hprn/binary_io.hpp"
#include "hprn/tensor.hpp"

namespace hprn {

template <typename T>
struct NamedParameter {
  std::string name;
  Tensor<T> tensor;
};

template <typename T>
using ParameterList = std::vector<NamedParameter<T>>;

/// Raw checkpoint entry; values are always stored as 32-bit floats.
struct CheckpointEntry {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<float> values;
};

/// Thrown on malformed checkpoint or state files.
class CheckpointError : public IoError {
 public:
  using IoError::IoError;
};

// Layout (little-endian): "HPRNCKPT", u32 version, u32 count, then per entry:
// u16 name length, name bytes, u8 rank, u32 dims[rank], f32 values.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_checkpoint_entries(const std::filesystem::path& path,
                              const std::vector<CheckpointEntry>& entries);
std::vector<CheckpointEntry> read_checkpoint_entries(const std::filesystem::path& path);

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const ParameterList<T>& params);

/// Loads values into `params` in place. Every parameter must be present with
/// a matching shape; mismatches name the offending parameter.
template <typename T>
void load_checkpoint(const std::filesystem::path& path, ParameterList<T>& params);

}  // namespace hprn

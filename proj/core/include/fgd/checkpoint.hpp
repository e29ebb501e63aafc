#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fgd/tensor.hpp"

namespace fgd {

/// Checkpoint container layout (all integers little-endian):
///
///   magic    8 bytes  "FGDCKPT\0"
///   version  u32      kCheckpointVersion
///   count    u32      number of arrays
///   per array:
///     name_len u32, name bytes (UTF-8, no terminator)
///     rank     u32, rank x u64 extents
///     values   product(extents) x IEEE-754 binary64
inline constexpr char kCheckpointMagic[8] = {'F', 'G', 'D', 'C', 'K', 'P', 'T', '\0'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedArray {
    std::string name;
    Shape shape;
    std::vector<double> values;

    bool operator==(const NamedArray&) const = default;
};

class CheckpointError : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

std::string encode_checkpoint(const std::vector<NamedArray>& arrays);
std::vector<NamedArray> decode_checkpoint(std::string_view bytes);

void write_checkpoint(const std::filesystem::path& path, const std::vector<NamedArray>& arrays);
std::vector<NamedArray> read_checkpoint(const std::filesystem::path& path);

NamedArray snapshot(const Parameter& p);
/// Copies values of arrays whose names match into `params`. Throws
/// CheckpointError for a missing name or a shape mismatch.
void restore(const std::vector<NamedArray>& arrays, const std::vector<Parameter*>& params);

}  // namespace fgd

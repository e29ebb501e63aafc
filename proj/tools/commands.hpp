#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace fgd::cli {

// Exit codes shared by every verb.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailed = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNonFinite = 3;

/// Flags every verb accepts; unset values leave the config file untouched.
struct CommonOptions {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
};

int cmd_train(const CommonOptions& opts);
int cmd_gradcheck(const std::string& scope);

struct MasksOptions {
    std::uint64_t image_seed = 0;
    bool student = false;
    std::string checkpoint;
};
int cmd_masks(const CommonOptions& opts, const MasksOptions& masks);

struct SweepOptions {
    std::string param;
    std::vector<std::string> values;
    bool parallel = false;
};
int cmd_sweep(const CommonOptions& opts, const SweepOptions& sweep);

}  // namespace fgd::cli

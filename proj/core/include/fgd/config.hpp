#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "fgd/losses.hpp"
#include "fgd/scene.hpp"

namespace fgd {

/// Everything one distillation run depends on.
///
/// File form is flat `key = value` lines with `#` comments. `preset` is applied
/// first; explicit alpha/beta/gamma/lambda/temperature keys then override it.
/// A key given twice takes its last value.
struct RunConfig {
    std::string preset = "anchor-one-stage";
    FgdHyperParams hp = hyper_params_preset("anchor-one-stage");
    AblationMode mode = AblationMode::full;
    std::uint64_t seed = 0;

    std::size_t steps = 500;
    std::size_t batch_size = 2;
    std::size_t dataset_size = 8;
    SceneConfig scene;
    std::string box_file;  // optional fixed layout for every scene

    std::size_t teacher_channels = 8;
    std::size_t student_channels = 4;
    std::size_t teacher_pretrain_steps = 300;

    double learning_rate = 0.01;
    double momentum = 0.9;
    double weight_decay = 1e-4;
    std::size_t plateau_window = 100;  // 0 disables learning-rate halving
    double plateau_factor = 0.5;

    std::size_t gc_reduction = 2;
    bool gc_shared = false;
    L1Reduction attention_reduction = L1Reduction::mean;

    std::size_t mask_dump_interval = 100;  // 0: dump only the first and final step
    std::string output_dir = "runs/default";

    void validate() const;
    bool operator==(const RunConfig& other) const;
};

RunConfig parse_config(std::string_view text);
std::string serialize_config(const RunConfig& config);
RunConfig load_config(const std::filesystem::path& path);

/// Applies one `key = value` assignment (used by parsing and by sweeps).
void apply_config_value(RunConfig& config, std::string_view key, std::string_view value);

}  // namespace fgd

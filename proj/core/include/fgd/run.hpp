#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fgd/checkpoint.hpp"
#include "fgd/config.hpp"
#include "fgd/train.hpp"

namespace fgd {

inline constexpr const char* kMetricsHeader = "step,fea_fg,fea_bg,attention,focal,global,task,total";

std::string metrics_row(std::size_t step, const LossReport& r);

/// Teacher, student, task heads and data for one run, built deterministically
/// from a RunConfig.
struct RunSetup {
    std::vector<SyntheticScene> scenes;
    ToyNet teacher;
    TaskHead teacher_task;
    TaskHead student_task;
    TrainState state;
    DistillContext context;  // points into this object; do not copy a RunSetup
    std::size_t batch_size = 1;

    RunSetup(const RunConfig& config);
    RunSetup(const RunSetup&) = delete;
    RunSetup& operator=(const RunSetup&) = delete;

    /// The first batch_size scenes; losses and masks are tracked on it.
    Batch eval_batch() const;
    /// Student + adaptation + GcBlock arrays, then teacher arrays.
    std::vector<NamedArray> checkpoint_arrays();
    /// Inverse of checkpoint_arrays.
    void restore_checkpoint(const std::vector<NamedArray>& arrays);
};

/// Scene layout actually used for a config (applies box_file if set).
SceneConfig resolve_scene_config(const RunConfig& config);

/// Teacher/student attention masks of one image for every level.
struct LevelMaskDump {
    MaskSet teacher;
    Tensor student_spatial;  // H x W; undefined for teacher-only dumps
    Tensor student_channel;  // C
};

std::vector<LevelMaskDump> collect_masks(const RunSetup& setup, const Tensor& image, const BoxSet& boxes,
                                         bool with_student = true);

/// Writes level<l>_{binary,scale,teacher_spatial,student_spatial}.txt, matching
/// .pgm renderings of the spatial masks, and level<l>_{teacher,student}_channel.csv.
void write_mask_dump(const std::filesystem::path& dir, const std::vector<LevelMaskDump>& levels);

/// Mean |A_t^S - A_s^S| over pixels, averaged over levels.
double spatial_attention_gap(const std::vector<LevelMaskDump>& levels);

struct RunResult {
    std::vector<LossReport> history;  // one per optimization step, before the update
    LossReport initial_eval;          // eval batch, before training
    LossReport final_eval;            // eval batch, after training
    double initial_attention_gap = 0;
    double final_attention_gap = 0;
    double final_learning_rate = 0;
};

/// Full training run. Writes artifacts under config.output_dir unless it is empty:
/// metrics.csv, config.txt, checkpoint.bin, final_report.csv and masks/step_<n>/.
/// Throws NonFiniteLoss after writing diagnostic.txt.
RunResult distill_run(const RunConfig& config);

}  // namespace fgd

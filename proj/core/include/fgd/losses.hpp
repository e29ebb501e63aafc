#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fgd/gcblock.hpp"
#include "fgd/masks.hpp"
#include "fgd/tensor.hpp"

namespace fgd {

struct FgdHyperParams {
    double alpha = 1e-3;        // foreground feature weight
    double beta = 5e-4;         // background feature weight
    double gamma = 1e-3;        // attention weight
    double lambda = 5e-6;       // global weight
    double temperature = 0.5;

    void validate() const;
    bool operator==(const FgdHyperParams&) const = default;
};

/// Named presets: "two-stage", "anchor-one-stage", "anchor-free". All use T = 0.5.
FgdHyperParams hyper_params_preset(std::string_view name);
const std::vector<std::string>& preset_names();

/// Itemized losses for one step.
struct LossReport {
    double fea_fg = 0;
    double fea_bg = 0;
    double attention = 0;
    double focal = 0;
    double global_ = 0;
    double total_distill = 0;
    double task = 0;
    double total = 0;

    /// Recomputes focal, total_distill and total from the itemized terms.
    void finalize();
};

enum class AblationMode { fg_only, bg_only, joint_no_split, split, no_spatial_attn, no_channel_attn, full };

AblationMode parse_ablation_mode(std::string_view name);
std::string_view to_string(AblationMode mode);
const std::vector<AblationMode>& all_ablation_modes();

/// Effective weights and mask overrides for one ablation setting.
struct Ablation {
    FgdHyperParams hp;
    bool uniform_spatial = false;  // A^S forced to all ones in the feature loss
    bool uniform_channel = false;  // A^C forced to all ones in the feature loss
};

Ablation ablation_mode(AblationMode mode, const FgdHyperParams& hp);

/// Reduction of the L1 distance between attention masks.
enum class L1Reduction { mean, sum };

L1Reduction parse_l1_reduction(std::string_view name);
std::string_view to_string(L1Reduction r);

/// Mean squared difference over C*H*W, averaged over the batch.
Tensor baseline_loss(const Tensor& teacher, const Tensor& student_adapted);

struct FeatureLoss {
    Tensor fg;
    Tensor bg;
};

/// Mask-weighted squared error, summed over channels and pixels of each image
/// and averaged over the batch. `masks` holds one teacher MaskSet per image.
FeatureLoss feature_loss(const Tensor& teacher, const Tensor& student_adapted, std::span<const MaskSet> masks,
                         double alpha, double beta);

/// gamma * (l(A_t^S, A_s^S) + l(A_t^C, A_s^C)), per image, averaged over the batch.
/// Student masks are N x H x W and N x C.
Tensor attention_loss(std::span<const MaskSet> teacher_masks, const Tensor& student_spatial,
                      const Tensor& student_channel, double gamma, L1Reduction reduction = L1Reduction::mean);

/// lambda * sum (R(F_t) - R(F_s))^2 per image, averaged over the batch.
Tensor global_loss(const Tensor& teacher, const Tensor& student, const GcBlockParams& gc, double lambda);

/// Trainable 1x1 projection of student features onto the teacher's channels.
struct Adaptation {
    Parameter weight;  // C_teacher x C_student
    Parameter bias;    // C_teacher

    /// Identity when square, otherwise uniform in [-1/sqrt(Cs), 1/sqrt(Cs)]; zero bias.
    static Adaptation create(std::size_t student_channels, std::size_t teacher_channels, std::uint64_t seed,
                             const std::string& prefix = "adapt");

    Tensor apply(const Tensor& student) const { return conv1x1(student, weight, bias.tensor); }
    std::vector<Parameter*> parameters() { return {&weight, &bias}; }
};

/// Features of one level for a batch.
struct LevelInput {
    Tensor teacher;              // N x Ct x H x W
    Tensor student;              // N x Cs x H x W
    std::vector<BoxSet> boxes;   // one per image
    LevelGeometry geom;
};

struct FgdOptions {
    L1Reduction attention_reduction = L1Reduction::mean;
};

struct FgdLoss {
    Tensor total;    // task + focal + global
    Tensor distill;  // focal + global
    LossReport report;
};

/// Per level: teacher masks, adapted student features, feature / attention /
/// global terms; summed over levels. `gc` and `adaptation` hold either one
/// entry per level or a single entry shared by all levels.
FgdLoss fgd_total(std::span<const LevelInput> levels, const Ablation& ablation, std::span<const GcBlockParams> gc,
                  std::span<const Adaptation> adaptation, const Tensor& task_loss, const FgdOptions& options = {});

/// Feature map the shared relation block sees for the student: raw when the
/// channel counts agree, adapted otherwise.
Tensor global_student_input(const Tensor& student_raw, const Tensor& student_adapted, std::size_t teacher_channels);

}  // namespace fgd

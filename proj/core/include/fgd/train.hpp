#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "fgd/losses.hpp"
#include "fgd/scene.hpp"
#include "fgd/toynet.hpp"

namespace fgd {

/// SGD with momentum; weight decay is folded into the gradient:
///   v <- momentum * v + (grad + weight_decay * p);  p <- p - lr * v
class Sgd {
   public:
    Sgd(double lr = 0.01, double momentum = 0.9, double weight_decay = 1e-4)
        : lr_(lr), momentum_(momentum), weight_decay_(weight_decay) {}

    /// Applies one update to every parameter and zeroes its gradient.
    void step(const std::vector<Parameter*>& params);

    double learning_rate() const { return lr_; }
    void set_learning_rate(double lr) { lr_ = lr; }

   private:
    double lr_;
    double momentum_;
    double weight_decay_;
    std::map<std::string, std::vector<double>> velocity_;
};

/// Raised when a step produces a NaN or infinite loss.
class NonFiniteLoss : public std::runtime_error {
   public:
    NonFiniteLoss(const std::string& what, LossReport report) : std::runtime_error(what), report_(report) {}
    const LossReport& report() const { return report_; }

   private:
    LossReport report_;
};

/// Everything a distillation run updates.
struct TrainState {
    std::size_t step = 0;
    ToyNet student;
    std::vector<Adaptation> adaptation;  // one per level
    std::vector<GcBlockParams> gc;       // one per level, or one shared
    Sgd optimizer;
    std::uint64_t rng_seed = 0;

    std::vector<Parameter*> parameters();
};

/// Frozen context shared by every step.
struct DistillContext {
    const ToyNet* teacher = nullptr;
    const TaskHead* task = nullptr;
    Ablation ablation;
    FgdOptions options;
};

/// Forward pass of teacher and student plus the full loss, without updating.
FgdLoss compute_losses(const TrainState& state, const DistillContext& ctx, const Batch& batch);

/// One SGD update on the total loss. Throws NonFiniteLoss before touching the
/// parameters when the loss is not finite.
LossReport train_step(TrainState& state, const DistillContext& ctx, const Batch& batch);

/// Per-level feature inputs for fgd_total.
std::vector<LevelInput> level_inputs(const std::vector<Tensor>& teacher, const std::vector<Tensor>& student,
                                     const Batch& batch);

/// Plain task-loss SGD, used to pre-train the teacher before freezing it.
void pretrain(ToyNet& net, const TaskHead& task, const std::vector<SyntheticScene>& scenes, std::size_t batch_size,
              std::size_t steps, Sgd optimizer);

}  // namespace fgd

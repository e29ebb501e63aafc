#include "fgd/train.hpp"

#include <cmath>

namespace fgd {

void Sgd::step(const std::vector<Parameter*>& params) {
    for (Parameter* p : params) {
        auto values = p->tensor.mutable_values();
        auto& v = velocity_[p->name];
        if (v.empty()) v.assign(values.size(), 0.0);
        const bool has_grad = p->tensor.has_grad();
        auto g = p->tensor.grad();
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double grad = (has_grad ? g[i] : 0.0) + weight_decay_ * values[i];
            v[i] = momentum_ * v[i] + grad;
            values[i] -= lr_ * v[i];
        }
        p->zero_grad();
    }
}

std::vector<Parameter*> TrainState::parameters() {
    std::vector<Parameter*> out = student.parameters();
    for (auto& a : adaptation)
        for (auto* p : a.parameters()) out.push_back(p);
    for (auto& g : gc)
        for (auto* p : g.parameters()) out.push_back(p);
    return out;
}

std::vector<LevelInput> level_inputs(const std::vector<Tensor>& teacher, const std::vector<Tensor>& student,
                                     const Batch& batch) {
    if (teacher.size() != student.size()) throw DimensionError("teacher and student level counts differ");
    std::vector<LevelInput> levels;
    for (std::size_t l = 0; l < teacher.size(); ++l) {
        LevelInput in;
        in.teacher = teacher[l];
        in.student = student[l];
        in.boxes = batch.boxes;
        in.geom = LevelGeometry{kLevelStrides.at(l), teacher[l].dim(2), teacher[l].dim(3)};
        levels.push_back(std::move(in));
    }
    return levels;
}

FgdLoss compute_losses(const TrainState& state, const DistillContext& ctx, const Batch& batch) {
    std::vector<Tensor> teacher = ctx.teacher->forward(batch.images);
    std::vector<Tensor> student = state.student.forward(batch.images);
    Tensor task = ctx.task->loss(student.front(), batch.images);
    auto levels = level_inputs(teacher, student, batch);
    return fgd_total(levels, ctx.ablation, state.gc, state.adaptation, task, ctx.options);
}

LossReport train_step(TrainState& state, const DistillContext& ctx, const Batch& batch) {
    FgdLoss loss = compute_losses(state, ctx, batch);
    const LossReport& r = loss.report;
    for (double v : {r.fea_fg, r.fea_bg, r.attention, r.global_, r.task, r.total}) {
        if (!std::isfinite(v)) {
            throw NonFiniteLoss("non-finite loss at step " + std::to_string(state.step), r);
        }
    }
    backward(loss.total);
    state.optimizer.step(state.parameters());
    ++state.step;
    return r;
}

void pretrain(ToyNet& net, const TaskHead& task, const std::vector<SyntheticScene>& scenes, std::size_t batch_size,
              std::size_t steps, Sgd optimizer) {
    auto params = net.parameters();
    for (std::size_t s = 0; s < steps; ++s) {
        Batch batch = make_batch(scenes, s * batch_size, batch_size);
        Tensor loss = task.loss(net.forward(batch.images).front(), batch.images);
        if (!std::isfinite(loss.item())) throw NonFiniteLoss("non-finite teacher pre-training loss", {});
        backward(loss);
        optimizer.step(params);
    }
}

}  // namespace fgd

#include <benchmark/benchmark.h>

#include "fgd/masks.hpp"
#include "fgd/random.hpp"
#include "fgd/run.hpp"

namespace {

fgd::RunConfig bench_config(std::size_t side) {
    fgd::RunConfig c;
    c.preset = "anchor-one-stage";
    c.hp = fgd::hyper_params_preset("anchor-one-stage");
    c.scene.height = side;
    c.scene.width = side;
    c.scene.max_rect_size = side / 2;
    c.batch_size = 2;
    c.dataset_size = 4;
    c.teacher_channels = 8;
    c.student_channels = 4;
    c.teacher_pretrain_steps = 0;
    return c;
}

void BM_BuildMasks(benchmark::State& state) {
    const auto side = static_cast<std::size_t>(state.range(0));
    const std::size_t channels = 16;
    fgd::Rng rng(1);
    fgd::Tensor features = fgd::Tensor::from_values({1, channels, side, side},
                                                    rng.uniform_vector(channels * side * side, -1.0, 1.0));
    fgd::BoxSet boxes{{}, side * 4, side * 4};
    for (int i = 0; i < 6; ++i) {
        const double x = rng.uniform(0.0, side * 3.0), y = rng.uniform(0.0, side * 3.0);
        boxes.boxes.push_back({x, y, x + rng.uniform(2.0, side), y + rng.uniform(2.0, side)});
    }
    const fgd::LevelGeometry geom{4, side, side};
    for (auto _ : state) benchmark::DoNotOptimize(fgd::build_masks(features, boxes, geom, 0.5));
}
BENCHMARK(BM_BuildMasks)->Arg(8)->Arg(16)->Arg(32);

void BM_FgdTotalForwardBackward(benchmark::State& state) {
    fgd::RunSetup setup(bench_config(static_cast<std::size_t>(state.range(0))));
    const fgd::Batch batch = setup.eval_batch();
    for (auto _ : state) {
        fgd::FgdLoss loss = fgd::compute_losses(setup.state, setup.context, batch);
        fgd::backward(loss.total);
        for (fgd::Parameter* p : setup.state.parameters()) p->zero_grad();
    }
}
BENCHMARK(BM_FgdTotalForwardBackward)->Arg(16)->Arg(32)->Unit(benchmark::kMicrosecond);

void BM_TrainStep(benchmark::State& state) {
    fgd::RunSetup setup(bench_config(static_cast<std::size_t>(state.range(0))));
    std::size_t step = 0;
    for (auto _ : state) {
        fgd::Batch batch = fgd::make_batch(setup.scenes, step++ * setup.batch_size, setup.batch_size);
        benchmark::DoNotOptimize(fgd::train_step(setup.state, setup.context, batch));
    }
}
BENCHMARK(BM_TrainStep)->Arg(16)->Arg(32)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();

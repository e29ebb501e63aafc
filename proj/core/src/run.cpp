#include "fgd/run.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <cstdio>
#include <iostream>
#include <memory>

#include "fgd/random.hpp"
#include "fgd/textio.hpp"

namespace fgd {

namespace {

// Stream tags for mix_seed, so each component draws from its own sequence.
enum SeedTag : std::uint64_t {
    kTeacherNet = 1,
    kStudentNet = 2,
    kTeacherTask = 3,
    kStudentTask = 4,
    kAdaptation = 10,
    kGcBlock = 20,
    kScenes = 100,
};

std::string step_dir(std::size_t step) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "step_%06zu", step);
    return buf;
}

std::string report_csv(const LossReport& initial, const LossReport& final_report) {
    std::string out = std::string("phase,") + (kMetricsHeader + 5) + "\n";
    auto row = [](const char* phase, const LossReport& r) {
        std::string line = metrics_row(0, r);
        return std::string(phase) + line.substr(line.find(',')) + "\n";
    };
    return out + row("initial", initial) + row("final", final_report);
}

}  // namespace

std::string metrics_row(std::size_t step, const LossReport& r) {
    std::string s = std::to_string(step);
    for (double v : {r.fea_fg, r.fea_bg, r.attention, r.focal, r.global_, r.task, r.total}) {
        s += ',';
        s += format_double(v);
    }
    return s;
}

SceneConfig resolve_scene_config(const RunConfig& config) {
    SceneConfig scene = config.scene;
    if (!config.box_file.empty()) {
        BoxSet boxes = read_box_file(config.box_file);
        if (boxes.image_height != scene.height || boxes.image_width != scene.width) {
            throw ConfigError("box file image size does not match image_height/image_width");
        }
        scene.fixed_boxes = boxes.boxes;
    }
    return scene;
}

RunSetup::RunSetup(const RunConfig& config)
    : teacher(ToyNet::create(config.teacher_channels, mix_seed(config.seed, kTeacherNet), "teacher")),
      teacher_task(config.teacher_channels, mix_seed(config.seed, kTeacherTask)),
      student_task(config.student_channels, mix_seed(config.seed, kStudentTask)) {
    config.validate();
    batch_size = config.batch_size;
    const SceneConfig scene = resolve_scene_config(config);
    for (std::size_t i = 0; i < config.dataset_size; ++i) {
        scenes.push_back(generate_scene(scene, mix_seed(config.seed, kScenes + i)));
    }

    pretrain(teacher, teacher_task, scenes, config.batch_size, config.teacher_pretrain_steps,
             Sgd(config.learning_rate, config.momentum, config.weight_decay));
    teacher.freeze();

    state.student = ToyNet::create(config.student_channels, mix_seed(config.seed, kStudentNet), "student");
    for (std::size_t l = 0; l < kLevelStrides.size(); ++l) {
        state.adaptation.push_back(Adaptation::create(config.student_channels, config.teacher_channels,
                                                      mix_seed(config.seed, kAdaptation + l),
                                                      "adapt" + std::to_string(l)));
    }
    const std::size_t blocks = config.gc_shared ? 1 : kLevelStrides.size();
    for (std::size_t l = 0; l < blocks; ++l) {
        state.gc.push_back(GcBlockParams::create(config.teacher_channels, config.gc_reduction,
                                                 mix_seed(config.seed, kGcBlock + l),
                                                 config.gc_shared ? "gc" : "gc" + std::to_string(l)));
    }
    state.optimizer = Sgd(config.learning_rate, config.momentum, config.weight_decay);
    state.rng_seed = config.seed;

    context.teacher = &teacher;
    context.task = &student_task;
    context.ablation = ablation_mode(config.mode, config.hp);
    context.options.attention_reduction = config.attention_reduction;
}

Batch RunSetup::eval_batch() const { return make_batch(scenes, 0, batch_size); }

std::vector<NamedArray> RunSetup::checkpoint_arrays() {
    std::vector<NamedArray> out;
    for (Parameter* p : state.parameters()) out.push_back(snapshot(*p));
    for (const Parameter* p : teacher.parameters()) out.push_back(snapshot(*p));
    return out;
}

void RunSetup::restore_checkpoint(const std::vector<NamedArray>& arrays) {
    std::vector<Parameter*> params = state.parameters();
    for (Parameter* p : teacher.parameters()) params.push_back(p);
    restore(arrays, params);
}

std::vector<LevelMaskDump> collect_masks(const RunSetup& setup, const Tensor& image, const BoxSet& boxes,
                                         bool with_student) {
    const Shape& s = image.shape();
    Tensor batch = reshape(image.detach(), {1, s[0], s[1], s[2]});
    auto teacher = setup.teacher.forward(batch);
    auto student = setup.state.student.forward(batch);
    const double t = setup.context.ablation.hp.temperature;

    std::vector<LevelMaskDump> out;
    for (std::size_t l = 0; l < teacher.size(); ++l) {
        const std::size_t h = teacher[l].dim(2), w = teacher[l].dim(3);
        const Adaptation& adapt = setup.state.adaptation.at(l);
        LevelMaskDump dump;
        dump.teacher = build_masks(teacher[l], boxes, LevelGeometry{kLevelStrides[l], h, w}, t);
        if (!with_student) {
            out.push_back(std::move(dump));
            continue;
        }
        auto [spatial, channel] = feature_attention(adapt.apply(student[l]).detach(), t);
        dump.student_spatial = reshape(spatial, {h, w});
        dump.student_channel = reshape(channel, {channel.dim(1)});
        out.push_back(std::move(dump));
    }
    return out;
}

void write_mask_dump(const std::filesystem::path& dir, const std::vector<LevelMaskDump>& levels) {
    auto channel_csv = [](const Tensor& t) {
        std::string s = "channel,value\n";
        for (std::size_t k = 0; k < t.numel(); ++k) s += std::to_string(k) + "," + format_double(t[k]) + "\n";
        return s;
    };
    for (std::size_t l = 0; l < levels.size(); ++l) {
        const auto& d = levels[l];
        const std::size_t h = d.teacher.height(), w = d.teacher.width();
        const std::string p = "level" + std::to_string(l) + "_";
        write_file_atomic(dir / (p + "binary.txt"), format_grid(d.teacher.binary.values(), h, w));
        write_file_atomic(dir / (p + "scale.txt"), format_grid(d.teacher.scale.values(), h, w));
        write_file_atomic(dir / (p + "teacher_spatial.txt"), format_grid(d.teacher.spatial_attn.values(), h, w));
        write_file_atomic(dir / (p + "teacher_spatial.pgm"), format_pgm(d.teacher.spatial_attn.values(), h, w));
        write_file_atomic(dir / (p + "teacher_channel.csv"), channel_csv(d.teacher.channel_attn));
        if (!d.student_spatial.defined()) continue;
        write_file_atomic(dir / (p + "student_spatial.txt"), format_grid(d.student_spatial.values(), h, w));
        write_file_atomic(dir / (p + "student_spatial.pgm"), format_pgm(d.student_spatial.values(), h, w));
        write_file_atomic(dir / (p + "student_channel.csv"), channel_csv(d.student_channel));
    }
}

double spatial_attention_gap(const std::vector<LevelMaskDump>& levels) {
    if (levels.empty()) return 0.0;
    double total = 0.0;
    for (const auto& d : levels) {
        auto t = d.teacher.spatial_attn.values(), s = d.student_spatial.values();
        double acc = 0.0;
        for (std::size_t i = 0; i < t.size(); ++i) acc += std::abs(t[i] - s[i]);
        total += acc / static_cast<double>(t.size());
    }
    return total / static_cast<double>(levels.size());
}

RunResult distill_run(const RunConfig& config) {
    config.validate();
    const bool write = !config.output_dir.empty();
    const std::filesystem::path out_dir = config.output_dir;
    if (write) {
        std::filesystem::create_directories(out_dir);
        write_file_atomic(out_dir / "config.txt", serialize_config(config));
    }

    auto write_diagnostic = [&](const std::string& body, double learning_rate) {
        if (write) {
            write_file_atomic(out_dir / "diagnostic.txt",
                              body + "\nlearning_rate," + format_double(learning_rate) + "\n");
        }
    };

    std::unique_ptr<RunSetup> owned;
    try {
        owned = std::make_unique<RunSetup>(config);
    } catch (const NonFiniteLoss& e) {
        write_diagnostic(e.what(), config.learning_rate);
        throw;
    }
    RunSetup& setup = *owned;
    const Batch eval = setup.eval_batch();
    const SyntheticScene& probe = setup.scenes.front();

    RunResult result;
    std::string metrics = std::string(kMetricsHeader) + "\n";
    auto flush_metrics = [&] {
        if (write) write_file_atomic(out_dir / "metrics.csv", metrics);
    };
    auto dump_masks = [&](std::size_t step) {
        auto levels = collect_masks(setup, probe.image, probe.boxes);
        if (write) write_mask_dump(out_dir / "masks" / step_dir(step), levels);
        return spatial_attention_gap(levels);
    };

    result.initial_eval = compute_losses(setup.state, setup.context, eval).report;
    result.initial_attention_gap = dump_masks(0);
    spdlog::debug("initial eval: total_distill={} task={}", result.initial_eval.total_distill,
                  result.initial_eval.task);

    double window_sum = 0.0, previous_window = -1.0;
    for (std::size_t step = 0; step < config.steps; ++step) {
        Batch batch = make_batch(setup.scenes, step * config.batch_size, config.batch_size);
        LossReport report;
        try {
            report = train_step(setup.state, setup.context, batch);
        } catch (const NonFiniteLoss& e) {
            flush_metrics();
            write_diagnostic(std::string(e.what()) + "\n" + kMetricsHeader + "\n" + metrics_row(step, e.report()),
                             setup.state.optimizer.learning_rate());
            throw;
        }
        result.history.push_back(report);
        metrics += metrics_row(step, report) + "\n";

        if (config.plateau_window > 0) {
            window_sum += report.total;
            if ((step + 1) % config.plateau_window == 0) {
                const double mean_total = window_sum / static_cast<double>(config.plateau_window);
                if (previous_window >= 0.0 && mean_total >= previous_window * (1.0 - 1e-3)) {
                    setup.state.optimizer.set_learning_rate(setup.state.optimizer.learning_rate() *
                                                            config.plateau_factor);
                    spdlog::debug("step {}: loss plateau, learning rate -> {}", step + 1,
                                  setup.state.optimizer.learning_rate());
                }
                previous_window = mean_total;
                window_sum = 0.0;
            }
        }

        const std::size_t done = step + 1;
        if (config.mask_dump_interval > 0 && done % config.mask_dump_interval == 0 && done != config.steps) {
            dump_masks(done);
            flush_metrics();
        }
        if (done % 100 == 0 || done == config.steps) {
            std::cout << "step " << done << "/" << config.steps << " total=" << format_double(report.total)
                      << " distill=" << format_double(report.total_distill) << std::endl;
        }
    }

    result.final_eval = compute_losses(setup.state, setup.context, eval).report;
    result.final_attention_gap = config.steps > 0 ? dump_masks(config.steps) : result.initial_attention_gap;
    result.final_learning_rate = setup.state.optimizer.learning_rate();
    flush_metrics();
    if (write) {
        write_checkpoint(out_dir / "checkpoint.bin", setup.checkpoint_arrays());
        write_file_atomic(out_dir / "final_report.csv", report_csv(result.initial_eval, result.final_eval));
    }
    return result;
}

}  // namespace fgd

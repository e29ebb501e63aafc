#include "commands.hpp"

#include <spdlog/spdlog.h>

#include <filesystem>
#include <iostream>
#include <thread>

#include "fgd/checkpoint.hpp"
#include "fgd/errors.hpp"
#include "fgd/gradcheck_suite.hpp"
#include "fgd/run.hpp"
#include "fgd/textio.hpp"

namespace fgd::cli {

namespace {

RunConfig load_with_overrides(const CommonOptions& opts) {
    if (opts.config_path.empty()) throw ConfigError("--config is required");
    RunConfig c = load_config(opts.config_path);
    if (opts.seed) c.seed = *opts.seed;
    if (opts.out) c.output_dir = *opts.out;
    return c;
}

std::string summary_row(const std::string& value, const LossReport& r) {
    std::string row = metrics_row(0, r);
    return value + row.substr(row.find(','));
}

}  // namespace

int cmd_train(const CommonOptions& opts) {
    RunConfig config;
    try {
        config = load_with_overrides(opts);
    } catch (const ConfigError& e) {
        spdlog::error("invalid config: {}", e.what());
        return kExitUsage;
    }
    try {
        distill_run(config);
    } catch (const NonFiniteLoss& e) {
        spdlog::error("{}", e.what());
        return kExitNonFinite;
    } catch (const ConfigError& e) {
        spdlog::error("invalid config: {}", e.what());
        return kExitUsage;
    }
    spdlog::info("wrote {}", config.output_dir);
    return kExitOk;
}

int cmd_gradcheck(const std::string& scope_name) {
    GradcheckScope scope;
    try {
        scope = parse_gradcheck_scope(scope_name);
    } catch (const ParameterError& e) {
        spdlog::error("{}", e.what());
        return kExitUsage;
    }
    std::vector<std::string> failed;
    for (const GradcheckResult& r : run_gradcheck_suite(scope)) {
        std::cout << format_gradcheck_line(r) << '\n';
        if (!r.passed) failed.push_back(r.name);
    }
    std::cout.flush();
    if (failed.empty()) return kExitOk;
    for (const auto& name : failed) spdlog::error("gradcheck failed: {}", name);
    return kExitFailed;
}

int cmd_masks(const CommonOptions& opts, const MasksOptions& masks) {
    RunConfig config;
    try {
        config = load_with_overrides(opts);
    } catch (const ConfigError& e) {
        spdlog::error("invalid config: {}", e.what());
        return kExitUsage;
    }
    if (masks.student && masks.checkpoint.empty()) {
        spdlog::error("student masks need --checkpoint");
        return kExitUsage;
    }
    if (!masks.checkpoint.empty() && !std::filesystem::exists(masks.checkpoint)) {
        spdlog::error("checkpoint not found: {}", masks.checkpoint);
        return kExitUsage;
    }

    try {
        RunSetup setup(config);
        if (!masks.checkpoint.empty()) setup.restore_checkpoint(read_checkpoint(masks.checkpoint));
        const SyntheticScene scene = generate_scene(resolve_scene_config(config), masks.image_seed);
        auto levels = collect_masks(setup, scene.image, scene.boxes, masks.student);
        const std::filesystem::path dir = config.output_dir;
        write_mask_dump(dir, levels);
        write_file_atomic(dir / "boxes.txt", format_box_file(scene.boxes));
        std::cout << "wrote " << levels.size() << " levels to " << dir.string() << std::endl;
    } catch (const ConfigError& e) {
        spdlog::error("invalid config: {}", e.what());
        return kExitUsage;
    } catch (const CheckpointError& e) {
        spdlog::error("bad checkpoint: {}", e.what());
        return kExitUsage;
    }
    return kExitOk;
}

int cmd_sweep(const CommonOptions& opts, const SweepOptions& sweep) {
    static const std::vector<std::string> kParams{"temperature", "alpha", "beta", "gamma", "lambda"};
    if (std::find(kParams.begin(), kParams.end(), sweep.param) == kParams.end()) {
        spdlog::error("cannot sweep '{}'; expected temperature, alpha, beta, gamma or lambda", sweep.param);
        return kExitUsage;
    }
    if (sweep.values.empty()) {
        spdlog::error("empty value list");
        return kExitUsage;
    }

    RunConfig base;
    std::vector<RunConfig> configs;
    try {
        base = load_with_overrides(opts);
        for (const auto& v : sweep.values) {
            RunConfig c = base;
            apply_config_value(c, sweep.param, v);
            c.validate();
            c.output_dir = (std::filesystem::path(base.output_dir) / (sweep.param + "_" + v)).string();
            configs.push_back(std::move(c));
        }
    } catch (const ConfigError& e) {
        spdlog::error("invalid sweep: {}", e.what());
        return kExitUsage;
    }

    std::vector<std::optional<RunResult>> results(configs.size());
    std::vector<std::string> errors(configs.size());
    auto run_one = [&](std::size_t i) {
        try {
            results[i] = distill_run(configs[i]);
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    };
    if (sweep.parallel) {
        std::vector<std::jthread> workers;
        for (std::size_t i = 0; i < configs.size(); ++i) workers.emplace_back(run_one, i);
    } else {
        for (std::size_t i = 0; i < configs.size(); ++i) run_one(i);
    }

    std::string summary = sweep.param + std::string(kMetricsHeader).substr(4) + "\n";
    int code = kExitOk;
    for (std::size_t i = 0; i < configs.size(); ++i) {
        if (!results[i]) {
            spdlog::error("{}={} failed: {}", sweep.param, sweep.values[i], errors[i]);
            code = kExitNonFinite;
            continue;
        }
        summary += summary_row(sweep.values[i], results[i]->final_eval) + "\n";
    }
    write_file_atomic(std::filesystem::path(base.output_dir) / "summary.csv", summary);
    return code;
}

}  // namespace fgd::cli

// fgd: train, gradcheck, masks and sweep verbs over the distillation toolkit.

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <cstdlib>
#include <string>

#include "commands.hpp"

namespace {

void setup_logging() {
    auto logger = spdlog::stderr_color_mt("fgd");
    logger->set_pattern("[%l] %v");
    spdlog::set_default_logger(logger);
    spdlog::set_level(spdlog::level::info);
    if (const char* env = std::getenv("FGD_LOG_LEVEL")) {
        const std::string level = env;
        if (level == "error") {
            spdlog::set_level(spdlog::level::err);
        } else if (level == "debug") {
            spdlog::set_level(spdlog::level::debug);
        } else if (level != "info") {
            spdlog::warn("FGD_LOG_LEVEL='{}' not recognised, using info", level);
        }
    }
}

void add_common(CLI::App* cmd, fgd::cli::CommonOptions& opts) {
    cmd->add_option("--config", opts.config_path, "run config file")->required();
    cmd->add_option("--seed", opts.seed, "override the config seed");
    cmd->add_option("--out", opts.out, "override the output directory");
}

}  // namespace

int main(int argc, char** argv) {
    setup_logging();

    CLI::App app{"Focal and global feature distillation on a toy detector"};
    app.require_subcommand(1);

    fgd::cli::CommonOptions common;
    std::string scope = "all";
    fgd::cli::MasksOptions masks;
    fgd::cli::SweepOptions sweep;

    auto* train = app.add_subcommand("train", "run one distillation job");
    add_common(train, common);

    auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient checks");
    gradcheck->add_option("--scope", scope, "ops, masks, gcblock, losses or all");

    auto* masks_cmd = app.add_subcommand("masks", "dump attention and box masks of one scene");
    add_common(masks_cmd, common);
    masks_cmd->add_option("--image-seed", masks.image_seed, "seed of the generated scene");
    masks_cmd->add_flag("--student", masks.student, "also dump student masks (needs --checkpoint)");
    masks_cmd->add_option("--checkpoint", masks.checkpoint, "checkpoint.bin written by train");

    auto* sweep_cmd = app.add_subcommand("sweep", "one run per value of a loss hyper-parameter");
    add_common(sweep_cmd, common);
    sweep_cmd->add_option("--param", sweep.param, "temperature, alpha, beta, gamma or lambda")->required();
    sweep_cmd->add_option("--values", sweep.values, "comma-separated values")->delimiter(',');
    sweep_cmd->add_flag("--parallel", sweep.parallel, "run values concurrently");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : fgd::cli::kExitUsage;
    }

    if (*train) return fgd::cli::cmd_train(common);
    if (*gradcheck) return fgd::cli::cmd_gradcheck(scope);
    if (*masks_cmd) return fgd::cli::cmd_masks(common, masks);
    return fgd::cli::cmd_sweep(common, sweep);
}

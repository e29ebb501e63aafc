#include "fgd/config.hpp"

#include <map>
#include <sstream>

#include "fgd/textio.hpp"

namespace fgd {

namespace {

bool parse_bool(std::string_view v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("not a boolean: '" + std::string(v) + "'");
}

std::size_t as_size(std::string_view v) { return static_cast<std::size_t>(parse_uint(v)); }

}  // namespace

void RunConfig::validate() const {
    try {
        hp.validate();
        scene.validate();
    } catch (const ParameterError& e) {
        throw ConfigError(e.what());
    }
    if (batch_size == 0 || dataset_size == 0) throw ConfigError("batch_size and dataset_size must be positive");
    if (teacher_channels == 0 || student_channels == 0) throw ConfigError("channel counts must be positive");
    if (scene.height % 4 != 0 || scene.width % 4 != 0) throw ConfigError("image dims must be divisible by 4");
    if (!(learning_rate >= 0.0)) throw ConfigError("learning_rate must be non-negative");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
    if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be non-negative");
    if (!(plateau_factor > 0.0 && plateau_factor <= 1.0)) throw ConfigError("plateau_factor must lie in (0, 1]");
    if (gc_reduction == 0) throw ConfigError("gc_reduction must be positive");
}

bool RunConfig::operator==(const RunConfig& o) const {
    return preset == o.preset && hp == o.hp && mode == o.mode && seed == o.seed && steps == o.steps &&
           batch_size == o.batch_size && dataset_size == o.dataset_size && scene == o.scene &&
           box_file == o.box_file && teacher_channels == o.teacher_channels &&
           student_channels == o.student_channels && teacher_pretrain_steps == o.teacher_pretrain_steps &&
           learning_rate == o.learning_rate && momentum == o.momentum && weight_decay == o.weight_decay &&
           plateau_window == o.plateau_window && plateau_factor == o.plateau_factor &&
           gc_reduction == o.gc_reduction && gc_shared == o.gc_shared &&
           attention_reduction == o.attention_reduction && mask_dump_interval == o.mask_dump_interval &&
           output_dir == o.output_dir;
}

void apply_config_value(RunConfig& c, std::string_view key, std::string_view value) {
    try {
        if (key == "preset") {
            const double t = c.hp.temperature;
            c.hp = hyper_params_preset(value);
            c.hp.temperature = t;
            c.preset = std::string(value);
        } else if (key == "alpha") {
            c.hp.alpha = parse_double(value);
        } else if (key == "beta") {
            c.hp.beta = parse_double(value);
        } else if (key == "gamma") {
            c.hp.gamma = parse_double(value);
        } else if (key == "lambda") {
            c.hp.lambda = parse_double(value);
        } else if (key == "temperature") {
            c.hp.temperature = parse_double(value);
        } else if (key == "mode") {
            c.mode = parse_ablation_mode(value);
        } else if (key == "seed") {
            c.seed = parse_uint(value);
        } else if (key == "steps") {
            c.steps = as_size(value);
        } else if (key == "batch_size") {
            c.batch_size = as_size(value);
        } else if (key == "dataset_size") {
            c.dataset_size = as_size(value);
        } else if (key == "image_height") {
            c.scene.height = as_size(value);
        } else if (key == "image_width") {
            c.scene.width = as_size(value);
        } else if (key == "min_rects") {
            c.scene.min_rects = as_size(value);
        } else if (key == "max_rects") {
            c.scene.max_rects = as_size(value);
        } else if (key == "min_rect_size") {
            c.scene.min_rect_size = as_size(value);
        } else if (key == "max_rect_size") {
            c.scene.max_rect_size = as_size(value);
        } else if (key == "background") {
            c.scene.background = parse_double(value);
        } else if (key == "contrast") {
            c.scene.contrast = parse_double(value);
        } else if (key == "noise") {
            c.scene.noise = parse_double(value);
        } else if (key == "box_file") {
            c.box_file = std::string(value);
        } else if (key == "teacher_channels") {
            c.teacher_channels = as_size(value);
        } else if (key == "student_channels") {
            c.student_channels = as_size(value);
        } else if (key == "teacher_pretrain_steps") {
            c.teacher_pretrain_steps = as_size(value);
        } else if (key == "learning_rate") {
            c.learning_rate = parse_double(value);
        } else if (key == "momentum") {
            c.momentum = parse_double(value);
        } else if (key == "weight_decay") {
            c.weight_decay = parse_double(value);
        } else if (key == "plateau_window") {
            c.plateau_window = as_size(value);
        } else if (key == "plateau_factor") {
            c.plateau_factor = parse_double(value);
        } else if (key == "gc_reduction") {
            c.gc_reduction = as_size(value);
        } else if (key == "gc_shared") {
            c.gc_shared = parse_bool(value);
        } else if (key == "attention_reduction") {
            c.attention_reduction = parse_l1_reduction(value);
        } else if (key == "mask_dump_interval") {
            c.mask_dump_interval = as_size(value);
        } else if (key == "output_dir") {
            c.output_dir = std::string(value);
        } else {
            throw ConfigError("unknown config key '" + std::string(key) + "'");
        }
    } catch (const ParameterError& e) {
        throw ConfigError(std::string(key) + ": " + e.what());
    }
}

RunConfig parse_config(std::string_view text) {
    std::vector<std::pair<std::string, std::string>> entries;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        auto body = trim(std::string_view(line).substr(0, hash));
        if (body.empty()) continue;
        auto eq = body.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
        }
        entries.emplace_back(std::string(trim(body.substr(0, eq))), std::string(trim(body.substr(eq + 1))));
    }

    RunConfig c;
    // Preset first so explicit weights override it regardless of line order.
    for (const auto& [k, v] : entries) {
        if (k == "preset") apply_config_value(c, k, v);
    }
    for (const auto& [k, v] : entries) {
        if (k != "preset") apply_config_value(c, k, v);
    }
    c.validate();
    return c;
}

std::string serialize_config(const RunConfig& c) {
    std::ostringstream out;
    auto kv = [&](std::string_view k, const std::string& v) { out << k << " = " << v << '\n'; };
    auto num = [&](std::string_view k, double v) { kv(k, format_double(v)); };
    auto sz = [&](std::string_view k, std::uint64_t v) { kv(k, std::to_string(v)); };

    kv("preset", c.preset);
    num("alpha", c.hp.alpha);
    num("beta", c.hp.beta);
    num("gamma", c.hp.gamma);
    num("lambda", c.hp.lambda);
    num("temperature", c.hp.temperature);
    kv("mode", std::string(to_string(c.mode)));
    sz("seed", c.seed);
    sz("steps", c.steps);
    sz("batch_size", c.batch_size);
    sz("dataset_size", c.dataset_size);
    sz("image_height", c.scene.height);
    sz("image_width", c.scene.width);
    sz("min_rects", c.scene.min_rects);
    sz("max_rects", c.scene.max_rects);
    sz("min_rect_size", c.scene.min_rect_size);
    sz("max_rect_size", c.scene.max_rect_size);
    num("background", c.scene.background);
    num("contrast", c.scene.contrast);
    num("noise", c.scene.noise);
    if (!c.box_file.empty()) kv("box_file", c.box_file);
    sz("teacher_channels", c.teacher_channels);
    sz("student_channels", c.student_channels);
    sz("teacher_pretrain_steps", c.teacher_pretrain_steps);
    num("learning_rate", c.learning_rate);
    num("momentum", c.momentum);
    num("weight_decay", c.weight_decay);
    sz("plateau_window", c.plateau_window);
    num("plateau_factor", c.plateau_factor);
    sz("gc_reduction", c.gc_reduction);
    kv("gc_shared", c.gc_shared ? "true" : "false");
    kv("attention_reduction", std::string(to_string(c.attention_reduction)));
    sz("mask_dump_interval", c.mask_dump_interval);
    kv("output_dir", c.output_dir);
    return out.str();
}

RunConfig load_config(const std::filesystem::path& path) {
    std::string text;
    try {
        text = read_file(path);
    } catch (const std::runtime_error&) {
        throw ConfigError("cannot read config file " + path.string());
    }
    return parse_config(text);
}

}  // namespace fgd

#include "fgd/scene.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "fgd/random.hpp"
#include "fgd/textio.hpp"

namespace fgd {

namespace {

constexpr std::size_t kImageChannels = 3;
constexpr int kPlacementAttempts = 200;

bool pixel_in_box(const Box& b, std::size_t r, std::size_t c) {
    const double x = static_cast<double>(c) + 0.5, y = static_cast<double>(r) + 0.5;
    return x >= b.x1 && x < b.x2 && y >= b.y1 && y < b.y2;
}

bool overlaps(const Box& a, const Box& b) { return a.x1 < b.x2 && b.x1 < a.x2 && a.y1 < b.y2 && b.y1 < a.y2; }

}  // namespace

void SceneConfig::validate() const {
    if (height == 0 || width == 0) throw ConfigError("scene dimensions must be positive");
    if (min_rects > max_rects) throw ConfigError("min_rects exceeds max_rects");
    if (max_rects > 4) throw ConfigError("at most 4 rectangles per scene");
    if (min_rect_size == 0 || min_rect_size > max_rect_size) throw ConfigError("invalid rectangle size range");
    if (max_rects > 0 && fixed_boxes.empty() && (max_rect_size > height || max_rect_size > width)) {
        throw ConfigError("rectangle size " + std::to_string(max_rect_size) + " exceeds image bounds");
    }
    if (!(noise >= 0.0)) throw ConfigError("noise amplitude must be non-negative");
    for (const Box& b : fixed_boxes) {
        if (!(b.x1 < b.x2 && b.y1 < b.y2)) throw ConfigError("degenerate box in scene layout");
        if (b.x1 < 0 || b.y1 < 0 || b.x2 > static_cast<double>(width) || b.y2 > static_cast<double>(height)) {
            throw ConfigError("box lies outside the image bounds");
        }
    }
    for (std::size_t i = 0; i < fixed_boxes.size(); ++i)
        for (std::size_t j = i + 1; j < fixed_boxes.size(); ++j)
            if (overlaps(fixed_boxes[i], fixed_boxes[j])) throw ConfigError("scene boxes must not overlap");
}

bool SceneConfig::operator==(const SceneConfig& o) const {
    if (fixed_boxes.size() != o.fixed_boxes.size()) return false;
    for (std::size_t i = 0; i < fixed_boxes.size(); ++i) {
        const Box &a = fixed_boxes[i], &b = o.fixed_boxes[i];
        if (a.x1 != b.x1 || a.y1 != b.y1 || a.x2 != b.x2 || a.y2 != b.y2) return false;
    }
    return height == o.height && width == o.width && min_rects == o.min_rects && max_rects == o.max_rects &&
           min_rect_size == o.min_rect_size && max_rect_size == o.max_rect_size && background == o.background &&
           contrast == o.contrast && noise == o.noise;
}

SyntheticScene generate_scene(const SceneConfig& config, std::uint64_t seed) {
    config.validate();
    Rng rng(seed);
    const std::size_t h = config.height, w = config.width;

    std::vector<Box> boxes = config.fixed_boxes;
    if (boxes.empty() && config.max_rects > 0) {
        const auto target = static_cast<std::size_t>(
            rng.integer(static_cast<std::int64_t>(config.min_rects), static_cast<std::int64_t>(config.max_rects)));
        for (int attempt = 0; attempt < kPlacementAttempts && boxes.size() < target; ++attempt) {
            const auto lo = static_cast<std::int64_t>(config.min_rect_size);
            const auto hi = static_cast<std::int64_t>(config.max_rect_size);
            const auto bh = rng.integer(lo, hi), bw = rng.integer(lo, hi);
            const auto y = rng.integer(0, static_cast<std::int64_t>(h) - bh);
            const auto x = rng.integer(0, static_cast<std::int64_t>(w) - bw);
            Box b{static_cast<double>(x), static_cast<double>(y), static_cast<double>(x + bw),
                  static_cast<double>(y + bh)};
            bool clash = false;
            for (const Box& other : boxes) clash = clash || overlaps(b, other);
            if (!clash) boxes.push_back(b);
        }
        if (boxes.size() < config.min_rects) {
            throw ConfigError("could not place " + std::to_string(config.min_rects) + " non-overlapping rectangles");
        }
    }

    std::vector<double> px(kImageChannels * h * w);
    for (auto& v : px) v = config.background + rng.uniform(-config.noise, config.noise);
    for (const Box& b : boxes) {
        // Per-channel colour with channel mean 1, so the painted mean sits `contrast` above background.
        double colour[kImageChannels];
        double total = 0.0;
        for (auto& c : colour) total += (c = rng.uniform(0.5, 1.5));
        for (auto& c : colour) c *= static_cast<double>(kImageChannels) / total;
        for (std::size_t r = 0; r < h; ++r)
            for (std::size_t c = 0; c < w; ++c) {
                if (!pixel_in_box(b, r, c)) continue;
                for (std::size_t k = 0; k < kImageChannels; ++k) {
                    px[(k * h + r) * w + c] =
                        config.background + config.contrast * colour[k] + rng.uniform(-config.noise, config.noise);
                }
            }
    }

    SyntheticScene scene;
    scene.image = Tensor::from_values({kImageChannels, h, w}, std::move(px));
    scene.boxes.boxes = std::move(boxes);
    scene.boxes.image_height = h;
    scene.boxes.image_width = w;
    scene.seed = seed;
    return scene;
}

Batch make_batch(const std::vector<SyntheticScene>& scenes, std::size_t first, std::size_t count) {
    if (scenes.empty() || count == 0) throw DimensionError("make_batch: empty batch");
    const Shape& s = scenes.front().image.shape();
    std::vector<double> px;
    px.reserve(count * shape_numel(s));
    Batch batch;
    for (std::size_t i = 0; i < count; ++i) {
        const SyntheticScene& scene = scenes[(first + i) % scenes.size()];
        if (scene.image.shape() != s) throw DimensionError("make_batch: scenes differ in size");
        px.insert(px.end(), scene.image.values().begin(), scene.image.values().end());
        batch.boxes.push_back(scene.boxes);
    }
    batch.images = Tensor::from_values({count, s[0], s[1], s[2]}, std::move(px));
    return batch;
}

BoxSet read_box_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open box file " + path.string());
    BoxSet set;
    std::string line;
    bool header = false;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto trimmed = trim(line);
        if (trimmed.empty() || trimmed.front() == '#') continue;
        std::istringstream fields{std::string(trimmed)};
        if (!header) {
            if (!(fields >> set.image_height >> set.image_width)) {
                throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected 'height width'");
            }
            header = true;
            continue;
        }
        Box b;
        if (!(fields >> b.x1 >> b.y1 >> b.x2 >> b.y2)) {
            throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected 'x1 y1 x2 y2'");
        }
        set.boxes.push_back(b);
    }
    if (!header) throw ConfigError("box file " + path.string() + " has no header line");
    return set;
}

std::string format_box_file(const BoxSet& boxes) {
    std::string out = std::to_string(boxes.image_height) + " " + std::to_string(boxes.image_width) + "\n";
    for (const Box& b : boxes.boxes) {
        out += format_double(b.x1) + " " + format_double(b.y1) + " " + format_double(b.x2) + " " +
               format_double(b.y2) + "\n";
    }
    return out;
}

}  // namespace fgd

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fgd/masks.hpp"
#include "fgd/tensor.hpp"

namespace fgd {

struct SceneConfig {
    std::size_t height = 32;
    std::size_t width = 32;
    std::size_t min_rects = 1;
    std::size_t max_rects = 3;
    std::size_t min_rect_size = 4;
    std::size_t max_rect_size = 12;
    double background = 0.2;
    double contrast = 0.6;
    double noise = 0.05;  // uniform in [-noise, noise]
    /// When non-empty, these boxes are painted instead of random rectangles.
    std::vector<Box> fixed_boxes;

    void validate() const;
    bool operator==(const SceneConfig& other) const;
};

/// Noise background plus non-overlapping axis-aligned rectangles.
struct SyntheticScene {
    Tensor image;  // 3 x H x W
    BoxSet boxes;
    std::uint64_t seed = 0;
};

/// Pure function of (config, seed). A pixel (r, c) belongs to a box when its
/// centre (c + 0.5, r + 0.5) lies inside the box.
SyntheticScene generate_scene(const SceneConfig& config, std::uint64_t seed);

/// N x 3 x H x W image batch plus per-image boxes.
struct Batch {
    Tensor images;
    std::vector<BoxSet> boxes;
};

Batch make_batch(const std::vector<SyntheticScene>& scenes, std::size_t first, std::size_t count);

/// Box file: first line "height width", then one "x1 y1 x2 y2" line per box.
BoxSet read_box_file(const std::filesystem::path& path);
std::string format_box_file(const BoxSet& boxes);

}  // namespace fgd

#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "fgd/tensor.hpp"

namespace fgd {

struct Box {
    double x1 = 0, y1 = 0, x2 = 0, y2 = 0;
};

/// Ground-truth boxes of one image, in image-pixel coordinates.
struct BoxSet {
    std::vector<Box> boxes;
    std::size_t image_height = 0;
    std::size_t image_width = 0;

    /// Clips every box to the image and drops boxes left with no area.
    /// Returns the number of dropped boxes.
    std::size_t clip();
};

/// Maps image pixels onto one feature level.
struct LevelGeometry {
    std::size_t stride = 1;
    std::size_t feature_h = 0;
    std::size_t feature_w = 0;

    /// Throws DimensionError unless stride * dims covers the image within one stride.
    void validate_for(const BoxSet& boxes) const;
};

/// Half-open cell rectangle [row0, row1) x [col0, col1) on a feature grid.
struct CellRect {
    std::size_t row0 = 0, row1 = 0, col0 = 0, col1 = 0;
    std::size_t height() const { return row1 - row0; }
    std::size_t width() const { return col1 - col0; }
    std::size_t area() const { return height() * width(); }
    bool contains(std::size_t r, std::size_t c) const { return r >= row0 && r < row1 && c >= col0 && c < col1; }
};

struct ProjectedBoxes {
    std::vector<CellRect> rects;
    std::size_t dropped = 0;  // boxes whose projection was empty
};

/// Teacher-derived masks for one image on one level. All tensors are constants.
struct MaskSet {
    Tensor binary;        // H x W, {0, 1}
    Tensor scale;         // H x W
    Tensor spatial_attn;  // H x W
    Tensor channel_attn;  // C
    bool no_background = false;

    std::size_t height() const { return binary.dim(0); }
    std::size_t width() const { return binary.dim(1); }
    std::size_t channels() const { return channel_attn.dim(0); }
};

/// Start = floor(coord / stride), end = ceil(coord / stride), clamped to the grid.
ProjectedBoxes project_boxes(const BoxSet& boxes, const LevelGeometry& geom);

Tensor binary_mask(const std::vector<CellRect>& rects, std::size_t h, std::size_t w);

struct ScaleMask {
    Tensor values;
    bool no_background = false;  // set when foreground covers the whole grid
};

/// Foreground cells get 1/area of the smallest covering rect (lowest index on
/// ties); background cells get 1/N_bg, or 0 when there is no background.
ScaleMask scale_mask(const std::vector<CellRect>& rects, std::size_t h, std::size_t w);

/// Mean of |F| across channels: N x C x H x W -> N x H x W.
Tensor spatial_attention_map(const Tensor& features);

/// Mean of |F| across pixels: N x C x H x W -> N x C.
Tensor channel_attention_map(const Tensor& features);

/// A^S = H*W * softmax(G^S / T) per image, A^C = C * softmax(G^C / T) per image.
/// Takes N x H x W and N x C maps and is differentiable in both.
std::pair<Tensor, Tensor> attention_masks(const Tensor& spatial_map, const Tensor& channel_map, double temperature);

/// Both attention masks straight from an N x C x H x W feature map.
std::pair<Tensor, Tensor> feature_attention(const Tensor& features, double temperature);

/// Full teacher MaskSet for one image (`teacher` is 1 x C x H x W).
MaskSet build_masks(const Tensor& teacher, const BoxSet& boxes, const LevelGeometry& geom, double temperature);

}  // namespace fgd

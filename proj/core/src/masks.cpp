#include "fgd/masks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace fgd {

std::size_t BoxSet::clip() {
    const double h = static_cast<double>(image_height);
    const double w = static_cast<double>(image_width);
    std::size_t before = boxes.size();
    std::vector<Box> kept;
    kept.reserve(boxes.size());
    for (Box b : boxes) {
        b.x1 = std::clamp(b.x1, 0.0, w);
        b.x2 = std::clamp(b.x2, 0.0, w);
        b.y1 = std::clamp(b.y1, 0.0, h);
        b.y2 = std::clamp(b.y2, 0.0, h);
        if (b.x1 < b.x2 && b.y1 < b.y2) kept.push_back(b);
    }
    boxes = std::move(kept);
    return before - boxes.size();
}

void LevelGeometry::validate_for(const BoxSet& boxes) const {
    if (stride == 0 || feature_h == 0 || feature_w == 0) throw DimensionError("level geometry must be positive");
    auto covers = [&](std::size_t cells, std::size_t pixels) {
        return cells * stride >= pixels && cells * stride < pixels + stride;
    };
    if (!covers(feature_h, boxes.image_height) || !covers(feature_w, boxes.image_width)) {
        throw DimensionError("level geometry (stride " + std::to_string(stride) + ", " + std::to_string(feature_h) +
                             "x" + std::to_string(feature_w) + ") does not cover image " +
                             std::to_string(boxes.image_height) + "x" + std::to_string(boxes.image_width));
    }
}

ProjectedBoxes project_boxes(const BoxSet& boxes, const LevelGeometry& geom) {
    geom.validate_for(boxes);
    const double s = static_cast<double>(geom.stride);
    auto lo = [&](double v, std::size_t limit) {
        double f = std::floor(v / s);
        return static_cast<std::size_t>(std::clamp(f, 0.0, static_cast<double>(limit)));
    };
    auto hi = [&](double v, std::size_t limit) {
        double c = std::ceil(v / s);
        return static_cast<std::size_t>(std::clamp(c, 0.0, static_cast<double>(limit)));
    };

    ProjectedBoxes out;
    for (const Box& b : boxes.boxes) {
        CellRect r{lo(b.y1, geom.feature_h), hi(b.y2, geom.feature_h), lo(b.x1, geom.feature_w),
                   hi(b.x2, geom.feature_w)};
        if (r.row1 <= r.row0 || r.col1 <= r.col0) {
            ++out.dropped;
            continue;
        }
        out.rects.push_back(r);
    }
    return out;
}

Tensor binary_mask(const std::vector<CellRect>& rects, std::size_t h, std::size_t w) {
    std::vector<double> m(h * w, 0.0);
    for (const auto& r : rects) {
        for (std::size_t i = r.row0; i < std::min(r.row1, h); ++i)
            for (std::size_t j = r.col0; j < std::min(r.col1, w); ++j) m[i * w + j] = 1.0;
    }
    return Tensor::from_values({h, w}, std::move(m));
}

ScaleMask scale_mask(const std::vector<CellRect>& rects, std::size_t h, std::size_t w) {
    constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
    // Area of the smallest covering rect per cell; strict < keeps the lowest index on ties.
    std::vector<std::size_t> best(h * w, kNone);
    for (const auto& r : rects) {
        const std::size_t area = r.area();
        for (std::size_t i = r.row0; i < std::min(r.row1, h); ++i)
            for (std::size_t j = r.col0; j < std::min(r.col1, w); ++j) {
                auto& b = best[i * w + j];
                if (b == kNone || area < b) b = area;
            }
    }
    const auto n_bg = static_cast<std::size_t>(std::count(best.begin(), best.end(), kNone));

    ScaleMask out;
    out.no_background = n_bg == 0;
    const double bg = n_bg == 0 ? 0.0 : 1.0 / static_cast<double>(n_bg);
    std::vector<double> s(h * w);
    for (std::size_t k = 0; k < s.size(); ++k) s[k] = best[k] == kNone ? bg : 1.0 / static_cast<double>(best[k]);
    out.values = Tensor::from_values({h, w}, std::move(s));
    return out;
}

Tensor spatial_attention_map(const Tensor& features) {
    if (features.rank() != 4) throw DimensionError("spatial_attention_map: expected N x C x H x W");
    return mean(abs(features), {1});
}

Tensor channel_attention_map(const Tensor& features) {
    if (features.rank() != 4) throw DimensionError("channel_attention_map: expected N x C x H x W");
    return mean(abs(features), {2, 3});
}

std::pair<Tensor, Tensor> attention_masks(const Tensor& spatial_map, const Tensor& channel_map, double temperature) {
    if (!(temperature > 0.0)) throw ParameterError("attention temperature must be positive");
    if (spatial_map.rank() != 3 || channel_map.rank() != 2 || spatial_map.dim(0) != channel_map.dim(0)) {
        throw DimensionError("attention_masks: expected N x H x W and N x C maps");
    }
    const std::size_t n = spatial_map.dim(0), h = spatial_map.dim(1), w = spatial_map.dim(2);
    const std::size_t c = channel_map.dim(1);
    Tensor flat = reshape(spatial_map, {n, h * w});
    Tensor spatial = reshape(mul(softmax_t(flat, 1, temperature), static_cast<double>(h * w)), {n, h, w});
    Tensor channel = mul(softmax_t(channel_map, 1, temperature), static_cast<double>(c));
    return {spatial, channel};
}

std::pair<Tensor, Tensor> feature_attention(const Tensor& features, double temperature) {
    return attention_masks(spatial_attention_map(features), channel_attention_map(features), temperature);
}

MaskSet build_masks(const Tensor& teacher, const BoxSet& boxes, const LevelGeometry& geom, double temperature) {
    if (teacher.rank() != 4 || teacher.dim(0) != 1) throw DimensionError("build_masks: expected 1 x C x H x W");
    const std::size_t c = teacher.dim(1), h = teacher.dim(2), w = teacher.dim(3);
    if (geom.feature_h != h || geom.feature_w != w) {
        throw DimensionError("build_masks: geometry grid does not match feature map");
    }
    auto projected = project_boxes(boxes, geom);
    auto scale = scale_mask(projected.rects, h, w);
    auto [spatial, channel] = feature_attention(teacher.detach(), temperature);

    MaskSet m;
    m.binary = binary_mask(projected.rects, h, w);
    m.scale = scale.values;
    m.no_background = scale.no_background;
    m.spatial_attn = reshape(spatial, {h, w}).detach();
    m.channel_attn = reshape(channel, {c}).detach();
    return m;
}

}  // namespace fgd

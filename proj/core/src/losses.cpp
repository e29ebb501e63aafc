#include "fgd/losses.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>

#include "fgd/random.hpp"

namespace fgd {

void FgdHyperParams::validate() const {
    for (double v : {alpha, beta, gamma, lambda}) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw ParameterError("loss weights must be finite and non-negative");
    }
    if (!(temperature > 0.0) || !std::isfinite(temperature)) throw ParameterError("temperature must be positive");
}

FgdHyperParams hyper_params_preset(std::string_view name) {
    if (name == "two-stage") return {5e-5, 2.5e-5, 5e-5, 5e-7, 0.5};
    if (name == "anchor-one-stage") return {1e-3, 5e-4, 1e-3, 5e-6, 0.5};
    if (name == "anchor-free") return {1.6e-3, 8e-4, 8e-3, 8e-6, 0.5};
    throw ParameterError("unknown hyper-parameter preset '" + std::string(name) + "'");
}

const std::vector<std::string>& preset_names() {
    static const std::vector<std::string> names{"two-stage", "anchor-one-stage", "anchor-free"};
    return names;
}

void LossReport::finalize() {
    focal = fea_fg + fea_bg + attention;
    total_distill = focal + global_;
    total = task + focal + global_;
}

namespace {

constexpr std::array<std::pair<AblationMode, std::string_view>, 7> kModeNames{{
    {AblationMode::fg_only, "fg_only"},
    {AblationMode::bg_only, "bg_only"},
    {AblationMode::joint_no_split, "joint_no_split"},
    {AblationMode::split, "split"},
    {AblationMode::no_spatial_attn, "no_spatial_attn"},
    {AblationMode::no_channel_attn, "no_channel_attn"},
    {AblationMode::full, "full"},
}};

}  // namespace

AblationMode parse_ablation_mode(std::string_view name) {
    for (auto [mode, text] : kModeNames) {
        if (text == name) return mode;
    }
    throw ParameterError("unknown ablation mode '" + std::string(name) + "'");
}

std::string_view to_string(AblationMode mode) {
    for (auto [m, text] : kModeNames) {
        if (m == mode) return text;
    }
    return "unknown";
}

const std::vector<AblationMode>& all_ablation_modes() {
    static const std::vector<AblationMode> modes = [] {
        std::vector<AblationMode> v;
        for (auto [m, text] : kModeNames) v.push_back(m);
        return v;
    }();
    return modes;
}

Ablation ablation_mode(AblationMode mode, const FgdHyperParams& hp) {
    Ablation a{hp};
    switch (mode) {
        case AblationMode::fg_only:
            a.hp.beta = 0.0;
            break;
        case AblationMode::bg_only:
            a.hp.alpha = 0.0;
            break;
        case AblationMode::joint_no_split:
            a.hp.beta = a.hp.alpha;
            break;
        case AblationMode::no_spatial_attn:
            a.uniform_spatial = true;
            break;
        case AblationMode::no_channel_attn:
            a.uniform_channel = true;
            break;
        case AblationMode::split:
        case AblationMode::full:
            break;
    }
    return a;
}

L1Reduction parse_l1_reduction(std::string_view name) {
    if (name == "mean") return L1Reduction::mean;
    if (name == "sum") return L1Reduction::sum;
    throw ParameterError("unknown L1 reduction '" + std::string(name) + "'");
}

std::string_view to_string(L1Reduction r) { return r == L1Reduction::mean ? "mean" : "sum"; }

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (a.shape() != b.shape()) {
        throw DimensionError(std::string(what) + ": shape mismatch " + shape_to_string(a.shape()) + " vs " +
                             shape_to_string(b.shape()));
    }
}

/// sum_i w_i (t_i - s_i)^2 with constant weights, as one fused node.
Tensor weighted_squared_error(const Tensor& teacher, const Tensor& student, std::vector<double> weights) {
    auto tv = teacher.values(), sv = student.values();
    double acc = 0.0;
    for (std::size_t i = 0; i < tv.size(); ++i) {
        const double d = tv[i] - sv[i];
        acc += weights[i] * d * d;
    }
    return Tensor::make_result({}, {acc}, {teacher, student},
                               [teacher, student, w = std::move(weights)](std::span<const double> g) {
                                   auto tv = teacher.values(), sv = student.values();
#ifdef FGD_SABOTAGE_FEATURE_LOSS
                                   const double k = 1.0;  // negative control: drops the factor 2
#else
                                   const double k = 2.0;
#endif
                                   std::vector<double> gt(tv.size());
                                   for (std::size_t i = 0; i < tv.size(); ++i) gt[i] = k * g[0] * w[i] * (tv[i] - sv[i]);
                                   if (teacher.requires_grad()) teacher.accumulate_grad(gt);
                                   if (student.requires_grad()) {
                                       for (auto& v : gt) v = -v;
                                       student.accumulate_grad(gt);
                                   }
                               });
}

MaskSet with_uniform_attention(const MaskSet& m, bool spatial, bool channel) {
    MaskSet out = m;
    if (spatial) out.spatial_attn = Tensor::full(m.spatial_attn.shape(), 1.0);
    if (channel) out.channel_attn = Tensor::full(m.channel_attn.shape(), 1.0);
    return out;
}

template <typename T>
const T& pick_for_level(std::span<const T> items, std::size_t level, std::size_t levels, const char* what) {
    if (items.size() == levels) return items[level];
    if (items.size() == 1) return items[0];
    throw DimensionError(std::string("fgd_total: expected one ") + what + " per level or a single shared one");
}

}  // namespace

Tensor baseline_loss(const Tensor& teacher, const Tensor& student_adapted) {
    require_same_shape(teacher, student_adapted, "baseline_loss");
    return mean_all(square(sub(teacher, student_adapted)));
}

FeatureLoss feature_loss(const Tensor& teacher, const Tensor& student_adapted, std::span<const MaskSet> masks,
                         double alpha, double beta) {
    require_same_shape(teacher, student_adapted, "feature_loss");
    if (teacher.rank() != 4) throw DimensionError("feature_loss: expected N x C x H x W features");
    const std::size_t n = teacher.dim(0), c = teacher.dim(1), h = teacher.dim(2), w = teacher.dim(3);
    if (masks.size() != n) throw DimensionError("feature_loss: need one MaskSet per image");

    const std::size_t plane = h * w;
    std::vector<double> wfg(n * c * plane), wbg(n * c * plane);
    for (std::size_t b = 0; b < n; ++b) {
        const MaskSet& m = masks[b];
        if (m.height() != h || m.width() != w || m.channels() != c) {
            throw DimensionError("feature_loss: MaskSet does not match feature map " +
                                 shape_to_string(teacher.shape()));
        }
        auto mv = m.binary.values(), sv = m.scale.values(), av = m.spatial_attn.values(), cv = m.channel_attn.values();
        for (std::size_t k = 0; k < c; ++k)
            for (std::size_t p = 0; p < plane; ++p) {
                const double base = sv[p] * av[p] * cv[k];
                const std::size_t i = (b * c + k) * plane + p;
                wfg[i] = mv[p] * base;
                wbg[i] = (1.0 - mv[p]) * base;
            }
    }
    const double per_image = 1.0 / static_cast<double>(n);
    return {mul(weighted_squared_error(teacher, student_adapted, std::move(wfg)), alpha * per_image),
            mul(weighted_squared_error(teacher, student_adapted, std::move(wbg)), beta * per_image)};
}

Tensor attention_loss(std::span<const MaskSet> teacher_masks, const Tensor& student_spatial,
                      const Tensor& student_channel, double gamma, L1Reduction reduction) {
    if (student_spatial.rank() != 3 || student_channel.rank() != 2 ||
        student_spatial.dim(0) != teacher_masks.size() || student_channel.dim(0) != teacher_masks.size()) {
        throw DimensionError("attention_loss: student masks must be N x H x W and N x C with N teacher MaskSets");
    }
    const std::size_t n = teacher_masks.size(), h = student_spatial.dim(1), w = student_spatial.dim(2);
    const std::size_t c = student_channel.dim(1);
    std::vector<double> ts, tc;
    ts.reserve(n * h * w);
    tc.reserve(n * c);
    for (const MaskSet& m : teacher_masks) {
        if (m.height() != h || m.width() != w || m.channels() != c) {
            throw DimensionError("attention_loss: teacher and student masks differ in shape");
        }
        ts.insert(ts.end(), m.spatial_attn.values().begin(), m.spatial_attn.values().end());
        tc.insert(tc.end(), m.channel_attn.values().begin(), m.channel_attn.values().end());
    }
    Tensor t_spatial = Tensor::from_values({n, h, w}, std::move(ts));
    Tensor t_channel = Tensor::from_values({n, c}, std::move(tc));

    Tensor l_s = abs(sub(t_spatial, student_spatial));
    Tensor l_c = abs(sub(t_channel, student_channel));
    // Per-image L1, then the batch average.
    Tensor spatial_term = reduction == L1Reduction::mean ? mean_all(l_s) : mul(sum_all(l_s), 1.0 / n);
    Tensor channel_term = reduction == L1Reduction::mean ? mean_all(l_c) : mul(sum_all(l_c), 1.0 / n);
    return mul(add(spatial_term, channel_term), gamma);
}

Tensor global_loss(const Tensor& teacher, const Tensor& student, const GcBlockParams& gc, double lambda) {
    require_same_shape(teacher, student, "global_loss");
    const double per_image = 1.0 / static_cast<double>(teacher.dim(0));
    Tensor diff = sub(relation(teacher, gc), relation(student, gc));
    return mul(sum_all(square(diff)), lambda * per_image);
}

Adaptation Adaptation::create(std::size_t student_channels, std::size_t teacher_channels, std::uint64_t seed,
                              const std::string& prefix) {
    std::vector<double> w(teacher_channels * student_channels, 0.0);
    if (student_channels == teacher_channels) {
        for (std::size_t i = 0; i < student_channels; ++i) w[i * student_channels + i] = 1.0;
    } else {
        Rng rng(seed);
        const double a = 1.0 / std::sqrt(static_cast<double>(student_channels));
        w = rng.uniform_vector(w.size(), -a, a);
    }
    Adaptation out;
    out.weight = Parameter(prefix + ".weight", {teacher_channels, student_channels}, std::move(w));
    out.bias = Parameter(prefix + ".bias", {teacher_channels}, std::vector<double>(teacher_channels, 0.0));
    return out;
}

Tensor global_student_input(const Tensor& student_raw, const Tensor& student_adapted, std::size_t teacher_channels) {
    return student_raw.dim(1) == teacher_channels ? student_raw : student_adapted;
}

FgdLoss fgd_total(std::span<const LevelInput> levels, const Ablation& ablation, std::span<const GcBlockParams> gc,
                  std::span<const Adaptation> adaptation, const Tensor& task_loss, const FgdOptions& options) {
    const FgdHyperParams& hp = ablation.hp;
    hp.validate();
    if (levels.empty()) throw DimensionError("fgd_total: no feature levels");
    if (task_loss.numel() != 1) throw DimensionError("fgd_total: task loss must be a scalar");

    Tensor fg = Tensor::scalar(0.0), bg = Tensor::scalar(0.0), at = Tensor::scalar(0.0), gl = Tensor::scalar(0.0);
    for (std::size_t l = 0; l < levels.size(); ++l) {
        const LevelInput& in = levels[l];
        if (in.teacher.rank() != 4 || in.student.rank() != 4 || in.teacher.dim(0) != in.student.dim(0) ||
            in.teacher.dim(2) != in.student.dim(2) || in.teacher.dim(3) != in.student.dim(3)) {
            throw DimensionError("fgd_total: teacher and student features disagree at level " + std::to_string(l));
        }
        const std::size_t n = in.teacher.dim(0);
        if (in.boxes.size() != n) throw DimensionError("fgd_total: need one BoxSet per image");
        const Adaptation& adapt = pick_for_level(adaptation, l, levels.size(), "adaptation");
        const GcBlockParams& block = pick_for_level(gc, l, levels.size(), "GcBlock");

        Tensor teacher = in.teacher.detach();
        std::vector<MaskSet> masks, feature_masks;
        masks.reserve(n);
        for (std::size_t b = 0; b < n; ++b) {
            masks.push_back(build_masks(slice_batch(teacher, b), in.boxes[b], in.geom, hp.temperature));
            feature_masks.push_back(with_uniform_attention(masks.back(), ablation.uniform_spatial,
                                                           ablation.uniform_channel));
        }

        Tensor adapted = adapt.apply(in.student);
        auto [f_fg, f_bg] = feature_loss(teacher, adapted, feature_masks, hp.alpha, hp.beta);
        auto [s_spatial, s_channel] = feature_attention(adapted, hp.temperature);
        Tensor level_at = attention_loss(masks, s_spatial, s_channel, hp.gamma, options.attention_reduction);
        Tensor level_gl =
            global_loss(teacher, global_student_input(in.student, adapted, teacher.dim(1)), block, hp.lambda);

        fg = add(fg, f_fg);
        bg = add(bg, f_bg);
        at = add(at, level_at);
        gl = add(gl, level_gl);
    }

    FgdLoss out;
    out.distill = add(add(add(fg, bg), at), gl);
    out.total = add(reshape(task_loss, {}), out.distill);
    out.report.fea_fg = fg.item();
    out.report.fea_bg = bg.item();
    out.report.attention = at.item();
    out.report.global_ = gl.item();
    out.report.task = task_loss.item();
    out.report.finalize();
    return out;
}

}  // namespace fgd

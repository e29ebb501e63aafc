#include "fgd/gradcheck_suite.hpp"

#include <array>
#include <cstdio>
#include <functional>

#include "fgd/gcblock.hpp"
#include "fgd/gradcheck.hpp"
#include "fgd/losses.hpp"
#include "fgd/masks.hpp"
#include "fgd/random.hpp"

namespace fgd {

namespace {

/// Values in [-2, 2] with |v| >= 1e-2, keeping abs/relu kinks out of reach of the probe step.
Tensor random_tensor(Rng& rng, Shape shape) {
    std::vector<double> v(shape_numel(shape));
    for (auto& x : v) {
        const double mag = rng.uniform(1e-2, 2.0);
        x = rng.uniform() < 0.5 ? -mag : mag;
    }
    return Tensor::from_values(std::move(shape), std::move(v), true);
}

/// sum(out * R) for a fixed random R, so every output element gets a distinct upstream gradient.
std::function<Tensor()> projected(Rng& rng, std::function<Tensor()> f) {
    Shape shape = f().shape();
    Tensor r = Tensor::from_values(shape, rng.uniform_vector(shape_numel(shape), -1.0, 1.0));
    return [f = std::move(f), r] { return sum_all(mul(f(), r)); };
}

struct Check {
    std::string name;
    GradcheckScope scope;
    double tolerance;
    std::function<GradcheckReport()> run;
};

GradcheckReport probe(const std::function<Tensor()>& f, std::vector<Tensor> inputs, double tol) {
    return gradcheck(f, inputs, kGradcheckStep, tol);
}

void add_ops_checks(std::vector<Check>& out) {
    using S = GradcheckScope;
    auto unary = [&](std::string name, Shape shape, std::function<Tensor(const Tensor&)> op) {
        out.push_back({name, S::ops, kSmoothTolerance, [shape, op, seed = out.size()] {
                           Rng rng(mix_seed(11, seed));
                           Tensor a = random_tensor(rng, shape);
                           return probe(projected(rng, [=] { return op(a); }), {a}, kSmoothTolerance);
                       }});
    };
    auto binary = [&](std::string name, Shape sa, Shape sb, std::function<Tensor(const Tensor&, const Tensor&)> op) {
        out.push_back({name, S::ops, kSmoothTolerance, [sa, sb, op, seed = out.size()] {
                           Rng rng(mix_seed(12, seed));
                           Tensor a = random_tensor(rng, sa), b = random_tensor(rng, sb);
                           return probe(projected(rng, [=] { return op(a, b); }), {a, b}, kSmoothTolerance);
                       }});
    };

    binary("ops.add", {2, 3}, {2, 3}, [](auto& a, auto& b) { return add(a, b); });
    binary("ops.sub", {2, 3}, {2, 3}, [](auto& a, auto& b) { return sub(a, b); });
    binary("ops.mul", {2, 3}, {2, 3}, [](auto& a, auto& b) { return mul(a, b); });
    unary("ops.square", {2, 3}, [](auto& a) { return square(a); });
    unary("ops.abs", {2, 3}, [](auto& a) { return abs(a); });
    unary("ops.relu", {2, 3}, [](auto& a) { return relu(a); });
    unary("ops.scale", {2, 3}, [](auto& a) { return add(mul(a, -1.5), 0.25); });
    unary("ops.sum_axes", {2, 3, 4, 2}, [](auto& a) { return sum(a, {1, 3}); });
    unary("ops.mean_axes", {2, 3, 4, 2}, [](auto& a) { return mean(a, {0, 2}); });
    unary("ops.mean_all", {3, 4}, [](auto& a) { return mean_all(a); });
    unary("ops.softmax_t", {3, 5}, [](auto& a) { return softmax_t(a, 1, 0.5); });
    unary("ops.softmax_t_axis0", {4, 3}, [](auto& a) { return softmax_t(a, 0, 1.3); });
    unary("ops.reshape", {2, 6}, [](auto& a) { return reshape(a, {3, 4}); });
    unary("ops.broadcast_to", {2, 1, 3}, [](auto& a) { return broadcast_to(a, {2, 4, 3}); });
    unary("ops.slice_batch", {3, 2, 2}, [](auto& a) { return slice_batch(a, 1); });
    unary("ops.avg_pool2", {1, 2, 4, 4}, [](auto& a) { return avg_pool2(a); });
    binary("ops.batched_matvec", {2, 3, 4}, {2, 4}, [](auto& a, auto& v) { return batched_matvec(a, v); });

    out.push_back({"ops.conv1x1", S::ops, kSmoothTolerance, [] {
                       Rng rng(131);
                       Tensor x = random_tensor(rng, {2, 3, 2, 2}), w = random_tensor(rng, {4, 3}),
                              b = random_tensor(rng, {4});
                       return probe(projected(rng, [=] { return conv1x1(x, w, b); }), {x, w, b}, kSmoothTolerance);
                   }});
    out.push_back({"ops.layer_norm", S::ops, kSmoothTolerance, [] {
                       Rng rng(132);
                       Tensor x = random_tensor(rng, {3, 5}), g = random_tensor(rng, {5}), b = random_tensor(rng, {5});
                       static constexpr std::array<std::size_t, 1> axes{1};
                       return probe(projected(rng, [=] { return layer_norm(x, g, b, axes); }), {x, g, b},
                                    kSmoothTolerance);
                   }});
}

void add_mask_checks(std::vector<Check>& out) {
    using S = GradcheckScope;
    out.push_back({"masks.spatial_attention_map", S::masks, kSmoothTolerance, [] {
                       Rng rng(201);
                       Tensor f = random_tensor(rng, {1, 3, 4, 4});
                       return probe(projected(rng, [=] { return spatial_attention_map(f); }), {f}, kSmoothTolerance);
                   }});
    out.push_back({"masks.channel_attention_map", S::masks, kSmoothTolerance, [] {
                       Rng rng(202);
                       Tensor f = random_tensor(rng, {1, 3, 4, 4});
                       return probe(projected(rng, [=] { return channel_attention_map(f); }), {f}, kSmoothTolerance);
                   }});
    out.push_back({"masks.attention_masks", S::masks, kSmoothTolerance, [] {
                       Rng rng(203);
                       Tensor gs = random_tensor(rng, {2, 3, 4}), gc = random_tensor(rng, {2, 5});
                       return probe(projected(rng,
                                              [=] {
                                                  auto [s, c] = attention_masks(gs, gc, 0.5);
                                                  return add(sum_all(s), mul(sum_all(mul(c, c)), 0.5));
                                              }),
                                    {gs, gc}, kSmoothTolerance);
                   }});
    out.push_back({"masks.student_attention", S::masks, kSmoothTolerance, [] {
                       Rng rng(204);
                       Tensor f = random_tensor(rng, {2, 4, 3, 3});
                       Tensor rs = Tensor::from_values({2, 3, 3}, rng.uniform_vector(18, -1, 1));
                       Tensor rc = Tensor::from_values({2, 4}, rng.uniform_vector(8, -1, 1));
                       return probe(
                           [=] {
                               auto [s, c] = feature_attention(f, 0.5);
                               return add(sum_all(mul(s, rs)), sum_all(mul(c, rc)));
                           },
                           {f}, kSmoothTolerance);
                   }});
}

GcBlockParams random_gc(Rng& rng, std::size_t channels) {
    GcBlockParams gc = GcBlockParams::create(channels, 2, rng.integer(0, 1 << 30));
    for (Parameter* p : gc.parameters()) {
        auto v = p->tensor.mutable_values();
        for (auto& x : v) x = rng.uniform(-1.0, 1.0);
    }
    return gc;
}

std::vector<Tensor> gc_inputs(GcBlockParams& gc) {
    std::vector<Tensor> v;
    for (Parameter* p : gc.parameters()) v.push_back(p->tensor);
    return v;
}

void add_gcblock_checks(std::vector<Check>& out) {
    using S = GradcheckScope;
    out.push_back({"gcblock.context_pool", S::gcblock, kSmoothTolerance, [] {
                       Rng rng(301);
                       Tensor f = random_tensor(rng, {2, 4, 3, 3}), wk = random_tensor(rng, {1, 4});
                       return probe(projected(rng, [=] { return context_pool(f, wk); }), {f, wk}, kSmoothTolerance);
                   }});
    out.push_back({"gcblock.transform", S::gcblock, kSmoothTolerance, [] {
                       Rng rng(302);
                       Tensor ctx = random_tensor(rng, {2, 8});
                       auto gc = std::make_shared<GcBlockParams>(random_gc(rng, 8));
                       auto inputs = gc_inputs(*gc);
                       inputs.push_back(ctx);
                       return probe(projected(rng, [=] { return gc_transform(ctx, *gc); }), inputs, kSmoothTolerance);
                   }});
    out.push_back({"gcblock.relation", S::gcblock, kSmoothTolerance, [] {
                       Rng rng(303);
                       Tensor f = random_tensor(rng, {1, 4, 3, 3});
                       auto gc = std::make_shared<GcBlockParams>(random_gc(rng, 4));
                       auto inputs = gc_inputs(*gc);
                       inputs.push_back(f);
                       return probe(projected(rng, [=] { return relation(f, *gc); }), inputs, kSmoothTolerance);
                   }});
}

BoxSet random_boxes(Rng& rng, std::size_t image, std::size_t count) {
    BoxSet b;
    b.image_height = b.image_width = image;
    for (std::size_t i = 0; i < count; ++i) {
        const double x1 = rng.uniform(0, image * 0.6), y1 = rng.uniform(0, image * 0.6);
        b.boxes.push_back({x1, y1, x1 + rng.uniform(2, image * 0.4), y1 + rng.uniform(2, image * 0.4)});
    }
    b.clip();
    return b;
}

const FgdHyperParams kUnitWeights{1.0, 0.5, 1.0, 0.1, 0.5};

/// Seeded two-level instance for the end-to-end checks.
struct TotalInstance {
    std::vector<LevelInput> levels;
    std::vector<Adaptation> adaptation;
    std::vector<GcBlockParams> gc;
};

std::shared_ptr<TotalInstance> make_total_instance(std::uint64_t seed, std::size_t teacher_channels) {
    Rng rng(seed);
    auto inst = std::make_shared<TotalInstance>();
    constexpr std::size_t kStudentChannels = 4, kGrid = 4, kStride = 4, kImage = kGrid * kStride;
    for (std::size_t l = 0; l < 2; ++l) {
        LevelInput in;
        in.teacher = random_tensor(rng, {1, teacher_channels, kGrid, kGrid}).detach();
        in.student = random_tensor(rng, {1, kStudentChannels, kGrid, kGrid});
        in.boxes = {random_boxes(rng, kImage, 1 + l)};
        in.geom = LevelGeometry{kStride, kGrid, kGrid};
        inst->levels.push_back(std::move(in));
        Adaptation a = Adaptation::create(kStudentChannels, teacher_channels, rng.integer(0, 1 << 30),
                                          "adapt" + std::to_string(l));
        for (auto& v : a.weight.tensor.mutable_values()) v += rng.uniform(-0.3, 0.3);
        for (auto& v : a.bias.tensor.mutable_values()) v = rng.uniform(-0.3, 0.3);
        inst->adaptation.push_back(std::move(a));
        inst->gc.push_back(random_gc(rng, teacher_channels));
    }
    return inst;
}

GradcheckReport check_total(std::uint64_t seed, std::size_t teacher_channels) {
    auto inst = make_total_instance(seed, teacher_channels);
    std::vector<Tensor> inputs;
    for (auto& in : inst->levels) inputs.push_back(in.student);
    for (auto& a : inst->adaptation)
        for (Parameter* p : a.parameters()) inputs.push_back(p->tensor);
    for (auto& g : inst->gc)
        for (Tensor t : gc_inputs(g)) inputs.push_back(t);
    const Ablation ablation{kUnitWeights};
    return probe(
        [inst, ablation] {
            return fgd_total(inst->levels, ablation, inst->gc, inst->adaptation, Tensor::scalar(0.0)).distill;
        },
        inputs, kKinkTolerance);
}

void add_loss_checks(std::vector<Check>& out) {
    using S = GradcheckScope;
    out.push_back({"losses.baseline_loss", S::losses, kSmoothTolerance, [] {
                       Rng rng(401);
                       Tensor t = random_tensor(rng, {2, 3, 2, 2}).detach(), s = random_tensor(rng, {2, 3, 2, 2});
                       return probe([=] { return baseline_loss(t, s); }, {s}, kSmoothTolerance);
                   }});
    out.push_back({"losses.feature_loss", S::losses, kSmoothTolerance, [] {
                       Rng rng(402);
                       Tensor t = random_tensor(rng, {2, 4, 4, 4}).detach(), s = random_tensor(rng, {2, 4, 4, 4});
                       std::vector<MaskSet> masks;
                       for (std::size_t b = 0; b < 2; ++b) {
                           masks.push_back(build_masks(slice_batch(t, b), random_boxes(rng, 16, 1 + b),
                                                       LevelGeometry{4, 4, 4}, 0.5));
                       }
                       return probe(
                           [=] {
                               auto [fg, bg] = feature_loss(t, s, masks, 1.0, 0.5);
                               return add(fg, bg);
                           },
                           {s}, kSmoothTolerance);
                   }});
    out.push_back({"losses.attention_loss", S::losses, kKinkTolerance, [] {
                       Rng rng(403);
                       Tensor t = random_tensor(rng, {2, 4, 3, 3}).detach(), s = random_tensor(rng, {2, 4, 3, 3});
                       std::vector<MaskSet> masks;
                       BoxSet none;
                       none.image_height = none.image_width = 6;
                       for (std::size_t b = 0; b < 2; ++b) {
                           masks.push_back(build_masks(slice_batch(t, b), none, LevelGeometry{2, 3, 3}, 0.5));
                       }
                       return probe(
                           [=] {
                               auto [sp, ch] = feature_attention(s, 0.5);
                               return attention_loss(masks, sp, ch, 1.0);
                           },
                           {s}, kKinkTolerance);
                   }});
    out.push_back({"losses.global_loss", S::losses, kKinkTolerance, [] {
                       Rng rng(404);
                       Tensor t = random_tensor(rng, {2, 4, 3, 3}).detach(), s = random_tensor(rng, {2, 4, 3, 3});
                       auto gc = std::make_shared<GcBlockParams>(random_gc(rng, 4));
                       auto inputs = gc_inputs(*gc);
                       inputs.push_back(s);
                       return probe([=] { return global_loss(t, s, *gc, 0.1); }, inputs, kKinkTolerance);
                   }});
    out.push_back({"losses.fgd_total", S::losses, kKinkTolerance, [] { return check_total(405, 4); }});
    out.push_back(
        {"losses.fgd_total_channel_mismatch", S::losses, kKinkTolerance, [] { return check_total(406, 6); }});
}

std::vector<Check> all_checks() {
    std::vector<Check> checks;
    add_ops_checks(checks);
    add_mask_checks(checks);
    add_gcblock_checks(checks);
    add_loss_checks(checks);
    return checks;
}

}  // namespace

GradcheckScope parse_gradcheck_scope(std::string_view name) {
    if (name == "ops") return GradcheckScope::ops;
    if (name == "masks") return GradcheckScope::masks;
    if (name == "gcblock") return GradcheckScope::gcblock;
    if (name == "losses") return GradcheckScope::losses;
    if (name == "all") return GradcheckScope::all;
    throw ParameterError("unknown gradcheck scope '" + std::string(name) + "'");
}

std::string_view to_string(GradcheckScope scope) {
    switch (scope) {
        case GradcheckScope::ops:
            return "ops";
        case GradcheckScope::masks:
            return "masks";
        case GradcheckScope::gcblock:
            return "gcblock";
        case GradcheckScope::losses:
            return "losses";
        case GradcheckScope::all:
            return "all";
    }
    return "unknown";
}

std::vector<GradcheckResult> run_gradcheck_suite(GradcheckScope scope) {
    std::vector<GradcheckResult> results;
    for (const Check& c : all_checks()) {
        if (scope != GradcheckScope::all && c.scope != scope) continue;
        GradcheckResult r{c.name, c.scope, 0.0, c.tolerance, false};
        try {
            GradcheckReport rep = c.run();
            r.max_rel_error = rep.max_rel_error;
            r.passed = rep.max_rel_error <= c.tolerance;
        } catch (const std::exception&) {
            r.max_rel_error = std::numeric_limits<double>::infinity();
            r.passed = false;
        }
        results.push_back(r);
    }
    return results;
}

std::string format_gradcheck_line(const GradcheckResult& r) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%-36s max_rel_err=%.3e tol=%.0e %s", r.name.c_str(), r.max_rel_error,
                  r.tolerance, r.passed ? "PASS" : "FAIL");
    return buf;
}

}  // namespace fgd

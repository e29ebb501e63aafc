// Acceptance gate: one PASS/FAIL line per criterion, exit status 1 if any fails.
//
// usage: fgd_acceptance FGD_BINARY REFERENCE_CONFIG ABLATION_SCRIPT WORK_DIR

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "fgd/config.hpp"
#include "fgd/losses.hpp"
#include "fgd/masks.hpp"
#include "fgd/run.hpp"
#include "fgd/textio.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace fgd;

namespace {

struct Paths {
    fs::path fgd, config, script, work;
};

struct Outcome {
    bool passed = false;
    std::string detail;
};

int run_shell(const std::string& cmd) {
    const int status = std::system(cmd.c_str());
    if (status == -1 || !WIFEXITED(status)) return -1;
    return WEXITSTATUS(status);
}

std::string quote(const fs::path& p) { return "'" + p.string() + "'"; }

std::string fmt(double v) {
    std::ostringstream s;
    s.precision(3);
    s << v;
    return s.str();
}

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

/// Within `tol` of `expect`, scaled by max(1, |expect|).
bool close(double got, double expect, double tol) { return std::abs(got - expect) <= tol * std::max(1.0, std::abs(expect)); }

BoxSet empty_boxes(std::size_t h, std::size_t w) {
    BoxSet b;
    b.image_height = h;
    b.image_width = w;
    return b;
}

/// Cell-aligned boxes that never share a cell, so each projected rect is exact.
std::vector<Box> disjoint_boxes(Rng& rng, std::size_t h, std::size_t w, std::size_t stride) {
    std::vector<Box> boxes;
    std::vector<bool> used(h * w, false);
    const auto wanted = rng.integer(0, 4);
    for (int attempt = 0; attempt < 40 && static_cast<std::int64_t>(boxes.size()) < wanted; ++attempt) {
        const std::size_t r0 = rng.integer(0, h - 1), c0 = rng.integer(0, w - 1);
        const std::size_t r1 = r0 + 1 + rng.integer(0, h - 1 - r0), c1 = c0 + 1 + rng.integer(0, w - 1 - c0);
        bool free = true;
        for (std::size_t r = r0; r < r1; ++r)
            for (std::size_t c = c0; c < c1; ++c) free = free && !used[r * w + c];
        if (!free) continue;
        for (std::size_t r = r0; r < r1; ++r)
            for (std::size_t c = c0; c < c1; ++c) used[r * w + c] = true;
        boxes.push_back({double(c0 * stride), double(r0 * stride), double(c1 * stride), double(r1 * stride)});
    }
    return boxes;
}

/// Arbitrary (possibly overlapping, fractional) boxes for the smallest-box rule.
std::vector<Box> loose_boxes(Rng& rng, std::size_t img_h, std::size_t img_w) {
    std::vector<Box> boxes;
    const auto n = rng.integer(1, 4);
    for (std::int64_t k = 0; k < n; ++k) {
        const double x = rng.uniform(0, double(img_w) - 0.5), y = rng.uniform(0, double(img_h) - 0.5);
        boxes.push_back({x, y, x + rng.uniform(0.3, double(img_w) * 0.7), y + rng.uniform(0.3, double(img_h) * 0.7)});
    }
    return boxes;
}

Outcome mask_invariants(const Paths&) {
    const double temps[] = {0.3, 0.5, 0.8, 1.0, 1.2};
    Rng rng(20220301);
    std::size_t overlapping = 0;
    for (int i = 0; i < 200; ++i) {
        const std::size_t h = rng.integer(2, 16), w = rng.integer(2, 16), c = rng.integer(1, 8);
        const std::size_t stride = rng.integer(1, 4);
        const double t = temps[i % 5];
        const bool disjoint = i % 2 == 0;
        BoxSet boxes = empty_boxes(h * stride, w * stride);
        boxes.boxes = disjoint ? disjoint_boxes(rng, h, w, stride) : loose_boxes(rng, h * stride, w * stride);
        boxes.clip();
        Tensor f = testing::random_tensor(rng, {1, c, h, w}, -3, 3);
        MaskSet m = build_masks(f, boxes, LevelGeometry{stride, h, w}, t);

        double sum_s = 0, sum_c = 0;
        for (double v : m.spatial_attn.values()) sum_s += v;
        for (double v : m.channel_attn.values()) sum_c += v;
        if (std::abs(sum_s - double(h * w)) > 1e-8) return {false, "instance " + std::to_string(i) + ": sum(A^S)"};
        if (std::abs(sum_c - double(c)) > 1e-8) return {false, "instance " + std::to_string(i) + ": sum(A^C)"};

        auto o = oracle::masks(testing::to_vec(f), c, h, w, boxes.boxes, stride, t);
        if (testing::max_abs_diff(m.binary.values(), o.binary) != 0.0 ||
            testing::max_abs_diff(m.scale.values(), o.scale) > 1e-15) {
            return {false, "instance " + std::to_string(i) + ": disagrees with brute-force box enumeration"};
        }

        double bg = 0;
        std::size_t n_bg = 0;
        for (std::size_t p = 0; p < h * w; ++p) {
            if (m.binary[p] == 0.0) {
                bg += m.scale[p];
                ++n_bg;
            }
        }
        if (n_bg > 0 && std::abs(bg - 1.0) > 1e-10) return {false, "instance " + std::to_string(i) + ": background sum"};
        if (disjoint) {
            for (const Box& b : boxes.boxes) {
                double s = 0;
                for (std::size_t r = std::size_t(b.y1) / stride; r < std::size_t(b.y2) / stride; ++r)
                    for (std::size_t q = std::size_t(b.x1) / stride; q < std::size_t(b.x2) / stride; ++q)
                        s += m.scale[r * w + q];
                if (std::abs(s - 1.0) > 1e-10) return {false, "instance " + std::to_string(i) + ": box sum " + fmt(s)};
            }
        } else if (boxes.boxes.size() > 1) {
            ++overlapping;
        }
    }
    return {true, "200 instances, " + std::to_string(overlapping) + " with overlapping boxes"};
}

Outcome gradient_oracle(const Paths& p) {
    const fs::path log = p.work / "gradcheck.txt";
    const int code = run_shell(quote(p.fgd) + " gradcheck --scope all > " + quote(log) + " 2>&1");
    const std::string out = read_file(log);
    std::size_t checks = 0, failed = 0;
    double worst = 0;
    std::istringstream in(out);
    for (std::string line; std::getline(in, line);) {
        const auto at = line.find("max_rel_err=");
        if (at == std::string::npos) continue;
        ++checks;
        if (line.find(" FAIL") != std::string::npos) ++failed;
        worst = std::max(worst, std::stod(line.substr(at + 12)));
    }
    const bool ok = code == 0 && failed == 0 && checks > 0;
    return {ok, std::to_string(checks) + " checks, " + std::to_string(failed) + " failed, worst rel err " + fmt(worst) +
                    ", exit " + std::to_string(code)};
}

struct RandomLevel {
    LevelInput level;
    Adaptation adaptation;
    GcBlockParams gc;
};

RandomLevel random_level(Rng& rng, std::size_t n, std::size_t ct, std::size_t cs, std::size_t grid, std::size_t stride) {
    RandomLevel r;
    r.level.teacher = testing::random_tensor(rng, {n, ct, grid, grid});
    r.level.student = testing::random_tensor(rng, {n, cs, grid, grid});
    r.level.geom = LevelGeometry{stride, grid, grid};
    for (std::size_t b = 0; b < n; ++b) {
        BoxSet bs = empty_boxes(grid * stride, grid * stride);
        bs.boxes = loose_boxes(rng, grid * stride, grid * stride);
        if (rng.uniform() < 0.2) bs.boxes.clear();
        bs.clip();
        r.level.boxes.push_back(bs);
    }
    r.adaptation = Adaptation::create(cs, ct, rng.integer(0, 1 << 20));
    for (auto& v : r.adaptation.weight.tensor.mutable_values()) v += rng.uniform(-0.3, 0.3);
    for (auto& v : r.adaptation.bias.tensor.mutable_values()) v = rng.uniform(-0.3, 0.3);
    r.gc = GcBlockParams::create(ct, 1 + rng.integer(0, 2), rng.integer(0, 1 << 20));
    testing::randomize(r.gc, rng, 0.5);
    return r;
}

FgdHyperParams random_hp(Rng& rng) {
    const auto& names = preset_names();
    FgdHyperParams hp = hyper_params_preset(names[rng.integer(0, 2)]);
    if (rng.uniform() < 0.5) hp = {rng.uniform(0, 2), rng.uniform(0, 2), rng.uniform(0, 2), rng.uniform(0, 0.5), 0.5};
    hp.temperature = rng.uniform(0.3, 1.2);
    return hp;
}

Outcome loss_identities(const Paths&) {
    Rng rng(77);
    double worst = 0;
    for (int i = 0; i < 100; ++i) {
        const std::size_t n = rng.integer(1, 2), ct = rng.integer(2, 6), cs = rng.integer(2, 6);
        std::vector<LevelInput> levels;
        std::vector<Adaptation> adapt;
        std::vector<GcBlockParams> gcs;
        for (std::size_t l = 0; l < 2; ++l) {
            RandomLevel r = random_level(rng, n, ct, cs, 4 >> l, 4 << l);
            levels.push_back(r.level);
            adapt.push_back(r.adaptation);
            gcs.push_back(r.gc);
        }
        const AblationMode mode = all_ablation_modes()[rng.integer(0, 6)];
        Tensor task = Tensor::scalar(rng.uniform(0, 3));
        FgdLoss out = fgd_total(levels, ablation_mode(mode, random_hp(rng)), gcs, adapt, task);
        const LossReport& r = out.report;
        const double e11 = std::abs(r.focal - (r.fea_fg + r.fea_bg + r.attention));
        const double e13 = std::abs(r.total - (r.task + r.focal + r.global_));
        const double eg = std::abs(out.total.item() - (r.task + r.focal + r.global_));
        worst = std::max({worst, e11, e13, eg});
        if (e11 > 1e-12 || e13 > 1e-12 || eg > 1e-12) return {false, "instance " + std::to_string(i) + " off by " + fmt(worst)};
    }

    // w_v2 = 0 turns the relation block into the identity.
    double worst_global = 0;
    for (int i = 0; i < 100; ++i) {
        const std::size_t c = rng.integer(1, 6), h = rng.integer(1, 5), w = rng.integer(1, 5);
        Tensor t = testing::random_tensor(rng, {1, c, h, w}), s = testing::random_tensor(rng, {1, c, h, w});
        GcBlockParams gc = GcBlockParams::create(c, 2, rng.integer(0, 1000));
        testing::randomize(gc, rng);
        for (auto& v : gc.w_v2.tensor.mutable_values()) v = 0.0;
        const double lambda = rng.uniform(0, 2);
        double plain = 0;
        for (std::size_t k = 0; k < t.numel(); ++k) plain += (t[k] - s[k]) * (t[k] - s[k]);
        const double got = global_loss(t, s, gc, lambda).item();
        worst_global = std::max(worst_global, std::abs(got - lambda * plain));
        if (!close(got, lambda * plain, 1e-10)) return {false, "w_v2 = 0 global loss off by " + fmt(worst_global)};
    }

    // Teacher features fed as the student, identity adaptation: every term is exactly zero.
    for (int i = 0; i < 20; ++i) {
        const std::size_t c = rng.integer(1, 6);
        RandomLevel r = random_level(rng, rng.integer(1, 2), c, c, 4, 4);
        r.level.student = r.level.teacher;
        r.adaptation = Adaptation::create(c, c, 0);
        for (auto& v : r.gc.w_v2.tensor.mutable_values()) v = rng.uniform(-1, 1);
        LossReport z = fgd_total(std::span(&r.level, 1), Ablation{random_hp(rng)}, std::span(&r.gc, 1),
                                 std::span(&r.adaptation, 1), Tensor::scalar(0.0))
                           .report;
        if (z.fea_fg != 0.0 || z.fea_bg != 0.0 || z.attention != 0.0 || z.global_ != 0.0 || z.total_distill != 0.0) {
            return {false, "identical features gave a nonzero distillation term"};
        }
    }
    return {true, "sum identities worst " + fmt(worst) + ", w_v2=0 worst " + fmt(worst_global) + ", identical inputs exact 0"};
}

Outcome compositional_oracle(const Paths&) {
    Rng rng(4242);
    double worst = 0;
    for (int i = 0; i < 50; ++i) {
        const std::size_t n = rng.integer(1, 3), ct = rng.integer(1, 6), cs = rng.integer(1, 6);
        const std::size_t grid = rng.integer(2, 6), stride = rng.integer(1, 4);
        RandomLevel r = random_level(rng, n, ct, cs, grid, stride);
        const FgdHyperParams hp = random_hp(rng);
        LossReport rep = fgd_total(std::span(&r.level, 1), Ablation{hp}, std::span(&r.gc, 1),
                                   std::span(&r.adaptation, 1), Tensor::scalar(0.0))
                             .report;

        // Naive recomputation of every term in isolation.
        const std::size_t hw = grid * grid;
        const auto w = testing::to_vec(r.adaptation.weight.tensor), bias = testing::to_vec(r.adaptation.bias.tensor);
        const oracle::Gc g = testing::to_oracle(r.gc);
        double fg = 0, bg = 0, at = 0, gl = 0;
        for (std::size_t b = 0; b < n; ++b) {
            const auto t = testing::image_slice(r.level.teacher, b);
            const auto raw = testing::image_slice(r.level.student, b);
            const auto adapted = oracle::conv1x1(raw, cs, hw, w, bias, ct);
            const auto tm = oracle::masks(t, ct, grid, grid, r.level.boxes[b].boxes, stride, hp.temperature);
            const auto sm = oracle::masks(adapted, ct, grid, grid, {}, stride, hp.temperature);
            auto [f, k] = oracle::feature_loss(t, adapted, tm, ct, hw, hp.alpha, hp.beta);
            fg += f;
            bg += k;
            at += hp.gamma * (oracle::mean_abs_diff(tm.spatial, sm.spatial) + oracle::mean_abs_diff(tm.channel, sm.channel));
            gl += oracle::global_loss(t, cs == ct ? raw : adapted, hw, g, hp.lambda);
        }
        const double expect = (fg + bg + at + gl) / double(n);
        const double err = std::abs(rep.total_distill - expect) / std::max(1.0, std::abs(expect));
        worst = std::max(worst, err);
        if (err > 1e-10 || !close(rep.fea_fg, fg / double(n), 1e-10) || !close(rep.fea_bg, bg / double(n), 1e-10) ||
            !close(rep.attention, at / double(n), 1e-10) || !close(rep.global_, gl / double(n), 1e-10)) {
            return {false, "instance " + std::to_string(i) + " differs from the naive recomputation"};
        }
    }
    return {true, "50 instances, worst rel err " + fmt(worst)};
}

Outcome convergence(const Paths& p) {
    RunConfig cfg = load_config(p.config);
    cfg.output_dir = (p.work / "reference").string();
    const bool shape_ok = cfg.teacher_channels == 8 && cfg.student_channels == 4 && cfg.steps == 500 &&
                          cfg.preset == "anchor-one-stage" && cfg.hp == hyper_params_preset("anchor-one-stage") &&
                          cfg.mode == AblationMode::full;
    if (!shape_ok) return {false, "reference config does not match the required setting"};
    RunResult r = distill_run(cfg);
    const double start = r.history.front().total_distill, end = r.final_eval.total_distill;
    const double ratio = end / start;
    const bool ok = ratio <= 0.10 && r.final_attention_gap < r.initial_attention_gap;
    return {ok, "total_distill " + fmt(start) + " -> " + fmt(end) + " (" + fmt(100 * ratio) + "% of step 0), A^S gap " +
                    fmt(r.initial_attention_gap) + " -> " + fmt(r.final_attention_gap)};
}

Outcome ablation_structure(const Paths& p) {
    const fs::path out = p.work / "ablations";
    fs::remove_all(out);
    const int code = run_shell("sh " + quote(p.script) + " " + quote(p.fgd) + " " + quote(p.config) + " " + quote(out) +
                               " > " + quote(p.work / "ablations.log") + " 2>&1");
    if (code != 0) return {false, "ablation script exited " + std::to_string(code)};

    const RunConfig cfg = load_config(p.config);
    std::set<std::string> trajectories;
    for (const char* mode : {"fg_only", "bg_only", "joint_no_split", "split"}) {
        const fs::path m = out / mode / "metrics.csv";
        if (!fs::exists(m)) return {false, std::string(mode) + ": no metrics.csv"};
        const std::string text = read_file(m);
        if (count_lines(text) != cfg.steps + 1) return {false, std::string(mode) + ": incomplete log"};
        trajectories.insert(text);
    }
    if (trajectories.size() != 4) return {false, "ablation runs share a loss trajectory"};

    std::size_t sweeps = 0;
    for (const char* t : {"0.3", "0.5", "0.8", "1.0", "1.2"}) {
        const fs::path m = out / "temperature" / (std::string("temperature_") + t) / "metrics.csv";
        if (fs::exists(m) && count_lines(read_file(m)) == cfg.steps + 1) ++sweeps;
    }
    const fs::path summary = out / "temperature" / "summary.csv";
    const bool summary_ok = fs::exists(summary) && count_lines(read_file(summary)) == 6;
    return {sweeps == 5 && summary_ok, "4 distinct area trajectories, " + std::to_string(sweeps) + "/5 temperature runs"};
}

Outcome determinism(const Paths& p) {
    std::string logs[2];
    for (int i = 0; i < 2; ++i) {
        const fs::path out = p.work / ("determinism_" + std::to_string(i));
        fs::remove_all(out);
        const int code = run_shell(quote(p.fgd) + " train --config " + quote(p.config) + " --out " + quote(out) +
                                   " > /dev/null 2>&1");
        if (code != 0) return {false, "train exited " + std::to_string(code)};
        logs[i] = read_file(out / "metrics.csv");
    }
    return {logs[0] == logs[1] && !logs[0].empty(),
            std::to_string(logs[0].size()) + " bytes, " + (logs[0] == logs[1] ? "identical" : "different")};
}

}  // namespace

int main(int argc, char** argv) {
    if (argc != 5) {
        std::cerr << "usage: " << argv[0] << " FGD_BINARY REFERENCE_CONFIG ABLATION_SCRIPT WORK_DIR\n";
        return 2;
    }
    const Paths paths{argv[1], argv[2], argv[3], argv[4]};
    fs::create_directories(paths.work);

    struct Criterion {
        const char* name;
        double budget_s;
        std::function<Outcome(const Paths&)> check;
    };
    const std::vector<Criterion> criteria{
        {"mask_invariants", 10, mask_invariants},
        {"gradient_oracle", 60, gradient_oracle},
        {"loss_identities", 0, loss_identities},
        {"compositional_oracle", 0, compositional_oracle},
        {"toy_convergence", 300, convergence},
        {"ablation_structure", 0, ablation_structure},
        {"determinism", 0, determinism},
    };

    int failures = 0;
    for (const Criterion& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.check(paths);
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (c.budget_s > 0 && secs > c.budget_s) {
            o.passed = false;
            o.detail += "; over the " + fmt(c.budget_s) + " s budget";
        }
        std::printf("%s %-22s %s (%.2f s)\n", o.passed ? "PASS" : "FAIL", c.name, o.detail.c_str(), secs);
        std::fflush(stdout);
        failures += o.passed ? 0 : 1;
    }
    return failures == 0 ? 0 : 1;
}

#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <unistd.h>

#include "fgd/gcblock.hpp"
#include "fgd/random.hpp"
#include "fgd/tensor.hpp"
#include "oracles.hpp"

namespace testing {

inline fgd::Tensor random_tensor(fgd::Rng& rng, fgd::Shape shape, double lo = -2.0, double hi = 2.0,
                                 bool requires_grad = false) {
    auto n = fgd::shape_numel(shape);
    return fgd::Tensor::from_values(std::move(shape), rng.uniform_vector(n, lo, hi), requires_grad);
}

inline std::vector<double> to_vec(const fgd::Tensor& t) { return {t.values().begin(), t.values().end()}; }

/// Values of image `b` from an N x ... tensor.
inline std::vector<double> image_slice(const fgd::Tensor& t, std::size_t b) {
    const std::size_t per = t.numel() / t.dim(0);
    auto v = t.values();
    return {v.begin() + static_cast<std::ptrdiff_t>(b * per), v.begin() + static_cast<std::ptrdiff_t>((b + 1) * per)};
}

inline oracle::Gc to_oracle(const fgd::GcBlockParams& p) {
    oracle::Gc g;
    g.w_k = to_vec(p.w_k.tensor);
    g.w_v1 = to_vec(p.w_v1.tensor);
    g.w_v2 = to_vec(p.w_v2.tensor);
    g.gamma = to_vec(p.ln_gamma.tensor);
    g.beta = to_vec(p.ln_beta.tensor);
    g.c = p.channels();
    g.mid = p.mid_channels();
    return g;
}

inline void randomize(fgd::GcBlockParams& gc, fgd::Rng& rng, double scale = 1.0) {
    for (fgd::Parameter* p : gc.parameters())
        for (auto& v : p->tensor.mutable_values()) v = rng.uniform(-scale, scale);
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
    double m = 0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

/// Scratch directory under the system temp dir, removed on destruction.
class TempDir {
   public:
    explicit TempDir(const std::string& tag) {
        path_ = std::filesystem::temp_directory_path() / ("fgd_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter()++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }

   private:
    static std::uint64_t& counter() {
        static std::uint64_t n = 0;
        return n;
    }
    std::filesystem::path path_;
};

}  // namespace testing

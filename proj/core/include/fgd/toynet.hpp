#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "fgd/tensor.hpp"

namespace fgd {

/// Strides of the two feature levels produced by ToyNet.
inline constexpr std::array<std::size_t, 2> kLevelStrides{2, 4};

/// Tiny stand-in for backbone + neck:
///   stem 1x1 conv (3 -> C) + relu, pool, 1x1 conv + relu  -> level 0 (stride 2)
///   pool, 1x1 conv + relu                                 -> level 1 (stride 4)
class ToyNet {
   public:
    static ToyNet create(std::size_t channels, std::uint64_t seed, const std::string& prefix);

    /// Images N x 3 x H x W with H, W divisible by 4; returns one map per level.
    std::vector<Tensor> forward(const Tensor& images) const;

    std::size_t channels() const { return channels_; }
    std::vector<Parameter*> parameters();
    std::vector<const Parameter*> parameters() const;

    /// Deep copy under a new parameter-name prefix.
    ToyNet clone(const std::string& prefix) const;
    /// Stops gradient tracking on every parameter.
    void freeze();

    /// Disabling relu makes the net linear (for testing).
    void set_use_relu(bool flag) { use_relu_ = flag; }

   private:
    std::size_t channels_ = 0;
    bool use_relu_ = true;
    std::array<Parameter, 3> weights_;
    std::array<Parameter, 3> biases_;
};

/// Stand-in supervised task: regress level-0 features onto a fixed random
/// non-negative linear projection of the 2x-pooled image.
class TaskHead {
   public:
    TaskHead(std::size_t channels, std::uint64_t seed);

    Tensor target(const Tensor& images) const;
    Tensor loss(const Tensor& level0, const Tensor& images) const;

   private:
    Tensor projection_;  // C x 3, constant
};

}  // namespace fgd

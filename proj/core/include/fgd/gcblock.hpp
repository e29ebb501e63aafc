#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "fgd/tensor.hpp"

namespace fgd {

/// Global-context relation block: softmax-attention pooling over all pixels,
/// a C -> C_mid -> C bottleneck (layer norm + relu in between) and a residual add.
struct GcBlockParams {
    Parameter w_k;       // 1 x C
    Parameter w_v1;      // C_mid x C
    Parameter w_v2;      // C x C_mid
    Parameter ln_gamma;  // C_mid
    Parameter ln_beta;   // C_mid
    std::size_t reduction = 2;

    std::size_t channels() const { return w_k.tensor.dim(1); }
    std::size_t mid_channels() const { return w_v1.tensor.dim(0); }

    /// Zero w_v2 (so relation() starts as the identity), unit gamma, zero beta,
    /// and w_k / w_v1 uniform in [-0.1, 0.1] from `seed`.
    static GcBlockParams create(std::size_t channels, std::size_t reduction, std::uint64_t seed,
                                const std::string& prefix = "gc");

    std::vector<Parameter*> parameters();
    /// Throws DimensionError when the weight shapes disagree with each other.
    void validate() const;
};

inline std::size_t gc_mid_channels(std::size_t channels, std::size_t reduction) {
    return std::max<std::size_t>(1, channels / reduction);
}

/// Attention-pooled context per image: N x C x H x W -> N x C.
Tensor context_pool(const Tensor& features, const Tensor& w_k);

/// Pixel attention weights used by context_pool: N x (H*W), rows sum to 1.
Tensor context_weights(const Tensor& features, const Tensor& w_k);

/// w_v2 * relu(LN(w_v1 * ctx)) for an N x C context.
Tensor gc_transform(const Tensor& context, const GcBlockParams& params);

/// R(F) = F + transform(context_pool(F)), broadcast over pixels.
Tensor relation(const Tensor& features, const GcBlockParams& params);

}  // namespace fgd

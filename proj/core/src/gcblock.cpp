#include "fgd/gcblock.hpp"

#include <array>

#include "fgd/random.hpp"

namespace fgd {

GcBlockParams GcBlockParams::create(std::size_t channels, std::size_t reduction, std::uint64_t seed,
                                    const std::string& prefix) {
    if (channels == 0 || reduction == 0) throw ParameterError("gcblock: channels and reduction must be positive");
    const std::size_t mid = gc_mid_channels(channels, reduction);
    Rng rng(seed);
    GcBlockParams p;
    p.reduction = reduction;
    p.w_k = Parameter(prefix + ".w_k", {1, channels}, rng.uniform_vector(channels, -0.1, 0.1));
    p.w_v1 = Parameter(prefix + ".w_v1", {mid, channels}, rng.uniform_vector(mid * channels, -0.1, 0.1));
    p.w_v2 = Parameter(prefix + ".w_v2", {channels, mid}, std::vector<double>(channels * mid, 0.0));
    p.ln_gamma = Parameter(prefix + ".ln_gamma", {mid}, std::vector<double>(mid, 1.0));
    p.ln_beta = Parameter(prefix + ".ln_beta", {mid}, std::vector<double>(mid, 0.0));
    return p;
}

std::vector<Parameter*> GcBlockParams::parameters() { return {&w_k, &w_v1, &w_v2, &ln_gamma, &ln_beta}; }

void GcBlockParams::validate() const {
    const auto& k = w_k.tensor;
    const auto& v1 = w_v1.tensor;
    const auto& v2 = w_v2.tensor;
    if (k.rank() != 2 || k.dim(0) != 1) throw DimensionError("gcblock: w_k must be 1 x C");
    const std::size_t c = k.dim(1);
    if (v1.rank() != 2 || v1.dim(1) != c) throw DimensionError("gcblock: w_v1 must be C_mid x C");
    const std::size_t mid = v1.dim(0);
    if (v2.rank() != 2 || v2.dim(0) != c || v2.dim(1) != mid) throw DimensionError("gcblock: w_v2 must be C x C_mid");
    if (ln_gamma.tensor.shape() != Shape{mid} || ln_beta.tensor.shape() != Shape{mid}) {
        throw DimensionError("gcblock: layer-norm parameters must have C_mid entries");
    }
}

Tensor context_weights(const Tensor& features, const Tensor& w_k) {
    if (features.rank() != 4) throw DimensionError("context_pool: expected N x C x H x W");
    const std::size_t n = features.dim(0), h = features.dim(2), w = features.dim(3);
    Tensor logits = conv1x1(features, w_k);  // N x 1 x H x W
    return softmax_t(reshape(logits, {n, h * w}), 1, 1.0);
}

Tensor context_pool(const Tensor& features, const Tensor& w_k) {
    const std::size_t n = features.dim(0), c = features.dim(1), hw = features.dim(2) * features.dim(3);
    Tensor weights = context_weights(features, w_k);
    return batched_matvec(reshape(features, {n, c, hw}), weights);
}

Tensor gc_transform(const Tensor& context, const GcBlockParams& params) {
    params.validate();
    if (context.rank() != 2 || context.dim(1) != params.channels()) {
        throw DimensionError("gc_transform: context must be N x " + std::to_string(params.channels()));
    }
    const std::size_t n = context.dim(0), c = context.dim(1), mid = params.mid_channels();
    Tensor hidden = reshape(conv1x1(reshape(context, {n, c, 1, 1}), params.w_v1), {n, mid});
    static constexpr std::array<std::size_t, 1> kMidAxis{1};
    Tensor normed = relu(layer_norm(hidden, params.ln_gamma, params.ln_beta, kMidAxis));
    return reshape(conv1x1(reshape(normed, {n, mid, 1, 1}), params.w_v2), {n, c});
}

Tensor relation(const Tensor& features, const GcBlockParams& params) {
    if (features.rank() != 4 || features.dim(1) != params.channels()) {
        throw DimensionError("relation: features must be N x " + std::to_string(params.channels()) + " x H x W");
    }
    const std::size_t n = features.dim(0), c = features.dim(1);
    Tensor delta = gc_transform(context_pool(features, params.w_k), params);
    return add(features, broadcast_to(reshape(delta, {n, c, 1, 1}), features.shape()));
}

}  // namespace fgd

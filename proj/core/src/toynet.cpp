#include "fgd/toynet.hpp"

#include <cmath>

#include "fgd/random.hpp"

namespace fgd {

namespace {

constexpr std::size_t kImageChannels = 3;

std::vector<double> copy_values(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

}  // namespace

ToyNet ToyNet::create(std::size_t channels, std::uint64_t seed, const std::string& prefix) {
    if (channels == 0) throw ParameterError("ToyNet needs at least one channel");
    Rng rng(seed);
    ToyNet net;
    net.channels_ = channels;
    for (std::size_t i = 0; i < 3; ++i) {
        const std::size_t fan_in = i == 0 ? kImageChannels : channels;
        const double a = std::sqrt(3.0 / static_cast<double>(fan_in));
        const std::string stage = prefix + ".stage" + std::to_string(i);
        net.weights_[i] = Parameter(stage + ".weight", {channels, fan_in}, rng.uniform_vector(channels * fan_in, -a, a));
        net.biases_[i] = Parameter(stage + ".bias", {channels}, std::vector<double>(channels, 0.0));
    }
    return net;
}

std::vector<Tensor> ToyNet::forward(const Tensor& images) const {
    if (images.rank() != 4 || images.dim(1) != kImageChannels) {
        throw DimensionError("ToyNet: expected N x 3 x H x W images, got " + shape_to_string(images.shape()));
    }
    const std::size_t deepest = kLevelStrides.back();
    if (images.dim(2) % deepest != 0 || images.dim(3) % deepest != 0) {
        throw DimensionError("ToyNet: image dims must be divisible by " + std::to_string(deepest));
    }
    auto act = [this](const Tensor& t) { return use_relu_ ? relu(t) : t; };
    Tensor x = act(conv1x1(images, weights_[0], biases_[0].tensor));
    Tensor level0 = act(conv1x1(avg_pool2(x), weights_[1], biases_[1].tensor));
    Tensor level1 = act(conv1x1(avg_pool2(level0), weights_[2], biases_[2].tensor));
    return {level0, level1};
}

std::vector<Parameter*> ToyNet::parameters() {
    std::vector<Parameter*> out;
    for (std::size_t i = 0; i < 3; ++i) {
        out.push_back(&weights_[i]);
        out.push_back(&biases_[i]);
    }
    return out;
}

std::vector<const Parameter*> ToyNet::parameters() const {
    std::vector<const Parameter*> out;
    for (std::size_t i = 0; i < 3; ++i) {
        out.push_back(&weights_[i]);
        out.push_back(&biases_[i]);
    }
    return out;
}

ToyNet ToyNet::clone(const std::string& prefix) const {
    ToyNet net;
    net.channels_ = channels_;
    net.use_relu_ = use_relu_;
    for (std::size_t i = 0; i < 3; ++i) {
        const std::string stage = prefix + ".stage" + std::to_string(i);
        net.weights_[i] = Parameter(stage + ".weight", weights_[i].tensor.shape(), copy_values(weights_[i].tensor));
        net.biases_[i] = Parameter(stage + ".bias", biases_[i].tensor.shape(), copy_values(biases_[i].tensor));
    }
    return net;
}

void ToyNet::freeze() {
    for (auto* p : parameters()) {
        p->tensor.zero_grad();
        p->tensor.set_requires_grad(false);
    }
}

TaskHead::TaskHead(std::size_t channels, std::uint64_t seed) {
    Rng rng(seed);
    projection_ = Tensor::from_values({channels, kImageChannels}, rng.uniform_vector(channels * kImageChannels, 0.0, 1.0));
}

Tensor TaskHead::target(const Tensor& images) const { return conv1x1(avg_pool2(images.detach()), projection_); }

Tensor TaskHead::loss(const Tensor& level0, const Tensor& images) const {
    Tensor t = target(images);
    if (t.shape() != level0.shape()) {
        throw DimensionError("task loss: level-0 features " + shape_to_string(level0.shape()) +
                             " do not match target " + shape_to_string(t.shape()));
    }
    return mean_all(square(sub(level0, t)));
}

}  // namespace fgd

#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fgd/errors.hpp"

namespace fgd {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

namespace detail {
struct Node;
}

/// Dense row-major array of doubles with an optional reverse-mode graph.
///
/// A Tensor is a shared handle: copies alias the same storage and graph node,
/// so a Parameter's tensor seen by several forward passes accumulates into one
/// gradient buffer. Results of differentiable ops hold their parents alive
/// until the result itself is released; the graph is rebuilt on every forward.
class Tensor {
   public:
    /// Callback that receives d(loss)/d(this result) and pushes it into parents.
    using BackwardFn = std::function<void(std::span<const double> grad_out)>;

    Tensor();

    static Tensor from_values(Shape shape, std::vector<double> values, bool requires_grad = false);
    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);

    /// Builds an op result. The backward callback is dropped when no parent
    /// requires a gradient, so constant subgraphs carry no graph.
    static Tensor make_result(Shape shape, std::vector<double> values, std::vector<Tensor> parents,
                              BackwardFn backward);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const;
    std::size_t rank() const { return shape().size(); }
    std::size_t dim(std::size_t axis) const;
    std::size_t numel() const;

    std::span<const double> values() const;
    /// Direct write access. Only optimizers and finite-difference probes use
    /// this; it does not invalidate graphs already built on top of the tensor.
    std::span<double> mutable_values();
    double item() const;
    double operator[](std::size_t flat_index) const { return values()[flat_index]; }

    bool requires_grad() const;
    void set_requires_grad(bool flag);
    bool has_grad() const;
    std::span<const double> grad() const;
    void zero_grad();
    /// Adds `g` into this tensor's gradient buffer (allocating it on first use).
    void accumulate_grad(std::span<const double> g) const;

    /// Value copy with no graph and no gradient tracking.
    Tensor detach() const;

    bool same_node(const Tensor& other) const { return node_ == other.node_; }

   private:
    explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
    std::shared_ptr<detail::Node> node_;

    friend void backward(const Tensor& loss);
};

/// A named trainable tensor. Gradients accumulate until zero_grad().
struct Parameter {
    std::string name;
    Tensor tensor;

    Parameter() = default;
    Parameter(std::string n, Shape shape, std::vector<double> values)
        : name(std::move(n)), tensor(Tensor::from_values(std::move(shape), std::move(values), true)) {}

    void zero_grad() { tensor.zero_grad(); }
    operator const Tensor&() const { return tensor; }  // NOLINT(google-explicit-constructor)
};

/// Populates gradients of every reachable tensor that requires one.
void backward(const Tensor& loss);

// ---------------------------------------------------------------------------
// Elementwise arithmetic

enum class ElementwiseOp { add, sub, mul, square, abs };

/// Same-shape binary op, or unary op (square, abs) ignoring `b`.
Tensor elementwise(ElementwiseOp op, const Tensor& a, const Tensor& b);
Tensor elementwise(ElementwiseOp op, const Tensor& a, double b);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, double b);
Tensor mul(const Tensor& a, double b);
Tensor square(const Tensor& a);
Tensor abs(const Tensor& a);
Tensor relu(const Tensor& a);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator*(const Tensor& a, double b) { return mul(a, b); }
inline Tensor operator*(double a, const Tensor& b) { return mul(b, a); }

// ---------------------------------------------------------------------------
// Reductions and shape manipulation

enum class ReduceKind { sum, mean };

/// Reduces over `axes`, removing them from the shape. Reducing every axis
/// yields a rank-0 tensor.
Tensor reduce(ReduceKind kind, const Tensor& a, std::span<const std::size_t> axes);
Tensor sum(const Tensor& a, std::initializer_list<std::size_t> axes);
Tensor mean(const Tensor& a, std::initializer_list<std::size_t> axes);
Tensor sum_all(const Tensor& a);
Tensor mean_all(const Tensor& a);

Tensor reshape(const Tensor& a, Shape shape);
/// Expands size-1 axes to `shape` (ranks must agree).
Tensor broadcast_to(const Tensor& a, const Shape& shape);
/// Image `index` of a batched tensor, keeping a leading axis of extent 1.
Tensor slice_batch(const Tensor& a, std::size_t index);

// ---------------------------------------------------------------------------
// Small-network ops

/// exp((a - max)/T) normalized along `axis`.
Tensor softmax_t(const Tensor& a, std::size_t axis, double temperature);

/// Per-pixel channel mixing: x (N x Cin x H x W), w (Cout x Cin), bias (Cout).
Tensor conv1x1(const Tensor& x, const Tensor& w, const std::optional<Tensor>& bias = std::nullopt);

inline constexpr double kLayerNormEps = 1e-5;

/// Normalizes over `axes`, which must be the trailing axes of `x`; gamma and
/// beta have the shape of those axes.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  std::span<const std::size_t> axes, double eps = kLayerNormEps);

/// 2x2 mean pooling with stride 2 over the last two axes of an N x C x H x W map.
Tensor avg_pool2(const Tensor& x);

/// out[n, c] = sum_p a[n, c, p] * v[n, p].
Tensor batched_matvec(const Tensor& a, const Tensor& v);

}  // namespace fgd

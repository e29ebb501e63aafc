#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "fgd/tensor.hpp"

namespace fgd {

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (a.shape() != b.shape()) {
        throw DimensionError(std::string(what) + ": shape mismatch " + shape_to_string(a.shape()) + " vs " +
                             shape_to_string(b.shape()));
    }
}

std::vector<std::size_t> strides_of(const Shape& shape) {
    std::vector<std::size_t> s(shape.size(), 1);
    for (std::size_t i = shape.size(); i-- > 1;) s[i - 1] = s[i] * shape[i];
    return s;
}

}  // namespace

// ---------------------------------------------------------------------------
// Elementwise

Tensor elementwise(ElementwiseOp op, const Tensor& a, const Tensor& b) {
    switch (op) {
        case ElementwiseOp::add:
            return add(a, b);
        case ElementwiseOp::sub:
            return sub(a, b);
        case ElementwiseOp::mul:
            return mul(a, b);
        case ElementwiseOp::square:
            return square(a);
        case ElementwiseOp::abs:
            return abs(a);
    }
    throw ParameterError("unknown elementwise op");
}

Tensor elementwise(ElementwiseOp op, const Tensor& a, double b) {
    switch (op) {
        case ElementwiseOp::add:
            return add(a, b);
        case ElementwiseOp::sub:
            return add(a, -b);
        case ElementwiseOp::mul:
            return mul(a, b);
        case ElementwiseOp::square:
            return square(a);
        case ElementwiseOp::abs:
            return abs(a);
    }
    throw ParameterError("unknown elementwise op");
}

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    auto av = a.values(), bv = b.values();
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
    return Tensor::make_result(a.shape(), std::move(out), {a, b}, [a, b](std::span<const double> g) mutable {
        if (a.requires_grad()) a.accumulate_grad(g);
        if (b.requires_grad()) b.accumulate_grad(g);
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    auto av = a.values(), bv = b.values();
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
    return Tensor::make_result(a.shape(), std::move(out), {a, b}, [a, b](std::span<const double> g) mutable {
        if (a.requires_grad()) a.accumulate_grad(g);
        if (b.requires_grad()) {
            std::vector<double> neg(g.size());
            for (std::size_t i = 0; i < g.size(); ++i) neg[i] = -g[i];
            b.accumulate_grad(neg);
        }
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    auto av = a.values(), bv = b.values();
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
    return Tensor::make_result(a.shape(), std::move(out), {a, b}, [a, b](std::span<const double> g) mutable {
        auto av = a.values(), bv = b.values();
        std::vector<double> tmp(g.size());
        if (a.requires_grad()) {
            for (std::size_t i = 0; i < g.size(); ++i) tmp[i] = g[i] * bv[i];
            a.accumulate_grad(tmp);
        }
        if (b.requires_grad()) {
            for (std::size_t i = 0; i < g.size(); ++i) tmp[i] = g[i] * av[i];
            b.accumulate_grad(tmp);
        }
    });
}

Tensor add(const Tensor& a, double b) {
    auto av = a.values();
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + b;
    return Tensor::make_result(a.shape(), std::move(out), {a},
                               [a](std::span<const double> g) mutable { a.accumulate_grad(g); });
}

Tensor mul(const Tensor& a, double b) {
    auto av = a.values();
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * b;
    return Tensor::make_result(a.shape(), std::move(out), {a}, [a, b](std::span<const double> g) mutable {
        std::vector<double> tmp(g.size());
        for (std::size_t i = 0; i < g.size(); ++i) tmp[i] = g[i] * b;
        a.accumulate_grad(tmp);
    });
}

Tensor square(const Tensor& a) {
    auto av = a.values();
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * av[i];
    return Tensor::make_result(a.shape(), std::move(out), {a}, [a](std::span<const double> g) mutable {
        auto av = a.values();
        std::vector<double> tmp(g.size());
        for (std::size_t i = 0; i < g.size(); ++i) tmp[i] = 2.0 * av[i] * g[i];
        a.accumulate_grad(tmp);
    });
}

Tensor abs(const Tensor& a) {
    auto av = a.values();
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::abs(av[i]);
    return Tensor::make_result(a.shape(), std::move(out), {a}, [a](std::span<const double> g) mutable {
        auto av = a.values();
        std::vector<double> tmp(g.size());
        for (std::size_t i = 0; i < g.size(); ++i) {
            tmp[i] = av[i] > 0.0 ? g[i] : (av[i] < 0.0 ? -g[i] : 0.0);
        }
        a.accumulate_grad(tmp);
    });
}

Tensor relu(const Tensor& a) {
    auto av = a.values();
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] > 0.0 ? av[i] : 0.0;
    return Tensor::make_result(a.shape(), std::move(out), {a}, [a](std::span<const double> g) mutable {
        auto av = a.values();
        std::vector<double> tmp(g.size());
        for (std::size_t i = 0; i < g.size(); ++i) tmp[i] = av[i] > 0.0 ? g[i] : 0.0;
        a.accumulate_grad(tmp);
    });
}

// ---------------------------------------------------------------------------
// Reductions and shape manipulation

Tensor reduce(ReduceKind kind, const Tensor& a, std::span<const std::size_t> axes) {
    const Shape& in = a.shape();
    std::vector<bool> reduced(in.size(), false);
    for (auto ax : axes) {
        if (ax >= in.size()) {
            throw DimensionError("reduce: axis " + std::to_string(ax) + " invalid for " + shape_to_string(in));
        }
        if (reduced[ax]) throw DimensionError("reduce: repeated axis " + std::to_string(ax));
        reduced[ax] = true;
    }
    Shape out_shape;
    std::size_t count = 1;
    for (std::size_t i = 0; i < in.size(); ++i) {
        if (reduced[i]) {
            count *= in[i];
        } else {
            out_shape.push_back(in[i]);
        }
    }

    // Flat input index -> flat output index.
    auto out_strides = strides_of(out_shape);
    std::vector<std::size_t> axis_stride(in.size(), 0);
    for (std::size_t i = 0, o = 0; i < in.size(); ++i) {
        if (!reduced[i]) axis_stride[i] = out_strides[o++];
    }
    std::vector<std::size_t> target(a.numel());
    std::vector<std::size_t> idx(in.size(), 0);
    for (std::size_t flat = 0; flat < target.size(); ++flat) {
        std::size_t t = 0;
        for (std::size_t d = 0; d < in.size(); ++d) t += idx[d] * axis_stride[d];
        target[flat] = t;
        for (std::size_t d = in.size(); d-- > 0;) {
            if (++idx[d] < in[d]) break;
            idx[d] = 0;
        }
    }

    const double scale = kind == ReduceKind::mean ? 1.0 / static_cast<double>(count) : 1.0;
    std::vector<double> out(shape_numel(out_shape), 0.0);
    auto av = a.values();
    for (std::size_t i = 0; i < av.size(); ++i) out[target[i]] += av[i];
    if (scale != 1.0) {
        for (auto& v : out) v *= scale;
    }

    return Tensor::make_result(std::move(out_shape), std::move(out), {a},
                               [a, target = std::move(target), scale](std::span<const double> g) mutable {
                                   std::vector<double> tmp(target.size());
                                   for (std::size_t i = 0; i < tmp.size(); ++i) tmp[i] = g[target[i]] * scale;
                                   a.accumulate_grad(tmp);
                               });
}

Tensor sum(const Tensor& a, std::initializer_list<std::size_t> axes) {
    return reduce(ReduceKind::sum, a, std::span<const std::size_t>(axes.begin(), axes.size()));
}

Tensor mean(const Tensor& a, std::initializer_list<std::size_t> axes) {
    return reduce(ReduceKind::mean, a, std::span<const std::size_t>(axes.begin(), axes.size()));
}

Tensor sum_all(const Tensor& a) {
    std::vector<std::size_t> axes(a.rank());
    std::iota(axes.begin(), axes.end(), 0);
    return reduce(ReduceKind::sum, a, axes);
}

Tensor mean_all(const Tensor& a) {
    std::vector<std::size_t> axes(a.rank());
    std::iota(axes.begin(), axes.end(), 0);
    return reduce(ReduceKind::mean, a, axes);
}

Tensor reshape(const Tensor& a, Shape shape) {
    if (shape_numel(shape) != a.numel()) {
        throw DimensionError("reshape: " + shape_to_string(a.shape()) + " -> " + shape_to_string(shape));
    }
    std::vector<double> out(a.values().begin(), a.values().end());
    return Tensor::make_result(std::move(shape), std::move(out), {a},
                               [a](std::span<const double> g) mutable { a.accumulate_grad(g); });
}

Tensor broadcast_to(const Tensor& a, const Shape& shape) {
    const Shape& in = a.shape();
    if (in.size() != shape.size()) {
        throw DimensionError("broadcast_to: rank mismatch " + shape_to_string(in) + " -> " + shape_to_string(shape));
    }
    for (std::size_t d = 0; d < in.size(); ++d) {
        if (in[d] != shape[d] && in[d] != 1) {
            throw DimensionError("broadcast_to: cannot expand " + shape_to_string(in) + " to " +
                                 shape_to_string(shape));
        }
    }
    auto in_strides = strides_of(in);
    std::vector<std::size_t> source(shape_numel(shape));
    std::vector<std::size_t> idx(shape.size(), 0);
    for (std::size_t flat = 0; flat < source.size(); ++flat) {
        std::size_t s = 0;
        for (std::size_t d = 0; d < shape.size(); ++d) s += (in[d] == 1 ? 0 : idx[d]) * in_strides[d];
        source[flat] = s;
        for (std::size_t d = shape.size(); d-- > 0;) {
            if (++idx[d] < shape[d]) break;
            idx[d] = 0;
        }
    }
    auto av = a.values();
    std::vector<double> out(source.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[source[i]];
    return Tensor::make_result(shape, std::move(out), {a},
                               [a, source = std::move(source)](std::span<const double> g) mutable {
                                   std::vector<double> tmp(a.numel(), 0.0);
                                   for (std::size_t i = 0; i < g.size(); ++i) tmp[source[i]] += g[i];
                                   a.accumulate_grad(tmp);
                               });
}

Tensor slice_batch(const Tensor& a, std::size_t index) {
    if (a.rank() == 0 || index >= a.dim(0)) {
        throw DimensionError("slice_batch: index " + std::to_string(index) + " out of range for " +
                             shape_to_string(a.shape()));
    }
    Shape shape = a.shape();
    shape[0] = 1;
    const std::size_t chunk = shape_numel(shape);
    const std::size_t offset = index * chunk;
    auto av = a.values();
    std::vector<double> out(av.begin() + static_cast<std::ptrdiff_t>(offset),
                            av.begin() + static_cast<std::ptrdiff_t>(offset + chunk));
    return Tensor::make_result(std::move(shape), std::move(out), {a},
                               [a, offset](std::span<const double> g) mutable {
                                   std::vector<double> tmp(a.numel(), 0.0);
                                   std::copy(g.begin(), g.end(), tmp.begin() + static_cast<std::ptrdiff_t>(offset));
                                   a.accumulate_grad(tmp);
                               });
}

// ---------------------------------------------------------------------------
// Small-network ops

Tensor softmax_t(const Tensor& a, std::size_t axis, double temperature) {
    if (!(temperature > 0.0) || !std::isfinite(temperature)) {
        throw ParameterError("softmax temperature must be positive, got " + std::to_string(temperature));
    }
    const Shape& shape = a.shape();
    if (axis >= shape.size()) throw DimensionError("softmax: axis out of range for " + shape_to_string(shape));
    std::size_t outer = 1, inner = 1;
    for (std::size_t d = 0; d < axis; ++d) outer *= shape[d];
    for (std::size_t d = axis + 1; d < shape.size(); ++d) inner *= shape[d];
    const std::size_t n = shape[axis];

    auto av = a.values();
    std::vector<double> out(av.size());
    for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t in = 0; in < inner; ++in) {
            const std::size_t base = o * n * inner + in;
            double mx = -std::numeric_limits<double>::infinity();
            for (std::size_t k = 0; k < n; ++k) mx = std::max(mx, av[base + k * inner]);
            double z = 0.0;
            for (std::size_t k = 0; k < n; ++k) {
                double e = std::exp((av[base + k * inner] - mx) / temperature);
                out[base + k * inner] = e;
                z += e;
            }
            for (std::size_t k = 0; k < n; ++k) out[base + k * inner] /= z;
        }
    }

    std::vector<double> y = out;
    return Tensor::make_result(
        shape, std::move(out), {a},
        [a, y = std::move(y), outer, inner, n, temperature](std::span<const double> g) mutable {
            std::vector<double> tmp(y.size());
            for (std::size_t o = 0; o < outer; ++o) {
                for (std::size_t in = 0; in < inner; ++in) {
                    const std::size_t base = o * n * inner + in;
                    double dot = 0.0;
                    for (std::size_t k = 0; k < n; ++k) dot += g[base + k * inner] * y[base + k * inner];
                    for (std::size_t k = 0; k < n; ++k) {
                        const std::size_t i = base + k * inner;
                        tmp[i] = y[i] * (g[i] - dot) / temperature;
                    }
                }
            }
            a.accumulate_grad(tmp);
        });
}

Tensor conv1x1(const Tensor& x, const Tensor& w, const std::optional<Tensor>& bias) {
    if (x.rank() != 4) throw DimensionError("conv1x1: expected N x C x H x W input, got " + shape_to_string(x.shape()));
    if (w.rank() != 2) throw DimensionError("conv1x1: weight must be Cout x Cin, got " + shape_to_string(w.shape()));
    const std::size_t n = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3);
    const std::size_t cout = w.dim(0);
    if (w.dim(1) != cin) {
        throw DimensionError("conv1x1: weight expects " + std::to_string(w.dim(1)) + " input channels, got " +
                             std::to_string(cin));
    }
    if (bias && (bias->rank() != 1 || bias->dim(0) != cout)) {
        throw DimensionError("conv1x1: bias must have " + std::to_string(cout) + " entries");
    }
    const std::size_t plane = h * wd;
    auto xv = x.values(), wv = w.values();
    std::vector<double> out(n * cout * plane, 0.0);
    for (std::size_t b = 0; b < n; ++b) {
        for (std::size_t co = 0; co < cout; ++co) {
            double* dst = out.data() + (b * cout + co) * plane;
            if (bias) std::fill(dst, dst + plane, bias->values()[co]);
            for (std::size_t ci = 0; ci < cin; ++ci) {
                const double wc = wv[co * cin + ci];
                const double* src = xv.data() + (b * cin + ci) * plane;
                for (std::size_t p = 0; p < plane; ++p) dst[p] += wc * src[p];
            }
        }
    }

    std::vector<Tensor> parents{x, w};
    if (bias) parents.push_back(*bias);
    return Tensor::make_result(
        {n, cout, h, wd}, std::move(out), std::move(parents),
        [x, w, bias, n, cin, cout, plane](std::span<const double> g) mutable {
            auto xv = x.values(), wv = w.values();
            if (x.requires_grad()) {
                std::vector<double> gx(x.numel(), 0.0);
                for (std::size_t b = 0; b < n; ++b)
                    for (std::size_t co = 0; co < cout; ++co) {
                        const double* gsrc = g.data() + (b * cout + co) * plane;
                        for (std::size_t ci = 0; ci < cin; ++ci) {
                            const double wc = wv[co * cin + ci];
                            double* dst = gx.data() + (b * cin + ci) * plane;
                            for (std::size_t p = 0; p < plane; ++p) dst[p] += wc * gsrc[p];
                        }
                    }
                x.accumulate_grad(gx);
            }
            if (w.requires_grad()) {
                std::vector<double> gw(w.numel(), 0.0);
                for (std::size_t b = 0; b < n; ++b)
                    for (std::size_t co = 0; co < cout; ++co) {
                        const double* gsrc = g.data() + (b * cout + co) * plane;
                        for (std::size_t ci = 0; ci < cin; ++ci) {
                            const double* src = xv.data() + (b * cin + ci) * plane;
                            double acc = 0.0;
                            for (std::size_t p = 0; p < plane; ++p) acc += gsrc[p] * src[p];
                            gw[co * cin + ci] += acc;
                        }
                    }
                w.accumulate_grad(gw);
            }
            if (bias && bias->requires_grad()) {
                std::vector<double> gb(cout, 0.0);
                for (std::size_t b = 0; b < n; ++b)
                    for (std::size_t co = 0; co < cout; ++co) {
                        const double* gsrc = g.data() + (b * cout + co) * plane;
                        for (std::size_t p = 0; p < plane; ++p) gb[co] += gsrc[p];
                    }
                bias->accumulate_grad(gb);
            }
        });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, std::span<const std::size_t> axes,
                  double eps) {
    const Shape& shape = x.shape();
    if (axes.empty() || axes.size() > shape.size()) throw DimensionError("layer_norm: invalid axes");
    const std::size_t first = shape.size() - axes.size();
    for (std::size_t i = 0; i < axes.size(); ++i) {
        if (axes[i] != first + i) throw DimensionError("layer_norm: axes must be the trailing axes of the input");
    }
    Shape norm_shape(shape.begin() + static_cast<std::ptrdiff_t>(first), shape.end());
    if (gamma.shape() != norm_shape || beta.shape() != norm_shape) {
        throw DimensionError("layer_norm: gamma/beta must have shape " + shape_to_string(norm_shape));
    }
    const std::size_t inner = shape_numel(norm_shape);
    const std::size_t outer = x.numel() / inner;

    auto xv = x.values(), gv = gamma.values(), bv = beta.values();
    std::vector<double> out(x.numel()), xhat(x.numel()), inv_std(outer);
    for (std::size_t o = 0; o < outer; ++o) {
        const double* src = xv.data() + o * inner;
        double mu = 0.0;
        for (std::size_t i = 0; i < inner; ++i) mu += src[i];
        mu /= static_cast<double>(inner);
        double var = 0.0;
        for (std::size_t i = 0; i < inner; ++i) var += (src[i] - mu) * (src[i] - mu);
        var /= static_cast<double>(inner);
        inv_std[o] = 1.0 / std::sqrt(var + eps);
        for (std::size_t i = 0; i < inner; ++i) {
            const std::size_t k = o * inner + i;
            xhat[k] = (src[i] - mu) * inv_std[o];
            out[k] = xhat[k] * gv[i] + bv[i];
        }
    }

    return Tensor::make_result(
        shape, std::move(out), {x, gamma, beta},
        [x, gamma, beta, xhat = std::move(xhat), inv_std = std::move(inv_std), inner,
         outer](std::span<const double> g) mutable {
            auto gv = gamma.values();
            if (x.requires_grad()) {
                std::vector<double> gx(x.numel());
                const double m = static_cast<double>(inner);
                for (std::size_t o = 0; o < outer; ++o) {
                    double mean_d = 0.0, mean_dx = 0.0;
                    for (std::size_t i = 0; i < inner; ++i) {
                        const std::size_t k = o * inner + i;
                        const double d = g[k] * gv[i];
                        mean_d += d;
                        mean_dx += d * xhat[k];
                    }
                    mean_d /= m;
                    mean_dx /= m;
                    for (std::size_t i = 0; i < inner; ++i) {
                        const std::size_t k = o * inner + i;
                        gx[k] = inv_std[o] * (g[k] * gv[i] - mean_d - xhat[k] * mean_dx);
                    }
                }
                x.accumulate_grad(gx);
            }
            if (gamma.requires_grad() || beta.requires_grad()) {
                std::vector<double> gg(inner, 0.0), gb(inner, 0.0);
                for (std::size_t o = 0; o < outer; ++o)
                    for (std::size_t i = 0; i < inner; ++i) {
                        const std::size_t k = o * inner + i;
                        gg[i] += g[k] * xhat[k];
                        gb[i] += g[k];
                    }
                if (gamma.requires_grad()) gamma.accumulate_grad(gg);
                if (beta.requires_grad()) beta.accumulate_grad(gb);
            }
        });
}

Tensor avg_pool2(const Tensor& x) {
    if (x.rank() != 4) throw DimensionError("avg_pool2: expected N x C x H x W input");
    const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    if (h % 2 != 0 || w % 2 != 0) {
        throw DimensionError("avg_pool2: spatial dims must be even, got " + shape_to_string(x.shape()));
    }
    const std::size_t oh = h / 2, ow = w / 2;
    auto xv = x.values();
    std::vector<double> out(n * c * oh * ow);
    for (std::size_t p = 0; p < n * c; ++p) {
        const double* src = xv.data() + p * h * w;
        double* dst = out.data() + p * oh * ow;
        for (std::size_t i = 0; i < oh; ++i)
            for (std::size_t j = 0; j < ow; ++j) {
                dst[i * ow + j] = 0.25 * (src[2 * i * w + 2 * j] + src[2 * i * w + 2 * j + 1] +
                                          src[(2 * i + 1) * w + 2 * j] + src[(2 * i + 1) * w + 2 * j + 1]);
            }
    }
    return Tensor::make_result({n, c, oh, ow}, std::move(out), {x},
                               [x, n, c, h, w, oh, ow](std::span<const double> g) mutable {
                                   std::vector<double> gx(x.numel());
                                   for (std::size_t p = 0; p < n * c; ++p) {
                                       double* dst = gx.data() + p * h * w;
                                       const double* src = g.data() + p * oh * ow;
                                       for (std::size_t i = 0; i < h; ++i)
                                           for (std::size_t j = 0; j < w; ++j)
                                               dst[i * w + j] = 0.25 * src[(i / 2) * ow + j / 2];
                                   }
                                   x.accumulate_grad(gx);
                               });
}

Tensor batched_matvec(const Tensor& a, const Tensor& v) {
    if (a.rank() != 3 || v.rank() != 2 || a.dim(0) != v.dim(0) || a.dim(2) != v.dim(1)) {
        throw DimensionError("batched_matvec: incompatible shapes " + shape_to_string(a.shape()) + " and " +
                             shape_to_string(v.shape()));
    }
    const std::size_t n = a.dim(0), c = a.dim(1), p = a.dim(2);
    auto av = a.values(), vv = v.values();
    std::vector<double> out(n * c, 0.0);
    for (std::size_t b = 0; b < n; ++b)
        for (std::size_t k = 0; k < c; ++k) {
            double acc = 0.0;
            for (std::size_t j = 0; j < p; ++j) acc += av[(b * c + k) * p + j] * vv[b * p + j];
            out[b * c + k] = acc;
        }
    return Tensor::make_result({n, c}, std::move(out), {a, v}, [a, v, n, c, p](std::span<const double> g) mutable {
        auto av = a.values(), vv = v.values();
        if (a.requires_grad()) {
            std::vector<double> ga(a.numel());
            for (std::size_t b = 0; b < n; ++b)
                for (std::size_t k = 0; k < c; ++k)
                    for (std::size_t j = 0; j < p; ++j) ga[(b * c + k) * p + j] = g[b * c + k] * vv[b * p + j];
            a.accumulate_grad(ga);
        }
        if (v.requires_grad()) {
            std::vector<double> gv(v.numel(), 0.0);
            for (std::size_t b = 0; b < n; ++b)
                for (std::size_t k = 0; k < c; ++k)
                    for (std::size_t j = 0; j < p; ++j) gv[b * p + j] += g[b * c + k] * av[(b * c + k) * p + j];
            v.accumulate_grad(gv);
        }
    });
}

}  // namespace fgd

#include <doctest.h>

#include <cmath>
#include <numbers>

#include "fgd/gradcheck.hpp"
#include "fgd/tensor.hpp"
#include "helpers.hpp"

using namespace fgd;
using doctest::Approx;

namespace {

Tensor vec(std::vector<double> v, bool grad = false) {
    const std::size_t n = v.size();
    return Tensor::from_values({n}, std::move(v), grad);
}

}  // namespace

TEST_CASE("tensor construction checks extents") {
    CHECK_THROWS_AS(Tensor::from_values({2, 2}, {1, 2, 3}), DimensionError);
    CHECK_THROWS_AS(Tensor::from_values({2, 0}, {}), DimensionError);
    Tensor t = Tensor::zeros({2, 3});
    CHECK(t.numel() == 6);
    CHECK(t.rank() == 2);
    CHECK(Tensor::scalar(3.5).item() == 3.5);
}

TEST_CASE("elementwise ops") {
    Tensor x = vec({1, -2, 3});
    auto sq = testing::to_vec(square(x));
    CHECK(sq[0] == 1);
    CHECK(sq[1] == 4);
    CHECK(sq[2] == 9);
    for (double v : testing::to_vec(sub(x, x))) CHECK(v == 0.0);
    auto a = testing::to_vec(abs(vec({-0.5, 0.5})));
    CHECK(a[0] == 0.5);
    CHECK(a[1] == 0.5);
    CHECK(elementwise(ElementwiseOp::add, x, 1.0)[1] == -1.0);
    CHECK(mul(x, 2.0)[2] == 6.0);
    CHECK_THROWS_AS(add(x, vec({1, 2})), DimensionError);
}

TEST_CASE("relu") {
    auto r = testing::to_vec(relu(vec({-1, 0, 2})));
    CHECK(r[0] == 0);
    CHECK(r[1] == 0);
    CHECK(r[2] == 2);
    for (double v : testing::to_vec(relu(vec({-3, -0.1})))) CHECK(v == 0.0);
    Tensor pos = vec({0, 1.5, 7});
    CHECK(testing::max_abs_diff(testing::to_vec(relu(pos)), pos.values()) == 0.0);

    // subgradient at 0 is 0
    Tensor z = vec({0.0}, true);
    backward(sum_all(relu(z)));
    CHECK(z.grad()[0] == 0.0);
}

TEST_CASE("reductions") {
    Tensor t = Tensor::from_values({1, 2, 1, 1}, {4, 2});
    Tensor m = mean(t, {1});
    CHECK(m.shape() == Shape{1, 1, 1});
    CHECK(m[0] == 3.0);
    CHECK(sum_all(Tensor::full({2, 3}, 1.0)).item() == 6.0);
    CHECK(mean_all(Tensor::full({3, 4}, -1.25)).item() == -1.25);
    CHECK_THROWS_AS(sum(t, {4}), DimensionError);
    CHECK_THROWS_AS(sum(t, {1, 1}), DimensionError);
}

TEST_CASE("softmax_t") {
    auto u = testing::to_vec(softmax_t(vec({2, 2, 2, 2}), 0, 0.7));
    for (double v : u) CHECK(v == Approx(0.25).epsilon(1e-15));

    auto s = testing::to_vec(softmax_t(vec({0, std::log(3.0)}), 0, 1.0));
    CHECK(s[0] == Approx(0.25).epsilon(1e-14));
    CHECK(s[1] == Approx(0.75).epsilon(1e-14));

    auto big_t = testing::to_vec(softmax_t(vec({0, 1}), 0, 1e6));
    CHECK(std::abs(big_t[0] - 0.5) < 1e-5);
    CHECK(std::abs(big_t[1] - 0.5) < 1e-5);

    CHECK_THROWS_AS(softmax_t(vec({1, 2}), 0, 0.0), ParameterError);
    CHECK_THROWS_AS(softmax_t(vec({1, 2}), 0, -1.0), ParameterError);
}

TEST_CASE("softmax_t sums to one and stays finite") {
    Rng rng(7);
    for (double t : {1e-3, 0.1, 0.5, 1.0, 10.0, 1e6}) {
        Tensor x = testing::random_tensor(rng, {3, 17}, -800, 800);
        Tensor y = softmax_t(x, 1, t);
        for (std::size_t r = 0; r < 3; ++r) {
            double s = 0;
            for (std::size_t c = 0; c < 17; ++c) {
                REQUIRE(std::isfinite(y[r * 17 + c]));
                s += y[r * 17 + c];
            }
            CHECK(std::abs(s - 1.0) < 1e-10);
        }
    }
}

TEST_CASE("conv1x1") {
    Rng rng(3);
    Tensor x = testing::random_tensor(rng, {2, 3, 2, 2});
    Tensor id = Tensor::from_values({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
    CHECK(testing::max_abs_diff(testing::to_vec(conv1x1(x, id, Tensor::zeros({3}))), x.values()) == 0.0);
    for (double v : testing::to_vec(conv1x1(x, Tensor::zeros({4, 3}), Tensor::zeros({4})))) CHECK(v == 0.0);

    Tensor px = Tensor::from_values({1, 2, 1, 1}, {3, 4});
    CHECK(conv1x1(px, Tensor::from_values({1, 2}, {1, 1})).item() == 7.0);

    CHECK_THROWS_AS(conv1x1(x, Tensor::zeros({4, 2})), DimensionError);
}

TEST_CASE("conv1x1 is linear") {
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        Tensor x = testing::random_tensor(rng, {1, 3, 2, 3}), y = testing::random_tensor(rng, {1, 3, 2, 3});
        Tensor w = testing::random_tensor(rng, {5, 3});
        const double a = rng.uniform(-3, 3), b = rng.uniform(-3, 3);
        Tensor lhs = conv1x1(add(mul(x, a), mul(y, b)), w);
        Tensor rhs = add(mul(conv1x1(x, w), a), mul(conv1x1(y, w), b));
        CHECK(testing::max_abs_diff(lhs.values(), rhs.values()) < 1e-10);
    }
}

TEST_CASE("layer_norm") {
    const std::array<std::size_t, 1> axes{0};
    Tensor g1 = Tensor::full({3}, 1.0), b0 = Tensor::zeros({3});
    for (double v : testing::to_vec(layer_norm(Tensor::full({3}, 4.2), g1, b0, axes))) CHECK(v == 0.0);

    Tensor pair = layer_norm(vec({-1, 1}), Tensor::full({2}, 1.0), Tensor::zeros({2}), axes);
    const double expect = 1.0 / std::sqrt(1.0 + kLayerNormEps);
    CHECK(pair[0] == Approx(-expect).epsilon(1e-14));
    CHECK(pair[1] == Approx(expect).epsilon(1e-14));
    CHECK(std::abs(pair[1] - 1.0) < 1e-5);

    for (double v : testing::to_vec(layer_norm(vec({1, 5, -2}), Tensor::zeros({3}), Tensor::full({3}, 5.0), axes)))
        CHECK(v == 5.0);

    CHECK_THROWS_AS(layer_norm(vec({1, 2, 3}), Tensor::zeros({2}), Tensor::zeros({2}), axes), DimensionError);
}

TEST_CASE("shape ops") {
    Tensor x = Tensor::from_values({2, 1, 3}, {1, 2, 3, 4, 5, 6});
    Tensor b = broadcast_to(x, {2, 2, 3});
    CHECK(b.shape() == Shape{2, 2, 3});
    CHECK(b[3] == 1.0);
    CHECK(b[9] == 4.0);
    CHECK(reshape(x, {3, 2}).shape() == Shape{3, 2});
    CHECK_THROWS_AS(reshape(x, {4}), DimensionError);
    Tensor s = slice_batch(x, 1);
    CHECK(s.shape() == Shape{1, 1, 3});
    CHECK(s[0] == 4.0);
    CHECK_THROWS_AS(slice_batch(x, 2), DimensionError);

    Tensor img = Tensor::from_values({1, 1, 2, 2}, {1, 2, 3, 6});
    CHECK(avg_pool2(img).item() == 3.0);

    Tensor a = Tensor::from_values({1, 2, 2}, {1, 2, 3, 4});
    Tensor v = Tensor::from_values({1, 2}, {1, -1});
    auto r = testing::to_vec(batched_matvec(a, v));
    CHECK(r[0] == -1.0);
    CHECK(r[1] == -1.0);
}

TEST_CASE("backward") {
    Tensor x = vec({1, 2}, true);
    backward(sum_all(square(x)));
    CHECK(x.grad()[0] == 2.0);
    CHECK(x.grad()[1] == 4.0);

    Tensor p = vec({3, 4}, true), q = vec({1, 1}, true);
    backward(sum_all(q));
    CHECK_FALSE(p.has_grad());
    CHECK(q.grad()[0] == 1.0);
    CHECK(q.grad()[1] == 1.0);

    Rng rng(5);
    Tensor y = testing::random_tensor(rng, {4, 3}, -2, 2, true);
    backward(sum_all(y));
    for (double g : y.grad()) CHECK(g == 1.0);

    CHECK_THROWS_AS(backward(x), ContractError);
}

TEST_CASE("backward accumulates through a shared handle") {
    Tensor x = vec({2.0}, true);
    backward(add(mul(x, x), x));  // d/dx (x^2 + x) = 5
    CHECK(x.grad()[0] == 5.0);
    x.zero_grad();
    backward(mul(x, 3.0));
    CHECK(x.grad()[0] == 3.0);
}

TEST_CASE("values stay finite on finite inputs") {
    Rng rng(9);
    Tensor x = testing::random_tensor(rng, {2, 4, 3, 3}, -50, 50);
    for (const Tensor& y : {softmax_t(reshape(x, {2, 36}), 1, 1e-3), layer_norm(reshape(x, {72}), Tensor::full({72}, 1.0),
                                                                               Tensor::zeros({72}),
                                                                               std::array<std::size_t, 1>{0})}) {
        for (double v : y.values()) CHECK(std::isfinite(v));
    }
}

TEST_CASE("gradcheck") {
    Tensor x = vec({1, 2}, true);
    std::vector<Tensor> in{x};
    auto rep = gradcheck([&] { return sum_all(square(x)); }, in, 1e-4, 1e-5);
    CHECK(rep.passed);
    CHECK(rep.max_rel_error < 1e-8);
    CHECK(rep.elements_checked == 2);

    auto constant = gradcheck([&] { return mul(sum_all(x), 0.0); }, in, 1e-4, 1e-5);
    CHECK(constant.passed);

    CHECK_THROWS_AS(gradcheck([&] { return sum_all(x); }, in, 0.0, 1e-5), ParameterError);
    CHECK_THROWS_AS(gradcheck([&] { return x; }, in, 1e-4, 1e-5), ContractError);
    CHECK_THROWS_AS(gradcheck([&] { return mul(sum_all(x), std::numeric_limits<double>::quiet_NaN()); }, in, 1e-4,
                              1e-5),
                    OracleError);
    // inputs are restored after probing
    CHECK(x[0] == 1.0);
    CHECK(x[1] == 2.0);
}

TEST_CASE("gradcheck catches a corrupted backward rule") {
    Tensor x = vec({0.5, -1.5, 2.0}, true);
    auto wrong_square = [&] {
        std::vector<double> v(x.numel());
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = x[i] * x[i];
        return Tensor::make_result(x.shape(), v, {x}, [x](std::span<const double> g) {
            std::vector<double> gx(g.size());
            for (std::size_t i = 0; i < g.size(); ++i) gx[i] = g[i] * x[i];  // missing factor 2
            x.accumulate_grad(gx);
        });
    };
    std::vector<Tensor> in{x};
    CHECK_FALSE(gradcheck([&] { return sum_all(wrong_square()); }, in, 1e-4, 1e-4).passed);
    CHECK(gradcheck([&] { return sum_all(square(x)); }, in, 1e-4, 1e-4).passed);
}

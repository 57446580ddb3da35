#include "support/gradcheck.hpp"

#include "ops.hpp"

#include <doctest.h>

#include <cmath>

using namespace rw;
using namespace rw::ag;
using rw::testing::grad_check;
using rw::testing::project;
using rw::testing::random_leaf;

namespace {

constexpr double kTol = 1e-4;

void expect_grad(const std::function<Var()>& fn, const std::vector<std::pair<std::string, Var>>& probes)
{
    const auto r = grad_check(fn, probes);
    INFO("worst probe: " << r.worst << " rel error " << r.max_rel_error);
    CHECK(r.entries > 0);
    CHECK(r.vanishing < static_cast<int>(probes.size()));
    CHECK(r.max_rel_error < kTol);
}

}  // namespace

TEST_CASE("matmul, linear and transpose gradients")
{
    Var a = random_leaf({3, 4}, 1), b = random_leaf({4, 2}, 2), bias = random_leaf({2}, 3);
    expect_grad([&] { return project(matmul(a, b), 10); }, {{"a", a}, {"b", b}});
    expect_grad([&] { return project(linear(a, b, bias), 11); }, {{"x", a}, {"w", b}, {"b", bias}});
    expect_grad([&] { return project(transpose(a), 12); }, {{"a", a}});
}

TEST_CASE("elementwise and broadcast gradients")
{
    Var x = random_leaf({3, 4}, 4), y = random_leaf({3, 4}, 5), row = random_leaf({4}, 6), col = random_leaf({3}, 7);
    expect_grad([&] { return project(add(x, y), 1); }, {{"x", x}, {"y", y}});
    expect_grad([&] { return project(sub(x, y), 2); }, {{"x", x}, {"y", y}});
    expect_grad([&] { return project(mul(x, y), 3); }, {{"x", x}, {"y", y}});
    expect_grad([&] { return project(scale(x, -1.7), 4); }, {{"x", x}});
    expect_grad([&] { return project(add_row(x, row), 5); }, {{"x", x}, {"row", row}});
    expect_grad([&] { return project(mul_row(x, row), 6); }, {{"x", x}, {"row", row}});
    expect_grad([&] { return project(mul_col(x, col), 7); }, {{"x", x}, {"s", col}});
}

TEST_CASE("activation and normalization gradients")
{
    Var x = random_leaf({4, 4}, 8, 2.0);
    expect_grad([&] { return project(silu(x), 1); }, {{"x", x}});
    expect_grad([&] { return project(ag::tanh(x), 2); }, {{"x", x}});
    expect_grad([&] { return project(sigmoid(x), 3); }, {{"x", x}});
    expect_grad([&] { return project(layer_norm(x, 1e-5), 4); }, {{"x", x}});
    expect_grad([&] { return project(softmax_rows(x), 5); }, {{"x", x}});
    expect_grad([&] { return project(log_softmax_rows(x), 6); }, {{"x", x}});
}

TEST_CASE("shape manipulation and reduction gradients")
{
    Var x = random_leaf({4, 4}, 9), y = random_leaf({4, 2}, 10), z = random_leaf({2, 4}, 11);
    expect_grad([&] { return project(reshape(x, {2, 8}), 1); }, {{"x", x}});
    expect_grad([&] { return project(concat_cols({x, y}), 2); }, {{"x", x}, {"y", y}});
    expect_grad([&] { return project(concat_rows({x, z}), 3); }, {{"x", x}, {"z", z}});
    expect_grad([&] { return project(slice_cols(x, 1, 2), 4); }, {{"x", x}});
    expect_grad([&] { return project(slice_rows(x, 2, 2), 5); }, {{"x", x}});
    expect_grad([&] { return sum(mul(x, x)); }, {{"x", x}});
    expect_grad([&] { return mean(mul(x, x)); }, {{"x", x}});
    expect_grad([&] { return project(mean_rows(x), 6); }, {{"x", x}});
}

TEST_CASE("convolution gradients")
{
    const ConvGeometry geo{4, 4, 3, 1, 1};
    Var x = random_leaf({16, 3}, 12), w = random_leaf({27, 2}, 13, 0.3), b = random_leaf({2}, 14);
    expect_grad([&] { return project(conv2d(x, w, b, geo), 1); }, {{"x", x}, {"w", w}, {"b", b}});
    const ConvGeometry one{4, 4, 1, 1, 0};
    Var w1 = random_leaf({3, 2}, 15);
    expect_grad([&] { return project(conv2d(x, w1, b, one), 2); }, {{"x", x}, {"w", w1}});
}

TEST_CASE("bilinear and deformable sampling gradients")
{
    Var map = random_leaf({16, 4}, 16);
    Tensor pos({5, 2}, std::vector<Real>{0.3, 0.6, 1.7, 2.2, -0.4, 1.1, 2.9, 3.4, 1.25, 0.75});
    expect_grad([&] { return project(bilinear_sample(map, 4, 4, pos), 1); }, {{"map", map}});

    Var value = random_leaf({16, 4}, 17);
    Rng rng(3);
    Tensor loc({3, 2 * 2 * 2});
    for (auto& v : loc.values()) v = rng.uniform(-0.7, 3.6);
    Var locv = Var::leaf(loc);
    Var weights = random_leaf({3, 4}, 18);
    expect_grad([&] { return project(deform_sample(value, 4, 4, 2, locv, weights), 2); },
                {{"value", value}, {"loc", locv}, {"weights", weights}});
}

TEST_CASE("classification loss gradients")
{
    Var logits = random_leaf({6, 3}, 19, 2.0);
    const std::vector<int> targets{0, 2, 1, 1, 0, 2};
    expect_grad([&] { return cross_entropy(logits, targets); }, {{"logits", logits}});
    const std::vector<Real> mask{1, 0, 0, 1, 1, 0};
    Var x = random_leaf({6}, 20, 2.0);
    expect_grad([&] { return bce_with_logits(x, mask); }, {{"x", x}});
    expect_grad([&] { return project(occupied_logit(logits), 3); }, {{"logits", logits}});
    expect_grad([&] { return lovasz_softmax(softmax_rows(logits), targets); }, {{"logits", logits}});
    Var y = random_leaf({6, 3}, 21);
    expect_grad([&] { return mse(logits, y); }, {{"a", logits}, {"b", y}});
}

TEST_CASE("no graph is recorded under NoGradGuard")
{
    Var x = random_leaf({2, 2}, 22);
    Var y;
    {
        NoGradGuard guard;
        CHECK_FALSE(grad_enabled());
        y = mul(x, x);
    }
    CHECK(grad_enabled());
    CHECK_FALSE(y.requires_grad());
}

TEST_CASE("gradients accumulate across backward calls")
{
    Var x = Var::leaf(Tensor({1}, std::vector<Real>{3.0}));
    backward(mul(x, x));
    backward(mul(x, x));
    CHECK(x.grad()[0] == doctest::Approx(12.0));
    x.zero_grad();
    CHECK(x.grad()[0] == 0.0);
}

TEST_CASE("shape errors are reported")
{
    Var a = random_leaf({2, 3}, 23), b = random_leaf({2, 3}, 24);
    CHECK_THROWS(matmul(a, b));
    CHECK_THROWS(add(a, random_leaf({3, 3}, 25)));
    const std::vector<int> bad{0, 5};
    CHECK_THROWS(cross_entropy(a, bad));
}

#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "irn/adam.hpp"
#include "irn/conv.hpp"
#include "irn/tensor.hpp"
#include "support/gradcheck.hpp"

using namespace irn;
using testsupport::gradcheck;

namespace {

Tensor<double> randn_param(const Shape& shape, uint64_t seed, double scale = 1.0) {
    auto buf = gaussian_buffer<double>(shape_numel(shape), seed);
    for (auto& v : buf) v *= scale;
    return Tensor<double>::param(shape, std::move(buf));
}

}  // namespace

TEST_CASE("elementwise op values") {
    auto z = Tensor<float>::zeros({1, 1, 1, 1});
    REQUIRE(sigmoid(z).data()[0] == Catch::Approx(0.5));
    REQUIRE(irn::exp(z).data()[0] == Catch::Approx(1.0));
    auto x = Tensor<float>::from({3}, {-1.f, 0.f, 2.f});
    auto lr = leaky_relu(x);
    REQUIRE(lr.data()[0] == Catch::Approx(-0.2));
    REQUIRE(lr.data()[2] == Catch::Approx(2.0));
    REQUIRE(irn::abs(x).data()[0] == Catch::Approx(1.0));
    REQUIRE(square(x).data()[2] == Catch::Approx(4.0));
}

TEST_CASE("shape mismatch raises an error naming both shapes") {
    auto a = Tensor<float>::zeros({2, 3});
    auto b = Tensor<float>::zeros({3, 2});
    REQUIRE_THROWS_WITH(add(a, b), Catch::Matchers::ContainsSubstring("(2,3)") &&
                                       Catch::Matchers::ContainsSubstring("(3,2)"));
}

TEST_CASE("broadcast over leading batch dimension only") {
    auto a = Tensor<float>::full({2, 2}, 1.f);
    auto b = Tensor<float>::from({2}, {1.f, 2.f});
    auto c = add(a, b);
    REQUIRE(c.data() == std::vector<float>{2.f, 3.f, 2.f, 3.f});
}

TEST_CASE("conv2d constant image with ones kernel sums the window") {
    // 3x3 all-ones kernel over a constant-c image with padding 1: interior
    // pixels see the full window, 9c.
    const float c = 0.37f;
    auto x = Tensor<float>::full({1, 5, 5, 1}, c);
    auto w = Tensor<float>::full({3, 3, 1, 1}, 1.f);
    auto out = conv2d(x, w, Tensor<float>(), 1, 1);
    REQUIRE(out.shape() == Shape{1, 5, 5, 1});
    REQUIRE(out.data()[2 * 5 + 2] == Catch::Approx(9 * c));
    // corner sees a 2x2 window
    REQUIRE(out.data()[0] == Catch::Approx(4 * c));
}

TEST_CASE("backward of sum gives all-ones; sum of squares gives 2p") {
    auto p = Tensor<float>::param({2, 3}, std::vector<float>(6, 0.5f));
    backward(sum(p));
    for (float g : p.grad()) REQUIRE(g == Catch::Approx(1.0));

    auto q = Tensor<float>::param({1}, {3.f});
    backward(sum(square(q)));
    REQUIRE(q.grad()[0] == Catch::Approx(6.0));
}

TEST_CASE("backward requires a scalar attached loss") {
    auto p = Tensor<float>::param({2}, {1.f, 2.f});
    REQUIRE_THROWS_AS(backward(square(p)), Error);
    auto detached = Tensor<float>::from({1}, {1.f});
    REQUIRE_THROWS_AS(backward(detached), Error);
}

TEST_CASE("repeated backward accumulates, detached tensors never get grads") {
    auto p = Tensor<float>::param({1}, {2.f});
    backward(sum(p));
    backward(sum(p));
    REQUIRE(p.grad()[0] == Catch::Approx(2.0));

    auto d = p.detach();
    auto loss = sum(mul(d, d));
    REQUIRE_FALSE(loss.attached());
    REQUIRE(d.grad().empty());
}

TEST_CASE("forward values are independent of tape attachment") {
    std::vector<float> vals = {0.3f, -1.2f, 0.9f, 2.2f};
    auto free_t = Tensor<float>::from({4}, vals);
    auto par_t = Tensor<float>::param({4}, vals);
    auto a = mean(sigmoid(mul(free_t, free_t)));
    auto b = mean(sigmoid(mul(par_t, par_t)));
    REQUIRE(a.item() == b.item());
}

TEST_CASE("autodiff matches finite differences across the op suite") {
    // One composite graph touching every differentiable op on random inputs.
    ParamList<double> params;
    params.push_back({"x", randn_param({1, 4, 4, 2}, 11, 0.5)});
    params.push_back({"w", randn_param({3, 3, 2, 3}, 12, 0.3)});
    params.push_back({"b", randn_param({3}, 13, 0.1)});
    params.push_back({"m", randn_param({1, 4, 4, 3}, 14, 0.5)});
    params.push_back({"cw", randn_param({2, 2}, 15, 0.4)});

    auto f = [&]() {
        auto x = params[0].tensor;
        auto conv = conv2d(x, params[1].tensor, params[2].tensor, 1, 1);
        auto act = leaky_relu(conv);
        auto gated = mul(act, sigmoid(params[3].tensor));
        auto parts = split_c(gated, {1, 2});
        auto mixed = channel_matmul(parts[1], params[4].tensor);
        auto together = concat_c(std::vector<Tensor<double>>{parts[0], mixed});
        auto cr = crop(together, 1, 1, 2, 2);
        auto e = irn::exp(mul_scalar(cr, 0.3));
        auto l = irn::log(add_scalar(square(e), 1.0));
        auto s = sub(l, mul_scalar(irn::abs(cr), 0.05));
        return add(mean(s), mul_scalar(sum(square(params[4].tensor)), 0.01));
    };
    auto res = gradcheck<double>(params, f, 1e-5);
    INFO("worst " << res.worst_param << "[" << res.worst_index << "]");
    REQUIRE(res.max_rel_err < 1e-3);
}

TEST_CASE("two-layer conv net gradients match central differences") {
    ParamList<double> params;
    params.push_back({"w1", randn_param({3, 3, 1, 4}, 21, 0.4)});
    params.push_back({"b1", randn_param({4}, 22, 0.1)});
    params.push_back({"w2", randn_param({3, 3, 4, 2}, 23, 0.4)});
    params.push_back({"b2", randn_param({2}, 24, 0.1)});
    auto x = Tensor<double>::from({2, 6, 6, 1}, gaussian_buffer<double>(72, 25));
    auto target = Tensor<double>::from({2, 6, 6, 2}, gaussian_buffer<double>(144, 26));
    auto f = [&]() {
        auto h = leaky_relu(conv2d(x, params[0].tensor, params[1].tensor, 1, 1));
        auto y = conv2d(h, params[2].tensor, params[3].tensor, 1, 1);
        return mean(square(sub(y, target)));
    };
    auto res = gradcheck<double>(params, f, 1e-4);
    REQUIRE(res.max_rel_err < 1e-3);
}

TEST_CASE("strided conv and linear gradients match finite differences") {
    ParamList<double> params;
    params.push_back({"w", randn_param({3, 3, 2, 3}, 31, 0.4)});
    params.push_back({"fcw", randn_param({12, 2}, 32, 0.4)});
    params.push_back({"fcb", randn_param({2}, 33, 0.1)});
    auto x = Tensor<double>::from({1, 4, 4, 2}, gaussian_buffer<double>(32, 34));
    auto f = [&]() {
        auto h = conv2d(x, params[0].tensor, Tensor<double>(), 2, 1);  // 1x2x2x3
        auto flat = linear(h, params[1].tensor, params[2].tensor);
        return mean(square(flat));
    };
    auto res = gradcheck<double>(params, f, 1e-4);
    REQUIRE(res.max_rel_err < 1e-3);
}

TEST_CASE("quantize8 rounds half away from zero and is idempotent") {
    auto x = Tensor<float>::from({4}, {0.5f, 0.0f, 1.2f, -0.3f});
    auto q = quantize8(x);
    REQUIRE(q.data()[0] == Catch::Approx(128.0 / 255.0));
    REQUIRE(q.data()[1] == 0.0f);
    REQUIRE(q.data()[2] == 1.0f);
    REQUIRE(q.data()[3] == 0.0f);
    auto qq = quantize8(q);
    REQUIRE(qq.data() == q.data());
}

TEST_CASE("quantize8 backward is the straight-through estimator") {
    auto p = Tensor<float>::param({3}, {0.2f, 0.7f, 1.4f});
    backward(sum(quantize8(p)));
    for (float g : p.grad()) REQUIRE(g == Catch::Approx(1.0));
}

TEST_CASE("gaussian_logpdf closed form") {
    auto z = Tensor<float>::zeros({2});
    REQUIRE(gaussian_logpdf(z).item() == Catch::Approx(-kLog2Pi).epsilon(1e-6));
    auto z2 = Tensor<float>::from({1}, {2.f});
    REQUIRE(gaussian_logpdf(z2).item() == Catch::Approx(-0.5 * (4.0 + kLog2Pi)).epsilon(1e-6));
}

TEST_CASE("adam first step moves by about -lr*sign(g)") {
    auto p = Tensor<float>::param({3}, {1.f, 2.f, 3.f});
    auto& g = p.raw_grad();
    g = {0.5f, -0.25f, 4.f};
    ParamList<float> params{{"p", p}};
    AdamState<float> st;
    st.lr = 1e-2f;
    adam_step(params, st);
    REQUIRE(p.data()[0] == Catch::Approx(1.f - 1e-2).margin(1e-5));
    REQUIRE(p.data()[1] == Catch::Approx(2.f + 1e-2).margin(1e-5));
    REQUIRE(p.data()[2] == Catch::Approx(3.f - 1e-2).margin(1e-5));
    REQUIRE(st.t == 1);
}

TEST_CASE("adam zero gradient leaves parameters unchanged") {
    auto p = Tensor<float>::param({2}, {1.f, -1.f});
    p.zero_grad();
    ParamList<float> params{{"p", p}};
    AdamState<float> st;
    adam_step(params, st);
    REQUIRE(p.data()[0] == 1.f);
    REQUIRE(p.data()[1] == -1.f);
}

TEST_CASE("adam with lr=0 advances state but not parameters") {
    auto p = Tensor<float>::param({2}, {1.f, -1.f});
    auto& g = p.raw_grad();
    g = {0.3f, 0.9f};
    ParamList<float> params{{"p", p}};
    AdamState<float> st;
    st.lr = 0.f;
    adam_step(params, st);
    adam_step(params, st);
    REQUIRE(st.t == 2);
    REQUIRE(p.data()[0] == 1.f);
    REQUIRE(p.data()[1] == -1.f);
}

TEST_CASE("adam rejects non-finite gradients naming the parameter") {
    auto p = Tensor<float>::param({1}, {1.f});
    p.raw_grad()[0] = std::numeric_limits<float>::quiet_NaN();
    ParamList<float> params{{"dense.w", p}};
    AdamState<float> st;
    REQUIRE_THROWS_WITH(adam_step(params, st), Catch::Matchers::ContainsSubstring("dense.w"));
}

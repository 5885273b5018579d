// Copyright (c) 2026 The geomtext authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <functional>

#include "geomtext/gradcheck.hpp"
#include "geomtext/rng.hpp"
#include "geomtext/tensor.hpp"
#include "testutil.hpp"

using namespace geomtext;

namespace {

std::vector<double> random_values(RngStream& rng, std::size_t n, double min_abs = 0.0) {
    std::vector<double> out(n);
    for (double& v : out) {
        do {
            v = rng.uniform(-2.0, 2.0);
        } while (std::fabs(v) < min_abs);
    }
    return out;
}

Tensor random_param(RngStream& rng, Shape shape, double min_abs = 0.0) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return Tensor::param(random_values(rng, n, min_abs), std::move(shape));
}

Tensor random_const(RngStream& rng, Shape shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return Tensor::from(random_values(rng, n), std::move(shape));
}

/// 50 randomized finite-difference trials for one op wiring; inputs in
/// [-2, 2], step 1e-5, relative error below 1e-4.
void fd_trials(const char* name,
               const std::function<std::function<Tensor()>(RngStream&, ModelParams&)>& setup,
               int trials = 50) {
    for (int t = 0; t < trials; ++t) {
        RngStream rng(derive_seed(9000 + t, name));
        ModelParams params;
        auto f = setup(rng, params);
        const GradCheckReport report = finite_diff_check(f, params, 1e-5, 1e-4);
        CAPTURE(name);
        CAPTURE(t);
        CAPTURE(report.worst_param);
        CHECK_MESSAGE(report.pass, name << " trial " << t << " max rel err "
                                        << report.max_rel_err);
        if (!report.pass) break;
    }
}

Tensor weighted_sum(const Tensor& out, RngStream& rng) {
    return sum_all(mul(out, random_const(rng, out.shape())));
}

}  // namespace

TEST_SUITE("tensor") {

TEST_CASE("matmul identity returns the operand exactly") {
    const Tensor eye = Tensor::from({1, 0, 0, 0, 1, 0, 0, 0, 1}, {3, 3});
    RngStream rng(5);
    const Tensor a = random_const(rng, {3, 5});
    const Tensor out = matmul(eye, a);
    for (std::size_t i = 0; i < a.numel(); ++i) CHECK(out.data()[i] == a.data()[i]);
}

TEST_CASE("softmax of a constant row is uniform") {
    const Tensor out = softmax(Tensor::from({0, 0, 0}, {3}));
    for (double v : out.data()) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("softmax rows are probability vectors") {
    for (int t = 0; t < 50; ++t) {
        RngStream rng(derive_seed(100 + t, "softmax-prob"));
        const Tensor out = softmax(random_const(rng, {4, 7}));
        for (std::size_t i = 0; i < 4; ++i) {
            double sum = 0.0;
            for (std::size_t j = 0; j < 7; ++j) {
                CHECK(out.at(i, j) >= 0.0);
                sum += out.at(i, j);
            }
            CHECK(std::fabs(sum - 1.0) <= 1e-12);
        }
    }
}

TEST_CASE("layer_norm of a constant vector is zero") {
    const Tensor out = layer_norm(Tensor::from({2.5, 2.5, 2.5}, {3}));
    for (double v : out.data()) CHECK(v == 0.0);
}

TEST_CASE("backward of sum of squares") {
    Tensor x = Tensor::param({1.0, -2.0, 3.0}, {3});
    backward(squared_l2(x));
    CHECK(x.grad()[0] == doctest::Approx(2.0));
    CHECK(x.grad()[1] == doctest::Approx(-4.0));
    CHECK(x.grad()[2] == doctest::Approx(6.0));
}

TEST_CASE("cross-entropy gradient is softmax minus one-hot") {
    RngStream rng(17);
    Tensor z = random_param(rng, {1, 5});
    const std::size_t target = 2;
    backward(mean_all(nll_rows(log_softmax(z), {target})));

    double m = z.data()[0];
    for (double v : z.data()) m = std::max(m, v);
    double denom = 0.0;
    for (double v : z.data()) denom += std::exp(v - m);
    for (std::size_t j = 0; j < 5; ++j) {
        const double soft = std::exp(z.data()[j] - m) / denom;
        const double expected = soft - (j == target ? 1.0 : 0.0);
        CHECK(z.grad()[j] == doctest::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("matmul gradients match finite differences below 1e-6") {
    RngStream rng(23);
    ModelParams params;
    params.add("a", random_param(rng, {3, 4}));
    params.add("b", random_param(rng, {4, 2}));
    auto f = [&]() { return sum_all(matmul(params.at("a"), params.at("b"))); };
    const GradCheckReport report = finite_diff_check(f, params, 1e-5, 1e-6);
    CHECK(report.pass);
}

TEST_CASE("per-op gradients match central finite differences") {
    fd_trials("matmul", [](RngStream& rng, ModelParams& p) {
        p.add("a", random_param(rng, {3, 4}));
        p.add("b", random_param(rng, {4, 2}));
        const Tensor c = random_const(rng, {3, 2});
        return [&p, c]() { return sum_all(mul(matmul(p.at("a"), p.at("b")), c)); };
    });
    fd_trials("add", [](RngStream& rng, ModelParams& p) {
        p.add("a", random_param(rng, {3, 4}));
        p.add("b", random_param(rng, {3, 4}));
        const Tensor c = random_const(rng, {3, 4});
        return [&p, c]() { return sum_all(mul(add(p.at("a"), p.at("b")), c)); };
    });
    fd_trials("add-broadcast", [](RngStream& rng, ModelParams& p) {
        p.add("a", random_param(rng, {3, 4}));
        p.add("v", random_param(rng, {4}));
        const Tensor c = random_const(rng, {3, 4});
        return [&p, c]() { return sum_all(mul(add(p.at("a"), p.at("v")), c)); };
    });
    fd_trials("sub", [](RngStream& rng, ModelParams& p) {
        p.add("a", random_param(rng, {2, 5}));
        p.add("b", random_param(rng, {2, 5}));
        const Tensor c = random_const(rng, {2, 5});
        return [&p, c]() { return sum_all(mul(sub(p.at("a"), p.at("b")), c)); };
    });
    fd_trials("mul", [](RngStream& rng, ModelParams& p) {
        p.add("a", random_param(rng, {3, 4}));
        p.add("b", random_param(rng, {3, 4}));
        return [&p]() { return sum_all(mul(p.at("a"), p.at("b"))); };
    });
    fd_trials("mul-broadcast", [](RngStream& rng, ModelParams& p) {
        p.add("v", random_param(rng, {4}));
        p.add("a", random_param(rng, {3, 4}));
        const Tensor c = random_const(rng, {3, 4});
        return [&p, c]() { return sum_all(mul(mul(p.at("v"), p.at("a")), c)); };
    });
    fd_trials("scale", [](RngStream& rng, ModelParams& p) {
        p.add("a", random_param(rng, {4, 3}));
        const double s = rng.uniform(-2.0, 2.0);
        const Tensor c = random_const(rng, {4, 3});
        return [&p, s, c]() { return sum_all(mul(scale(p.at("a"), s), c)); };
    });
    fd_trials("transpose", [](RngStream& rng, ModelParams& p) {
        p.add("a", random_param(rng, {3, 5}));
        const Tensor c = random_const(rng, {5, 3});
        return [&p, c]() { return sum_all(mul(transpose(p.at("a")), c)); };
    });
    fd_trials("concat", [](RngStream& rng, ModelParams& p) {
        p.add("a", random_param(rng, {2, 3}));
        p.add("b", random_param(rng, {4, 3}));
        p.add("c", random_param(rng, {2, 2}));
        const Tensor w0 = random_const(rng, {6, 3});
        const Tensor w1 = random_const(rng, {2, 5});
        return [&p, w0, w1]() {
            const Tensor rows = sum_all(mul(concat(p.at("a"), p.at("b"), 0), w0));
            const Tensor cols = sum_all(mul(concat(p.at("a"), p.at("c"), 1), w1));
            return add(rows, cols);
        };
    });
    fd_trials("slice", [](RngStream& rng, ModelParams& p) {
        p.add("a", random_param(rng, {5, 4}));
        const Tensor w0 = random_const(rng, {2, 4});
        const Tensor w1 = random_const(rng, {5, 2});
        return [&p, w0, w1]() {
            const Tensor rows = sum_all(mul(slice(p.at("a"), 0, 1, 2), w0));
            const Tensor cols = sum_all(mul(slice(p.at("a"), 1, 2, 2), w1));
            return add(rows, cols);
        };
    });
    fd_trials("gather_rows", [](RngStream& rng, ModelParams& p) {
        p.add("table", random_param(rng, {6, 3}));
        const std::vector<std::size_t> idx{0, 2, 2, 5};
        const Tensor c = random_const(rng, {4, 3});
        return [&p, idx, c]() { return sum_all(mul(gather_rows(p.at("table"), idx), c)); };
    });
    fd_trials("reshape", [](RngStream& rng, ModelParams& p) {
        p.add("a", random_param(rng, {2, 6}));
        const Tensor c = random_const(rng, {3, 4});
        return [&p, c]() { return sum_all(mul(reshape(p.at("a"), {3, 4}), c)); };
    });
    fd_trials("relu", [](RngStream& rng, ModelParams& p) {
        p.add("a", random_param(rng, {3, 4}, 0.05));
        const Tensor c = random_const(rng, {3, 4});
        return [&p, c]() { return sum_all(mul(relu(p.at("a")), c)); };
    });
    fd_trials("gelu", [](RngStream& rng, ModelParams& p) {
        p.add("a", random_param(rng, {3, 4}));
        const Tensor c = random_const(rng, {3, 4});
        return [&p, c]() { return sum_all(mul(gelu(p.at("a")), c)); };
    });
    fd_trials("abs", [](RngStream& rng, ModelParams& p) {
        p.add("a", random_param(rng, {3, 4}, 0.05));
        const Tensor c = random_const(rng, {3, 4});
        return [&p, c]() { return sum_all(mul(geomtext::abs(p.at("a")), c)); };
    });
    fd_trials("softmax", [](RngStream& rng, ModelParams& p) {
        p.add("a", random_param(rng, {3, 5}));
        const Tensor c = random_const(rng, {3, 5});
        return [&p, c]() { return sum_all(mul(softmax(p.at("a")), c)); };
    });
    fd_trials("log_softmax", [](RngStream& rng, ModelParams& p) {
        p.add("a", random_param(rng, {3, 5}));
        const Tensor c = random_const(rng, {3, 5});
        return [&p, c]() { return sum_all(mul(log_softmax(p.at("a")), c)); };
    });
    fd_trials("layer_norm", [](RngStream& rng, ModelParams& p) {
        p.add("a", random_param(rng, {3, 6}));
        const Tensor c = random_const(rng, {3, 6});
        return [&p, c]() { return sum_all(mul(layer_norm(p.at("a")), c)); };
    });
    fd_trials("mean-axes", [](RngStream& rng, ModelParams& p) {
        p.add("a", random_param(rng, {3, 4}));
        const Tensor c0 = random_const(rng, {4});
        const Tensor c1 = random_const(rng, {3});
        return [&p, c0, c1]() {
            return add(sum_all(mul(mean(p.at("a"), 0), c0)),
                       sum_all(mul(mean(p.at("a"), 1), c1)));
        };
    });
    fd_trials("reductions", [](RngStream& rng, ModelParams& p) {
        p.add("a", random_param(rng, {3, 4}));
        return [&p]() {
            return add(add(sum_all(p.at("a")), mean_all(p.at("a"))), squared_l2(p.at("a")));
        };
    });
    fd_trials("cosine_similarity_rows", [](RngStream& rng, ModelParams& p) {
        p.add("a", random_param(rng, {3, 4}, 0.05));
        p.add("b", random_param(rng, {3, 4}, 0.05));
        const Tensor c = random_const(rng, {3});
        return [&p, c]() {
            return sum_all(mul(cosine_similarity_rows(p.at("a"), p.at("b")), c));
        };
    });
    fd_trials("l2_normalize_rows", [](RngStream& rng, ModelParams& p) {
        p.add("a", random_param(rng, {3, 4}, 0.05));
        const Tensor c = random_const(rng, {3, 4});
        return [&p, c]() { return sum_all(mul(l2_normalize_rows(p.at("a")), c)); };
    });
    fd_trials("nll_rows", [](RngStream& rng, ModelParams& p) {
        p.add("a", random_param(rng, {4, 5}));
        std::vector<std::size_t> targets(4);
        for (auto& t : targets) t = rng.uniform_index(5);
        return [&p, targets]() { return mean_all(nll_rows(log_softmax(p.at("a")), targets)); };
    });
}

TEST_CASE("backward is linear in the loss") {
    RngStream rng(31);
    Tensor x = random_param(rng, {6});
    const double a = 1.7, b = -0.4;

    backward(add(scale(squared_l2(x), a), scale(sum_all(gelu(x)), b)));
    const std::vector<double> combined = x.grad();

    x.zero_grad();
    backward(squared_l2(x));
    const std::vector<double> gf = x.grad();
    x.zero_grad();
    backward(sum_all(gelu(x)));
    const std::vector<double> gg = x.grad();

    for (std::size_t i = 0; i < 6; ++i) {
        CHECK(std::fabs(combined[i] - (a * gf[i] + b * gg[i])) <= 1e-10);
    }
}

TEST_CASE("gradients accumulate across backward calls until zeroed") {
    Tensor x = Tensor::param({1.0, 2.0}, {2});
    const Tensor loss = squared_l2(x);
    backward(loss);
    backward(loss);
    CHECK(x.grad()[0] == doctest::Approx(4.0));
    CHECK(x.grad()[1] == doctest::Approx(8.0));
    x.zero_grad();
    CHECK(x.grad()[0] == 0.0);
}

TEST_CASE("shared subgraphs do not leak gradient between backward calls") {
    Tensor x = Tensor::param({1.0, -2.0, 3.0}, {3});
    const Tensor sq = mul(x, x);
    const Tensor f = sum_all(sq);
    const Tensor g = mean_all(sq);
    backward(f);
    x.zero_grad();
    backward(g);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(x.grad()[i] == doctest::Approx(2.0 * x.data()[i] / 3.0).epsilon(1e-12));
    }
}

TEST_CASE("identical op sequences are bit-identical") {
    auto run = []() {
        RngStream rng(777);
        const Tensor a = random_const(rng, {4, 4});
        const Tensor b = random_const(rng, {4, 4});
        return sum_all(softmax(layer_norm(matmul(a, gelu(b))))).value();
    };
    CHECK(run() == run());
}

TEST_CASE("contract errors") {
    const Tensor a = Tensor::zeros({2, 3});
    const Tensor b = Tensor::zeros({2, 3});
    CHECK_THROWS_AS(matmul(a, b), std::invalid_argument);
    CHECK_THROWS_AS(add(a, Tensor::zeros({3, 2})), std::invalid_argument);
    CHECK_THROWS_AS(gather_rows(a, {5}), std::out_of_range);
    CHECK_THROWS_AS(nll_rows(Tensor::zeros({2, 3}), {0, 7}), std::out_of_range);
    CHECK_THROWS_AS(backward(Tensor::zeros({2})), std::invalid_argument);
    CHECK_THROWS_AS(backward(Tensor::scalar(1.0)), std::invalid_argument);
    CHECK_THROWS_AS(l2_normalize_rows(Tensor::zeros({2, 3})), std::invalid_argument);
    CHECK_THROWS_AS(cosine_similarity_rows(Tensor::zeros({2, 3}), Tensor::zeros({2, 3})),
                    std::invalid_argument);
}

TEST_CASE("NoGradGuard suppresses recording") {
    Tensor x = Tensor::param({1.0, 2.0}, {2});
    Tensor out;
    {
        NoGradGuard guard;
        CHECK_FALSE(grad_enabled());
        out = squared_l2(x);
    }
    CHECK(grad_enabled());
    CHECK_FALSE(out.requires_grad());
    CHECK_THROWS_AS(backward(out), std::invalid_argument);
}

TEST_CASE("finite_diff_check on a polynomial is exact to rounding") {
    ModelParams params;
    params.add("x", Tensor::param({1.0, -2.0, 3.0}, {3}));
    auto f = [&]() { return squared_l2(params.at("x")); };
    const GradCheckReport report = finite_diff_check(f, params, 1e-5, 1e-4);
    CHECK(report.pass);
    CHECK(report.max_rel_err < 1e-9);
}

TEST_CASE("finite_diff_check contracts") {
    ModelParams params;
    params.add("x", Tensor::param({1.0}, {1}));
    auto f = [&]() { return squared_l2(params.at("x")); };
    CHECK_THROWS_AS(finite_diff_check(f, params, 0.0, 1e-4), std::invalid_argument);
    CHECK_THROWS_AS(finite_diff_check(f, params, 0.5, 1e-4), std::invalid_argument);

    auto bad = [&]() { return scale(squared_l2(scale(params.at("x"), 1e308)), 1e308); };
    CHECK_THROWS_AS(finite_diff_check(bad, params, 1e-5, 1e-4), std::runtime_error);
}

}  // TEST_SUITE

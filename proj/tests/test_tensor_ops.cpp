#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>

#include "helpers.hpp"
#include "hydrossm/grad_check.hpp"
#include "hydrossm/nn_ops.hpp"
#include "hydrossm/ops.hpp"
#include "hydrossm/ssm_ops.hpp"
#include "hydrossm/tape.hpp"
#include "hydrossm/tensor.hpp"

using namespace hydrossm;
using namespace hydrossm::ag;
namespace op = hydrossm::ag::ops;

TEST_CASE("elementwise primitives compute the mathematical definitions") {
    auto a = Tensor::from_values({2}, {1, 2});
    auto b = Tensor::from_values({2}, {3, 4});
    auto sum2 = op::apply_primitive(op::OpKind::Add, {a, b});
    CHECK(sum2[0] == 4.0);
    CHECK(sum2[1] == 6.0);

    auto e = op::apply_primitive(op::OpKind::Exp, {Tensor::from_values({1}, {0})});
    CHECK(e[0] == 1.0);

    CHECK(op::sub(a, b)[0] == -2.0);
    CHECK(op::mul(a, b)[1] == 8.0);
    CHECK(op::div(b, a)[1] == 2.0);
    CHECK(op::neg(a)[0] == -1.0);
    CHECK(op::power(a, 3.0)[1] == 8.0);
}

TEST_CASE("matmul matches a direct summation oracle") {
    auto eng = testutil::seeded(11);
    const std::size_t m = 2, k = 3, n = 1;
    SECTION("ones case from first principles") {
        auto a = Tensor::full({2, 3}, 1.0);
        auto b = Tensor::full({3, 1}, 1.0);
        auto c = op::apply_primitive(op::OpKind::Matmul, {a, b});
        REQUIRE(c.shape() == Shape{2, 1});
        CHECK(c[0] == 3.0);
        CHECK(c[1] == 3.0);
    }
    SECTION("random case") {
        auto av = testutil::random_vec(eng, m * k);
        auto bv = testutil::random_vec(eng, k * n);
        auto c = op::matmul(Tensor::from_values({m, k}, av), Tensor::from_values({k, n}, bv));
        auto ref = testutil::naive_matmul(av, bv, m, k, n);
        for (std::size_t i = 0; i < ref.size(); ++i)
            CHECK(c[i] == Catch::Approx(ref[i]).epsilon(1e-14));
    }
}

TEST_CASE("shape errors name the op and both shapes") {
    auto a = Tensor::zeros({2, 3});
    auto b = Tensor::zeros({4, 5});
    try {
        op::add(a, b);
        FAIL("expected shape error");
    } catch (const std::invalid_argument& err) {
        const std::string msg = err.what();
        CHECK(msg.find("add") != std::string::npos);
        CHECK(msg.find("[2,3]") != std::string::npos);
        CHECK(msg.find("[4,5]") != std::string::npos);
    }
    CHECK_THROWS_AS(op::matmul(a, b), std::invalid_argument);
    CHECK_THROWS_AS(op::log(Tensor::from_values({1}, {-1.0})), std::domain_error);
    CHECK_THROWS_AS(op::div(a, Tensor::zeros({2, 3})), std::domain_error);
}

TEST_CASE("backward: sum of squares and exp") {
    SECTION("d(x.x)/dx = 2x") {
        Tape tape;
        TapeScope scope(tape);
        auto x = Tensor::from_values({3}, {1, 2, 3}, /*requires_grad=*/true);
        auto root = op::sum(op::mul(x, x));
        tape.backward(root);
        CHECK(x.grad()[0] == 2.0);
        CHECK(x.grad()[1] == 4.0);
        CHECK(x.grad()[2] == 6.0);
    }
    SECTION("d(exp x)/dx at 0 is 1") {
        Tape tape;
        TapeScope scope(tape);
        auto x = Tensor::scalar(0.0, true);
        auto root = op::exp(x);
        tape.backward(root);
        CHECK(x.grad()[0] == 1.0);
    }
    SECTION("non-scalar root rejected") {
        Tape tape;
        TapeScope scope(tape);
        auto x = Tensor::from_values({2}, {1, 2}, true);
        auto y = op::mul(x, x);
        CHECK_THROWS_AS(tape.backward(y), std::invalid_argument);
    }
    SECTION("disconnected root rejected") {
        Tape tape;
        TapeScope scope(tape);
        auto x = Tensor::scalar(1.0, true);
        auto y = op::exp(x);
        auto stray = Tensor::scalar(2.0);
        CHECK_THROWS_AS(tape.backward(stray), std::invalid_argument);
        (void)y;
    }
}

TEST_CASE("backward of a 3-op chain matches central differences") {
    auto program_params = Tensor::from_values({4}, {0.3, -0.7, 1.1, 0.4});
    auto program = [&]() {
        // mean(tanh(x * x + x))
        auto sq = op::mul(program_params, program_params);
        auto lin = op::add(sq, program_params);
        return op::mean(op::tanh(lin));
    };
    const double err = finite_diff_check(program, {program_params}, 1e-5);
    CHECK(err <= 1e-6);
}

TEST_CASE("finite_diff_check edge cases") {
    SECTION("quadratic form") {
        auto x = Tensor::from_values({3}, {1.0, -2.0, 0.5});
        auto w = Tensor::from_values({3}, {0.2, 0.4, -0.3});
        auto program = [&]() {
            auto wx = op::mul(w, x);
            return op::sum(op::mul(wx, x));
        };
        CHECK(finite_diff_check(program, {x}, 1e-5) <= 1e-6);
    }
    SECTION("constant function has zero gradient and zero error") {
        auto x = Tensor::from_values({2}, {1.0, 2.0});
        auto program = [&]() { return op::sum(Tensor::from_values({1}, {5.0})); };
        // x never feeds the output: analytic and numeric are both zero.
        Tape tape;
        TapeScope scope(tape);
        x.set_requires_grad(true);
        auto keep = op::mulc(op::sum(x), 0.0);
        auto root = op::add(keep, Tensor::scalar(5.0));
        tape.backward(root);
        CHECK(x.grad()[0] == 0.0);
        CHECK(x.grad()[1] == 0.0);
        (void)program;
    }
    SECTION("bad eps rejected") {
        auto x = Tensor::scalar(1.0);
        CHECK_THROWS_AS(finite_diff_check([&]() { return x; }, {x}, 0.0),
                        std::invalid_argument);
    }
}

TEST_CASE("every primitive passes an isolated finite-difference check") {
    auto eng = testutil::seeded(7);
    auto fd = [&](auto&& builder, std::vector<Tensor> params) {
        return finite_diff_check(builder, std::move(params), 1e-5);
    };
    auto x = Tensor::from_values({2, 3}, testutil::random_vec(eng, 6, 0.2, 1.5));
    auto y = Tensor::from_values({2, 3}, testutil::random_vec(eng, 6, 0.3, 1.2));

    CHECK(fd([&]() { return op::sum(op::add(x, y)); }, {x, y}) <= 1e-6);
    CHECK(fd([&]() { return op::sum(op::sub(x, y)); }, {x, y}) <= 1e-6);
    CHECK(fd([&]() { return op::sum(op::mul(x, y)); }, {x, y}) <= 1e-6);
    CHECK(fd([&]() { return op::sum(op::div(x, y)); }, {x, y}) <= 1e-6);
    CHECK(fd([&]() { return op::sum(op::neg(x)); }, {x}) <= 1e-6);
    CHECK(fd([&]() { return op::sum(op::exp(x)); }, {x}) <= 1e-6);
    CHECK(fd([&]() { return op::sum(op::log(x)); }, {x}) <= 1e-6);
    CHECK(fd([&]() { return op::sum(op::sin(x)); }, {x}) <= 1e-6);
    CHECK(fd([&]() { return op::sum(op::cos(x)); }, {x}) <= 1e-6);
    CHECK(fd([&]() { return op::sum(op::sigmoid(x)); }, {x}) <= 1e-6);
    CHECK(fd([&]() { return op::sum(op::tanh(x)); }, {x}) <= 1e-6);
    CHECK(fd([&]() { return op::sum(op::gelu(x)); }, {x}) <= 1e-6);
    CHECK(fd([&]() { return op::sum(op::power(x, 1.7)); }, {x}) <= 1e-6);
    CHECK(fd([&]() { return op::mean(x); }, {x}) <= 1e-6);

    auto a = Tensor::from_values({2, 3}, testutil::random_vec(eng, 6));
    auto b = Tensor::from_values({3, 2}, testutil::random_vec(eng, 6));
    CHECK(fd([&]() { return op::sum(op::matmul(a, b)); }, {a, b}) <= 1e-6);

    CHECK(fd([&]() { return op::sum(op::slice(x, 1, 1, 3)); }, {x}) <= 1e-6);
    CHECK(fd([&]() { return op::sum(op::concat({x, y}, 0)); }, {x, y}) <= 1e-6);
    CHECK(fd([&]() { return op::sum(op::reshape(x, {3, 2})); }, {x}) <= 1e-6);
    auto small = Tensor::from_values({3}, {0.5, -0.2, 0.9});
    CHECK(fd([&]() { return op::sum(op::mul(op::broadcast_to(small, {2, 3}), x)); },
             {small, x}) <= 1e-6);
}

TEST_CASE("broadcasting rules") {
    auto big = Tensor::from_values({2, 2}, {1, 2, 3, 4});
    auto suffix = Tensor::from_values({2}, {10, 20});
    auto out = op::add(big, suffix);
    CHECK(out[0] == 11.0);
    CHECK(out[1] == 22.0);
    CHECK(out[2] == 13.0);
    CHECK(out[3] == 24.0);

    auto scalar = Tensor::scalar(5.0);
    auto out2 = op::mul(big, scalar);
    CHECK(out2[3] == 20.0);

    // gradient of the suffix operand sums over the leading axis
    Tape tape;
    TapeScope scope(tape);
    suffix.set_requires_grad(true);
    auto root = op::sum(op::mul(big, suffix));
    tape.backward(root);
    CHECK(suffix.grad()[0] == 4.0);   // 1 + 3
    CHECK(suffix.grad()[1] == 6.0);   // 2 + 4

    auto col = Tensor::from_values({2, 1}, {1.0, 2.0});
    auto expanded = op::broadcast_to(col, {2, 3});
    CHECK(expanded[2] == 1.0);
    CHECK(expanded[3] == 2.0);
}

TEST_CASE("gradient-of-sum linearity") {
    auto eng = testutil::seeded(21);
    auto x = Tensor::from_values({4}, testutil::random_vec(eng, 4, 0.1, 1.0));
    const double a = testutil::urand(eng, 0.5, 2.0);
    const double b = testutil::urand(eng, 0.5, 2.0);

    auto grad_of = [&](auto&& fn) {
        Tape tape;
        TapeScope scope(tape);
        x.set_requires_grad(true);
        auto root = fn();
        tape.backward(root);
        return x.grad();
    };
    auto f = [&]() { return op::sum(op::mul(x, x)); };
    auto g = [&]() { return op::mean(op::exp(x)); };
    auto combined = [&]() { return op::add(op::mulc(f(), a), op::mulc(g(), b)); };

    auto gf = grad_of(f);
    auto gg = grad_of(g);
    auto gc = grad_of(combined);
    for (std::size_t i = 0; i < 4; ++i) {
        const double expect = a * gf[i] + b * gg[i];
        CHECK(std::abs(gc[i] - expect) <= 1e-10 * std::max(1.0, std::abs(expect)));
    }
}

TEST_CASE("fan-out accumulates gradients additively") {
    Tape tape;
    TapeScope scope(tape);
    auto x = Tensor::from_values({3}, {1, 2, 3}, true);
    auto y = op::add(x, x);
    auto root = op::sum(y);
    tape.backward(root);
    CHECK(x.grad()[0] == 2.0);
    CHECK(x.grad()[1] == 2.0);
    CHECK(x.grad()[2] == 2.0);
}

TEST_CASE("layer_norm: values and gradients") {
    auto eng = testutil::seeded(3);
    auto x = Tensor::from_values({2, 4}, testutil::random_vec(eng, 8));
    auto gamma = Tensor::from_values({4}, testutil::random_vec(eng, 4, 0.5, 1.5));
    auto beta = Tensor::from_values({4}, testutil::random_vec(eng, 4, -0.5, 0.5));

    auto out = op::layer_norm(x, gamma, beta);
    // each row of (out - beta)/gamma has mean ~0 and unit variance
    for (std::size_t r = 0; r < 2; ++r) {
        double mu = 0.0;
        for (std::size_t j = 0; j < 4; ++j) mu += (out[r * 4 + j] - beta[j]) / gamma[j];
        CHECK(std::abs(mu / 4.0) < 1e-12);
    }
    CHECK(finite_diff_check(
              [&]() { return op::sum(op::mul(op::layer_norm(x, gamma, beta), x)); },
              {x, gamma, beta}, 1e-6) <= 1e-5);
}

TEST_CASE("dropout") {
    Rng rng(99);
    auto x = Tensor::full({1000}, 1.0);
    SECTION("p = 0 is identity") {
        auto out = op::dropout(x, 0.0, rng);
        CHECK(out.same_storage(x));
    }
    SECTION("kept entries are rescaled") {
        auto out = op::dropout(x, 0.5, rng);
        std::size_t kept = 0;
        for (std::size_t i = 0; i < out.size(); ++i) {
            if (out[i] != 0.0) {
                CHECK(out[i] == 2.0);
                ++kept;
            }
        }
        CHECK(kept > 350);
        CHECK(kept < 650);
    }
    SECTION("invalid rate") {
        CHECK_THROWS_AS(op::dropout(x, 1.0, rng), std::invalid_argument);
    }
}

TEST_CASE("ssm_kernel matches a direct complex-power oracle") {
    auto eng = testutil::seeded(5);
    const std::size_t H = 2, P = 3, L = 12;
    auto ar = Tensor::from_values({H, P}, testutil::random_vec(eng, H * P, -0.9, 0.9));
    auto ai = Tensor::from_values({H, P}, testutil::random_vec(eng, H * P, -0.9, 0.9));
    auto wr = Tensor::from_values({H, P}, testutil::random_vec(eng, H * P));
    auto wi = Tensor::from_values({H, P}, testutil::random_vec(eng, H * P));

    auto kern = op::ssm_kernel(ar, ai, wr, wi, L);
    for (std::size_t h = 0; h < H; ++h) {
        for (std::size_t l = 0; l < L; ++l) {
            std::complex<double> acc = 0.0;
            for (std::size_t n = 0; n < P; ++n) {
                const std::complex<double> a(ar[h * P + n], ai[h * P + n]);
                const std::complex<double> w(wr[h * P + n], wi[h * P + n]);
                acc += w * std::pow(a, static_cast<double>(l));
            }
            CHECK(kern[h * L + l] == Catch::Approx(2.0 * acc.real()).margin(1e-12));
        }
    }
    CHECK(finite_diff_check(
              [&]() { return op::mean(op::mul(op::ssm_kernel(ar, ai, wr, wi, L),
                                              op::ssm_kernel(ar, ai, wr, wi, L))); },
              {ar, ai, wr, wi}, 1e-5) <= 1e-6);
}

TEST_CASE("causal_conv matches the O(L^2) oracle and differentiates") {
    auto eng = testutil::seeded(17);
    const std::size_t B = 3, L = 19, H = 2;
    auto u = Tensor::from_values({B, L, H}, testutil::random_vec(eng, B * L * H));
    auto kern = Tensor::from_values({H, L}, testutil::random_vec(eng, H * L));

    auto y = op::causal_conv(u, kern);
    for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t h = 0; h < H; ++h) {
            std::vector<double> useq(L), kseq(L);
            for (std::size_t t = 0; t < L; ++t) useq[t] = u[(b * L + t) * H + h];
            for (std::size_t l = 0; l < L; ++l) kseq[l] = kern[h * L + l];
            auto ref = testutil::naive_causal_conv(kseq, useq);
            for (std::size_t t = 0; t < L; ++t)
                CHECK(y[(b * L + t) * H + h] == Catch::Approx(ref[t]).margin(1e-10));
        }
    }

    const std::size_t Bs = 2, Ls = 6, Hs = 2;
    auto us = Tensor::from_values({Bs, Ls, Hs}, testutil::random_vec(eng, Bs * Ls * Hs));
    auto ks = Tensor::from_values({Hs, Ls}, testutil::random_vec(eng, Hs * Ls));
    auto weight = Tensor::from_values({Bs, Ls, Hs}, testutil::random_vec(eng, Bs * Ls * Hs));
    CHECK(finite_diff_check(
              [&]() { return op::sum(op::mul(op::causal_conv(us, ks), weight)); },
              {us, ks}, 1e-5) <= 1e-6);
}

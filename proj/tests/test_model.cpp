#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "helpers.hpp"
#include "hydrossm/grad_check.hpp"
#include "hydrossm/model.hpp"

using namespace hydrossm;
namespace op = hydrossm::ag::ops;

namespace {

ModelConfig tiny_config() {
    ModelConfig c;
    c.d_model = 4;
    c.d_state = 4;
    c.n_layer = 2;
    c.dropout = 0.0;
    c.cfi = 1.0;
    c.cfr = 1.0;
    c.input_dim = 3;
    c.lookback = 8;
    return c;
}

}  // namespace

TEST_CASE("default config matches the production hyperparameters") {
    ModelConfig c;
    CHECK(c.d_model == 128);
    CHECK(c.d_state == 128);
    CHECK(c.n_layer == 6);
    CHECK(c.dropout == 0.12);
    CHECK(c.cfi == 10.0);
    CHECK(c.cfr == 10.0);
    CHECK(c.dt_bounds.min_dt == 1e-2);
    CHECK(c.dt_bounds.max_dt == 1e-1);
    CHECK(c.input_dim == 32);
    CHECK(c.lookback == 365);

    auto m = build_model(c, 1);
    CHECK(m.blocks.size() == 6);
    CHECK(m.blocks[0].ssm.channels == 128);
    CHECK(m.blocks[0].ssm.poles() == 64);
}

TEST_CASE("invalid configs are rejected with a violation list") {
    ModelConfig c = tiny_config();
    c.d_state = 3;
    c.dropout = 1.5;
    try {
        build_model(c, 0);
        FAIL("expected config error");
    } catch (const std::invalid_argument& err) {
        const std::string msg = err.what();
        CHECK(msg.find("d_state") != std::string::npos);
        CHECK(msg.find("dropout") != std::string::npos);
    }
}

TEST_CASE("identity tuning reproduces the base initialization") {
    ModelConfig c = tiny_config();
    auto m = build_model(c, 5);
    for (const auto& block : m.blocks) {
        const std::size_t P = block.ssm.poles();
        for (std::size_t h = 0; h < c.d_model; ++h)
            for (std::size_t n = 0; n < P; ++n) {
                CHECK(-std::exp(block.ssm.log_neg_a_re[h * P + n]) ==
                      Catch::Approx(-0.5).margin(1e-14));
                CHECK(block.ssm.a_im[h * P + n] ==
                      Catch::Approx(M_PI * double(n)).margin(1e-14));
            }
    }
}

TEST_CASE("same seed builds bitwise-identical parameters") {
    auto a = build_model(tiny_config(), 99);
    auto b = build_model(tiny_config(), 99);
    auto pa = a.parameters();
    auto pb = b.parameters();
    REQUIRE(pa.size() == pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i) {
        REQUIRE(pa[i].size() == pb[i].size());
        for (std::size_t j = 0; j < pa[i].size(); ++j) CHECK(pa[i][j] == pb[i][j]);
    }

    auto c = build_model(tiny_config(), 100);
    bool any_diff = false;
    auto pc = c.parameters();
    for (std::size_t i = 0; i < pa.size() && !any_diff; ++i)
        for (std::size_t j = 0; j < pa[i].size(); ++j)
            if (pa[i][j] != pc[i][j]) {
                any_diff = true;
                break;
            }
    CHECK(any_diff);
}

TEST_CASE("parameter count follows the closed form") {
    for (auto cfg : {tiny_config(), ModelConfig{}}) {
        auto m = build_model(cfg, 3);
        CHECK(m.parameter_count() == expected_parameter_count(cfg));
        if (cfg.n_layer == 2) {
            // 3*4+4 encoder, 2 blocks of (2*4 + 2*4*4 + 2*4), 4+1 decoder
            CHECK(expected_parameter_count(cfg) == 16 + 2 * 48 + 5);
        }
    }
}

TEST_CASE("zero input with freshly built (zero-bias) model predicts zero") {
    auto m = build_model(tiny_config(), 7);
    auto y = model_forward(m, ag::Tensor::zeros({2, 8, 3}), /*train_mode=*/false);
    REQUIRE(y.shape() == ag::Shape{2, 1});
    CHECK(y[0] == 0.0);
    CHECK(y[1] == 0.0);
}

TEST_CASE("duplicate rows give identical predictions in eval mode") {
    auto eng = testutil::seeded(12);
    auto m = build_model(tiny_config(), 7);
    auto row = testutil::random_vec(eng, 8 * 3);
    std::vector<double> two = row;
    two.insert(two.end(), row.begin(), row.end());
    auto y = model_forward(m, ag::Tensor::from_values({2, 8, 3}, two), false);
    CHECK(y[0] == y[1]);

    auto y2 = model_forward(m, ag::Tensor::from_values({2, 8, 3}, two), false);
    CHECK(y[0] == y2[0]);  // eval-mode idempotence
}

TEST_CASE("output depends on every time step") {
    auto eng = testutil::seeded(44);
    auto m = build_model(tiny_config(), 11);
    auto u = ag::Tensor::from_values({1, 8, 3}, testutil::random_vec(eng, 24));

    // gradient of the prediction w.r.t. the input is nonzero at every step
    ag::Tape tape;
    ag::TapeScope scope(tape);
    u.set_requires_grad(true);
    auto y = model_forward(m, u, false);
    auto root = op::sum(y);
    tape.backward(root);
    for (std::size_t t = 0; t < 8; ++t) {
        double row_norm = 0.0;
        for (std::size_t f = 0; f < 3; ++f) row_norm += std::abs(u.grad()[t * 3 + f]);
        CHECK(row_norm > 0.0);
    }

    // perturbing only the final step changes the output
    auto base = model_forward(m, u, false);
    auto v = u.clone();
    v[7 * 3 + 1] += 0.5;
    auto bumped = model_forward(m, v, false);
    CHECK(std::abs(bumped[0] - base[0]) > 0.0);
}

TEST_CASE("shape mismatches are rejected") {
    auto m = build_model(tiny_config(), 7);
    CHECK_THROWS_AS(model_forward(m, ag::Tensor::zeros({1, 9, 3}), false),
                    std::invalid_argument);
    CHECK_THROWS_AS(model_forward(m, ag::Tensor::zeros({1, 8, 4}), false),
                    std::invalid_argument);
}

TEST_CASE("finite differences validate the full model gradient") {
    auto eng = testutil::seeded(31);
    ModelConfig c = tiny_config();
    c.input_dim = 3;
    auto m = build_model(c, 21);
    auto batch = ag::Tensor::from_values({2, 8, 3}, testutil::random_vec(eng, 2 * 8 * 3));
    auto target = ag::Tensor::from_values({2, 1}, {0.3, -0.8});

    auto program = [&]() {
        auto pred = model_forward(m, batch, false);
        auto err = op::sub(pred, target);
        return op::mean(op::mul(err, err));
    };
    CHECK(ag::finite_diff_check(program, m.parameters(), 1e-4) <= 1e-3);
}

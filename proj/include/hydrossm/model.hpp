#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "hydrossm/nn_ops.hpp"
#include "hydrossm/ops.hpp"
#include "hydrossm/random.hpp"
#include "hydrossm/s4d.hpp"

namespace hydrossm {

/// Network hyperparameters. Defaults are the production configuration for
/// the CAMELS-style benchmark; tests shrink them.
struct ModelConfig {
    std::size_t d_model = 128;
    std::size_t d_state = 128;
    std::size_t n_layer = 6;
    double dropout = 0.12;
    double cfi = 10.0;  // both 1 for basic S4D
    double cfr = 10.0;
    DtBounds dt_bounds{1e-2, 1e-1};
    std::size_t input_dim = 32;
    std::size_t lookback = 365;

    std::vector<std::string> violations() const {
        std::vector<std::string> v;
        if (d_model == 0) v.push_back("d_model must be positive");
        if (d_state == 0 || d_state % 2 != 0) v.push_back("d_state must be positive and even");
        if (n_layer == 0) v.push_back("n_layer must be positive");
        if (dropout < 0.0 || dropout >= 1.0) v.push_back("dropout must be in [0,1)");
        if (!(cfi > 0.0)) v.push_back("cfi must be positive");
        if (!(cfr > 0.0)) v.push_back("cfr must be positive");
        if (!(dt_bounds.min_dt > 0.0) || !(dt_bounds.min_dt < dt_bounds.max_dt))
            v.push_back("dt bounds must satisfy 0 < min_dt < max_dt");
        if (input_dim == 0) v.push_back("input_dim must be positive");
        if (lookback == 0) v.push_back("lookback must be positive");
        return v;
    }

    void validate() const {
        auto v = violations();
        if (v.empty()) return;
        std::string msg = "invalid model config:";
        for (const auto& s : v) msg += "\n  - " + s;
        throw std::invalid_argument(msg);
    }
};

/// One residual block: pre-norm layer normalization, the diagonal SSM,
/// GELU gating, dropout, then the residual add.
struct SSMBlock {
    ag::Tensor norm_gamma, norm_beta;  // [d_model]
    DiagonalSSM ssm;
};

/// Encoder -> n_layer SSM blocks -> features of the final time step ->
/// scalar decoder. Sequence-to-one: one discharge value per window.
struct DeepSSMModel {
    ModelConfig config;
    ag::Tensor encoder_w, encoder_b;  // [input_dim, d_model], [d_model]
    std::vector<SSMBlock> blocks;
    ag::Tensor decoder_w, decoder_b;  // [d_model, 1], [1]

    std::vector<ag::Tensor> parameters() const {
        std::vector<ag::Tensor> out{encoder_w, encoder_b};
        for (const auto& b : blocks) {
            out.push_back(b.norm_gamma);
            out.push_back(b.norm_beta);
            for (const auto& t : b.ssm.parameters()) out.push_back(t);
        }
        out.push_back(decoder_w);
        out.push_back(decoder_b);
        return out;
    }

    std::vector<std::pair<std::string, ag::Tensor>> named_parameters() const {
        std::vector<std::pair<std::string, ag::Tensor>> out;
        out.emplace_back("encoder.weight", encoder_w);
        out.emplace_back("encoder.bias", encoder_b);
        for (std::size_t i = 0; i < blocks.size(); ++i) {
            const std::string p = "block" + std::to_string(i) + ".";
            out.emplace_back(p + "norm.gamma", blocks[i].norm_gamma);
            out.emplace_back(p + "norm.beta", blocks[i].norm_beta);
            out.emplace_back(p + "ssm.log_neg_a_re", blocks[i].ssm.log_neg_a_re);
            out.emplace_back(p + "ssm.a_im", blocks[i].ssm.a_im);
            out.emplace_back(p + "ssm.c_re", blocks[i].ssm.c_re);
            out.emplace_back(p + "ssm.c_im", blocks[i].ssm.c_im);
            out.emplace_back(p + "ssm.d_skip", blocks[i].ssm.d_skip);
            out.emplace_back(p + "ssm.log_dt", blocks[i].ssm.log_dt);
        }
        out.emplace_back("decoder.weight", decoder_w);
        out.emplace_back("decoder.bias", decoder_b);
        return out;
    }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& t : parameters()) n += t.size();
        return n;
    }

    void set_trainable(bool flag) {
        for (auto t : parameters()) t.set_requires_grad(flag);
    }
};

/// Closed form for the trainable parameter count; asserted against the
/// actual tensors in the tests.
inline std::size_t expected_parameter_count(const ModelConfig& c) {
    const std::size_t H = c.d_model, N = c.d_state;
    const std::size_t per_block = 2 * H + 2 * H * N + 2 * H;  // norm + poles/C + skip/dt
    return c.input_dim * H + H + c.n_layer * per_block + H + 1;
}

inline DeepSSMModel build_model(const ModelConfig& config, std::uint64_t seed) {
    config.validate();
    DeepSSMModel m;
    m.config = config;

    std::uint64_t stream = seed;
    auto affine = [&](std::size_t fan_in, std::size_t fan_out) {
        Rng rng(split_seed(stream));
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        ag::Tensor w = ag::Tensor::zeros({fan_in, fan_out}, true);
        for (std::size_t i = 0; i < w.size(); ++i) w[i] = rng.uniform(-bound, bound);
        ag::Tensor b = ag::Tensor::zeros({fan_out}, true);
        return std::make_pair(w, b);
    };

    std::tie(m.encoder_w, m.encoder_b) = affine(config.input_dim, config.d_model);
    for (std::size_t i = 0; i < config.n_layer; ++i) {
        SSMBlock block;
        block.norm_gamma = ag::Tensor::full({config.d_model}, 1.0, true);
        block.norm_beta = ag::Tensor::zeros({config.d_model}, true);
        block.ssm = init_s4d(config.d_model, config.d_state, config.dt_bounds,
                             split_seed(stream));
        apply_frequency_tuning(block.ssm, config.cfi, config.cfr);
        m.blocks.push_back(std::move(block));
    }
    std::tie(m.decoder_w, m.decoder_b) = affine(config.d_model, 1);
    return m;
}

/// Full forward pass over a window batch [B, lookback, input_dim];
/// returns predictions [B, 1] in normalized-discharge units. Dropout fires
/// only in train mode; eval mode is deterministic given the parameters.
inline ag::Tensor model_forward(const DeepSSMModel& m, const ag::Tensor& batch, bool train_mode,
                                Rng* rng = nullptr) {
    namespace op = ag::ops;
    const ModelConfig& c = m.config;
    if (batch.rank() != 3 || batch.shape()[1] != c.lookback || batch.shape()[2] != c.input_dim)
        throw std::invalid_argument("model_forward: expected [B," + std::to_string(c.lookback) +
                                    "," + std::to_string(c.input_dim) + "], got " +
                                    ag::shape_str(batch.shape()));
    for (double v : batch.data())
        if (!std::isfinite(v)) throw std::domain_error("model_forward: non-finite input");
    if (train_mode && c.dropout > 0.0 && rng == nullptr)
        throw std::invalid_argument("model_forward: train mode with dropout needs an rng");

    const std::size_t B = batch.shape()[0], L = c.lookback;

    auto flat = op::reshape(batch, {B * L, c.input_dim});
    auto enc = op::add(op::matmul(flat, m.encoder_w), m.encoder_b);
    auto x = op::reshape(enc, {B, L, c.d_model});

    for (const auto& block : m.blocks) {
        auto z = op::layer_norm(x, block.norm_gamma, block.norm_beta);
        auto s = forward_conv(block.ssm, z);
        auto g = op::gelu(s);
        if (train_mode && c.dropout > 0.0) g = op::dropout(g, c.dropout, *rng);
        x = op::add(x, g);
    }

    auto last = op::reshape(op::slice(x, 1, L - 1, L), {B, c.d_model});
    return op::add(op::matmul(last, m.decoder_w), m.decoder_b);
}

}  // namespace hydrossm

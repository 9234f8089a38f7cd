#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "hydrossm/ops.hpp"
#include "hydrossm/random.hpp"
#include "hydrossm/ssm_ops.hpp"
#include "hydrossm/tensor.hpp"

namespace hydrossm {

struct DtBounds {
    double min_dt = 1e-2;
    double max_dt = 1e-1;
};

/// Diagonal state space layer parameters, one SISO system per channel.
///
/// The real part of every pole is stored as log(-Re(a)), so the effective
/// Re(a) = -exp(log_neg_a_re) stays in the left half plane for any parameter
/// value the optimizer can reach. Only N/2 conjugate-representative poles are
/// stored; outputs double the real part, which realizes a real N-state system
/// per channel. The input matrix B is fixed to all-ones and not trainable.
struct DiagonalSSM {
    std::size_t channels = 0;   // H
    std::size_t state_dim = 0;  // N real states per channel
    ag::Tensor log_neg_a_re;    // [H, N/2]
    ag::Tensor a_im;            // [H, N/2]
    ag::Tensor c_re, c_im;      // [H, N/2]
    ag::Tensor d_skip;          // [H]
    ag::Tensor log_dt;          // [H]
    DtBounds dt_bounds;

    std::size_t poles() const { return state_dim / 2; }

    std::vector<ag::Tensor> parameters() const {
        return {log_neg_a_re, a_im, c_re, c_im, d_skip, log_dt};
    }

    void set_trainable(bool flag) {
        for (auto t : parameters()) t.set_requires_grad(flag);
    }
};

/// Discretized system, complex entries stored as real/imaginary pairs.
struct DiscretizedSSM {
    ag::Tensor a_bar_re, a_bar_im;  // [H, P]
    ag::Tensor b_bar_re, b_bar_im;  // [H, P]
};

/// Latent state of the discrete recurrence, one complex vector per
/// (batch sample, channel).
struct DiscreteState {
    std::size_t batch = 0, channels = 0, poles = 0;
    std::vector<std::complex<double>> x;  // [B, H, P]

    static DiscreteState zero(std::size_t batch, const DiagonalSSM& params) {
        DiscreteState s;
        s.batch = batch;
        s.channels = params.channels;
        s.poles = params.poles();
        s.x.assign(batch * s.channels * s.poles, {0.0, 0.0});
        return s;
    }

    double norm() const {
        double acc = 0.0;
        for (const auto& v : x) acc += std::norm(v);
        return std::sqrt(acc);
    }
};

/// S4D-Lin initialization: pole n starts at -1/2 + i*pi*n, C and the skip
/// path draw from a standard normal, and exp(log_dt) is log-uniform on the
/// dt bounds. Deterministic for a fixed seed.
inline DiagonalSSM init_s4d(std::size_t channels, std::size_t state_dim, DtBounds bounds,
                            std::uint64_t seed) {
    if (state_dim == 0 || state_dim % 2 != 0)
        throw std::invalid_argument("init_s4d: state dimension must be even, got " +
                                    std::to_string(state_dim));
    if (!(bounds.min_dt > 0.0) || !(bounds.min_dt < bounds.max_dt))
        throw std::invalid_argument("init_s4d: need 0 < min_dt < max_dt");

    const std::size_t P = state_dim / 2;
    DiagonalSSM m;
    m.channels = channels;
    m.state_dim = state_dim;
    m.dt_bounds = bounds;

    m.log_neg_a_re = ag::Tensor::full({channels, P}, std::log(0.5), true);
    m.a_im = ag::Tensor::zeros({channels, P}, true);
    for (std::size_t h = 0; h < channels; ++h)
        for (std::size_t n = 0; n < P; ++n)
            m.a_im[h * P + n] = M_PI * static_cast<double>(n);

    Rng rng(seed);
    m.c_re = ag::Tensor::zeros({channels, P}, true);
    m.c_im = ag::Tensor::zeros({channels, P}, true);
    for (std::size_t i = 0; i < channels * P; ++i) m.c_re[i] = rng.normal();
    for (std::size_t i = 0; i < channels * P; ++i) m.c_im[i] = rng.normal();
    m.d_skip = ag::Tensor::zeros({channels}, true);
    for (std::size_t h = 0; h < channels; ++h) m.d_skip[h] = rng.normal();
    m.log_dt = ag::Tensor::zeros({channels}, true);
    for (std::size_t h = 0; h < channels; ++h)
        m.log_dt[h] = rng.uniform(std::log(bounds.min_dt), std::log(bounds.max_dt));
    return m;
}

/// Frequency tuning, applied once at initialization before any training
/// step: Im(a) is scaled by cfi and the effective Re(a) by cfr (realized in
/// log space, which keeps Re(a) < 0 structurally). cfi = cfr = 1 is basic
/// S4D.
inline void apply_frequency_tuning(DiagonalSSM& params, double cfi, double cfr) {
    if (!(cfi > 0.0) || !(cfr > 0.0))
        throw std::invalid_argument("apply_frequency_tuning: cfi and cfr must be positive");
    for (std::size_t i = 0; i < params.a_im.size(); ++i) params.a_im[i] *= cfi;
    const double shift = std::log(cfr);
    for (std::size_t i = 0; i < params.log_neg_a_re.size(); ++i) params.log_neg_a_re[i] += shift;
}

/// Exact zero-order-hold discretization: a_bar = exp(dt*a) and
/// b_bar = (a_bar - 1)/a with B = 1. Differentiable with respect to
/// log_neg_a_re, a_im and log_dt; a = 0 is excluded by the stability
/// parameterization.
inline DiscretizedSSM discretize_zoh(const DiagonalSSM& params) {
    namespace op = ag::ops;
    const std::size_t H = params.channels, P = params.poles();

    auto dt = op::broadcast_to(op::reshape(op::exp(params.log_dt), {H, 1}), {H, P});
    auto a_re = op::neg(op::exp(params.log_neg_a_re));
    const auto& a_im = params.a_im;

    auto dta_re = op::mul(dt, a_re);
    auto dta_im = op::mul(dt, a_im);
    auto mag = op::exp(dta_re);
    DiscretizedSSM d;
    d.a_bar_re = op::mul(mag, op::cos(dta_im));
    d.a_bar_im = op::mul(mag, op::sin(dta_im));

    // (a_bar - 1) / a expanded into real arithmetic
    auto denom = op::add(op::mul(a_re, a_re), op::mul(a_im, a_im));
    auto am1 = op::addc(d.a_bar_re, -1.0);
    d.b_bar_re = op::div(op::add(op::mul(am1, a_re), op::mul(d.a_bar_im, a_im)), denom);
    d.b_bar_im = op::div(op::sub(op::mul(d.a_bar_im, a_re), op::mul(am1, a_im)), denom);
    return d;
}

/// Convolution kernel K[h,l] = 2*Re(sum_n c_n * a_bar_n^l * b_bar_n).
inline ag::Tensor compute_kernel(const DiagonalSSM& params, std::size_t length) {
    namespace op = ag::ops;
    if (length == 0) throw std::invalid_argument("compute_kernel: length must be >= 1");
    auto d = discretize_zoh(params);
    auto w_re = op::sub(op::mul(params.c_re, d.b_bar_re), op::mul(params.c_im, d.b_bar_im));
    auto w_im = op::add(op::mul(params.c_re, d.b_bar_im), op::mul(params.c_im, d.b_bar_re));
    return op::ssm_kernel(d.a_bar_re, d.a_bar_im, w_re, w_im, length);
}

/// Training-mode forward: per-channel causal convolution with the
/// materialized kernel plus the direct skip path, u and y both [B,L,H].
inline ag::Tensor forward_conv(const DiagonalSSM& params, const ag::Tensor& u) {
    namespace op = ag::ops;
    if (u.rank() != 3 || u.shape()[2] != params.channels)
        throw std::invalid_argument("forward_conv: expected input [B,L," +
                                    std::to_string(params.channels) + "], got " +
                                    ag::shape_str(u.shape()));
    for (double v : u.data())
        if (!std::isfinite(v)) throw std::domain_error("forward_conv: non-finite input");
    auto kern = compute_kernel(params, u.shape()[1]);
    auto y = op::causal_conv(u, kern);
    return op::add(y, op::mul(u, params.d_skip));
}

/// One step of the discrete recurrence x_k = a_bar x_{k-1} + b_bar u_k,
/// y_k = 2*Re(sum_n c_n x_k,n) + d u_k. Value-level stepping mode; the
/// state is advanced in place and y [B,H] is returned.
inline ag::Tensor forward_recurrent(const DiagonalSSM& params, DiscreteState& state,
                                    const ag::Tensor& u_k) {
    if (u_k.rank() != 2 || u_k.shape()[1] != params.channels)
        throw std::invalid_argument("forward_recurrent: expected input [B," +
                                    std::to_string(params.channels) + "], got " +
                                    ag::shape_str(u_k.shape()));
    if (state.batch != u_k.shape()[0] || state.channels != params.channels ||
        state.poles != params.poles())
        throw std::invalid_argument("forward_recurrent: state does not match params/input");

    const std::size_t B = state.batch, H = params.channels, P = params.poles();
    ag::NoGradScope no_grad;
    auto d = discretize_zoh(params);

    ag::Tensor y = ag::Tensor::zeros({B, H});
    for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t h = 0; h < H; ++h) {
            const double u = u_k[b * H + h];
            double out = params.d_skip[h] * u;
            for (std::size_t n = 0; n < P; ++n) {
                const std::size_t i = h * P + n;
                const std::complex<double> abar(d.a_bar_re[i], d.a_bar_im[i]);
                const std::complex<double> bbar(d.b_bar_re[i], d.b_bar_im[i]);
                const std::complex<double> c(params.c_re[i], params.c_im[i]);
                auto& x = state.x[(b * H + h) * P + n];
                x = abar * x + bbar * u;
                out += 2.0 * (c * x).real();
            }
            y[b * H + h] = out;
        }
    }
    return y;
}

/// Structural stability probe: every effective Re(a) < 0 and |a_bar| < 1.
inline bool is_stable(const DiagonalSSM& params) {
    ag::NoGradScope no_grad;
    for (double v : params.log_neg_a_re.data())
        if (!(-std::exp(v) < 0.0)) return false;
    auto d = discretize_zoh(params);
    for (std::size_t i = 0; i < d.a_bar_re.size(); ++i)
        if (std::hypot(d.a_bar_re[i], d.a_bar_im[i]) >= 1.0) return false;
    return true;
}

}  // namespace hydrossm

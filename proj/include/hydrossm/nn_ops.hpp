#pragma once

#include <cmath>
#include <memory>
#include <stdexcept>

#include "hydrossm/ops.hpp"
#include "hydrossm/random.hpp"

namespace hydrossm::ag::ops {

/// Layer normalization over the last axis, fused with affine scale/shift.
/// Kept as one primitive so the tape holds two cached arrays per call
/// instead of a dozen intermediates the size of the activations.
inline Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                         double eps = 1e-5) {
    if (x.rank() == 0) throw std::invalid_argument("layer_norm: scalar input");
    const std::size_t D = x.shape().back();
    if (gamma.size() != D || beta.size() != D)
        throw std::invalid_argument("layer_norm: scale/shift size " +
                                    std::to_string(gamma.size()) + " does not match feature dim " +
                                    std::to_string(D));
    const std::size_t rows = x.size() / D;

    Tensor out = Tensor::zeros(x.shape());
    auto xhat = std::make_shared<std::vector<double>>(x.size());
    auto inv_std = std::make_shared<std::vector<double>>(rows);
    {
        const double* px = x.ptr();
        const double* pg = gamma.ptr();
        const double* pb = beta.ptr();
        double* po = out.ptr();
        for (std::size_t r = 0; r < rows; ++r) {
            const double* row = px + r * D;
            double mu = 0.0;
            for (std::size_t j = 0; j < D; ++j) mu += row[j];
            mu /= static_cast<double>(D);
            double var = 0.0;
            for (std::size_t j = 0; j < D; ++j) var += (row[j] - mu) * (row[j] - mu);
            var /= static_cast<double>(D);
            const double inv = 1.0 / std::sqrt(var + eps);
            (*inv_std)[r] = inv;
            for (std::size_t j = 0; j < D; ++j) {
                const double xh = (row[j] - mu) * inv;
                (*xhat)[r * D + j] = xh;
                po[r * D + j] = pg[j] * xh + pb[j];
            }
        }
    }
    Tensor xv = x, gv = gamma, bv = beta, ov = out;
    detail::record_if_tracked(out, {x, gamma, beta}, [xv, gv, bv, ov, xhat, inv_std, rows, D]() mutable {
        const double* g = ov.grad().data();
        const double* pg = gv.ptr();
        double* gx = xv.requires_grad() ? xv.grad().data() : nullptr;
        double* gg = gv.requires_grad() ? gv.grad().data() : nullptr;
        double* gb = bv.requires_grad() ? bv.grad().data() : nullptr;
        for (std::size_t r = 0; r < rows; ++r) {
            const double* grow = g + r * D;
            const double* xh = xhat->data() + r * D;
            if (gx) {
                double m1 = 0.0, m2 = 0.0;
                for (std::size_t j = 0; j < D; ++j) {
                    const double h = grow[j] * pg[j];
                    m1 += h;
                    m2 += h * xh[j];
                }
                m1 /= static_cast<double>(D);
                m2 /= static_cast<double>(D);
                const double inv = (*inv_std)[r];
                for (std::size_t j = 0; j < D; ++j)
                    gx[r * D + j] += inv * (grow[j] * pg[j] - m1 - xh[j] * m2);
            }
            if (gg)
                for (std::size_t j = 0; j < D; ++j) gg[j] += grow[j] * xh[j];
            if (gb)
                for (std::size_t j = 0; j < D; ++j) gb[j] += grow[j];
        }
    });
    return out;
}

/// Inverted dropout; scaling happens at train time so eval needs no rescale.
/// p = 0 is an exact identity.
inline Tensor dropout(const Tensor& x, double p, Rng& rng) {
    if (p < 0.0 || p >= 1.0)
        throw std::invalid_argument("dropout: rate " + std::to_string(p) + " outside [0,1)");
    if (p == 0.0) return x;
    const double keep_inv = 1.0 / (1.0 - p);
    auto mask = std::make_shared<std::vector<double>>(x.size());
    for (auto& m : *mask) m = rng.bernoulli(p) ? 0.0 : keep_inv;

    Tensor out = Tensor::zeros(x.shape());
    {
        const double* px = x.ptr();
        double* po = out.ptr();
        for (std::size_t i = 0; i < x.size(); ++i) po[i] = px[i] * (*mask)[i];
    }
    Tensor xv = x, ov = out;
    detail::record_if_tracked(out, {x}, [xv, ov, mask]() mutable {
        const double* g = ov.grad().data();
        double* gx = xv.grad().data();
        for (std::size_t i = 0; i < xv.size(); ++i) gx[i] += g[i] * (*mask)[i];
    });
    return out;
}

}  // namespace hydrossm::ag::ops

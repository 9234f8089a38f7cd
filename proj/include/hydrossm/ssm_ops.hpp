#pragma once

#include <memory>
#include <stdexcept>

#include "hydrossm/fft.hpp"
#include "hydrossm/ops.hpp"

namespace hydrossm::ag::ops {

/// Vandermonde-style kernel accumulation for a diagonal discrete system:
///   K[h,l] = 2 * Re( sum_n w[h,n] * abar[h,n]^l )
/// with abar = abar_re + i*abar_im and w = w_re + i*w_im (w folds C and
/// Bbar together). The factor 2*Re realizes the conjugate-pair doubling.
inline Tensor ssm_kernel(const Tensor& abar_re, const Tensor& abar_im, const Tensor& w_re,
                         const Tensor& w_im, std::size_t L) {
    const Shape& s = abar_re.shape();
    if (s.size() != 2 || abar_im.shape() != s || w_re.shape() != s || w_im.shape() != s)
        throw std::invalid_argument("ssm_kernel: parameter tensors must share shape [H,P], got " +
                                    shape_str(s));
    if (L == 0) throw std::invalid_argument("ssm_kernel: L must be >= 1");
    const std::size_t H = s[0], P = s[1];

    Tensor out = Tensor::zeros({H, L});
    {
        const double* ar = abar_re.ptr();
        const double* ai = abar_im.ptr();
        const double* wr = w_re.ptr();
        const double* wi = w_im.ptr();
        double* po = out.ptr();
        for (std::size_t h = 0; h < H; ++h) {
            for (std::size_t n = 0; n < P; ++n) {
                const std::size_t idx = h * P + n;
                const double are = ar[idx], aim = ai[idx];
                const double wre = wr[idx], wim = wi[idx];
                double pr = 1.0, pi = 0.0;  // abar^l
                for (std::size_t l = 0; l < L; ++l) {
                    po[h * L + l] += 2.0 * (wre * pr - wim * pi);
                    const double npr = pr * are - pi * aim;
                    pi = pr * aim + pi * are;
                    pr = npr;
                }
            }
        }
    }

    Tensor arv = abar_re, aiv = abar_im, wrv = w_re, wiv = w_im, ov = out;
    detail::record_if_tracked(
        out, {abar_re, abar_im, w_re, w_im}, [arv, aiv, wrv, wiv, ov, H, P, L]() mutable {
            const double* g = ov.grad().data();
            const double* ar = arv.ptr();
            const double* ai = aiv.ptr();
            const double* wr = wrv.ptr();
            const double* wi = wiv.ptr();
            double* gar = arv.grad().data();
            double* gai = aiv.grad().data();
            double* gwr = wrv.grad().data();
            double* gwi = wiv.grad().data();
            for (std::size_t h = 0; h < H; ++h) {
                const double* grow = g + h * L;
                for (std::size_t n = 0; n < P; ++n) {
                    const std::size_t idx = h * P + n;
                    const double are = ar[idx], aim = ai[idx];
                    const double wre = wr[idx], wim = wi[idx];
                    double pr = 1.0, pi = 0.0;    // abar^l
                    double qr = 0.0, qi = 0.0;    // abar^(l-1), zero at l=0
                    double acc_wr = 0.0, acc_wi = 0.0, acc_ar = 0.0, acc_ai = 0.0;
                    for (std::size_t l = 0; l < L; ++l) {
                        const double gv = grow[l];
                        acc_wr += 2.0 * gv * pr;
                        acc_wi -= 2.0 * gv * pi;
                        if (l > 0) {
                            // d K[l] / d abar = 2*l*w*abar^(l-1)
                            const double zr = 2.0 * static_cast<double>(l) *
                                              (wre * qr - wim * qi);
                            const double zi = 2.0 * static_cast<double>(l) *
                                              (wre * qi + wim * qr);
                            acc_ar += gv * zr;
                            acc_ai -= gv * zi;
                        }
                        qr = pr;
                        qi = pi;
                        const double npr = pr * are - pi * aim;
                        pi = pr * aim + pi * are;
                        pr = npr;
                    }
                    gwr[idx] += acc_wr;
                    gwi[idx] += acc_wi;
                    gar[idx] += acc_ar;
                    gai[idx] += acc_ai;
                }
            }
        });
    return out;
}

/// Per-channel causal convolution, u [B,L,H] with kernels [H,L], computed
/// through the batched FFT. Spectra from the forward pass are cached on the
/// tape node and reused for both gradient convolutions.
inline Tensor causal_conv(const Tensor& u, const Tensor& kern) {
    if (u.rank() != 3 || kern.rank() != 2)
        detail::throw_shape("causal_conv", u.shape(), kern.shape());
    const std::size_t B = u.shape()[0], L = u.shape()[1], H = u.shape()[2];
    if (kern.shape()[0] != H || kern.shape()[1] != L)
        detail::throw_shape("causal_conv", u.shape(), kern.shape());

    const bool tracked = (u.requires_grad() || kern.requires_grad()) && Tape::active();
    auto cache = tracked ? std::make_shared<fft::ConvSpectra>() : nullptr;

    Tensor out = Tensor::zeros(u.shape());
    fft::causal_conv_values(u.ptr(), kern.ptr(), B, L, H, out.ptr(), cache.get());

    Tensor uv = u, kv = kern, ov = out;
    detail::record_if_tracked(out, {u, kern}, [uv, kv, ov, cache]() mutable {
        fft::causal_conv_backward(*cache, ov.grad().data(),
                                  uv.requires_grad() ? uv.grad().data() : nullptr,
                                  kv.requires_grad() ? kv.grad().data() : nullptr);
    });
    return out;
}

}  // namespace hydrossm::ag::ops

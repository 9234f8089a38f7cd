#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

#include <cmath>

namespace hydrossm::fft {

inline std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

/// Iterative radix-2 FFT over batches of sequences.
///
/// Sequences are stored coefficient-major with the batch contiguous:
/// element (j, r) of sequence r lives at index j*rows + r. The butterfly
/// inner loops then run over contiguous memory, which is what makes the
/// convolution path fast on one core.
class Plan {
    std::size_t n_ = 0;
    std::vector<std::size_t> bitrev_;
    std::vector<double> tw_re_, tw_im_;  // exp(-2*pi*i*k/n), k < n/2

public:
    explicit Plan(std::size_t n) : n_(n) {
        if (n == 0 || (n & (n - 1)) != 0)
            throw std::invalid_argument("fft::Plan: size must be a power of two");
        bitrev_.assign(n, 0);
        std::size_t log2n = 0;
        while ((std::size_t{1} << log2n) < n) ++log2n;
        for (std::size_t i = 1; i < n; ++i)
            bitrev_[i] = (bitrev_[i >> 1] >> 1) | ((i & 1) << (log2n - 1));
        tw_re_.resize(n / 2);
        tw_im_.resize(n / 2);
        for (std::size_t k = 0; k < n / 2; ++k) {
            const double ang = -2.0 * M_PI * static_cast<double>(k) / static_cast<double>(n);
            tw_re_[k] = std::cos(ang);
            tw_im_[k] = std::sin(ang);
        }
    }

    std::size_t size() const { return n_; }

    void forward(double* re, double* im, std::size_t rows) const {
        transform(re, im, rows, /*inverse=*/false);
    }

    void inverse(double* re, double* im, std::size_t rows) const {
        transform(re, im, rows, /*inverse=*/true);
        const double scale = 1.0 / static_cast<double>(n_);
        for (std::size_t i = 0; i < n_ * rows; ++i) {
            re[i] *= scale;
            im[i] *= scale;
        }
    }

private:
    void transform(double* re, double* im, std::size_t rows, bool inverse) const {
        const std::size_t n = n_;
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t j = bitrev_[i];
            if (j > i) {
                for (std::size_t r = 0; r < rows; ++r) {
                    std::swap(re[i * rows + r], re[j * rows + r]);
                    std::swap(im[i * rows + r], im[j * rows + r]);
                }
            }
        }
        for (std::size_t len = 2; len <= n; len <<= 1) {
            const std::size_t half = len >> 1;
            const std::size_t step = n / len;
            for (std::size_t base = 0; base < n; base += len) {
                for (std::size_t j = 0; j < half; ++j) {
                    const double wre = tw_re_[j * step];
                    const double wim = inverse ? -tw_im_[j * step] : tw_im_[j * step];
                    double* are = re + (base + j) * rows;
                    double* aim = im + (base + j) * rows;
                    double* bre = re + (base + j + half) * rows;
                    double* bim = im + (base + j + half) * rows;
                    for (std::size_t r = 0; r < rows; ++r) {
                        const double tre = wre * bre[r] - wim * bim[r];
                        const double tim = wre * bim[r] + wim * bre[r];
                        bre[r] = are[r] - tre;
                        bim[r] = aim[r] - tim;
                        are[r] += tre;
                        aim[r] += tim;
                    }
                }
            }
        }
    }
};

// ---------------------------------------------------------------------------
// Causal convolution of per-channel kernels with batched inputs.
//
// u is [B,L,H] row-major, k is [H,L]; y[b,t,h] = sum_{l<=t} k[h,l]*u[b,t-l,h].
// Convolutions run through an FFT of size next_pow2(2L); only the first L
// real outputs are kept, so the circular wrap never aliases and the imaginary
// residue is discarded.
// ---------------------------------------------------------------------------

inline constexpr std::size_t kConvChunk = 16;  // batch rows per FFT pass

/// Spectra retained from the forward pass; the backward pass reuses them so
/// gradient convolutions cost one FFT sweep instead of three.
struct ConvSpectra {
    std::size_t batch = 0, length = 0, channels = 0, padded = 0;
    std::vector<double> khat_re, khat_im;  // [H][M]
    std::vector<double> uhat_re, uhat_im;  // [H][B][M] in chunk layout
};

namespace detail {

inline std::size_t chunk_offset(std::size_t h, std::size_t c0, std::size_t B, std::size_t M) {
    return h * B * M + c0 * M;
}

}  // namespace detail

inline void causal_conv_values(const double* u, const double* k, std::size_t B, std::size_t L,
                               std::size_t H, double* y, ConvSpectra* cache) {
    const std::size_t M = next_pow2(2 * L);
    const Plan plan(M);

    if (cache) {
        cache->batch = B;
        cache->length = L;
        cache->channels = H;
        cache->padded = M;
        cache->khat_re.assign(H * M, 0.0);
        cache->khat_im.assign(H * M, 0.0);
        cache->uhat_re.assign(H * B * M, 0.0);
        cache->uhat_im.assign(H * B * M, 0.0);
    }

    // Kernel spectra, one transform per channel.
    std::vector<double> khat_re(H * M, 0.0), khat_im(H * M, 0.0);
    for (std::size_t h = 0; h < H; ++h) {
        for (std::size_t l = 0; l < L; ++l) khat_re[h * M + l] = k[h * L + l];
        plan.forward(khat_re.data() + h * M, khat_im.data() + h * M, 1);
    }
    if (cache) {
        cache->khat_re = khat_re;
        cache->khat_im = khat_im;
    }

    std::vector<double> wre(M * kConvChunk), wim(M * kConvChunk);
    for (std::size_t h = 0; h < H; ++h) {
        for (std::size_t c0 = 0; c0 < B; c0 += kConvChunk) {
            const std::size_t R = std::min(kConvChunk, B - c0);
            std::fill(wre.begin(), wre.begin() + M * R, 0.0);
            std::fill(wim.begin(), wim.begin() + M * R, 0.0);
            for (std::size_t t = 0; t < L; ++t)
                for (std::size_t r = 0; r < R; ++r)
                    wre[t * R + r] = u[((c0 + r) * L + t) * H + h];
            plan.forward(wre.data(), wim.data(), R);
            if (cache) {
                std::copy_n(wre.data(), M * R,
                            cache->uhat_re.data() + detail::chunk_offset(h, c0, B, M));
                std::copy_n(wim.data(), M * R,
                            cache->uhat_im.data() + detail::chunk_offset(h, c0, B, M));
            }
            const double* kre = khat_re.data() + h * M;
            const double* kim = khat_im.data() + h * M;
            for (std::size_t j = 0; j < M; ++j) {
                const double cr = kre[j], ci = kim[j];
                double* ur = wre.data() + j * R;
                double* ui = wim.data() + j * R;
                for (std::size_t r = 0; r < R; ++r) {
                    const double xr = ur[r], xi = ui[r];
                    ur[r] = cr * xr - ci * xi;
                    ui[r] = cr * xi + ci * xr;
                }
            }
            plan.inverse(wre.data(), wim.data(), R);
            for (std::size_t t = 0; t < L; ++t)
                for (std::size_t r = 0; r < R; ++r)
                    y[((c0 + r) * L + t) * H + h] = wre[t * R + r];
        }
    }
}

/// Accumulates grad_u[b,s,h] += sum_l k[h,l]*gy[b,s+l,h] and
/// grad_k[h,l] += sum_b sum_t u[b,t,h]*gy[b,t+l,h] from cached spectra.
inline void causal_conv_backward(const ConvSpectra& cache, const double* gy, double* grad_u,
                                 double* grad_k) {
    const std::size_t B = cache.batch, L = cache.length, H = cache.channels, M = cache.padded;
    const Plan plan(M);

    std::vector<double> wre(M * kConvChunk), wim(M * kConvChunk);
    std::vector<double> cre(M * kConvChunk), cim(M * kConvChunk);
    std::vector<double> acc_re, acc_im;
    if (grad_k) {
        acc_re.assign(M, 0.0);
        acc_im.assign(M, 0.0);
    }

    for (std::size_t h = 0; h < H; ++h) {
        if (grad_k) {
            std::fill(acc_re.begin(), acc_re.end(), 0.0);
            std::fill(acc_im.begin(), acc_im.end(), 0.0);
        }
        for (std::size_t c0 = 0; c0 < B; c0 += kConvChunk) {
            const std::size_t R = std::min(kConvChunk, B - c0);
            std::fill(wre.begin(), wre.begin() + M * R, 0.0);
            std::fill(wim.begin(), wim.begin() + M * R, 0.0);
            for (std::size_t t = 0; t < L; ++t)
                for (std::size_t r = 0; r < R; ++r)
                    wre[t * R + r] = gy[((c0 + r) * L + t) * H + h];
            plan.forward(wre.data(), wim.data(), R);  // Ghat

            if (grad_k) {
                const double* ure = cache.uhat_re.data() + detail::chunk_offset(h, c0, B, M);
                const double* uim = cache.uhat_im.data() + detail::chunk_offset(h, c0, B, M);
                for (std::size_t j = 0; j < M; ++j) {
                    const double* gr = wre.data() + j * R;
                    const double* gi = wim.data() + j * R;
                    const double* xr = ure + j * R;
                    const double* xi = uim + j * R;
                    double sr = 0.0, si = 0.0;
                    for (std::size_t r = 0; r < R; ++r) {
                        // conj(Uhat) * Ghat
                        sr += xr[r] * gr[r] + xi[r] * gi[r];
                        si += xr[r] * gi[r] - xi[r] * gr[r];
                    }
                    acc_re[j] += sr;
                    acc_im[j] += si;
                }
            }
            if (grad_u) {
                const double* kre = cache.khat_re.data() + h * M;
                const double* kim = cache.khat_im.data() + h * M;
                for (std::size_t j = 0; j < M; ++j) {
                    const double cr = kre[j], ci = -kim[j];  // conj(Khat)
                    const double* gr = wre.data() + j * R;
                    const double* gi = wim.data() + j * R;
                    double* or_ = cre.data() + j * R;
                    double* oi = cim.data() + j * R;
                    for (std::size_t r = 0; r < R; ++r) {
                        or_[r] = cr * gr[r] - ci * gi[r];
                        oi[r] = cr * gi[r] + ci * gr[r];
                    }
                }
                plan.inverse(cre.data(), cim.data(), R);
                for (std::size_t t = 0; t < L; ++t)
                    for (std::size_t r = 0; r < R; ++r)
                        grad_u[((c0 + r) * L + t) * H + h] += cre[t * R + r];
            }
        }
        if (grad_k) {
            plan.inverse(acc_re.data(), acc_im.data(), 1);
            for (std::size_t l = 0; l < L; ++l) grad_k[h * L + l] += acc_re[l];
        }
    }
}

}  // namespace hydrossm::fft

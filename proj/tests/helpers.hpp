#pragma once

// Independent reference implementations used as oracles across the test
// suite. Everything here is deliberately naive and kept apart from the
// library code paths it checks.

#include <complex>
#include <cstddef>
#include <random>
#include <vector>

namespace testutil {

inline std::mt19937_64 seeded(std::uint64_t seed) { return std::mt19937_64(seed); }

inline double urand(std::mt19937_64& eng, double lo = -1.0, double hi = 1.0) {
    return std::uniform_real_distribution<double>(lo, hi)(eng);
}

inline std::vector<double> random_vec(std::mt19937_64& eng, std::size_t n, double lo = -1.0,
                                      double hi = 1.0) {
    std::vector<double> v(n);
    for (auto& x : v) x = urand(eng, lo, hi);
    return v;
}

// Plain triple-loop matrix product.
inline std::vector<double> naive_matmul(const std::vector<double>& a, const std::vector<double>& b,
                                        std::size_t m, std::size_t k, std::size_t n) {
    std::vector<double> c(m * n, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t kk = 0; kk < k; ++kk) c[i * n + j] += a[i * k + kk] * b[kk * n + j];
    return c;
}

// O(n^2) discrete Fourier transform.
inline std::vector<std::complex<double>> naive_dft(const std::vector<std::complex<double>>& x,
                                                   bool inverse = false) {
    const std::size_t n = x.size();
    std::vector<std::complex<double>> out(n);
    const double sign = inverse ? 2.0 : -2.0;
    for (std::size_t k = 0; k < n; ++k) {
        std::complex<double> acc = 0.0;
        for (std::size_t t = 0; t < n; ++t)
            acc += x[t] * std::polar(1.0, sign * M_PI * double(k) * double(t) / double(n));
        out[k] = inverse ? acc / double(n) : acc;
    }
    return out;
}

// O(L^2) causal convolution of one kernel with one sequence.
inline std::vector<double> naive_causal_conv(const std::vector<double>& kern,
                                             const std::vector<double>& u) {
    const std::size_t L = u.size();
    std::vector<double> y(L, 0.0);
    for (std::size_t t = 0; t < L; ++t)
        for (std::size_t l = 0; l <= t; ++l) y[t] += kern[l] * u[t - l];
    return y;
}

}  // namespace testutil

#include <catch2/catch_amalgamated.hpp>

#include <complex>
#include <vector>

#include "helpers.hpp"
#include "hydrossm/fft.hpp"

using hydrossm::fft::Plan;
using hydrossm::fft::next_pow2;

TEST_CASE("next_pow2") {
    CHECK(next_pow2(1) == 1);
    CHECK(next_pow2(2) == 2);
    CHECK(next_pow2(3) == 4);
    CHECK(next_pow2(730) == 1024);
    CHECK(next_pow2(1024) == 1024);
}

TEST_CASE("batched FFT matches the naive DFT") {
    auto eng = testutil::seeded(42);
    const std::size_t n = 64, rows = 5;
    std::vector<double> re(n * rows), im(n * rows);
    std::vector<std::vector<std::complex<double>>> seqs(rows,
                                                        std::vector<std::complex<double>>(n));
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t r = 0; r < rows; ++r) {
            const double a = testutil::urand(eng), b = testutil::urand(eng);
            re[j * rows + r] = a;
            im[j * rows + r] = b;
            seqs[r][j] = {a, b};
        }
    Plan plan(n);
    plan.forward(re.data(), im.data(), rows);
    for (std::size_t r = 0; r < rows; ++r) {
        auto ref = testutil::naive_dft(seqs[r]);
        for (std::size_t j = 0; j < n; ++j) {
            CHECK(re[j * rows + r] == Catch::Approx(ref[j].real()).margin(1e-9));
            CHECK(im[j * rows + r] == Catch::Approx(ref[j].imag()).margin(1e-9));
        }
    }
    plan.inverse(re.data(), im.data(), rows);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < n; ++j) {
            CHECK(re[j * rows + r] == Catch::Approx(seqs[r][j].real()).margin(1e-11));
            CHECK(im[j * rows + r] == Catch::Approx(seqs[r][j].imag()).margin(1e-11));
        }
}

TEST_CASE("non-power-of-two plans are rejected") {
    CHECK_THROWS_AS(Plan(0), std::invalid_argument);
    CHECK_THROWS_AS(Plan(48), std::invalid_argument);
}

TEST_CASE("convolution values against the quadratic oracle at L=1") {
    // degenerate length: y = k0 * u0
    std::vector<double> u{2.0, -3.0};  // B=2, L=1, H=1
    std::vector<double> k{0.5};
    std::vector<double> y(2, 0.0);
    hydrossm::fft::causal_conv_values(u.data(), k.data(), 2, 1, 1, y.data(), nullptr);
    CHECK(y[0] == Catch::Approx(1.0).margin(1e-12));
    CHECK(y[1] == Catch::Approx(-1.5).margin(1e-12));
}

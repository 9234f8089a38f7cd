#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "hydrossm/ops.hpp"
#include "hydrossm/tape.hpp"
#include "hydrossm/tensor.hpp"

namespace hydrossm::ag {

/// Compares reverse-mode gradients of a scalar-valued program against central
/// finite differences. Returns the max over all parameter entries of
///   |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
/// The program must be re-runnable: it is evaluated once on tape and twice
/// per parameter entry off tape.
inline double finite_diff_check(const std::function<Tensor()>& program,
                                std::vector<Tensor> params, double eps) {
    if (eps <= 0.0) throw std::invalid_argument("finite_diff_check: eps must be positive");
    for (auto& p : params) p.set_requires_grad(true);

    Tape tape;
    std::vector<std::vector<double>> analytic;
    {
        TapeScope scope(tape);
        Tensor root = program();
        if (root.size() != 1)
            throw std::invalid_argument("finite_diff_check: program must be scalar-valued");
        if (!std::isfinite(root.value()))
            throw std::runtime_error("finite_diff_check: non-finite program output");
        tape.backward(root);
        for (auto& p : params) analytic.push_back(p.grad());
    }

    double worst = 0.0;
    NoGradScope no_grad;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Tensor& p = params[pi];
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double saved = p[i];
            p[i] = saved + eps;
            const double up = program().value();
            p[i] = saved - eps;
            const double down = program().value();
            p[i] = saved;
            if (!std::isfinite(up) || !std::isfinite(down))
                throw std::runtime_error("finite_diff_check: non-finite perturbed output");
            const double numeric = (up - down) / (2.0 * eps);
            const double a = analytic[pi][i];
            const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
            worst = std::max(worst, std::abs(a - numeric) / denom);
        }
    }
    return worst;
}

}  // namespace hydrossm::ag

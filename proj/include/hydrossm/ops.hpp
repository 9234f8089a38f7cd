#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "hydrossm/tape.hpp"
#include "hydrossm/tensor.hpp"

namespace hydrossm::ag::ops {

namespace detail {

inline void throw_shape(const char* op, const Shape& a, const Shape& b) {
    throw std::invalid_argument(std::string(op) + ": incompatible shapes " + shape_str(a) +
                                " and " + shape_str(b));
}

// Right-aligned suffix test: small's dims must equal big's trailing dims.
inline bool is_suffix(const Shape& small, const Shape& big) {
    if (small.size() > big.size()) return false;
    for (std::size_t i = 0; i < small.size(); ++i)
        if (small[small.size() - 1 - i] != big[big.size() - 1 - i]) return false;
    return true;
}

enum class BinPattern { Same, AScalar, BScalar, ASuffix, BSuffix };

inline BinPattern resolve_pattern(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape() == b.shape()) return BinPattern::Same;
    if (b.size() == 1) return BinPattern::BScalar;
    if (a.size() == 1) return BinPattern::AScalar;
    if (is_suffix(b.shape(), a.shape())) return BinPattern::BSuffix;
    if (is_suffix(a.shape(), b.shape())) return BinPattern::ASuffix;
    throw_shape(op, a.shape(), b.shape());
    return BinPattern::Same;  // unreachable
}

inline void record_if_tracked(Tensor& out, std::vector<Tensor> inputs,
                              std::function<void()> backward) {
    bool tracked = false;
    for (const auto& t : inputs) tracked = tracked || t.requires_grad();
    if (!tracked) return;
    out.set_requires_grad(true);
    if (Tape* tape = Tape::active())
        tape->record(out, std::move(inputs), std::move(backward));
}

// Generic elementwise binary op with limited broadcasting: equal shapes,
// scalar on either side, or one operand whose shape is a right-aligned
// suffix of the other's. grad(av, bv, g, ga, gb) accumulates local grads.
template <class Fwd, class Grad>
Tensor binary_pointwise(const char* op, const Tensor& a, const Tensor& b, Fwd fwd, Grad grad) {
    const BinPattern pat = resolve_pattern(op, a, b);
    const bool a_big = (pat == BinPattern::Same || pat == BinPattern::BScalar ||
                        pat == BinPattern::BSuffix);
    const Tensor& big = a_big ? a : b;
    const Tensor& small = a_big ? b : a;
    const std::size_t n = big.size();
    const std::size_t inner =
        (pat == BinPattern::Same) ? n : (small.size() == 1 ? 1 : small.size());

    Tensor out = Tensor::zeros(big.shape());
    {
        const double* pa = a.ptr();
        const double* pb = b.ptr();
        double* po = out.ptr();
        if (pat == BinPattern::Same) {
            for (std::size_t i = 0; i < n; ++i) po[i] = fwd(pa[i], pb[i]);
        } else if (a_big) {
            for (std::size_t i = 0; i < n; ++i) po[i] = fwd(pa[i], pb[i % inner]);
        } else {
            for (std::size_t i = 0; i < n; ++i) po[i] = fwd(pa[i % inner], pb[i]);
        }
    }

    Tensor av = a, bv = b, ov = out;
    record_if_tracked(out, {a, b}, [av, bv, ov, pat, inner, grad]() mutable {
        const std::size_t n = ov.size();
        const double* pa = av.ptr();
        const double* pb = bv.ptr();
        const double* g = ov.grad().data();
        double* ga = av.requires_grad() ? av.grad().data() : nullptr;
        double* gb = bv.requires_grad() ? bv.grad().data() : nullptr;
        double dump = 0.0;
        const bool a_big = (pat == BinPattern::Same || pat == BinPattern::BScalar ||
                            pat == BinPattern::BSuffix);
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t ia = a_big ? i : i % inner;
            const std::size_t ib = a_big ? (pat == BinPattern::Same ? i : i % inner) : i;
            grad(pa[ia], pb[ib], g[i], ga ? ga[ia] : dump, gb ? gb[ib] : dump);
        }
    });
    return out;
}

template <class Fwd, class Grad>
Tensor unary_pointwise(const Tensor& x, Fwd fwd, Grad grad) {
    Tensor out = Tensor::zeros(x.shape());
    const std::size_t n = x.size();
    const double* px = x.ptr();
    double* po = out.ptr();
    for (std::size_t i = 0; i < n; ++i) po[i] = fwd(px[i]);

    Tensor xv = x, ov = out;
    record_if_tracked(out, {x}, [xv, ov, grad]() mutable {
        const std::size_t n = ov.size();
        const double* px = xv.ptr();
        const double* py = ov.ptr();
        const double* g = ov.grad().data();
        double* gx = xv.grad().data();
        for (std::size_t i = 0; i < n; ++i) gx[i] += g[i] * grad(px[i], py[i]);
    });
    return out;
}

inline void check_finite_domain(const char* op, const Tensor& x, bool positive_only) {
    for (double v : x.data()) {
        if (positive_only && v <= 0.0)
            throw std::domain_error(std::string(op) + ": input " + std::to_string(v) +
                                    " outside domain");
    }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise arithmetic
// ---------------------------------------------------------------------------

inline Tensor add(const Tensor& a, const Tensor& b) {
    return detail::binary_pointwise(
        "add", a, b, [](double x, double y) { return x + y; },
        [](double, double, double g, double& ga, double& gb) {
            ga += g;
            gb += g;
        });
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
    return detail::binary_pointwise(
        "sub", a, b, [](double x, double y) { return x - y; },
        [](double, double, double g, double& ga, double& gb) {
            ga += g;
            gb -= g;
        });
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
    return detail::binary_pointwise(
        "mul", a, b, [](double x, double y) { return x * y; },
        [](double x, double y, double g, double& ga, double& gb) {
            ga += g * y;
            gb += g * x;
        });
}

inline Tensor div(const Tensor& a, const Tensor& b) {
    for (double v : b.data())
        if (v == 0.0) throw std::domain_error("div: division by zero");
    return detail::binary_pointwise(
        "div", a, b, [](double x, double y) { return x / y; },
        [](double x, double y, double g, double& ga, double& gb) {
            ga += g / y;
            gb -= g * x / (y * y);
        });
}

inline Tensor neg(const Tensor& x) {
    return detail::unary_pointwise(
        x, [](double v) { return -v; }, [](double, double) { return -1.0; });
}

inline Tensor mulc(const Tensor& x, double c) { return mul(x, Tensor::scalar(c)); }
inline Tensor addc(const Tensor& x, double c) { return add(x, Tensor::scalar(c)); }

// ---------------------------------------------------------------------------
// Transcendental / activation primitives
// ---------------------------------------------------------------------------

inline Tensor exp(const Tensor& x) {
    return detail::unary_pointwise(
        x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

inline Tensor log(const Tensor& x) {
    detail::check_finite_domain("log", x, /*positive_only=*/true);
    return detail::unary_pointwise(
        x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

inline Tensor sin(const Tensor& x) {
    return detail::unary_pointwise(
        x, [](double v) { return std::sin(v); }, [](double v, double) { return std::cos(v); });
}

inline Tensor cos(const Tensor& x) {
    return detail::unary_pointwise(
        x, [](double v) { return std::cos(v); }, [](double v, double) { return -std::sin(v); });
}

inline Tensor sigmoid(const Tensor& x) {
    return detail::unary_pointwise(
        x,
        [](double v) {
            return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                            : std::exp(v) / (1.0 + std::exp(v));
        },
        [](double, double y) { return y * (1.0 - y); });
}

inline Tensor tanh(const Tensor& x) {
    return detail::unary_pointwise(
        x, [](double v) { return std::tanh(v); },
        [](double, double y) { return 1.0 - y * y; });
}

/// Exact GELU, x * Phi(x), with Phi the standard normal CDF.
inline Tensor gelu(const Tensor& x) {
    constexpr double inv_sqrt2 = 0.7071067811865475244;
    constexpr double inv_sqrt2pi = 0.3989422804014326779;
    return detail::unary_pointwise(
        x,
        [](double v) { return 0.5 * v * (1.0 + std::erf(v * inv_sqrt2)); },
        [](double v, double) {
            const double cdf = 0.5 * (1.0 + std::erf(v * inv_sqrt2));
            return cdf + v * inv_sqrt2pi * std::exp(-0.5 * v * v);
        });
}

/// Elementwise x^p for a fixed real exponent. Non-integer exponents require
/// strictly positive inputs.
inline Tensor power(const Tensor& x, double p) {
    const bool integral = (p == std::floor(p));
    if (!integral) detail::check_finite_domain("power", x, /*positive_only=*/true);
    return detail::unary_pointwise(
        x, [p](double v) { return std::pow(v, p); },
        [p](double v, double) { return p == 0.0 ? 0.0 : p * std::pow(v, p - 1.0); });
}

// ---------------------------------------------------------------------------
// Contractions and reductions
// ---------------------------------------------------------------------------

/// 2-D matrix product [m,k] x [k,n] -> [m,n].
inline Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0])
        detail::throw_shape("matmul", a.shape(), b.shape());
    const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
    Tensor out = Tensor::zeros({m, n});
    {
        const double* pa = a.ptr();
        const double* pb = b.ptr();
        double* po = out.ptr();
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t kk = 0; kk < k; ++kk) {
                const double av = pa[i * k + kk];
                const double* brow = pb + kk * n;
                double* orow = po + i * n;
                for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
            }
    }
    Tensor av = a, bv = b, ov = out;
    detail::record_if_tracked(out, {a, b}, [av, bv, ov, m, k, n]() mutable {
        const double* g = ov.grad().data();
        const double* pa = av.ptr();
        const double* pb = bv.ptr();
        if (av.requires_grad()) {
            double* ga = av.grad().data();
            // dA = G * B^T
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) {
                    const double gv = g[i * n + j];
                    const double* brow = pb;  // column j walks rows of B
                    for (std::size_t kk = 0; kk < k; ++kk)
                        ga[i * k + kk] += gv * brow[kk * n + j];
                }
        }
        if (bv.requires_grad()) {
            double* gb = bv.grad().data();
            // dB = A^T * G
            for (std::size_t kk = 0; kk < k; ++kk)
                for (std::size_t i = 0; i < m; ++i) {
                    const double avv = pa[i * k + kk];
                    const double* grow = g + i * n;
                    double* brow = gb + kk * n;
                    for (std::size_t j = 0; j < n; ++j) brow[j] += avv * grow[j];
                }
        }
    });
    return out;
}

inline Tensor sum(const Tensor& x) {
    double acc = 0.0;
    for (double v : x.data()) acc += v;
    Tensor out = Tensor::scalar(acc);
    Tensor xv = x, ov = out;
    detail::record_if_tracked(out, {x}, [xv, ov]() mutable {
        const double g = ov.grad()[0];
        double* gx = xv.grad().data();
        for (std::size_t i = 0; i < xv.size(); ++i) gx[i] += g;
    });
    return out;
}

inline Tensor mean(const Tensor& x) {
    if (x.size() == 0) throw std::invalid_argument("mean: empty tensor");
    double acc = 0.0;
    for (double v : x.data()) acc += v;
    Tensor out = Tensor::scalar(acc / static_cast<double>(x.size()));
    Tensor xv = x, ov = out;
    detail::record_if_tracked(out, {x}, [xv, ov]() mutable {
        const double g = ov.grad()[0] / static_cast<double>(xv.size());
        double* gx = xv.grad().data();
        for (std::size_t i = 0; i < xv.size(); ++i) gx[i] += g;
    });
    return out;
}

// ---------------------------------------------------------------------------
// Shape primitives
// ---------------------------------------------------------------------------

inline Tensor reshape(const Tensor& x, Shape shape) {
    if (shape_numel(shape) != x.size())
        detail::throw_shape("reshape", x.shape(), shape);
    Tensor out = Tensor::from_values(std::move(shape), x.data());
    Tensor xv = x, ov = out;
    detail::record_if_tracked(out, {x}, [xv, ov]() mutable {
        const double* g = ov.grad().data();
        double* gx = xv.grad().data();
        for (std::size_t i = 0; i < xv.size(); ++i) gx[i] += g[i];
    });
    return out;
}

/// Contiguous range [begin, end) along one axis.
inline Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin, std::size_t end) {
    if (axis >= x.rank() || begin >= end || end > x.shape()[axis])
        throw std::invalid_argument("slice: invalid range [" + std::to_string(begin) + "," +
                                    std::to_string(end) + ") on axis " + std::to_string(axis) +
                                    " of " + shape_str(x.shape()));
    Shape out_shape = x.shape();
    out_shape[axis] = end - begin;
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= x.shape()[i];
    for (std::size_t i = axis + 1; i < x.rank(); ++i) inner *= x.shape()[i];
    const std::size_t len = end - begin, axis_len = x.shape()[axis];

    Tensor out = Tensor::zeros(out_shape);
    {
        const double* px = x.ptr();
        double* po = out.ptr();
        for (std::size_t o = 0; o < outer; ++o)
            std::copy_n(px + (o * axis_len + begin) * inner, len * inner,
                        po + o * len * inner);
    }
    Tensor xv = x, ov = out;
    detail::record_if_tracked(out, {x}, [xv, ov, outer, inner, axis_len, begin, len]() mutable {
        const double* g = ov.grad().data();
        double* gx = xv.grad().data();
        for (std::size_t o = 0; o < outer; ++o) {
            double* dst = gx + (o * axis_len + begin) * inner;
            const double* src = g + o * len * inner;
            for (std::size_t i = 0; i < len * inner; ++i) dst[i] += src[i];
        }
    });
    return out;
}

inline Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
    if (parts.empty()) throw std::invalid_argument("concat: no inputs");
    const Shape& ref = parts.front().shape();
    if (axis >= ref.size()) throw std::invalid_argument("concat: axis out of range");
    std::size_t total_axis = 0;
    for (const auto& t : parts) {
        if (t.rank() != ref.size()) detail::throw_shape("concat", ref, t.shape());
        for (std::size_t i = 0; i < ref.size(); ++i)
            if (i != axis && t.shape()[i] != ref[i]) detail::throw_shape("concat", ref, t.shape());
        total_axis += t.shape()[axis];
    }
    Shape out_shape = ref;
    out_shape[axis] = total_axis;
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= ref[i];
    for (std::size_t i = axis + 1; i < ref.size(); ++i) inner *= ref[i];

    Tensor out = Tensor::zeros(out_shape);
    std::vector<std::size_t> offsets;
    {
        double* po = out.ptr();
        std::size_t off = 0;
        for (const auto& t : parts) {
            offsets.push_back(off);
            const std::size_t len = t.shape()[axis];
            const double* pt = t.ptr();
            for (std::size_t o = 0; o < outer; ++o)
                std::copy_n(pt + o * len * inner, len * inner,
                            po + (o * total_axis + off) * inner);
            off += len;
        }
    }
    std::vector<Tensor> ins = parts;
    Tensor ov = out;
    detail::record_if_tracked(out, parts, [ins, ov, offsets, outer, inner, total_axis]() mutable {
        const double* g = ov.grad().data();
        for (std::size_t p = 0; p < ins.size(); ++p) {
            if (!ins[p].requires_grad()) continue;
            double* gx = ins[p].grad().data();
            const std::size_t len = ins[p].size() / (outer * inner);
            for (std::size_t o = 0; o < outer; ++o) {
                const double* src = g + (o * total_axis + offsets[p]) * inner;
                double* dst = gx + o * len * inner;
                for (std::size_t i = 0; i < len * inner; ++i) dst[i] += src[i];
            }
        }
    });
    return out;
}

/// Materializing broadcast. Right-aligned: each input dim must equal the
/// target dim or be 1; missing leading dims are treated as 1.
inline Tensor broadcast_to(const Tensor& x, Shape target) {
    const Shape& xs = x.shape();
    if (xs.size() > target.size()) detail::throw_shape("broadcast", xs, target);
    const std::size_t lead = target.size() - xs.size();
    for (std::size_t i = 0; i < xs.size(); ++i)
        if (xs[i] != target[lead + i] && xs[i] != 1)
            detail::throw_shape("broadcast", xs, target);

    // Strides into x for every target axis; broadcast axes get stride 0.
    std::vector<std::size_t> xstride(target.size(), 0);
    {
        std::size_t s = 1;
        for (std::size_t i = xs.size(); i-- > 0;) {
            xstride[lead + i] = (xs[i] == 1) ? 0 : s;
            s *= xs[i];
        }
    }
    Tensor out = Tensor::zeros(target);
    const std::size_t n = out.size();
    {
        const double* px = x.ptr();
        double* po = out.ptr();
        std::vector<std::size_t> coord(target.size(), 0);
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t xi = 0;
            for (std::size_t d = 0; d < target.size(); ++d) xi += coord[d] * xstride[d];
            po[i] = px[xi];
            for (std::size_t d = target.size(); d-- > 0;) {
                if (++coord[d] < target[d]) break;
                coord[d] = 0;
            }
        }
    }
    Tensor xv = x, ov = out;
    detail::record_if_tracked(out, {x}, [xv, ov, xstride]() mutable {
        const Shape& ts = ov.shape();
        const double* g = ov.grad().data();
        double* gx = xv.grad().data();
        std::vector<std::size_t> coord(ts.size(), 0);
        for (std::size_t i = 0; i < ov.size(); ++i) {
            std::size_t xi = 0;
            for (std::size_t d = 0; d < ts.size(); ++d) xi += coord[d] * xstride[d];
            gx[xi] += g[i];
            for (std::size_t d = ts.size(); d-- > 0;) {
                if (++coord[d] < ts[d]) break;
                coord[d] = 0;
            }
        }
    });
    return out;
}

// ---------------------------------------------------------------------------
// Primitive dispatcher
// ---------------------------------------------------------------------------

enum class OpKind {
    Add, Sub, Mul, Div, Matmul, Exp, Log, Neg, Sigmoid, Tanh, Gelu,
    Sum, Mean, Slice, Concat, Broadcast, Power,
};

/// Uniform entry point over the primitive catalog. Parameter-carrying kinds
/// encode their parameters as trailing scalar tensors:
///   Power:     {x, exponent}
///   Slice:     {x, axis, begin, end}
///   Broadcast: {x, d0, d1, ...}   (target shape)
///   Concat:    {t0, t1, ..., axis}
inline Tensor apply_primitive(OpKind kind, const std::vector<Tensor>& inputs) {
    auto need = [&](std::size_t n) {
        if (inputs.size() != n)
            throw std::invalid_argument("apply_primitive: expected " + std::to_string(n) +
                                        " inputs, got " + std::to_string(inputs.size()));
    };
    switch (kind) {
        case OpKind::Add: need(2); return add(inputs[0], inputs[1]);
        case OpKind::Sub: need(2); return sub(inputs[0], inputs[1]);
        case OpKind::Mul: need(2); return mul(inputs[0], inputs[1]);
        case OpKind::Div: need(2); return div(inputs[0], inputs[1]);
        case OpKind::Matmul: need(2); return matmul(inputs[0], inputs[1]);
        case OpKind::Exp: need(1); return exp(inputs[0]);
        case OpKind::Log: need(1); return log(inputs[0]);
        case OpKind::Neg: need(1); return neg(inputs[0]);
        case OpKind::Sigmoid: need(1); return sigmoid(inputs[0]);
        case OpKind::Tanh: need(1); return tanh(inputs[0]);
        case OpKind::Gelu: need(1); return gelu(inputs[0]);
        case OpKind::Sum: need(1); return sum(inputs[0]);
        case OpKind::Mean: need(1); return mean(inputs[0]);
        case OpKind::Power: need(2); return power(inputs[0], inputs[1].value());
        case OpKind::Slice:
            need(4);
            return slice(inputs[0], static_cast<std::size_t>(inputs[1].value()),
                         static_cast<std::size_t>(inputs[2].value()),
                         static_cast<std::size_t>(inputs[3].value()));
        case OpKind::Broadcast: {
            if (inputs.size() < 2)
                throw std::invalid_argument("apply_primitive: Broadcast needs target dims");
            Shape target;
            for (std::size_t i = 1; i < inputs.size(); ++i)
                target.push_back(static_cast<std::size_t>(inputs[i].value()));
            return broadcast_to(inputs[0], std::move(target));
        }
        case OpKind::Concat: {
            if (inputs.size() < 2)
                throw std::invalid_argument("apply_primitive: Concat needs inputs and axis");
            std::vector<Tensor> parts(inputs.begin(), inputs.end() - 1);
            return concat(parts, static_cast<std::size_t>(inputs.back().value()));
        }
    }
    throw std::invalid_argument("apply_primitive: unknown op kind");
}

}  // namespace hydrossm::ag::ops

#pragma once

#include <cstddef>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace hydrossm::ag {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& s) {
    return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>{});
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << ']';
    return os.str();
}

/// Dense real tensor in row-major order with an optional gradient slot.
/// Copies are shallow (shared storage); the tape relies on this identity.
class Tensor {
    struct Impl {
        Shape shape;
        std::vector<double> data;
        std::vector<double> grad;  // empty until first accumulation
        bool requires_grad = false;
    };
    std::shared_ptr<Impl> impl_;

    explicit Tensor(std::shared_ptr<Impl> impl) : impl_(std::move(impl)) {}

public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false) {
        auto impl = std::make_shared<Impl>();
        impl->data.assign(shape_numel(shape), 0.0);
        impl->shape = std::move(shape);
        impl->requires_grad = requires_grad;
        return Tensor(std::move(impl));
    }

    static Tensor full(Shape shape, double value, bool requires_grad = false) {
        Tensor t = zeros(std::move(shape), requires_grad);
        std::fill(t.data().begin(), t.data().end(), value);
        return t;
    }

    static Tensor from_values(Shape shape, std::vector<double> values,
                              bool requires_grad = false) {
        if (values.size() != shape_numel(shape))
            throw std::invalid_argument("Tensor: " + std::to_string(values.size()) +
                                        " values do not fill shape " + shape_str(shape));
        auto impl = std::make_shared<Impl>();
        impl->shape = std::move(shape);
        impl->data = std::move(values);
        impl->requires_grad = requires_grad;
        return Tensor(std::move(impl));
    }

    static Tensor scalar(double value, bool requires_grad = false) {
        return from_values({1}, {value}, requires_grad);
    }

    bool defined() const { return impl_ != nullptr; }
    const Shape& shape() const { return impl_->shape; }
    std::size_t size() const { return impl_->data.size(); }
    std::size_t rank() const { return impl_->shape.size(); }

    std::vector<double>& data() { return impl_->data; }
    const std::vector<double>& data() const { return impl_->data; }
    double* ptr() { return impl_->data.data(); }
    const double* ptr() const { return impl_->data.data(); }

    double operator[](std::size_t i) const { return impl_->data[i]; }
    double& operator[](std::size_t i) { return impl_->data[i]; }

    /// Value of a one-element tensor.
    double value() const {
        if (size() != 1)
            throw std::invalid_argument("Tensor::value: tensor has " +
                                        std::to_string(size()) + " elements, expected 1");
        return impl_->data[0];
    }

    bool requires_grad() const { return impl_->requires_grad; }
    void set_requires_grad(bool flag) { impl_->requires_grad = flag; }

    bool has_grad() const { return !impl_->grad.empty(); }

    /// Gradient storage, allocated to zeros on first access.
    std::vector<double>& grad() {
        if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), 0.0);
        return impl_->grad;
    }
    const std::vector<double>& grad() const {
        return const_cast<Tensor*>(this)->grad();
    }

    void zero_grad() {
        if (!impl_->grad.empty()) std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
    }

    /// Deep copy; the clone shares nothing with the original.
    Tensor clone() const {
        Tensor t = from_values(shape(), data(), requires_grad());
        return t;
    }

    bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

    const void* id() const { return impl_.get(); }
};

}  // namespace hydrossm::ag

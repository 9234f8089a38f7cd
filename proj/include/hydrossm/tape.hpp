#pragma once

#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "hydrossm/tensor.hpp"

namespace hydrossm::ag {

/// Define-by-run record of primitive applications. Nodes are appended in
/// execution order, which is a topological order of the dataflow graph, so
/// replaying local-gradient rules back-to-front yields chain-rule gradients.
///
/// A tape and its tensors are confined to one worker; each worker activates
/// its own tape via TapeScope.
class Tape {
public:
    struct Node {
        Tensor output;
        std::vector<Tensor> inputs;
        std::function<void()> backward;
    };

    void record(Tensor output, std::vector<Tensor> inputs, std::function<void()> backward) {
        nodes_.push_back({std::move(output), std::move(inputs), std::move(backward)});
    }

    std::size_t size() const { return nodes_.size(); }
    bool empty() const { return nodes_.empty(); }
    void clear() { nodes_.clear(); }

    /// Reverse-mode sweep from a scalar root. Gradients of every tensor
    /// touched by the tape are reset first, then accumulated additively.
    void backward(Tensor& root) {
        if (root.size() != 1)
            throw std::invalid_argument("backward: root must be scalar, got shape " +
                                        shape_str(root.shape()));
        bool connected = false;
        for (auto& node : nodes_) {
            node.output.zero_grad();
            for (auto& in : node.inputs) in.zero_grad();
            if (node.output.same_storage(root)) connected = true;
        }
        if (!connected)
            throw std::invalid_argument("backward: root tensor is not on the tape");
        root.grad()[0] = 1.0;
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it)
            if (it->backward) it->backward();
    }

    static Tape* active() { return active_tape(); }

private:
    friend class TapeScope;
    friend class NoGradScope;

    static Tape*& active_tape() {
        thread_local Tape* tape = nullptr;
        return tape;
    }

    std::vector<Node> nodes_;
};

/// Activates a tape for the current thread for the scope's lifetime.
class TapeScope {
    Tape* previous_;

public:
    explicit TapeScope(Tape& tape) : previous_(Tape::active_tape()) {
        Tape::active_tape() = &tape;
    }
    ~TapeScope() { Tape::active_tape() = previous_; }
    TapeScope(const TapeScope&) = delete;
    TapeScope& operator=(const TapeScope&) = delete;
};

/// Suspends recording; forwards run value-only inside this scope.
class NoGradScope {
    Tape* previous_;

public:
    NoGradScope() : previous_(Tape::active_tape()) { Tape::active_tape() = nullptr; }
    ~NoGradScope() { Tape::active_tape() = previous_; }
    NoGradScope(const NoGradScope&) = delete;
    NoGradScope& operator=(const NoGradScope&) = delete;
};

}  // namespace hydrossm::ag

/**
 * Dense row-major float64 tensors with tape-based reverse-mode autodiff.
 *
 * A Tensor is a shared handle: copies alias the same storage, which is how
 * model parameters are shared between forward passes and the optimizer.
 *
 * Recording happens only while a Tape is active on the calling thread
 * (see TapeScope) and at least one operand requires grad. Without an active
 * tape every op is a plain evaluation, which makes inference thread-safe.
 */
#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace geopro::ad {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

struct TensorImpl {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;  // empty until first written
    bool requires_grad = false;
};

class Tensor {
public:
    Tensor();  // scalar zero
    Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);
    static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows,
                         bool requires_grad = false);
    static Tensor vector(std::initializer_list<double> values, bool requires_grad = false);

    const Shape& shape() const { return impl_->shape; }
    std::size_t rank() const { return impl_->shape.size(); }
    std::size_t dim(std::size_t axis) const;
    std::size_t numel() const { return impl_->data.size(); }

    std::span<const double> data() const { return impl_->data; }
    std::span<double> mutable_data() { return impl_->data; }
    double item() const;
    double operator[](std::size_t flat) const { return impl_->data[flat]; }
    double at(std::size_t row, std::size_t col) const;

    bool requires_grad() const { return impl_->requires_grad; }
    Tensor& set_requires_grad(bool flag);

    bool has_grad() const { return !impl_->grad.empty(); }
    std::span<const double> grad() const { return impl_->grad; }
    std::span<double> mutable_grad() { return impl_->grad; }
    /// Allocates (or resets) the gradient buffer to zeros.
    void zero_grad();
    void clear_grad() { impl_->grad.clear(); }

    /// Value copy that shares nothing with this tensor and records nothing.
    Tensor detach() const;

    bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }
    const std::shared_ptr<TensorImpl>& impl() const { return impl_; }

private:
    explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}
    std::shared_ptr<TensorImpl> impl_;

    friend Tensor make_result(Shape shape, std::vector<double> data);
};

/// Wraps freshly computed values as an op result (no grad, not recorded).
Tensor make_result(Shape shape, std::vector<double> data);

/// Ordered record of differentiable operations for one forward pass.
class Tape {
public:
    using BackwardFn = std::function<void()>;

    struct Node {
        std::vector<std::shared_ptr<TensorImpl>> inputs;
        std::shared_ptr<TensorImpl> output;
        BackwardFn backward;
        const char* op = "";
    };

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    void record(Node node);
    std::size_t size() const { return nodes_.size(); }
    bool spent() const { return spent_; }
    const std::vector<Node>& nodes() const { return nodes_; }

    /// Populates grads of every requires-grad tensor on the tape.
    /// Leaf grads accumulate; call zero_grad on parameters between steps.
    void backward(const Tensor& loss);

private:
    std::vector<Node> nodes_;
    bool spent_ = false;
};

/// Activates a tape on the current thread for its lifetime.
class TapeScope {
public:
    explicit TapeScope(Tape& tape);
    ~TapeScope();
    TapeScope(const TapeScope&) = delete;
    TapeScope& operator=(const TapeScope&) = delete;

private:
    Tape* previous_;
};

/// Suspends recording on the current thread.
class NoGradScope {
public:
    NoGradScope();
    ~NoGradScope();
    NoGradScope(const NoGradScope&) = delete;
    NoGradScope& operator=(const NoGradScope&) = delete;

private:
    Tape* previous_;
};

Tape* active_tape();

/// Backward through the tape active on this thread.
void backward(const Tensor& loss);

/// Non-finite op outputs raise NumericError when checked mode is on (default).
void set_checked_mode(bool enabled);
bool checked_mode();

}  // namespace geopro::ad

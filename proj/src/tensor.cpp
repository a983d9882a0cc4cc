#include "geopro/tensor.hpp"

#include <atomic>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "geopro/errors.hpp"

namespace geopro::ad {

namespace {

thread_local Tape* g_active_tape = nullptr;
std::atomic<bool> g_checked{true};

}  // namespace

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

Tensor::Tensor() : impl_(std::make_shared<TensorImpl>()) {
    impl_->data.assign(1, 0.0);
}

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad)
    : impl_(std::make_shared<TensorImpl>()) {
    if (shape_numel(shape) != data.size()) {
        throw DimensionError("tensor shape " + shape_str(shape) + " does not match " +
                             std::to_string(data.size()) + " values");
    }
    impl_->shape = std::move(shape);
    impl_->data = std::move(data);
    impl_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    std::vector<double> data(shape_numel(shape), value);
    return Tensor(std::move(shape), std::move(data), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return Tensor({}, {value}, requires_grad);
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows,
                      bool requires_grad) {
    std::vector<double> data;
    std::size_t cols = rows.size() ? rows.begin()->size() : 0;
    for (const auto& r : rows) {
        if (r.size() != cols) throw DimensionError("ragged matrix literal");
        data.insert(data.end(), r.begin(), r.end());
    }
    return Tensor({rows.size(), cols}, std::move(data), requires_grad);
}

Tensor Tensor::vector(std::initializer_list<double> values, bool requires_grad) {
    return Tensor({values.size()}, std::vector<double>(values), requires_grad);
}

std::size_t Tensor::dim(std::size_t axis) const {
    if (axis >= rank()) {
        throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " +
                             shape_str(shape()));
    }
    return impl_->shape[axis];
}

double Tensor::item() const {
    if (numel() != 1) {
        throw ContractError("item() on tensor of shape " + shape_str(shape()));
    }
    return impl_->data[0];
}

double Tensor::at(std::size_t row, std::size_t col) const {
    if (rank() != 2) throw DimensionError("at(row, col) on shape " + shape_str(shape()));
    return impl_->data[row * impl_->shape[1] + col];
}

Tensor& Tensor::set_requires_grad(bool flag) {
    impl_->requires_grad = flag;
    return *this;
}

void Tensor::zero_grad() { impl_->grad.assign(impl_->data.size(), 0.0); }

Tensor Tensor::detach() const { return Tensor(impl_->shape, impl_->data, false); }

Tensor make_result(Shape shape, std::vector<double> data) {
    auto impl = std::make_shared<TensorImpl>();
    impl->shape = std::move(shape);
    impl->data = std::move(data);
    return Tensor(std::move(impl));
}

void Tape::record(Node node) {
    if (spent_) throw StateError("recording onto a tape that has already run backward");
    nodes_.push_back(std::move(node));
}

void Tape::backward(const Tensor& loss) {
    if (spent_) throw StateError("backward called twice on the same tape");
    if (loss.numel() != 1) {
        throw ContractError("backward requires a scalar loss, got shape " +
                            shape_str(loss.shape()));
    }
    if (nodes_.empty()) throw ContractError("backward on an empty tape");

    const auto& root = loss.impl();
    bool found = false;
    for (const auto& n : nodes_) {
        if (n.output == root) {
            found = true;
            break;
        }
    }
    if (!found) throw ContractError("loss was not produced on this tape");

    root->grad.assign(1, 1.0);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        if (it->output->grad.empty()) continue;  // unreachable from loss
        it->backward();
    }

    // Requires-grad operands that the loss never reached get an explicit zero grad.
    std::unordered_set<const TensorImpl*> seen;
    for (const auto& n : nodes_) {
        for (const auto& in : n.inputs) {
            if (in->requires_grad && in->grad.empty() && seen.insert(in.get()).second) {
                in->grad.assign(in->data.size(), 0.0);
            }
        }
    }
    spent_ = true;
}

TapeScope::TapeScope(Tape& tape) : previous_(g_active_tape) { g_active_tape = &tape; }
TapeScope::~TapeScope() { g_active_tape = previous_; }

NoGradScope::NoGradScope() : previous_(g_active_tape) { g_active_tape = nullptr; }
NoGradScope::~NoGradScope() { g_active_tape = previous_; }

Tape* active_tape() { return g_active_tape; }

void backward(const Tensor& loss) {
    Tape* tape = active_tape();
    if (!tape) throw StateError("backward without an active tape");
    tape->backward(loss);
}

void set_checked_mode(bool enabled) { g_checked.store(enabled); }
bool checked_mode() { return g_checked.load(); }

}  // namespace geopro::ad

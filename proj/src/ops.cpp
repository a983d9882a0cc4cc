#include "geopro/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "geopro/errors.hpp"

namespace geopro::ad {

namespace {

using ImplPtr = std::shared_ptr<TensorImpl>;

std::vector<double>& grad_of(const ImplPtr& t) {
    if (t->grad.empty()) t->grad.assign(t->data.size(), 0.0);
    return t->grad;
}

void check_finite(const char* op, const std::vector<double>& data) {
    if (!checked_mode()) return;
    for (double v : data) {
        if (!std::isfinite(v)) {
            throw NumericError(std::string("non-finite value produced by ") + op);
        }
    }
}

/// Wraps computed values as the op output and records the node when needed.
/// `fn` receives the output (values and grad) and accumulates into operand grads.
template <class Fn>
Tensor emit(const char* op, Shape shape, std::vector<double> data,
            const std::vector<const Tensor*>& inputs, Fn fn) {
    check_finite(op, data);
    Tensor out = make_result(std::move(shape), std::move(data));
    Tape* tape = active_tape();
    if (!tape) return out;
    bool any = std::any_of(inputs.begin(), inputs.end(),
                           [](const Tensor* t) { return t->requires_grad(); });
    if (!any) return out;
    out.set_requires_grad(true);
    Tape::Node node;
    node.op = op;
    for (const Tensor* t : inputs) node.inputs.push_back(t->impl());
    node.output = out.impl();
    TensorImpl* o = out.impl().get();
    node.backward = [o, fn = std::move(fn)]() { fn(*o); };
    tape->record(std::move(node));
    return out;
}

// Index maps for size-1 broadcasting between equal-rank operands.
struct Broadcast {
    Shape shape;
    bool same = false;
    bool a_scalar = false;
    bool b_scalar = false;
    std::vector<std::size_t> ia, ib;

    std::size_t a(std::size_t k) const { return same ? k : a_scalar ? 0 : b_scalar ? k : ia[k]; }
    std::size_t b(std::size_t k) const { return same ? k : b_scalar ? 0 : a_scalar ? k : ib[k]; }
};

Broadcast plan_broadcast(const char* op, const Tensor& x, const Tensor& y) {
    Broadcast p;
    if (x.shape() == y.shape()) {
        p.same = true;
        p.shape = x.shape();
        return p;
    }
    if (y.numel() == 1) {
        p.b_scalar = true;
        p.shape = x.shape();
        return p;
    }
    if (x.numel() == 1) {
        p.a_scalar = true;
        p.shape = y.shape();
        return p;
    }
    auto fail = [&]() {
        throw DimensionError(std::string(op) + ": incompatible shapes " + shape_str(x.shape()) +
                             " and " + shape_str(y.shape()));
    };
    if (x.rank() != y.rank()) fail();
    const std::size_t r = x.rank();
    p.shape.resize(r);
    for (std::size_t d = 0; d < r; ++d) {
        std::size_t u = x.shape()[d], v = y.shape()[d];
        if (u != v && u != 1 && v != 1) fail();
        p.shape[d] = u == 1 ? v : u;
    }
    std::vector<std::size_t> sa(r), sb(r);
    std::size_t stride_a = 1, stride_b = 1;
    for (std::size_t d = r; d-- > 0;) {
        sa[d] = x.shape()[d] == 1 ? 0 : stride_a;
        sb[d] = y.shape()[d] == 1 ? 0 : stride_b;
        stride_a *= x.shape()[d];
        stride_b *= y.shape()[d];
    }
    const std::size_t n = shape_numel(p.shape);
    p.ia.resize(n);
    p.ib.resize(n);
    std::vector<std::size_t> idx(r, 0);
    std::size_t oa = 0, ob = 0;
    for (std::size_t k = 0; k < n; ++k) {
        p.ia[k] = oa;
        p.ib[k] = ob;
        for (std::size_t d = r; d-- > 0;) {
            ++idx[d];
            oa += sa[d];
            ob += sb[d];
            if (idx[d] < p.shape[d]) break;
            oa -= sa[d] * idx[d];
            ob -= sb[d] * idx[d];
            idx[d] = 0;
        }
    }
    return p;
}

/// Elementwise binary op. `f` gives the value, `dfa`/`dfb` the partials.
template <class F, class DA, class DB>
Tensor binary(const char* op, const Tensor& a, const Tensor& b, F f, DA dfa, DB dfb) {
    auto plan = std::make_shared<Broadcast>(plan_broadcast(op, a, b));
    const std::size_t n = shape_numel(plan->shape);
    std::vector<double> out(n);
    auto ad = a.data();
    auto bd = b.data();
    for (std::size_t k = 0; k < n; ++k) out[k] = f(ad[plan->a(k)], bd[plan->b(k)]);
    ImplPtr ai = a.impl(), bi = b.impl();
    return emit(op, plan->shape, std::move(out), {&a, &b},
                [ai, bi, plan, dfa, dfb, n](const TensorImpl& out) {
                    const auto& g = out.grad;
                    const auto& x = ai->data;
                    const auto& y = bi->data;
                    if (ai->requires_grad) {
                        auto& ga = grad_of(ai);
                        for (std::size_t k = 0; k < n; ++k) {
                            std::size_t i = plan->a(k), j = plan->b(k);
                            ga[i] += g[k] * dfa(x[i], y[j]);
                        }
                    }
                    if (bi->requires_grad) {
                        auto& gb = grad_of(bi);
                        for (std::size_t k = 0; k < n; ++k) {
                            std::size_t i = plan->a(k), j = plan->b(k);
                            gb[j] += g[k] * dfb(x[i], y[j]);
                        }
                    }
                });
}

/// Elementwise unary op; `df(x, y)` is the derivative given input and output.
template <class F, class DF>
Tensor unary(const char* op, const Tensor& a, F f, DF df) {
    std::vector<double> out(a.numel());
    auto ad = a.data();
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = f(ad[k]);
    ImplPtr ai = a.impl();
    return emit(op, a.shape(), std::move(out), {&a}, [ai, df](const TensorImpl& o) {
        auto& ga = grad_of(ai);
        for (std::size_t k = 0; k < ga.size(); ++k)
            ga[k] += o.grad[k] * df(ai->data[k], o.data[k]);
    });
}

struct AxisSplit {
    std::size_t outer = 1, len = 1, inner = 1;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis) {
    AxisSplit s;
    for (std::size_t d = 0; d < axis; ++d) s.outer *= shape[d];
    s.len = shape[axis];
    for (std::size_t d = axis + 1; d < shape.size(); ++d) s.inner *= shape[d];
    return s;
}

void require_rank_at_least(const char* op, const Tensor& a, std::size_t r) {
    if (a.rank() < r) {
        throw DimensionError(std::string(op) + ": shape " + shape_str(a.shape()) +
                             " needs rank >= " + std::to_string(r));
    }
}

double sigmoid_value(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
        throw DimensionError("matmul: incompatible shapes " + shape_str(a.shape()) + " and " +
                             shape_str(b.shape()));
    }
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    std::vector<double> out(m * n, 0.0);
    auto x = a.data();
    auto y = b.data();
    for (std::size_t i = 0; i < m; ++i) {
        double* row = out.data() + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double s = x[i * k + p];
            const double* brow = y.data() + p * n;
            for (std::size_t j = 0; j < n; ++j) row[j] += s * brow[j];
        }
    }
    ImplPtr ai = a.impl(), bi = b.impl();
    return emit("matmul", {m, n}, std::move(out), {&a, &b},
                [ai, bi, m, k, n](const TensorImpl& out) {
                    const auto& g = out.grad;
                    if (ai->requires_grad) {
                        auto& ga = grad_of(ai);
                        const auto& y = bi->data;
                        for (std::size_t i = 0; i < m; ++i)
                            for (std::size_t p = 0; p < k; ++p) {
                                double acc = 0.0;
                                for (std::size_t j = 0; j < n; ++j)
                                    acc += g[i * n + j] * y[p * n + j];
                                ga[i * k + p] += acc;
                            }
                    }
                    if (bi->requires_grad) {
                        auto& gb = grad_of(bi);
                        const auto& x = ai->data;
                        for (std::size_t i = 0; i < m; ++i)
                            for (std::size_t p = 0; p < k; ++p) {
                                const double s = x[i * k + p];
                                for (std::size_t j = 0; j < n; ++j)
                                    gb[p * n + j] += s * g[i * n + j];
                            }
                    }
                });
}

Tensor transpose(const Tensor& a) {
    if (a.rank() != 2) throw DimensionError("transpose: shape " + shape_str(a.shape()));
    const std::size_t r = a.dim(0), c = a.dim(1);
    std::vector<double> out(r * c);
    auto x = a.data();
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out[j * r + i] = x[i * c + j];
    ImplPtr ai = a.impl();
    return emit("transpose", {c, r}, std::move(out), {&a},
                [ai, r, c](const TensorImpl& out) {
                    const auto& g = out.grad;
                    auto& ga = grad_of(ai);
                    for (std::size_t i = 0; i < r; ++i)
                        for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += g[j * r + i];
                });
}

Tensor reshape(const Tensor& a, Shape shape) {
    if (shape_numel(shape) != a.numel()) {
        throw DimensionError("reshape: cannot view " + shape_str(a.shape()) + " as " +
                             shape_str(shape));
    }
    std::vector<double> out(a.data().begin(), a.data().end());
    ImplPtr ai = a.impl();
    return emit("reshape", std::move(shape), std::move(out), {&a},
                [ai](const TensorImpl& out) {
                    const auto& g = out.grad;
                    auto& ga = grad_of(ai);
                    for (std::size_t k = 0; k < ga.size(); ++k) ga[k] += g[k];
                });
}

Tensor add(const Tensor& a, const Tensor& b) {
    return binary(
        "add", a, b, [](double x, double y) { return x + y; },
        [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return binary(
        "sub", a, b, [](double x, double y) { return x - y; },
        [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return binary(
        "mul", a, b, [](double x, double y) { return x * y; },
        [](double, double y) { return y; }, [](double x, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
    return binary(
        "div", a, b, [](double x, double y) { return x / y; },
        [](double, double y) { return 1.0 / y; },
        [](double x, double y) { return -x / (y * y); });
}

Tensor add_scalar(const Tensor& a, double c) {
    return unary(
        "add_scalar", a, [c](double x) { return x + c; }, [](double, double) { return 1.0; });
}

Tensor mul_scalar(const Tensor& a, double c) {
    return unary(
        "mul_scalar", a, [c](double x) { return x * c; }, [c](double, double) { return c; });
}

Tensor sum(const Tensor& a) {
    double acc = 0.0;
    for (double v : a.data()) acc += v;
    ImplPtr ai = a.impl();
    return emit("sum", {}, {acc}, {&a}, [ai](const TensorImpl& out) {
                    const auto& g = out.grad;
        auto& ga = grad_of(ai);
        for (auto& v : ga) v += g[0];
    });
}

Tensor sum(const Tensor& a, std::size_t axis, bool keepdim) {
    require_rank_at_least("sum", a, axis + 1);
    const AxisSplit s = split_axis(a.shape(), axis);
    Shape shape = a.shape();
    if (keepdim) {
        shape[axis] = 1;
    } else {
        shape.erase(shape.begin() + static_cast<std::ptrdiff_t>(axis));
    }
    std::vector<double> out(s.outer * s.inner, 0.0);
    auto x = a.data();
    for (std::size_t o = 0; o < s.outer; ++o)
        for (std::size_t l = 0; l < s.len; ++l)
            for (std::size_t i = 0; i < s.inner; ++i)
                out[o * s.inner + i] += x[(o * s.len + l) * s.inner + i];
    ImplPtr ai = a.impl();
    return emit("sum_axis", std::move(shape), std::move(out), {&a},
                [ai, s](const TensorImpl& out) {
                    const auto& g = out.grad;
                    auto& ga = grad_of(ai);
                    for (std::size_t o = 0; o < s.outer; ++o)
                        for (std::size_t l = 0; l < s.len; ++l)
                            for (std::size_t i = 0; i < s.inner; ++i)
                                ga[(o * s.len + l) * s.inner + i] += g[o * s.inner + i];
                });
}

Tensor mean(const Tensor& a) {
    if (a.numel() == 0) throw ContractError("mean of an empty tensor");
    return mul_scalar(sum(a), 1.0 / static_cast<double>(a.numel()));
}

Tensor mean(const Tensor& a, std::size_t axis, bool keepdim) {
    const std::size_t len = a.dim(axis);
    if (len == 0) throw ContractError("mean over an empty axis");
    return mul_scalar(sum(a, axis, keepdim), 1.0 / static_cast<double>(len));
}

Tensor concat(std::span<const Tensor> parts, std::size_t axis) {
    if (parts.empty()) throw ContractError("concat of zero tensors");
    const Tensor& first = parts.front();
    require_rank_at_least("concat", first, axis + 1);
    Shape shape = first.shape();
    shape[axis] = 0;
    for (const auto& p : parts) {
        bool ok = p.rank() == first.rank();
        for (std::size_t d = 0; ok && d < p.rank(); ++d) {
            if (d != axis && p.shape()[d] != first.shape()[d]) ok = false;
        }
        if (!ok) {
            throw DimensionError("concat: incompatible shapes " + shape_str(first.shape()) +
                                 " and " + shape_str(p.shape()));
        }
        shape[axis] += p.shape()[axis];
    }
    const AxisSplit out_split = split_axis(shape, axis);
    std::vector<double> out(shape_numel(shape));
    std::vector<std::size_t> offsets;
    std::size_t offset = 0;
    for (const auto& p : parts) {
        offsets.push_back(offset);
        const AxisSplit s = split_axis(p.shape(), axis);
        auto x = p.data();
        for (std::size_t o = 0; o < s.outer; ++o)
            for (std::size_t l = 0; l < s.len; ++l)
                std::copy_n(x.data() + (o * s.len + l) * s.inner, s.inner,
                            out.data() + (o * out_split.len + offset + l) * s.inner);
        offset += s.len;
    }

    std::vector<const Tensor*> inputs;
    std::vector<ImplPtr> impls;
    for (const auto& p : parts) {
        inputs.push_back(&p);
        impls.push_back(p.impl());
    }
    return emit("concat", shape, std::move(out), inputs,
                [impls, offsets, axis, out_split](const TensorImpl& o) {
                    const auto& g = o.grad;
                    for (std::size_t pi = 0; pi < impls.size(); ++pi) {
                        const auto& p = impls[pi];
                        if (!p->requires_grad) continue;
                        auto& gp = grad_of(p);
                        const AxisSplit s = split_axis(p->shape, axis);
                        for (std::size_t q = 0; q < s.outer; ++q)
                            for (std::size_t l = 0; l < s.len; ++l)
                                for (std::size_t i = 0; i < s.inner; ++i)
                                    gp[(q * s.len + l) * s.inner + i] +=
                                        g[(q * out_split.len + offsets[pi] + l) * s.inner + i];
                    }
                });
}

Tensor concat(std::initializer_list<Tensor> parts, std::size_t axis) {
    return concat(std::span<const Tensor>(parts.begin(), parts.size()), axis);
}

Tensor gather_rows(const Tensor& a, std::span<const std::size_t> indices) {
    require_rank_at_least("gather_rows", a, 1);
    const std::size_t rows = a.dim(0);
    const std::size_t row_size =
        a.rank() == 1 ? 1 : shape_numel(Shape(a.shape().begin() + 1, a.shape().end()));
    Shape shape = a.shape();
    shape[0] = indices.size();
    std::vector<double> out(indices.size() * row_size);
    auto x = a.data();
    for (std::size_t r = 0; r < indices.size(); ++r) {
        if (indices[r] >= rows) {
            throw ContractError("gather_rows: index " + std::to_string(indices[r]) +
                                " out of range for " + std::to_string(rows) + " rows");
        }
        std::copy_n(x.data() + indices[r] * row_size, row_size, out.data() + r * row_size);
    }
    ImplPtr ai = a.impl();
    std::vector<std::size_t> idx(indices.begin(), indices.end());
    return emit("gather_rows", std::move(shape), std::move(out), {&a},
                [ai, idx = std::move(idx), row_size](const TensorImpl& out) {
                    const auto& g = out.grad;
                    auto& ga = grad_of(ai);
                    for (std::size_t r = 0; r < idx.size(); ++r)
                        for (std::size_t c = 0; c < row_size; ++c)
                            ga[idx[r] * row_size + c] += g[r * row_size + c];
                });
}

Tensor scatter_add_rows(const Tensor& a, std::span<const std::size_t> indices,
                        std::size_t num_rows) {
    require_rank_at_least("scatter_add_rows", a, 1);
    if (a.dim(0) != indices.size()) {
        throw DimensionError("scatter_add_rows: " + std::to_string(indices.size()) +
                             " indices for shape " + shape_str(a.shape()));
    }
    const std::size_t row_size =
        a.rank() == 1 ? 1 : shape_numel(Shape(a.shape().begin() + 1, a.shape().end()));
    Shape shape = a.shape();
    shape[0] = num_rows;
    std::vector<double> out(num_rows * row_size, 0.0);
    auto x = a.data();
    for (std::size_t r = 0; r < indices.size(); ++r) {
        if (indices[r] >= num_rows) {
            throw ContractError("scatter_add_rows: index " + std::to_string(indices[r]) +
                                " out of range for " + std::to_string(num_rows) + " rows");
        }
        for (std::size_t c = 0; c < row_size; ++c)
            out[indices[r] * row_size + c] += x[r * row_size + c];
    }
    ImplPtr ai = a.impl();
    std::vector<std::size_t> idx(indices.begin(), indices.end());
    return emit("scatter_add_rows", std::move(shape), std::move(out), {&a},
                [ai, idx = std::move(idx), row_size](const TensorImpl& out) {
                    const auto& g = out.grad;
                    auto& ga = grad_of(ai);
                    for (std::size_t r = 0; r < idx.size(); ++r)
                        for (std::size_t c = 0; c < row_size; ++c)
                            ga[r * row_size + c] += g[idx[r] * row_size + c];
                });
}

Tensor sigmoid(const Tensor& a) {
    return unary("sigmoid", a, sigmoid_value,
                 [](double, double y) { return y * (1.0 - y); });
}

Tensor silu(const Tensor& a) {
    return unary(
        "silu", a, [](double x) { return x * sigmoid_value(x); },
        [](double x, double) {
            const double s = sigmoid_value(x);
            return s * (1.0 + x * (1.0 - s));
        });
}

Tensor exp(const Tensor& a) {
    return unary(
        "exp", a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
    return unary(
        "log", a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor sqrt(const Tensor& a) {
    return unary(
        "sqrt", a, [](double x) { return std::sqrt(x); },
        [](double, double y) { return 0.5 / y; });
}

Tensor square(const Tensor& a) {
    return unary(
        "square", a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Tensor softmax(const Tensor& a) {
    require_rank_at_least("softmax", a, 1);
    const std::size_t width = a.shape().back();
    const std::size_t rows = width ? a.numel() / width : 0;
    std::vector<double> out(a.numel());
    auto x = a.data();
    for (std::size_t r = 0; r < rows; ++r) {
        const double* in = x.data() + r * width;
        double* y = out.data() + r * width;
        const double mx = *std::max_element(in, in + width);
        double z = 0.0;
        for (std::size_t c = 0; c < width; ++c) z += (y[c] = std::exp(in[c] - mx));
        for (std::size_t c = 0; c < width; ++c) y[c] /= z;
    }
    ImplPtr ai = a.impl();
    return emit("softmax", a.shape(), std::move(out), {&a}, [ai, rows, width](const TensorImpl& o) {
        auto& ga = grad_of(ai);
        const auto& g = o.grad;
        const auto& y = o.data;
        for (std::size_t r = 0; r < rows; ++r) {
            double dot = 0.0;
            for (std::size_t c = 0; c < width; ++c) dot += g[r * width + c] * y[r * width + c];
            for (std::size_t c = 0; c < width; ++c)
                ga[r * width + c] += y[r * width + c] * (g[r * width + c] - dot);
        }
    });
}

Tensor log_softmax(const Tensor& a) {
    require_rank_at_least("log_softmax", a, 1);
    const std::size_t width = a.shape().back();
    const std::size_t rows = width ? a.numel() / width : 0;
    std::vector<double> out(a.numel());
    auto x = a.data();
    for (std::size_t r = 0; r < rows; ++r) {
        const double* in = x.data() + r * width;
        double* y = out.data() + r * width;
        const double mx = *std::max_element(in, in + width);
        double z = 0.0;
        for (std::size_t c = 0; c < width; ++c) z += std::exp(in[c] - mx);
        const double lse = mx + std::log(z);
        for (std::size_t c = 0; c < width; ++c) y[c] = in[c] - lse;
    }
    ImplPtr ai = a.impl();
    return emit("log_softmax", a.shape(), std::move(out), {&a}, [ai, rows, width](const TensorImpl& o) {
        auto& ga = grad_of(ai);
        const auto& g = o.grad;
        const auto& y = o.data;
        for (std::size_t r = 0; r < rows; ++r) {
            double gs = 0.0;
            for (std::size_t c = 0; c < width; ++c) gs += g[r * width + c];
            for (std::size_t c = 0; c < width; ++c)
                ga[r * width + c] += g[r * width + c] - std::exp(y[r * width + c]) * gs;
        }
    });
}

Tensor norm(const Tensor& a) {
    require_rank_at_least("norm", a, 1);
    const std::size_t width = a.shape().back();
    const std::size_t rows = width ? a.numel() / width : 0;
    Shape shape = a.shape();
    shape.back() = 1;
    std::vector<double> out(rows);
    auto x = a.data();
    for (std::size_t r = 0; r < rows; ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < width; ++c) s += x[r * width + c] * x[r * width + c];
        out[r] = std::sqrt(s);
    }
    ImplPtr ai = a.impl();
    return emit("norm", std::move(shape), std::move(out), {&a}, [ai, rows, width](const TensorImpl& o) {
        auto& ga = grad_of(ai);
        const auto& g = o.grad;
        const auto& y = o.data;
        for (std::size_t r = 0; r < rows; ++r) {
            if (y[r] == 0.0) continue;
            const double scale = g[r] / y[r];
            for (std::size_t c = 0; c < width; ++c)
                ga[r * width + c] += scale * ai->data[r * width + c];
        }
    });
}

}  // namespace geopro::ad

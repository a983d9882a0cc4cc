/**
 * Differentiable tensor operations.
 *
 * Binary elementwise ops broadcast only across size-1 dimensions of
 * equal-rank operands ([N,1] * [N,d], [N,d] + [1,d]); a 1-element operand of
 * any rank broadcasts as a scalar. Anything else is a DimensionError naming
 * both shapes.
 */
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "geopro/tensor.hpp"

namespace geopro::ad {

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor reshape(const Tensor& a, Shape shape);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor add_scalar(const Tensor& a, double c);
Tensor mul_scalar(const Tensor& a, double c);

Tensor sum(const Tensor& a);
Tensor sum(const Tensor& a, std::size_t axis, bool keepdim = true);
Tensor mean(const Tensor& a);
Tensor mean(const Tensor& a, std::size_t axis, bool keepdim = true);

Tensor concat(std::span<const Tensor> parts, std::size_t axis);
Tensor concat(std::initializer_list<Tensor> parts, std::size_t axis);

/// out[r] = a[indices[r]] along axis 0.
Tensor gather_rows(const Tensor& a, std::span<const std::size_t> indices);
/// out[indices[r]] += a[r] along axis 0; rows are summed in input order.
Tensor scatter_add_rows(const Tensor& a, std::span<const std::size_t> indices,
                        std::size_t num_rows);

Tensor sigmoid(const Tensor& a);
Tensor silu(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor sqrt(const Tensor& a);
Tensor square(const Tensor& a);

Tensor softmax(const Tensor& a);      // over the last axis
Tensor log_softmax(const Tensor& a);  // over the last axis
/// Euclidean norm over the last axis, keeping it as size 1. Gradient at 0 is 0.
Tensor norm(const Tensor& a);

// Operator sugar for the common binary ops.
inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }

}  // namespace geopro::ad

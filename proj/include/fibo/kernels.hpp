#pragma once

#include <cstdint>
#include <vector>

#include "fibo/tensor.hpp"

#include <cmath>

namespace fibo::ad {

// Low-level dense kernels shared by the tape engine and the raw (no-tape)
// inference path, so both produce bit-identical results. Every kernel
// validates output finiteness and adds to the global flop counter.
namespace kernels {

// scalar forms, shared so tensor ops and scalar code agree bit-for-bit
inline double sigmoid1(double x) {
    return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}
inline double softplus1(double x) {
    return x > 30.0 ? x : std::log1p(std::exp(std::min(x, 30.0)));
}

std::uint64_t flop_count();
void reset_flop_count();
void add_flops(std::uint64_t n);

// finiteness check; throws naming the op and operand shapes
void check_finite(const Tensor& t, const char* op);

// Binary elementwise with scalar and leading-axis broadcast:
//   same shape | either side scalar-like | [n,m] op [m]
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

// Sums gradient `g` down to `shape` (inverse of the broadcast above).
Tensor reduce_to_shape(const Tensor& g, const std::vector<int>& shape);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

Tensor sum_axis(const Tensor& a, int axis);
Tensor mean_axis(const Tensor& a, int axis);
Tensor sum_all(const Tensor& a);

Tensor broadcast_rows(const Tensor& v, int n);  // [m] -> [n,m]
Tensor concat(const std::vector<Tensor>& parts, int axis);
Tensor slice_rows(const Tensor& a, int r0, int r1);
Tensor slice_cols(const Tensor& a, int c0, int c1);
// out[i] = m[i, idx[i]]
Tensor gather_rows(const Tensor& m, const std::vector<int>& idx);

Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor softplus(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor cos(const Tensor& a);
Tensor sin(const Tensor& a);
Tensor pow(const Tensor& a, double p);
Tensor affine(const Tensor& a, double scale, double shift);
Tensor softmax(const Tensor& a, int axis);  // rank-1: axis 0; rank-2: axis 0 or 1

}  // namespace kernels

}  // namespace fibo::ad

#pragma once

#include "fibo/kernels.hpp"
#include "fibo/tape.hpp"

namespace fibo::ad {

// The encoder/flow math is written once, templated over an execution engine.
// TapeEngine records onto a tape for training; RawEngine evaluates the same
// kernels directly for inference. Same kernels, same order, bit-identical.

struct RawEngine {
    using H = Tensor;
    H constant(Tensor t) const { return t; }
    const Tensor& val(const H& h) const { return h; }

    H add(const H& a, const H& b) const { return kernels::add(a, b); }
    H sub(const H& a, const H& b) const { return kernels::sub(a, b); }
    H mul(const H& a, const H& b) const { return kernels::mul(a, b); }
    H div(const H& a, const H& b) const { return kernels::div(a, b); }
    H matmul(const H& a, const H& b) const { return kernels::matmul(a, b); }
    H transpose(const H& a) const { return kernels::transpose(a); }
    H sum_axis(const H& a, int axis) const { return kernels::sum_axis(a, axis); }
    H mean_axis(const H& a, int axis) const { return kernels::mean_axis(a, axis); }
    H sum_all(const H& a) const { return kernels::sum_all(a); }
    H broadcast_rows(const H& v, int n) const { return kernels::broadcast_rows(v, n); }
    H concat(const std::vector<H>& parts, int axis) const { return kernels::concat(parts, axis); }
    H slice_rows(const H& a, int r0, int r1) const { return kernels::slice_rows(a, r0, r1); }
    H slice_cols(const H& a, int c0, int c1) const { return kernels::slice_cols(a, c0, c1); }
    H gather_rows(const H& m, const std::vector<int>& idx) const { return kernels::gather_rows(m, idx); }
    H reshape(const H& a, std::vector<int> shape) const { return a.reshaped(std::move(shape)); }
    H tanh(const H& a) const { return kernels::tanh(a); }
    H sigmoid(const H& a) const { return kernels::sigmoid(a); }
    H softplus(const H& a) const { return kernels::softplus(a); }
    H exp(const H& a) const { return kernels::exp(a); }
    H log(const H& a) const { return kernels::log(a); }
    H pow(const H& a, double p) const { return kernels::pow(a, p); }
    H affine(const H& a, double scale, double shift) const { return kernels::affine(a, scale, shift); }
    H softmax(const H& a, int axis) const { return kernels::softmax(a, axis); }
};

struct TapeEngine {
    Tape* tape;
    using H = Value;

    explicit TapeEngine(Tape& t) : tape(&t) {}

    H constant(Tensor t) const { return tape->constant(std::move(t)); }
    const Tensor& val(const H& h) const { return h.tensor(); }

    H add(H a, H b) const { return tape->add(a, b); }
    H sub(H a, H b) const { return tape->sub(a, b); }
    H mul(H a, H b) const { return tape->mul(a, b); }
    H div(H a, H b) const { return tape->div(a, b); }
    H matmul(H a, H b) const { return tape->matmul(a, b); }
    H transpose(H a) const { return tape->transpose(a); }
    H sum_axis(H a, int axis) const { return tape->sum_axis(a, axis); }
    H mean_axis(H a, int axis) const { return tape->mean_axis(a, axis); }
    H sum_all(H a) const { return tape->sum_all(a); }
    H broadcast_rows(H v, int n) const { return tape->broadcast_rows(v, n); }
    H concat(const std::vector<H>& parts, int axis) const { return tape->concat(parts, axis); }
    H slice_rows(H a, int r0, int r1) const { return tape->slice_rows(a, r0, r1); }
    H slice_cols(H a, int c0, int c1) const { return tape->slice_cols(a, c0, c1); }
    H gather_rows(H m, std::vector<int> idx) const { return tape->gather_rows(m, std::move(idx)); }
    H reshape(H a, std::vector<int> shape) const { return tape->reshape(a, std::move(shape)); }
    H tanh(H a) const { return tape->tanh(a); }
    H sigmoid(H a) const { return tape->sigmoid(a); }
    H softplus(H a) const { return tape->softplus(a); }
    H exp(H a) const { return tape->exp(a); }
    H log(H a) const { return tape->log(a); }
    H pow(H a, double p) const { return tape->pow(a, p); }
    H affine(H a, double scale, double shift) const { return tape->affine(a, scale, shift); }
    H softmax(H a, int axis) const { return tape->softmax(a, axis); }
};

}  // namespace fibo::ad

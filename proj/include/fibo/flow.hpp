#pragma once

#include <span>
#include <vector>

#include "fibo/common.hpp"

namespace fibo::flow {

struct FlowConfig {
    int dim = 1;
    int blocks = 4;       // 4 for d<=2, 6 for d=3..4
    int bins = 8;         // K
    double tail = 3.0;    // B: identity outside [-B, B]
    int cond_hidden = 64;
    double min_bin = 1e-3;
    double min_deriv = 1e-3;

    int spline_param_count() const { return 3 * bins - 1; }
    // raw-conditioner shift making softplus output 1 - min_deriv at zero,
    // so a zero-initialized conditioner yields the identity transform
    double deriv_shift() const;
    // dims processed in natural order; for d>=3 odd blocks reverse
    std::vector<int> block_order(int block) const;
};

int default_blocks(int dim);

// A monotone rational-quadratic spline on [-B, B] with identity tails,
// described by its knot coordinates and knot derivatives.
struct Spline1D {
    std::vector<double> kx;  // K+1 knot inputs, kx[0] = -B, kx[K] = B
    std::vector<double> ky;  // K+1 knot outputs
    std::vector<double> kd;  // K+1 derivatives, kd[0] = kd[K] = 1
    double tail = 3.0;
};

struct SplineEval {
    double v;
    double deriv;  // dv/du at the evaluated input
};

// Builds the spline from positive bin widths/heights (each summing to 2B)
// and K-1 positive interior derivatives. Errors on non-positive bins.
Spline1D build_spline(std::span<const double> widths, std::span<const double> heights,
                      std::span<const double> interior_derivs, double tail);

// Maps raw (unconstrained) conditioner outputs to a spline via
// softmax/softplus with floor constants, matching the training graph
// bit-for-bit.
Spline1D spline_from_raw(std::span<const double> raw, const FlowConfig& cfg);

SplineEval rq_spline(const Spline1D& s, double u);
SplineEval rq_spline_inverse(const Spline1D& s, double v);  // returns u and dv/du at u

}  // namespace fibo::flow

#include "fibo/flow.hpp"

#include <algorithm>
#include <cmath>

#include "fibo/kernels.hpp"

namespace fibo::flow {

int default_blocks(int dim) { return dim <= 2 ? 4 : 6; }

double FlowConfig::deriv_shift() const {
    // softplus(shift) == 1 - min_deriv
    return std::log(std::expm1(1.0 - min_deriv));
}

std::vector<int> FlowConfig::block_order(int block) const {
    std::vector<int> order(dim);
    for (int j = 0; j < dim; ++j) order[j] = j;
    if (dim >= 3 && block % 2 == 1) std::reverse(order.begin(), order.end());
    return order;
}

Spline1D build_spline(std::span<const double> widths, std::span<const double> heights,
                      std::span<const double> interior_derivs, double tail) {
    const int K = static_cast<int>(widths.size());
    require(static_cast<int>(heights.size()) == K, "rq_spline: widths/heights size mismatch");
    require(static_cast<int>(interior_derivs.size()) == K - 1, "rq_spline: need K-1 interior derivatives");
    Spline1D s;
    s.tail = tail;
    s.kx.resize(K + 1);
    s.ky.resize(K + 1);
    s.kd.resize(K + 1);
    s.kx[0] = -tail;
    s.ky[0] = -tail;
    s.kd[0] = 1.0;
    s.kd[K] = 1.0;
    // prefix sums accumulate in the same order as the training graph
    double cw = 0.0, ch = 0.0;
    for (int k = 0; k < K; ++k) {
        require(widths[k] > 0.0, "rq_spline: non-positive bin width");
        require(heights[k] > 0.0, "rq_spline: non-positive bin height");
        cw += widths[k];
        ch += heights[k];
        s.kx[k + 1] = 1.0 * cw + -tail;
        s.ky[k + 1] = 1.0 * ch + -tail;
        if (k + 1 < K) {
            require(interior_derivs[k] > 0.0, "rq_spline: non-positive derivative");
            s.kd[k + 1] = interior_derivs[k];
        }
    }
    return s;
}

Spline1D spline_from_raw(std::span<const double> raw, const FlowConfig& cfg) {
    const int K = cfg.bins;
    require(static_cast<int>(raw.size()) == cfg.spline_param_count(), "spline_from_raw: bad raw size");
    // mirrors the training graph: softmax with max subtraction, then the
    // same affine floors, then prefix sums in ascending index order
    auto normalize = [&](std::span<const double> r, std::vector<double>& out) {
        double mx = r[0];
        for (double v : r) mx = std::max(mx, v);
        double z = 0.0;
        out.resize(K);
        for (int k = 0; k < K; ++k) z += (out[k] = std::exp(r[k] - mx));
        for (int k = 0; k < K; ++k) {
            out[k] /= z;
            out[k] = (1.0 - K * cfg.min_bin) * out[k] + cfg.min_bin;
            out[k] = 2.0 * cfg.tail * out[k] + 0.0;
        }
    };
    std::vector<double> widths, heights, derivs(K - 1);
    normalize(raw.subspan(0, K), widths);
    normalize(raw.subspan(K, K), heights);
    const double shift = cfg.deriv_shift();
    for (int k = 0; k < K - 1; ++k)
        derivs[k] = ad::kernels::softplus1(raw[2 * K + k] * 1.0 + shift) * 1.0 + cfg.min_deriv;
    return build_spline(widths, heights, derivs, cfg.tail);
}

SplineEval rq_spline(const Spline1D& s, double u) {
    const int K = static_cast<int>(s.kx.size()) - 1;
    if (u <= -s.tail || u >= s.tail) return {u, 1.0};
    int k = 0;
    while (k < K - 1 && u >= s.kx[k + 1]) ++k;
    const double w = s.kx[k + 1] - s.kx[k];
    const double h = s.ky[k + 1] - s.ky[k];
    const double sl = h / w;
    const double d0 = s.kd[k], d1 = s.kd[k + 1];
    const double xi = (u - s.kx[k]) / w;
    const double xi1 = xi * (1.0 - xi);
    const double denom = sl + (d1 + d0 - 2.0 * sl) * xi1;
    const double v = s.ky[k] + h * (sl * xi * xi + d0 * xi1) / denom;
    const double deriv =
        sl * sl * (d1 * xi * xi + 2.0 * sl * xi1 + d0 * (1.0 - xi) * (1.0 - xi)) / (denom * denom);
    return {v, deriv};
}

SplineEval rq_spline_inverse(const Spline1D& s, double v) {
    const int K = static_cast<int>(s.kx.size()) - 1;
    if (v <= -s.tail || v >= s.tail) return {v, 1.0};
    int k = 0;
    while (k < K - 1 && v >= s.ky[k + 1]) ++k;
    const double w = s.kx[k + 1] - s.kx[k];
    const double h = s.ky[k + 1] - s.ky[k];
    const double sl = h / w;
    const double d0 = s.kd[k], d1 = s.kd[k + 1];
    const double dv = v - s.ky[k];
    const double t = d1 + d0 - 2.0 * sl;
    const double a = h * (sl - d0) + dv * t;
    const double b = h * d0 - dv * t;
    const double c = -sl * dv;
    // stable quadratic root in [0, 1]
    const double disc = std::max(0.0, b * b - 4.0 * a * c);
    const double xi = 2.0 * c / (-b - std::sqrt(disc));
    const double u = s.kx[k] + std::clamp(xi, 0.0, 1.0) * w;
    const double xi1 = xi * (1.0 - xi);
    const double denom = sl + t * xi1;
    const double deriv =
        sl * sl * (d1 * xi * xi + 2.0 * sl * xi1 + d0 * (1.0 - xi) * (1.0 - xi)) / (denom * denom);
    return {u, deriv};
}

}  // namespace fibo::flow

#include "fibo/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

namespace fibo::ad::kernels {

namespace {

std::atomic<std::uint64_t> g_flops{0};

std::string shapes2(const Tensor& a, const Tensor& b) {
    return a.shape_str() + " and " + b.shape_str();
}

enum class BMode { Same, ScalarA, ScalarB, RowwiseB, RowwiseA };

BMode broadcast_mode(const Tensor& a, const Tensor& b, const char* op) {
    if (a.same_shape(b)) return BMode::Same;
    if (b.is_scalar_like()) return BMode::ScalarB;
    if (a.is_scalar_like()) return BMode::ScalarA;
    if (a.rank() == 2 && b.rank() == 1 && a.cols() == b.rows()) return BMode::RowwiseB;
    if (b.rank() == 2 && a.rank() == 1 && b.cols() == a.rows()) return BMode::RowwiseA;
    fail(std::string(op) + ": incompatible shapes " + shapes2(a, b) +
         " (only exact, scalar, or [n,m]-with-[m] broadcast)");
}

template <typename F>
Tensor binary(const Tensor& a, const Tensor& b, F f, const char* op) {
    const BMode mode = broadcast_mode(a, b, op);
    const Tensor& big = (mode == BMode::ScalarA || mode == BMode::RowwiseA) ? b : a;
    Tensor out(big.shape());
    const std::size_t n = out.size();
    const double* pa = a.data();
    const double* pb = b.data();
    double* po = out.data();
    switch (mode) {
        case BMode::Same:
            for (std::size_t i = 0; i < n; ++i) po[i] = f(pa[i], pb[i]);
            break;
        case BMode::ScalarB: {
            const double s = pb[0];
            for (std::size_t i = 0; i < n; ++i) po[i] = f(pa[i], s);
            break;
        }
        case BMode::ScalarA: {
            const double s = pa[0];
            for (std::size_t i = 0; i < n; ++i) po[i] = f(s, pb[i]);
            break;
        }
        case BMode::RowwiseB: {
            const std::size_t m = static_cast<std::size_t>(a.cols());
            for (std::size_t i = 0; i < n; ++i) po[i] = f(pa[i], pb[i % m]);
            break;
        }
        case BMode::RowwiseA: {
            const std::size_t m = static_cast<std::size_t>(b.cols());
            for (std::size_t i = 0; i < n; ++i) po[i] = f(pa[i % m], pb[i]);
            break;
        }
    }
    add_flops(n);
    check_finite(out, op);
    return out;
}

template <typename F>
Tensor unary(const Tensor& a, F f, const char* op) {
    Tensor out(a.shape());
    const std::size_t n = out.size();
    const double* pa = a.data();
    double* po = out.data();
    for (std::size_t i = 0; i < n; ++i) po[i] = f(pa[i]);
    add_flops(n);
    check_finite(out, op);
    return out;
}

}  // namespace

std::uint64_t flop_count() { return g_flops.load(std::memory_order_relaxed); }
void reset_flop_count() { g_flops.store(0, std::memory_order_relaxed); }
void add_flops(std::uint64_t n) { g_flops.fetch_add(n, std::memory_order_relaxed); }

void check_finite(const Tensor& t, const char* op) {
    if (!t.all_finite()) fail(std::string(op) + ": non-finite output, shape " + t.shape_str());
}

Tensor add(const Tensor& a, const Tensor& b) {
    return binary(a, b, [](double x, double y) { return x + y; }, "add");
}
Tensor sub(const Tensor& a, const Tensor& b) {
    return binary(a, b, [](double x, double y) { return x - y; }, "subtract");
}
Tensor mul(const Tensor& a, const Tensor& b) {
    return binary(a, b, [](double x, double y) { return x * y; }, "multiply");
}
Tensor div(const Tensor& a, const Tensor& b) {
    return binary(a, b, [](double x, double y) { return x / y; }, "divide");
}

Tensor reduce_to_shape(const Tensor& g, const std::vector<int>& shape) {
    if (g.shape() == shape) return g;
    Tensor out(shape);
    const std::size_t n = g.size();
    const std::size_t m = out.size();
    if (m == 1) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += g[i];
        out[0] = s;
    } else {
        // [n,m] summed over leading axis to [m]
        require(g.rank() == 2 && out.size() == static_cast<std::size_t>(g.cols()),
                "reduce_to_shape: unsupported reduction " + g.shape_str());
        for (std::size_t i = 0; i < n; ++i) out[i % m] += g[i];
    }
    add_flops(n);
    return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    require(a.rank() == 2 && b.rank() == 2 && a.cols() == b.rows(),
            "matmul: incompatible shapes " + shapes2(a, b));
    const int n = a.rows(), k = a.cols(), m = b.cols();
    Tensor out({n, m});
    const double* pa = a.data();
    const double* pb = b.data();
    double* po = out.data();
    for (int i = 0; i < n; ++i) {
        const double* arow = pa + static_cast<std::size_t>(i) * k;
        double* orow = po + static_cast<std::size_t>(i) * m;
        for (int l = 0; l < k; ++l) {
            const double av = arow[l];
            if (av == 0.0) continue;
            const double* brow = pb + static_cast<std::size_t>(l) * m;
            for (int j = 0; j < m; ++j) orow[j] += av * brow[j];
        }
    }
    add_flops(2ull * n * k * m);
    check_finite(out, "matmul");
    return out;
}

Tensor transpose(const Tensor& a) {
    require(a.rank() == 2, "transpose: rank-2 required, got " + a.shape_str());
    const int n = a.rows(), m = a.cols();
    Tensor out({m, n});
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) out.at(j, i) = a.at(i, j);
    return out;
}

Tensor sum_axis(const Tensor& a, int axis) {
    require(a.rank() == 2 && (axis == 0 || axis == 1),
            "sum_axis: rank-2 tensor and axis 0/1 required");
    const int n = a.rows(), m = a.cols();
    if (axis == 0) {
        Tensor out({m});
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < m; ++j) out[j] += a.at(i, j);
        add_flops(static_cast<std::uint64_t>(n) * m);
        check_finite(out, "sum_axis");
        return out;
    }
    Tensor out({n});
    for (int i = 0; i < n; ++i) {
        double s = 0.0;
        for (int j = 0; j < m; ++j) s += a.at(i, j);
        out[i] = s;
    }
    add_flops(static_cast<std::uint64_t>(n) * m);
    check_finite(out, "sum_axis");
    return out;
}

Tensor mean_axis(const Tensor& a, int axis) {
    Tensor s = sum_axis(a, axis);
    const double denom = axis == 0 ? a.rows() : a.cols();
    return affine(s, 1.0 / denom, 0.0);
}

Tensor sum_all(const Tensor& a) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i];
    add_flops(a.size());
    Tensor out = Tensor::scalar(s);
    check_finite(out, "sum");
    return out;
}

Tensor broadcast_rows(const Tensor& v, int n) {
    require(v.rank() == 1, "broadcast: rank-1 input required, got " + v.shape_str());
    const int m = v.rows();
    Tensor out({n, m});
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) out.at(i, j) = v[static_cast<std::size_t>(j)];
    return out;
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
    require(!parts.empty(), "concatenate: empty input list");
    if (parts[0].rank() == 1) {
        require(axis == 0, "concatenate: rank-1 tensors concatenate on axis 0");
        std::vector<double> data;
        for (const auto& p : parts) {
            require(p.rank() == 1, "concatenate: mixed ranks");
            data.insert(data.end(), p.vals().begin(), p.vals().end());
        }
        return Tensor::vec(std::move(data));
    }
    require(axis == 0 || axis == 1, "concatenate: axis 0/1 required");
    if (axis == 0) {
        const int m = parts[0].cols();
        int n = 0;
        for (const auto& p : parts) {
            require(p.rank() == 2 && p.cols() == m, "concatenate: column mismatch " + p.shape_str());
            n += p.rows();
        }
        Tensor out({n, m});
        double* po = out.data();
        for (const auto& p : parts) {
            std::copy(p.vals().begin(), p.vals().end(), po);
            po += p.size();
        }
        return out;
    }
    const int n = parts[0].rows();
    int m = 0;
    for (const auto& p : parts) {
        require(p.rank() == 2 && p.rows() == n, "concatenate: row mismatch " + p.shape_str());
        m += p.cols();
    }
    Tensor out({n, m});
    int c0 = 0;
    for (const auto& p : parts) {
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < p.cols(); ++j) out.at(i, c0 + j) = p.at(i, j);
        c0 += p.cols();
    }
    return out;
}

Tensor slice_rows(const Tensor& a, int r0, int r1) {
    require(a.rank() == 2 && 0 <= r0 && r0 < r1 && r1 <= a.rows(),
            "slice: bad row range on " + a.shape_str());
    const int m = a.cols();
    Tensor out({r1 - r0, m});
    std::copy(a.data() + static_cast<std::size_t>(r0) * m, a.data() + static_cast<std::size_t>(r1) * m,
              out.data());
    return out;
}

Tensor slice_cols(const Tensor& a, int c0, int c1) {
    require(a.rank() == 2 && 0 <= c0 && c0 < c1 && c1 <= a.cols(),
            "slice: bad column range on " + a.shape_str());
    Tensor out({a.rows(), c1 - c0});
    for (int i = 0; i < a.rows(); ++i)
        for (int j = c0; j < c1; ++j) out.at(i, j - c0) = a.at(i, j);
    return out;
}

Tensor gather_rows(const Tensor& m, const std::vector<int>& idx) {
    require(m.rank() == 2 && static_cast<int>(idx.size()) == m.rows(),
            "gather: index count must match rows of " + m.shape_str());
    Tensor out({m.rows()});
    for (int i = 0; i < m.rows(); ++i) {
        require(0 <= idx[i] && idx[i] < m.cols(), "gather: index out of range");
        out[static_cast<std::size_t>(i)] = m.at(i, idx[i]);
    }
    return out;
}

Tensor tanh(const Tensor& a) {
    return unary(a, [](double x) { return std::tanh(x); }, "tanh");
}
Tensor sigmoid(const Tensor& a) {
    return unary(a, [](double x) { return sigmoid1(x); }, "sigmoid");
}
Tensor softplus(const Tensor& a) {
    return unary(a, [](double x) { return softplus1(x); }, "softplus");
}
Tensor exp(const Tensor& a) {
    return unary(a, [](double x) { return std::exp(x); }, "exp");
}
Tensor log(const Tensor& a) {
    return unary(a, [](double x) { return std::log(x); }, "log");
}
Tensor cos(const Tensor& a) {
    return unary(a, [](double x) { return std::cos(x); }, "cos");
}
Tensor sin(const Tensor& a) {
    return unary(a, [](double x) { return std::sin(x); }, "sin");
}
Tensor pow(const Tensor& a, double p) {
    return unary(a, [p](double x) { return std::pow(x, p); }, "power");
}
Tensor affine(const Tensor& a, double scale, double shift) {
    return unary(a, [scale, shift](double x) { return scale * x + shift; }, "affine");
}

Tensor softmax(const Tensor& a, int axis) {
    if (a.rank() == 1) {
        require(axis == 0, "softmax: axis 0 required for rank-1");
        Tensor out(a.shape());
        double mx = a[0];
        for (std::size_t i = 0; i < a.size(); ++i) mx = std::max(mx, a[i]);
        double z = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) z += (out[i] = std::exp(a[i] - mx));
        for (std::size_t i = 0; i < a.size(); ++i) out[i] /= z;
        add_flops(3 * a.size());
        check_finite(out, "softmax");
        return out;
    }
    require(a.rank() == 2 && (axis == 0 || axis == 1), "softmax: rank-2 tensor and axis 0/1 required");
    const Tensor& rowsided = a;
    const int n = rowsided.rows(), m = rowsided.cols();
    Tensor out(a.shape());
    if (axis == 1) {
        for (int i = 0; i < n; ++i) {
            double mx = a.at(i, 0);
            for (int j = 1; j < m; ++j) mx = std::max(mx, a.at(i, j));
            double z = 0.0;
            for (int j = 0; j < m; ++j) z += (out.at(i, j) = std::exp(a.at(i, j) - mx));
            for (int j = 0; j < m; ++j) out.at(i, j) /= z;
        }
    } else {
        for (int j = 0; j < m; ++j) {
            double mx = a.at(0, j);
            for (int i = 1; i < n; ++i) mx = std::max(mx, a.at(i, j));
            double z = 0.0;
            for (int i = 0; i < n; ++i) z += (out.at(i, j) = std::exp(a.at(i, j) - mx));
            for (int i = 0; i < n; ++i) out.at(i, j) /= z;
        }
    }
    add_flops(3ull * a.size());
    check_finite(out, "softmax");
    return out;
}

}  // namespace fibo::ad::kernels

#include "fibo/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace fibo::model {

int default_context_dim(int dim) { return dim <= 2 ? 64 : 128; }

ad::Tensor encoder_features(const Dataset& ds) {
    require(ds.size() > 0, "encode: empty dataset");
    const int n = ds.size();
    const int d = ds.dim;
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        const auto xa = ds.x(a), xb = ds.x(b);
        for (int j = 0; j < d; ++j)
            if (xa[j] != xb[j]) return xa[j] < xb[j];
        return ds.ys[a] < ds.ys[b];
    });
    double mean = 0.0;
    for (int i = 0; i < n; ++i) mean += ds.ys[order[i]];
    mean /= n;
    double var = 0.0;
    for (int i = 0; i < n; ++i) {
        const double dy = ds.ys[order[i]] - mean;
        var += dy * dy;
    }
    const double sd = std::max(std::sqrt(var / n), 1e-8);

    ad::Tensor f({n, d + 3});
    for (int i = 0; i < n; ++i) {
        const auto x = ds.x(order[i]);
        for (int j = 0; j < d; ++j) f.at(i, j) = x[j];
        f.at(i, d) = (ds.ys[order[i]] - mean) / sd;
        f.at(i, d + 1) = mean;
        f.at(i, d + 2) = sd;
    }
    return f;
}

}  // namespace fibo::model

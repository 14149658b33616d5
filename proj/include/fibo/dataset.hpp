#pragma once

#include <span>
#include <vector>

#include "fibo/common.hpp"

namespace fibo {

// Observed points of one objective: n points in [0,1]^d with scalar targets.
// xs is row-major n*d.
struct Dataset {
    int dim = 0;
    std::vector<double> xs;
    std::vector<double> ys;

    int size() const { return static_cast<int>(ys.size()); }

    std::span<const double> x(int i) const {
        return {xs.data() + static_cast<std::size_t>(i) * dim, static_cast<std::size_t>(dim)};
    }

    void push(std::span<const double> x, double y) {
        require(static_cast<int>(x.size()) == dim, "Dataset: dimension mismatch");
        xs.insert(xs.end(), x.begin(), x.end());
        ys.push_back(y);
    }
};

}  // namespace fibo

#pragma once

#include "fibo/dataset.hpp"
#include "fibo/tensor.hpp"

namespace fibo::model {

// DeepSets-style set encoder: per-point embedding, optional single-head
// self-attention, mean pooling, linear projection to the context vector.
struct EncoderConfig {
    int dim = 1;
    int hidden = 64;
    int width = 64;
    int context_dim = 64;  // 64 for d<=2, 128 for d=3..4
    bool attention = false;

    // x plus z-scored y plus the (mean, sd) of y as two scale features
    int in_features() const { return dim + 3; }
};

int default_context_dim(int dim);

// Builds the [n, d+3] feature matrix. Points are sorted lexicographically
// by (x, y) first so the pooled sum has a canonical order and encoding is
// exactly permutation invariant. y is z-scored per context with the sd
// floored at 1e-8.
ad::Tensor encoder_features(const Dataset& ds);

}  // namespace fibo::model

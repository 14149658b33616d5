#pragma once

#include <functional>
#include <vector>

#include "fibo/kernels.hpp"
#include "fibo/tensor.hpp"

namespace fibo::ad {

class Tape;

// Handle to a node on a tape. Cheap to copy.
struct Value {
    Tape* tape = nullptr;
    int id = -1;
    const Tensor& tensor() const;
    const std::vector<int>& shape() const { return tensor().shape(); }
    double item() const { return tensor().item(); }
};

// Define-by-run reverse-mode tape. Nodes are created in topological order;
// a tape is single-threaded and rebuilt per training step.
class Tape {
public:
    Value input(Tensor t);                 // differentiable leaf
    Value constant(Tensor t) { return input(std::move(t)); }

    Value add(Value a, Value b);
    Value sub(Value a, Value b);
    Value mul(Value a, Value b);
    Value div(Value a, Value b);
    Value matmul(Value a, Value b);
    Value transpose(Value a);
    Value sum_axis(Value a, int axis);
    Value mean_axis(Value a, int axis);
    Value sum_all(Value a);
    Value broadcast_rows(Value v, int n);
    Value concat(const std::vector<Value>& parts, int axis);
    Value slice_rows(Value a, int r0, int r1);
    Value slice_cols(Value a, int c0, int c1);
    Value gather_rows(Value m, std::vector<int> idx);
    Value reshape(Value a, std::vector<int> shape);
    Value tanh(Value a);
    Value sigmoid(Value a);
    Value softplus(Value a);
    Value exp(Value a);
    Value log(Value a);
    Value cos(Value a);
    Value sin(Value a);
    Value pow(Value a, double p);
    Value affine(Value a, double scale, double shift);
    Value softmax(Value a, int axis);

    // Accumulates d(root)/d(node) for every node on the tape. Root must be
    // scalar (shape [] or [1]). Unreached nodes read back as zero gradients.
    void backward(Value root);

    Tensor grad(Value v) const;
    const Tensor& value(Value v) const { return nodes_[v.id].value; }

    std::size_t num_nodes() const { return nodes_.size(); }

private:
    friend struct Value;

    struct Node {
        Tensor value;
        std::function<void(Tape&, const Tensor&)> back;  // empty for leaves
    };

    Value push(Tensor value, std::function<void(Tape&, const Tensor&)> back);
    void accumulate(int id, Tensor g);

    std::vector<Node> nodes_;
    std::vector<Tensor> grads_;
    std::vector<char> has_grad_;
};

inline const Tensor& Value::tensor() const { return tape->value(*this); }

}  // namespace fibo::ad

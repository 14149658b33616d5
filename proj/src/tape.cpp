#include "fibo/tape.hpp"

#include <cmath>

namespace fibo::ad {

namespace k = kernels;

Value Tape::push(Tensor value, std::function<void(Tape&, const Tensor&)> back) {
    nodes_.push_back(Node{std::move(value), std::move(back)});
    return Value{this, static_cast<int>(nodes_.size()) - 1};
}

Value Tape::input(Tensor t) {
    k::check_finite(t, "input");
    return push(std::move(t), nullptr);
}

void Tape::accumulate(int id, Tensor g) {
    if (!has_grad_[id]) {
        grads_[id] = std::move(g);
        has_grad_[id] = 1;
        return;
    }
    Tensor& acc = grads_[id];
    require(acc.same_shape(g), "backward: gradient shape mismatch");
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += g[i];
}

void Tape::backward(Value root) {
    require(root.tape == this, "backward: value from another tape");
    const Tensor& rv = nodes_[root.id].value;
    require(rv.size() == 1 && rv.rank() <= 1, "backward: root must be scalar, got " + rv.shape_str());
    grads_.assign(nodes_.size(), Tensor{});
    has_grad_.assign(nodes_.size(), 0);
    Tensor seed(rv.shape());
    seed[0] = 1.0;
    accumulate(root.id, std::move(seed));
    for (int i = root.id; i >= 0; --i) {
        if (!has_grad_[i] || !nodes_[i].back) continue;
        nodes_[i].back(*this, grads_[i]);
    }
}

Tensor Tape::grad(Value v) const {
    require(v.tape == this, "grad: value from another tape");
    if (v.id < static_cast<int>(has_grad_.size()) && has_grad_[v.id]) return grads_[v.id];
    return Tensor(nodes_[v.id].value.shape());
}

Value Tape::add(Value a, Value b) {
    Tensor out = k::add(a.tensor(), b.tensor());
    return push(std::move(out), [ia = a.id, ib = b.id](Tape& t, const Tensor& g) {
        t.accumulate(ia, k::reduce_to_shape(g, t.nodes_[ia].value.shape()));
        t.accumulate(ib, k::reduce_to_shape(g, t.nodes_[ib].value.shape()));
    });
}

Value Tape::sub(Value a, Value b) {
    Tensor out = k::sub(a.tensor(), b.tensor());
    return push(std::move(out), [ia = a.id, ib = b.id](Tape& t, const Tensor& g) {
        t.accumulate(ia, k::reduce_to_shape(g, t.nodes_[ia].value.shape()));
        t.accumulate(ib, k::reduce_to_shape(k::affine(g, -1.0, 0.0), t.nodes_[ib].value.shape()));
    });
}

Value Tape::mul(Value a, Value b) {
    Tensor out = k::mul(a.tensor(), b.tensor());
    return push(std::move(out), [ia = a.id, ib = b.id](Tape& t, const Tensor& g) {
        t.accumulate(ia, k::reduce_to_shape(k::mul(g, t.nodes_[ib].value), t.nodes_[ia].value.shape()));
        t.accumulate(ib, k::reduce_to_shape(k::mul(g, t.nodes_[ia].value), t.nodes_[ib].value.shape()));
    });
}

Value Tape::div(Value a, Value b) {
    Tensor out = k::div(a.tensor(), b.tensor());
    return push(std::move(out), [ia = a.id, ib = b.id, id = static_cast<int>(nodes_.size())](
                                    Tape& t, const Tensor& g) {
        const Tensor& bv = t.nodes_[ib].value;
        t.accumulate(ia, k::reduce_to_shape(k::div(g, bv), t.nodes_[ia].value.shape()));
        Tensor gb = k::div(k::mul(g, t.nodes_[id].value), bv);
        t.accumulate(ib, k::reduce_to_shape(k::affine(gb, -1.0, 0.0), bv.shape()));
    });
}

Value Tape::matmul(Value a, Value b) {
    Tensor out = k::matmul(a.tensor(), b.tensor());
    return push(std::move(out), [ia = a.id, ib = b.id](Tape& t, const Tensor& g) {
        const Tensor& av = t.nodes_[ia].value;
        const Tensor& bv = t.nodes_[ib].value;
        t.accumulate(ia, k::matmul(g, k::transpose(bv)));
        t.accumulate(ib, k::matmul(k::transpose(av), g));
    });
}

Value Tape::transpose(Value a) {
    Tensor out = k::transpose(a.tensor());
    return push(std::move(out), [ia = a.id](Tape& t, const Tensor& g) {
        t.accumulate(ia, k::transpose(g));
    });
}

Value Tape::sum_axis(Value a, int axis) {
    Tensor out = k::sum_axis(a.tensor(), axis);
    const int n = a.tensor().rows(), m = a.tensor().cols();
    return push(std::move(out), [ia = a.id, axis, n, m](Tape& t, const Tensor& g) {
        Tensor ga({n, m});
        if (axis == 0) {
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < m; ++j) ga.at(i, j) = g[static_cast<std::size_t>(j)];
        } else {
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < m; ++j) ga.at(i, j) = g[static_cast<std::size_t>(i)];
        }
        t.accumulate(ia, std::move(ga));
    });
}

Value Tape::mean_axis(Value a, int axis) {
    Value s = sum_axis(a, axis);
    const double denom = axis == 0 ? a.tensor().rows() : a.tensor().cols();
    return affine(s, 1.0 / denom, 0.0);
}

Value Tape::sum_all(Value a) {
    Tensor out = k::sum_all(a.tensor());
    return push(std::move(out), [ia = a.id](Tape& t, const Tensor& g) {
        Tensor ga(t.nodes_[ia].value.shape());
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] = g[0];
        t.accumulate(ia, std::move(ga));
    });
}

Value Tape::broadcast_rows(Value v, int n) {
    Tensor out = k::broadcast_rows(v.tensor(), n);
    return push(std::move(out), [iv = v.id](Tape& t, const Tensor& g) {
        t.accumulate(iv, k::sum_axis(g, 0));
    });
}

Value Tape::concat(const std::vector<Value>& parts, int axis) {
    std::vector<Tensor> tensors;
    std::vector<int> ids;
    tensors.reserve(parts.size());
    for (const auto& p : parts) {
        tensors.push_back(p.tensor());
        ids.push_back(p.id);
    }
    Tensor out = k::concat(tensors, axis);
    return push(std::move(out), [ids, axis](Tape& t, const Tensor& g) {
        int offset = 0;
        for (int id : ids) {
            const Tensor& pv = t.nodes_[id].value;
            if (g.rank() == 1) {
                Tensor gp({pv.rows()});
                for (int i = 0; i < pv.rows(); ++i) gp[static_cast<std::size_t>(i)] = g[offset + i];
                t.accumulate(id, std::move(gp));
                offset += pv.rows();
            } else if (axis == 0) {
                t.accumulate(id, k::slice_rows(g, offset, offset + pv.rows()));
                offset += pv.rows();
            } else {
                t.accumulate(id, k::slice_cols(g, offset, offset + pv.cols()));
                offset += pv.cols();
            }
        }
    });
}

Value Tape::slice_rows(Value a, int r0, int r1) {
    Tensor out = k::slice_rows(a.tensor(), r0, r1);
    return push(std::move(out), [ia = a.id, r0](Tape& t, const Tensor& g) {
        Tensor ga(t.nodes_[ia].value.shape());
        for (int i = 0; i < g.rows(); ++i)
            for (int j = 0; j < g.cols(); ++j) ga.at(r0 + i, j) = g.at(i, j);
        t.accumulate(ia, std::move(ga));
    });
}

Value Tape::slice_cols(Value a, int c0, int c1) {
    Tensor out = k::slice_cols(a.tensor(), c0, c1);
    return push(std::move(out), [ia = a.id, c0](Tape& t, const Tensor& g) {
        Tensor ga(t.nodes_[ia].value.shape());
        for (int i = 0; i < g.rows(); ++i)
            for (int j = 0; j < g.cols(); ++j) ga.at(i, c0 + j) = g.at(i, j);
        t.accumulate(ia, std::move(ga));
    });
}

Value Tape::gather_rows(Value m, std::vector<int> idx) {
    Tensor out = k::gather_rows(m.tensor(), idx);
    return push(std::move(out), [im = m.id, idx = std::move(idx)](Tape& t, const Tensor& g) {
        Tensor gm(t.nodes_[im].value.shape());
        for (int i = 0; i < gm.rows(); ++i) gm.at(i, idx[i]) = g[static_cast<std::size_t>(i)];
        t.accumulate(im, std::move(gm));
    });
}

Value Tape::reshape(Value a, std::vector<int> shape) {
    Tensor out = a.tensor().reshaped(shape);
    return push(std::move(out), [ia = a.id](Tape& t, const Tensor& g) {
        t.accumulate(ia, g.reshaped(t.nodes_[ia].value.shape()));
    });
}

// unary op plumbing: dy = f'(x) expressed with the forward output where cheap

Value Tape::tanh(Value a) {
    Tensor out = k::tanh(a.tensor());
    return push(std::move(out), [ia = a.id, io = static_cast<int>(nodes_.size())](Tape& t, const Tensor& g) {
        const Tensor& y = t.nodes_[io].value;
        Tensor ga(y.shape());
        for (std::size_t i = 0; i < y.size(); ++i) ga[i] = g[i] * (1.0 - y[i] * y[i]);
        t.accumulate(ia, std::move(ga));
    });
}

Value Tape::sigmoid(Value a) {
    Tensor out = k::sigmoid(a.tensor());
    return push(std::move(out), [ia = a.id, io = static_cast<int>(nodes_.size())](Tape& t, const Tensor& g) {
        const Tensor& y = t.nodes_[io].value;
        Tensor ga(y.shape());
        for (std::size_t i = 0; i < y.size(); ++i) ga[i] = g[i] * y[i] * (1.0 - y[i]);
        t.accumulate(ia, std::move(ga));
    });
}

Value Tape::softplus(Value a) {
    Tensor out = k::softplus(a.tensor());
    return push(std::move(out), [ia = a.id](Tape& t, const Tensor& g) {
        t.accumulate(ia, k::mul(g, k::sigmoid(t.nodes_[ia].value)));
    });
}

Value Tape::exp(Value a) {
    Tensor out = k::exp(a.tensor());
    return push(std::move(out), [ia = a.id, io = static_cast<int>(nodes_.size())](Tape& t, const Tensor& g) {
        t.accumulate(ia, k::mul(g, t.nodes_[io].value));
    });
}

Value Tape::log(Value a) {
    Tensor out = k::log(a.tensor());
    return push(std::move(out), [ia = a.id](Tape& t, const Tensor& g) {
        t.accumulate(ia, k::div(g, t.nodes_[ia].value));
    });
}

Value Tape::cos(Value a) {
    Tensor out = k::cos(a.tensor());
    return push(std::move(out), [ia = a.id](Tape& t, const Tensor& g) {
        Tensor ga = k::mul(g, k::sin(t.nodes_[ia].value));
        t.accumulate(ia, k::affine(ga, -1.0, 0.0));
    });
}

Value Tape::sin(Value a) {
    Tensor out = k::sin(a.tensor());
    return push(std::move(out), [ia = a.id](Tape& t, const Tensor& g) {
        t.accumulate(ia, k::mul(g, k::cos(t.nodes_[ia].value)));
    });
}

Value Tape::pow(Value a, double p) {
    Tensor out = k::pow(a.tensor(), p);
    return push(std::move(out), [ia = a.id, p](Tape& t, const Tensor& g) {
        Tensor d = k::pow(t.nodes_[ia].value, p - 1.0);
        t.accumulate(ia, k::mul(g, k::affine(d, p, 0.0)));
    });
}

Value Tape::affine(Value a, double scale, double shift) {
    Tensor out = k::affine(a.tensor(), scale, shift);
    return push(std::move(out), [ia = a.id, scale](Tape& t, const Tensor& g) {
        t.accumulate(ia, k::affine(g, scale, 0.0));
    });
}

Value Tape::softmax(Value a, int axis) {
    Tensor out = k::softmax(a.tensor(), axis);
    return push(std::move(out), [ia = a.id, io = static_cast<int>(nodes_.size()), axis](
                                    Tape& t, const Tensor& g) {
        const Tensor& y = t.nodes_[io].value;
        Tensor ga(y.shape());
        if (y.rank() == 1) {
            double dot = 0.0;
            for (std::size_t i = 0; i < y.size(); ++i) dot += g[i] * y[i];
            for (std::size_t i = 0; i < y.size(); ++i) ga[i] = y[i] * (g[i] - dot);
        } else if (axis == 1) {
            for (int i = 0; i < y.rows(); ++i) {
                double dot = 0.0;
                for (int j = 0; j < y.cols(); ++j) dot += g.at(i, j) * y.at(i, j);
                for (int j = 0; j < y.cols(); ++j) ga.at(i, j) = y.at(i, j) * (g.at(i, j) - dot);
            }
        } else {
            for (int j = 0; j < y.cols(); ++j) {
                double dot = 0.0;
                for (int i = 0; i < y.rows(); ++i) dot += g.at(i, j) * y.at(i, j);
                for (int i = 0; i < y.rows(); ++i) ga.at(i, j) = y.at(i, j) * (g.at(i, j) - dot);
            }
        }
        kernels::add_flops(3ull * y.size());
        t.accumulate(ia, std::move(ga));
    });
}

}  // namespace fibo::ad

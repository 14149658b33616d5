#pragma once

#include <cmath>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "fibo/encoder.hpp"
#include "fibo/engine.hpp"
#include "fibo/flow.hpp"
#include "fibo/rng.hpp"

namespace fibo::model {

// Ordered, named parameter tensors. Order is the canonical binding order
// used by the trainer and the checkpoint format.
class ParamStore {
public:
    int add(std::string name, ad::Tensor t) {
        const int id = static_cast<int>(names_.size());
        index_.emplace(name, id);
        names_.push_back(std::move(name));
        values_.push_back(std::move(t));
        return id;
    }

    int count() const { return static_cast<int>(names_.size()); }
    const std::string& name(int i) const { return names_[i]; }
    ad::Tensor& value(int i) { return values_[i]; }
    const ad::Tensor& value(int i) const { return values_[i]; }

    ad::Tensor& by_name(const std::string& n) {
        auto it = index_.find(n);
        require(it != index_.end(), "ParamStore: unknown parameter " + n);
        return values_[it->second];
    }

    const ad::Tensor& by_name(const std::string& n) const {
        auto it = index_.find(n);
        require(it != index_.end(), "ParamStore: unknown parameter " + n);
        return values_[it->second];
    }

    std::size_t total_scalars() const {
        std::size_t s = 0;
        for (const auto& t : values_) s += t.size();
        return s;
    }

private:
    std::vector<std::string> names_;
    std::vector<ad::Tensor> values_;
    std::unordered_map<std::string, int> index_;
};

struct ModelConfig {
    int dim = 1;
    EncoderConfig enc;
    flow::FlowConfig flow;
};

ModelConfig default_model_config(int dim);

struct Model {
    ModelConfig cfg;
    ParamStore params;
};

// Random init; conditioner output layers start at zero so the flow is the
// identity map and samples follow sigmoid(N(0, I)).
Model init_model(const ModelConfig& cfg, std::uint64_t seed);

inline double clamp_unit(double x, double eps = 1e-6) {
    return std::min(std::max(x, eps), 1.0 - eps);
}

// --- engine-templated graphs (shared by training and raw inference) ---

template <class H>
struct EncHandles {
    H w1, b1, w2, b2;
    bool attention = false;
    H wq, wk, wv;
    H wp, bp;
};

template <class H>
struct CondHandles {
    H w1, b1, w2, b2;
};

template <class H>
struct ModelHandles {
    EncHandles<H> enc;
    std::vector<std::vector<CondHandles<H>>> flow;  // [block][position]
    std::vector<H> flat;                            // canonical parameter order
};

template <class E>
ModelHandles<typename E::H> bind_model(E& eng, const Model& m) {
    using H = typename E::H;
    ModelHandles<H> h;
    int cursor = 0;
    auto next = [&]() -> H {
        H v = eng.constant(m.params.value(cursor));
        ++cursor;
        h.flat.push_back(v);
        return v;
    };
    h.enc.w1 = next();
    h.enc.b1 = next();
    h.enc.w2 = next();
    h.enc.b2 = next();
    h.enc.attention = m.cfg.enc.attention;
    if (m.cfg.enc.attention) {
        h.enc.wq = next();
        h.enc.wk = next();
        h.enc.wv = next();
    }
    h.enc.wp = next();
    h.enc.bp = next();
    h.flow.resize(m.cfg.flow.blocks);
    for (int bi = 0; bi < m.cfg.flow.blocks; ++bi) {
        h.flow[bi].resize(m.cfg.dim);
        for (int p = 0; p < m.cfg.dim; ++p) {
            h.flow[bi][p].w1 = next();
            h.flow[bi][p].b1 = next();
            h.flow[bi][p].w2 = next();
            h.flow[bi][p].b2 = next();
        }
    }
    require(cursor == m.params.count(), "bind_model: parameter count mismatch");
    return h;
}

// context of one dataset as a [1, c] handle
template <class E>
typename E::H encode_graph(E& eng, const EncHandles<typename E::H>& w, const EncoderConfig& cfg,
                           const Dataset& ds) {
    using H = typename E::H;
    require(ds.dim == cfg.dim, "encode: dataset dimension mismatch");
    H x = eng.constant(encoder_features(ds));
    H h1 = eng.tanh(eng.add(eng.matmul(x, w.w1), w.b1));
    H h2 = eng.tanh(eng.add(eng.matmul(h1, w.w2), w.b2));
    if (cfg.attention) {
        H q = eng.matmul(h2, w.wq);
        H k = eng.matmul(h2, w.wk);
        H v = eng.matmul(h2, w.wv);
        H scores = eng.affine(eng.matmul(q, eng.transpose(k)), 1.0 / std::sqrt(double(cfg.width)), 0.0);
        h2 = eng.add(h2, eng.matmul(eng.softmax(scores, 1), v));
    }
    H pooled = eng.reshape(eng.mean_axis(h2, 0), {1, cfg.width});
    return eng.add(eng.matmul(pooled, w.wp), w.bp);
}

namespace detail {

inline ad::Tensor upper_tri_ones(int k) {
    ad::Tensor t({k, k});
    for (int i = 0; i < k; ++i)
        for (int j = i; j < k; ++j) t.at(i, j) = 1.0;
    return t;
}

}  // namespace detail

template <class E>
struct TransformOut {
    typename E::H z;        // [batch, d]
    typename E::H log_det;  // [batch], sum of log spline derivatives
};

// The core bijection between logit-space inputs and the Gaussian latent:
// per block, per dimension, a monotone rational-quadratic spline whose
// parameters come from an autoregressive conditioner on (preceding block
// inputs, context).
template <class E>
TransformOut<E> flow_transform_graph(E& eng, const std::vector<std::vector<CondHandles<typename E::H>>>& blocks,
                                     const flow::FlowConfig& cfg, typename E::H u0,
                                     typename E::H context) {
    using H = typename E::H;
    const int batch = eng.val(u0).rows();
    const int d = cfg.dim;
    const int K = cfg.bins;
    const double B = cfg.tail;
    const H ut = eng.constant(detail::upper_tri_ones(K));
    const H ones_col = eng.constant(ad::Tensor({batch, 1}, 1.0));
    const H neg_b_col = eng.constant(ad::Tensor({batch, 1}, -B));

    H u = u0;
    H log_det = eng.constant(ad::Tensor({batch}, 0.0));
    for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
        const std::vector<int> order = cfg.block_order(static_cast<int>(bi));
        std::vector<H> out_cols(d);
        std::vector<H> in_cols;
        in_cols.reserve(d);
        for (int p = 0; p < d; ++p) {
            const int j = order[p];
            const H ucol = eng.slice_cols(u, j, j + 1);
            H cond_in = context;
            if (p > 0) {
                std::vector<H> parts = in_cols;
                parts.push_back(context);
                cond_in = eng.concat(parts, 1);
            }
            const auto& cw = blocks[bi][p];
            H hid = eng.tanh(eng.add(eng.matmul(cond_in, cw.w1), cw.b1));
            H raw = eng.add(eng.matmul(hid, cw.w2), cw.b2);

            H wfrac = eng.affine(eng.softmax(eng.slice_cols(raw, 0, K), 1), 1.0 - K * cfg.min_bin,
                                 cfg.min_bin);
            H hfrac = eng.affine(eng.softmax(eng.slice_cols(raw, K, 2 * K), 1), 1.0 - K * cfg.min_bin,
                                 cfg.min_bin);
            H widths = eng.affine(wfrac, 2.0 * B, 0.0);
            H heights = eng.affine(hfrac, 2.0 * B, 0.0);
            H kx = eng.concat({neg_b_col, eng.affine(eng.matmul(widths, ut), 1.0, -B)}, 1);
            H ky = eng.concat({neg_b_col, eng.affine(eng.matmul(heights, ut), 1.0, -B)}, 1);
            H dint = eng.affine(
                eng.softplus(eng.affine(eng.slice_cols(raw, 2 * K, 3 * K - 1), 1.0, cfg.deriv_shift())),
                1.0, cfg.min_deriv);
            H kd = eng.concat({ones_col, dint, ones_col}, 1);

            H uvec = eng.reshape(ucol, {batch});
            // tails are the identity; mask keeps gradients only for the
            // in-range rows, whose spline is evaluated at a safe input
            const ad::Tensor& uval = eng.val(uvec);
            ad::Tensor mask({batch});
            for (int i = 0; i < batch; ++i) mask[i] = std::abs(uval[i]) < B ? 1.0 : 0.0;
            ad::Tensor inv_mask({batch});
            for (int i = 0; i < batch; ++i) inv_mask[i] = 1.0 - mask[i];
            H m = eng.constant(mask);
            H m1 = eng.constant(inv_mask);
            H u_in = eng.mul(uvec, m);

            const ad::Tensor& uin_val = eng.val(u_in);
            const ad::Tensor& kx_val = eng.val(kx);
            std::vector<int> idx(batch), idx1(batch);
            for (int i = 0; i < batch; ++i) {
                int k = 0;
                while (k < K - 1 && uin_val[static_cast<std::size_t>(i)] >= kx_val.at(i, k + 1)) ++k;
                idx[i] = k;
                idx1[i] = k + 1;
            }
            H xk = eng.gather_rows(kx, idx);
            H xk1 = eng.gather_rows(kx, idx1);
            H yk = eng.gather_rows(ky, idx);
            H yk1 = eng.gather_rows(ky, idx1);
            H dk = eng.gather_rows(kd, idx);
            H dk1 = eng.gather_rows(kd, idx1);

            H wk = eng.sub(xk1, xk);
            H hk = eng.sub(yk1, yk);
            H sl = eng.div(hk, wk);
            H xi = eng.div(eng.sub(u_in, xk), wk);
            H onem = eng.affine(xi, -1.0, 1.0);
            H xi1 = eng.mul(xi, onem);
            H xi2 = eng.mul(xi, xi);
            H tsum = eng.sub(eng.add(dk1, dk), eng.affine(sl, 2.0, 0.0));
            H denom = eng.add(sl, eng.mul(tsum, xi1));
            H v_in = eng.add(yk, eng.div(eng.mul(hk, eng.add(eng.mul(sl, xi2), eng.mul(dk, xi1))), denom));
            H dnum = eng.add(eng.add(eng.mul(dk1, xi2), eng.affine(eng.mul(sl, xi1), 2.0, 0.0)),
                             eng.mul(dk, eng.mul(onem, onem)));
            H deriv = eng.div(eng.mul(eng.mul(sl, sl), dnum), eng.mul(denom, denom));

            H v = eng.add(eng.mul(v_in, m), eng.mul(uvec, m1));
            log_det = eng.add(log_det, eng.mul(eng.log(deriv), m));
            out_cols[j] = eng.reshape(v, {batch, 1});
            in_cols.push_back(ucol);
        }
        u = eng.concat(out_cols, 1);
    }
    return {u, log_det};
}

// log p(x | context) for a batch of already-clamped x in (0,1)^d.
// Returns a [batch] handle of per-row log densities.
template <class E>
typename E::H log_prob_graph(E& eng, const ModelHandles<typename E::H>& mh, const ModelConfig& cfg,
                             const ad::Tensor& x_clamped, typename E::H context) {
    using H = typename E::H;
    const int batch = x_clamped.rows();
    const int d = cfg.dim;
    ad::Tensor u0({batch, d});
    ad::Tensor logit_ld({batch});
    for (int i = 0; i < batch; ++i) {
        double acc = 0.0;
        for (int j = 0; j < d; ++j) {
            const double xv = x_clamped.at(i, j);
            require(xv > 0.0 && xv < 1.0, "log_prob: x must lie strictly inside (0,1)");
            u0.at(i, j) = std::log(xv / (1.0 - xv));
            acc -= std::log(xv * (1.0 - xv));
        }
        logit_ld[static_cast<std::size_t>(i)] = acc;
    }
    auto tr = flow_transform_graph(eng, mh.flow, cfg.flow, eng.constant(u0), context);
    H zz = eng.sum_axis(eng.mul(tr.z, tr.z), 1);
    H base = eng.affine(zz, -0.5, -0.5 * d * std::log(2.0 * M_PI));
    return eng.add(eng.add(base, tr.log_det), eng.constant(logit_ld));
}

// --- raw-path inference (no tape) ---

std::vector<double> encode_raw(const Model& m, const Dataset& ds);

// q posterior samples; one encoder pass is assumed done by the caller.
std::vector<std::vector<double>> sample_raw(const Model& m, const std::vector<double>& context,
                                            int q, Rng& rng);

// z -> x with log|det dx/dz|
std::pair<std::vector<double>, double> flow_forward_raw(const Model& m, const std::vector<double>& z,
                                                        const std::vector<double>& context);

// x -> z with log|det dz/dx|; errors if x touches the boundary
std::pair<std::vector<double>, double> flow_inverse_raw(const Model& m, const std::vector<double>& x,
                                                        const std::vector<double>& context);

double log_prob_raw(const Model& m, const std::vector<double>& x, const std::vector<double>& context);

}  // namespace fibo::model

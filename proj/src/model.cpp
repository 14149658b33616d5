#include "fibo/model.hpp"

#include <cmath>

namespace fibo::model {

ModelConfig default_model_config(int dim) {
    require(dim >= 1, "model: dim must be positive");
    ModelConfig cfg;
    cfg.dim = dim;
    cfg.enc.dim = dim;
    cfg.enc.hidden = 64;
    cfg.enc.width = 64;
    cfg.enc.context_dim = default_context_dim(dim);
    cfg.enc.attention = false;
    cfg.flow.dim = dim;
    cfg.flow.blocks = flow::default_blocks(dim);
    cfg.flow.bins = 8;
    cfg.flow.tail = 3.0;
    cfg.flow.cond_hidden = 64;
    return cfg;
}

Model init_model(const ModelConfig& cfg, std::uint64_t seed) {
    require(cfg.dim == cfg.enc.dim && cfg.dim == cfg.flow.dim, "model: inconsistent dims");
    Model m;
    m.cfg = cfg;
    Rng rng = Rng(seed).derive(0x1417);
    auto randn = [&](int r, int c, double scale) {
        ad::Tensor t({r, c});
        for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.normal() * scale;
        return t;
    };
    const int in = cfg.enc.in_features();
    m.params.add("enc.w1", randn(in, cfg.enc.hidden, 1.0 / std::sqrt(double(in))));
    m.params.add("enc.b1", ad::Tensor({cfg.enc.hidden}));
    m.params.add("enc.w2", randn(cfg.enc.hidden, cfg.enc.width, 1.0 / std::sqrt(double(cfg.enc.hidden))));
    m.params.add("enc.b2", ad::Tensor({cfg.enc.width}));
    if (cfg.enc.attention) {
        const double s = 1.0 / std::sqrt(double(cfg.enc.width));
        m.params.add("enc.wq", randn(cfg.enc.width, cfg.enc.width, s));
        m.params.add("enc.wk", randn(cfg.enc.width, cfg.enc.width, s));
        m.params.add("enc.wv", randn(cfg.enc.width, cfg.enc.width, s));
    }
    m.params.add("enc.wp", randn(cfg.enc.width, cfg.enc.context_dim, 1.0 / std::sqrt(double(cfg.enc.width))));
    m.params.add("enc.bp", ad::Tensor({cfg.enc.context_dim}));
    const int np = cfg.flow.spline_param_count();
    for (int bi = 0; bi < cfg.flow.blocks; ++bi) {
        for (int p = 0; p < cfg.dim; ++p) {
            const int cin = p + cfg.enc.context_dim;
            const std::string prefix = "flow.b" + std::to_string(bi) + ".p" + std::to_string(p);
            m.params.add(prefix + ".w1", randn(cin, cfg.flow.cond_hidden, 1.0 / std::sqrt(double(cin))));
            m.params.add(prefix + ".b1", ad::Tensor({cfg.flow.cond_hidden}));
            // zero output layer: the flow starts as the identity
            m.params.add(prefix + ".w2", ad::Tensor({cfg.flow.cond_hidden, np}));
            m.params.add(prefix + ".b2", ad::Tensor({np}));
        }
    }
    return m;
}

std::vector<double> encode_raw(const Model& m, const Dataset& ds) {
    ad::RawEngine eng;
    auto mh = bind_model(eng, m);
    ad::Tensor c = encode_graph(eng, mh.enc, m.cfg.enc, ds);
    return c.vals();
}

namespace {

// plain conditioner evaluation used by the sampling path
void cond_eval(const ad::Tensor& w1, const ad::Tensor& b1, const ad::Tensor& w2, const ad::Tensor& b2,
               const double* prec, int n_prec, const std::vector<double>& ctx,
               std::vector<double>& raw_out) {
    const int n_in = w1.rows();
    const int hidden = w1.cols();
    const int n_out = w2.cols();
    require(n_in == n_prec + static_cast<int>(ctx.size()), "flow: context dimension mismatch");
    std::vector<double> h(b1.vals().begin(), b1.vals().end());
    for (int i = 0; i < n_in; ++i) {
        const double x = i < n_prec ? prec[i] : ctx[i - n_prec];
        const double* wrow = w1.data() + static_cast<std::size_t>(i) * hidden;
        for (int j = 0; j < hidden; ++j) h[j] += x * wrow[j];
    }
    for (auto& v : h) v = std::tanh(v);
    raw_out.assign(b2.vals().begin(), b2.vals().end());
    for (int i = 0; i < hidden; ++i) {
        const double* wrow = w2.data() + static_cast<std::size_t>(i) * n_out;
        for (int j = 0; j < n_out; ++j) raw_out[j] += h[i] * wrow[j];
    }
    ad::kernels::add_flops(2ull * (static_cast<std::uint64_t>(n_in) * hidden +
                                   static_cast<std::uint64_t>(hidden) * n_out));
}

struct FlowParamsRef {
    const ad::Tensor *w1, *b1, *w2, *b2;
};

FlowParamsRef cond_params(const Model& m, int block, int pos) {
    const std::string prefix = "flow.b" + std::to_string(block) + ".p" + std::to_string(pos);
    const auto& params = m.params;
    return {&params.by_name(prefix + ".w1"), &params.by_name(prefix + ".b1"),
            &params.by_name(prefix + ".w2"), &params.by_name(prefix + ".b2")};
}

}  // namespace

std::pair<std::vector<double>, double> flow_forward_raw(const Model& m, const std::vector<double>& z,
                                                        const std::vector<double>& context) {
    const auto& cfg = m.cfg.flow;
    const int d = cfg.dim;
    require(static_cast<int>(z.size()) == d, "flow forward: latent dimension mismatch");
    require(static_cast<int>(context.size()) == m.cfg.enc.context_dim,
            "flow forward: context dimension mismatch");
    for (double v : context) require(is_finite(v), "flow forward: non-finite context");

    std::vector<double> u(z);
    double log_det = 0.0;
    std::vector<double> raw(cfg.spline_param_count());
    std::vector<double> prec(d);
    for (int bi = cfg.blocks - 1; bi >= 0; --bi) {
        const std::vector<int> order = cfg.block_order(bi);
        std::vector<double> a(d, 0.0);
        for (int p = 0; p < d; ++p) {
            const int j = order[p];
            const auto w = cond_params(m, bi, p);
            cond_eval(*w.w1, *w.b1, *w.w2, *w.b2, prec.data(), p, context, raw);
            const flow::Spline1D s = flow::spline_from_raw(raw, cfg);
            const flow::SplineEval e = flow::rq_spline_inverse(s, u[j]);
            require(is_finite(e.v) && e.deriv > 0.0, "flow forward: non-finite spline inverse");
            a[j] = e.v;
            prec[p] = a[j];
            log_det -= std::log(e.deriv);
        }
        u = a;
    }
    std::vector<double> x(d);
    for (int j = 0; j < d; ++j) {
        const double sx = ad::kernels::sigmoid1(u[j]);
        x[j] = std::min(std::max(sx, 1e-15), 1.0 - 1e-15);
        log_det += std::log(sx * (1.0 - sx));
    }
    require(is_finite(log_det), "flow forward: non-finite log-det");
    return {std::move(x), log_det};
}

std::vector<std::vector<double>> sample_raw(const Model& m, const std::vector<double>& context,
                                            int q, Rng& rng) {
    require(q >= 1, "sample: q must be >= 1");
    const auto& cfg = m.cfg.flow;
    const int d = cfg.dim;
    require(static_cast<int>(context.size()) == m.cfg.enc.context_dim,
            "sample: context dimension mismatch");

    // position 0 conditions on the context alone, so its spline is shared
    // by every sample of this call
    std::vector<flow::Spline1D> first_splines(cfg.blocks);
    std::vector<double> raw(cfg.spline_param_count());
    for (int bi = 0; bi < cfg.blocks; ++bi) {
        const auto w = cond_params(m, bi, 0);
        cond_eval(*w.w1, *w.b1, *w.w2, *w.b2, nullptr, 0, context, raw);
        first_splines[bi] = flow::spline_from_raw(raw, cfg);
    }

    std::vector<std::vector<double>> out;
    out.reserve(q);
    std::vector<double> prec(d);
    for (int s = 0; s < q; ++s) {
        std::vector<double> u(d);
        for (auto& v : u) v = rng.normal();
        for (int bi = cfg.blocks - 1; bi >= 0; --bi) {
            const std::vector<int> order = cfg.block_order(bi);
            std::vector<double> a(d, 0.0);
            for (int p = 0; p < d; ++p) {
                const int j = order[p];
                flow::SplineEval e;
                if (p == 0) {
                    e = flow::rq_spline_inverse(first_splines[bi], u[j]);
                } else {
                    const auto w = cond_params(m, bi, p);
                    cond_eval(*w.w1, *w.b1, *w.w2, *w.b2, prec.data(), p, context, raw);
                    e = flow::rq_spline_inverse(flow::spline_from_raw(raw, cfg), u[j]);
                }
                a[j] = e.v;
                prec[p] = a[j];
            }
            u = a;
        }
        std::vector<double> x(d);
        for (int j = 0; j < d; ++j)
            x[j] = std::min(std::max(ad::kernels::sigmoid1(u[j]), 1e-15), 1.0 - 1e-15);
        out.push_back(std::move(x));
    }
    return out;
}

std::pair<std::vector<double>, double> flow_inverse_raw(const Model& m, const std::vector<double>& x,
                                                        const std::vector<double>& context) {
    const int d = m.cfg.dim;
    require(static_cast<int>(x.size()) == d, "flow inverse: dimension mismatch");
    for (double v : x)
        require(v > 0.0 && v < 1.0, "flow inverse: x on the unit-cube boundary (clamp first)");
    ad::RawEngine eng;
    auto mh = bind_model(eng, m);
    ad::Tensor xt({1, d});
    double logit_ld = 0.0;
    for (int j = 0; j < d; ++j) {
        xt.at(0, j) = std::log(x[j] / (1.0 - x[j]));
        logit_ld -= std::log(x[j] * (1.0 - x[j]));
    }
    ad::Tensor ctx({1, m.cfg.enc.context_dim});
    require(static_cast<int>(context.size()) == m.cfg.enc.context_dim,
            "flow inverse: context dimension mismatch");
    for (int i = 0; i < m.cfg.enc.context_dim; ++i) ctx.at(0, i) = context[i];
    auto tr = flow_transform_graph(eng, mh.flow, m.cfg.flow, eng.constant(xt), eng.constant(ctx));
    std::vector<double> z(d);
    for (int j = 0; j < d; ++j) z[j] = tr.z.at(0, j);
    return {std::move(z), tr.log_det[0] + logit_ld};
}

double log_prob_raw(const Model& m, const std::vector<double>& x, const std::vector<double>& context) {
    auto [z, ld] = flow_inverse_raw(m, x, context);
    double zz = 0.0;
    for (double v : z) zz += v * v;
    return -0.5 * zz - 0.5 * m.cfg.dim * std::log(2.0 * M_PI) + ld;
}

}  // namespace fibo::model

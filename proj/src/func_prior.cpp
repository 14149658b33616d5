#include "fibo/func_prior.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "fibo/io_util.hpp"

namespace fibo::prior {

using nlohmann::json;

void PriorHyperparams::validate() const {
    require(dim >= 1, "prior: dim must be positive");
    require(num_features >= 1, "prior: num_features must be positive");
    require(0 < lengthscale_lo && lengthscale_lo < lengthscale_hi, "prior: bad lengthscale range");
    require(0 < signal_var_lo && signal_var_lo < signal_var_hi, "prior: bad signal variance range");
}

FunctionSample sample_function(const PriorHyperparams& hp, Rng& rng) {
    hp.validate();
    FunctionSample fs;
    fs.dim = hp.dim;
    const int m = hp.num_features;
    fs.lengthscales.resize(hp.dim);
    for (auto& l : fs.lengthscales) l = rng.uniform(hp.lengthscale_lo, hp.lengthscale_hi);
    fs.gamma2 = rng.uniform(hp.signal_var_lo, hp.signal_var_hi);
    fs.W.resize(static_cast<std::size_t>(m) * hp.dim);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < hp.dim; ++j)
            fs.W[static_cast<std::size_t>(i) * hp.dim + j] = rng.normal() / fs.lengthscales[j];
    fs.b.resize(m);
    for (auto& v : fs.b) v = rng.uniform(0.0, 2.0 * M_PI);
    fs.beta.resize(m);
    for (auto& v : fs.beta) v = rng.normal();
    return fs;
}

std::vector<double> FunctionSample::features(std::span<const double> x) const {
    require(static_cast<int>(x.size()) == dim, "features: dimension mismatch");
    const int m = num_features();
    const double scale = std::sqrt(2.0 * gamma2 / m);
    std::vector<double> phi(m);
    for (int i = 0; i < m; ++i) {
        double t = b[i];
        const double* wrow = W.data() + static_cast<std::size_t>(i) * dim;
        for (int j = 0; j < dim; ++j) t += wrow[j] * x[j];
        phi[i] = scale * std::cos(t);
    }
    return phi;
}

EvalResult eval_function(const FunctionSample& fs, std::span<const double> x) {
    require(static_cast<int>(x.size()) == fs.dim, "eval_function: dimension mismatch, expected " +
                                                      std::to_string(fs.dim) + " got " +
                                                      std::to_string(x.size()));
    const int m = fs.num_features();
    const double scale = std::sqrt(2.0 * fs.gamma2 / m);
    double value = 0.0;
    std::vector<double> grad(fs.dim, 0.0);
    for (int i = 0; i < m; ++i) {
        double t = fs.b[i];
        const double* wrow = fs.W.data() + static_cast<std::size_t>(i) * fs.dim;
        for (int j = 0; j < fs.dim; ++j) t += wrow[j] * x[j];
        const double c = std::cos(t) * fs.beta[i];
        const double s = std::sin(t) * fs.beta[i];
        value += c;
        for (int j = 0; j < fs.dim; ++j) grad[j] -= s * wrow[j];
    }
    value *= scale;
    for (auto& g : grad) g *= scale;
    return {value, std::move(grad)};
}

double eval_value(const FunctionSample& fs, std::span<const double> x) {
    const int m = fs.num_features();
    const double scale = std::sqrt(2.0 * fs.gamma2 / m);
    double value = 0.0;
    for (int i = 0; i < m; ++i) {
        double t = fs.b[i];
        const double* wrow = fs.W.data() + static_cast<std::size_t>(i) * fs.dim;
        for (int j = 0; j < fs.dim; ++j) t += wrow[j] * x[j];
        value += std::cos(t) * fs.beta[i];
    }
    return scale * value;
}

int default_restarts(int dim) { return dim <= 2 ? 32 : 64; }

namespace {

void clamp01(std::vector<double>& x) {
    for (auto& v : x) v = std::clamp(v, 0.0, 1.0);
}

double projected_grad_norm(const std::vector<double>& x, const std::vector<double>& g) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double gi = g[i];
        if ((x[i] <= 0.0 && gi < 0.0) || (x[i] >= 1.0 && gi > 0.0)) gi = 0.0;
        s += gi * gi;
    }
    return std::sqrt(s);
}

}  // namespace

Optimum ascend_from(const FunctionSample& fs, std::span<const double> start,
                    const AscentOptions& opts) {
    std::vector<double> x(start.begin(), start.end());
    clamp01(x);
    EvalResult cur = eval_function(fs, x);
    require(is_finite(cur.value), "find_optimum: non-finite function value");
    double alpha = 1.0;
    for (int iter = 0; iter < opts.max_iters; ++iter) {
        if (projected_grad_norm(x, cur.gradient) < opts.grad_tol) break;
        double a = std::min(1.0, alpha * 4.0);
        bool moved = false;
        std::vector<double> xn(x.size());
        for (int bt = 0; bt < opts.max_backtracks; ++bt) {
            double dot = 0.0;
            for (std::size_t j = 0; j < x.size(); ++j) {
                xn[j] = std::clamp(x[j] + a * cur.gradient[j], 0.0, 1.0);
                dot += cur.gradient[j] * (xn[j] - x[j]);
            }
            if (dot > 0.0) {
                EvalResult trial = eval_function(fs, xn);
                require(is_finite(trial.value), "find_optimum: non-finite function value during ascent");
                if (trial.value >= cur.value + opts.armijo_c1 * dot) {
                    x = xn;
                    cur = std::move(trial);
                    alpha = a;
                    moved = true;
                    break;
                }
            }
            a *= 0.5;
        }
        if (!moved) break;
    }
    return {std::move(x), cur.value};
}

Optimum find_optimum(const FunctionSample& fs, int restarts, Rng& rng, const AscentOptions& opts) {
    require(restarts >= 1, "find_optimum: restarts must be >= 1");
    const int d = fs.dim;
    const int pool = restarts * std::max(1, opts.probes_per_restart);
    std::vector<double> probe_x(static_cast<std::size_t>(pool) * d);
    std::vector<double> probe_v(pool);
    std::vector<double> xbuf(d);
    for (int p = 0; p < pool; ++p) {
        for (int j = 0; j < d; ++j) {
            xbuf[j] = rng.uniform();
            probe_x[static_cast<std::size_t>(p) * d + j] = xbuf[j];
        }
        probe_v[p] = eval_value(fs, xbuf);
        require(is_finite(probe_v[p]), "find_optimum: non-finite function value at probe");
    }
    std::vector<int> order(pool);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return probe_v[a] > probe_v[b]; });

    Optimum best{{}, -std::numeric_limits<double>::infinity()};
    for (int r = 0; r < restarts; ++r) {
        const double* sx = probe_x.data() + static_cast<std::size_t>(order[r]) * d;
        Optimum o = ascend_from(fs, {sx, static_cast<std::size_t>(d)}, opts);
        if (o.value > best.value) best = std::move(o);
    }
    return best;
}

Dataset sample_dataset(const FunctionSample& fs, int n, Rng& rng) {
    require(n >= 1, "sample_dataset: n must be >= 1");
    Dataset ds;
    ds.dim = fs.dim;
    ds.xs.reserve(static_cast<std::size_t>(n) * fs.dim);
    ds.ys.reserve(n);
    std::vector<double> x(fs.dim);
    for (int i = 0; i < n; ++i) {
        for (auto& v : x) v = rng.uniform();
        ds.xs.insert(ds.xs.end(), x.begin(), x.end());
        ds.ys.push_back(eval_value(fs, x));
    }
    return ds;
}

int bin_index(std::span<const double> x, int bins_per_dim) {
    int idx = 0;
    int stride = 1;
    for (double v : x) {
        int b = static_cast<int>(std::floor(v * bins_per_dim));
        b = std::clamp(b, 0, bins_per_dim - 1);
        idx += b * stride;
        stride *= bins_per_dim;
    }
    return idx;
}

namespace {

TrainingPair make_candidate(const FunctionSample& fs, const CorpusOptions& opts, Rng& rng,
                            int restarts) {
    TrainingPair pair;
    Optimum opt = find_optimum(fs, restarts, rng);
    const int n = static_cast<int>(rng.uniform_int(opts.n_min, opts.n_max));
    pair.data = sample_dataset(fs, n, rng);
    // a dataset point may beat the located optimum; ascending from it
    // restores f(x*) >= max(y) since the ascent is monotone
    const auto max_it = std::max_element(pair.data.ys.begin(), pair.data.ys.end());
    if (*max_it > opt.value) {
        const int i = static_cast<int>(max_it - pair.data.ys.begin());
        Optimum fixed = ascend_from(fs, pair.data.x(i));
        if (fixed.value > opt.value) opt = std::move(fixed);
    }
    pair.x_star = std::move(opt.x);
    pair.y_star = opt.value;
    return pair;
}

}  // namespace

Corpus generate_corpus(const PriorHyperparams& hp, const CorpusOptions& opts, const Rng& rng) {
    return generate_corpus(hp, opts, rng, nullptr);
}

Corpus generate_corpus(const PriorHyperparams& hp, const CorpusOptions& opts, const Rng& rng,
                       BinReport* report) {
    hp.validate();
    require(opts.count >= 1, "generate_corpus: count must be >= 1");
    require(1 <= opts.n_min && opts.n_min <= opts.n_max, "generate_corpus: need 1 <= n_min <= n_max");
    require(opts.bins_per_dim >= 1, "generate_corpus: bins_per_dim must be >= 1");

    const int restarts = opts.restarts > 0 ? opts.restarts : default_restarts(hp.dim);
    std::uint64_t total_bins = 1;
    for (int j = 0; j < hp.dim; ++j) total_bins *= static_cast<std::uint64_t>(opts.bins_per_dim);
    const int quota =
        static_cast<int>((static_cast<std::uint64_t>(opts.count) + total_bins - 1) / total_bins);
    const std::uint64_t budget =
        opts.draw_budget > 0 ? opts.draw_budget : 250ull * static_cast<std::uint64_t>(opts.count);
    const int workers = std::max(1, opts.workers);

    Corpus corpus;
    corpus.dim = hp.dim;
    corpus.pairs.reserve(opts.count);
    std::vector<int> fills(total_bins, 0);

    // Candidate i is a pure function of (master seed, i), so acceptance in
    // index order gives the same corpus for any worker count.
    const std::uint64_t block = static_cast<std::uint64_t>(std::max(16, workers * 8));
    std::uint64_t next = 0;
    std::vector<TrainingPair> cand(block);
    while (static_cast<int>(corpus.pairs.size()) < opts.count && next < budget) {
        const std::uint64_t gen = std::min(block, budget - next);
        auto worker_fn = [&](int w) {
            for (std::uint64_t j = w; j < gen; j += static_cast<std::uint64_t>(workers)) {
                Rng crng = rng.derive(next + j);
                FunctionSample fs = sample_function(hp, crng);
                cand[j] = make_candidate(fs, opts, crng, restarts);
            }
        };
        if (workers == 1) {
            worker_fn(0);
        } else {
            std::vector<std::thread> threads;
            threads.reserve(workers);
            for (int w = 0; w < workers; ++w) threads.emplace_back(worker_fn, w);
            for (auto& t : threads) t.join();
        }
        for (std::uint64_t j = 0; j < gen && static_cast<int>(corpus.pairs.size()) < opts.count; ++j) {
            const int bin = bin_index(cand[j].x_star, opts.bins_per_dim);
            if (fills[bin] < quota) {
                ++fills[bin];
                corpus.pairs.push_back(std::move(cand[j]));
            }
        }
        next += gen;
    }

    if (report) {
        report->bins_per_dim = opts.bins_per_dim;
        report->fills = fills;
        report->draws = next;
    }
    if (static_cast<int>(corpus.pairs.size()) < opts.count) {
        std::string msg = "generate_corpus: draw budget " + std::to_string(budget) +
                          " exhausted with " + std::to_string(corpus.pairs.size()) + "/" +
                          std::to_string(opts.count) + " pairs; per-bin fills:";
        for (std::size_t i = 0; i < fills.size(); ++i)
            msg += " b" + std::to_string(i) + "=" + std::to_string(fills[i]) + "/" + std::to_string(quota);
        fail(msg);
    }
    return corpus;
}

void write_corpus_stream(std::ostream& os, const Corpus& corpus) {
    io::write_bytes(os, "FIBC", 4);
    io::write_u32(os, 1);
    io::write_u32(os, static_cast<std::uint32_t>(corpus.dim));
    io::write_u64(os, corpus.pairs.size());
    for (const auto& p : corpus.pairs) {
        for (double v : p.x_star) io::write_f64(os, v);
        io::write_f64(os, p.y_star);
        io::write_u32(os, static_cast<std::uint32_t>(p.data.size()));
        for (int i = 0; i < p.data.size(); ++i) {
            for (double v : p.data.x(i)) io::write_f64(os, v);
            io::write_f64(os, p.data.ys[i]);
        }
    }
}

void write_corpus(const std::string& path, const Corpus& corpus) {
    io::atomic_write(path, [&](std::ostream& os) { write_corpus_stream(os, corpus); });
}

std::uint64_t corpus_content_hash(const Corpus& corpus) {
    std::ostringstream ss;
    write_corpus_stream(ss, corpus);
    const std::string bytes = ss.str();
    return io::fnv1a64(bytes.data(), bytes.size());
}

Corpus read_corpus(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    require(is.good(), "cannot open corpus: " + path);
    char magic[4];
    io::read_bytes(is, magic, 4);
    require(std::string(magic, 4) == "FIBC", "not a corpus file (bad magic): " + path);
    const std::uint32_t version = io::read_u32(is);
    require(version == 1, "unsupported corpus version " + std::to_string(version));
    Corpus corpus;
    corpus.dim = static_cast<int>(io::read_u32(is));
    const std::uint64_t count = io::read_u64(is);
    corpus.pairs.resize(count);
    for (auto& p : corpus.pairs) {
        p.x_star.resize(corpus.dim);
        for (auto& v : p.x_star) v = io::read_f64(is);
        p.y_star = io::read_f64(is);
        const std::uint32_t n = io::read_u32(is);
        p.data.dim = corpus.dim;
        p.data.xs.resize(static_cast<std::size_t>(n) * corpus.dim);
        p.data.ys.resize(n);
        for (std::uint32_t i = 0; i < n; ++i) {
            for (int j = 0; j < corpus.dim; ++j)
                p.data.xs[static_cast<std::size_t>(i) * corpus.dim + j] = io::read_f64(is);
            p.data.ys[i] = io::read_f64(is);
        }
    }
    return corpus;
}

void write_corpus_jsonl(const std::string& path, const Corpus& corpus) {
    io::atomic_write(path, [&](std::ostream& os) {
        for (const auto& p : corpus.pairs) {
            json rec;
            rec["x_star"] = p.x_star;
            rec["y_star"] = p.y_star;
            json data = json::array();
            for (int i = 0; i < p.data.size(); ++i) {
                const auto x = p.data.x(i);
                data.push_back({{"x", std::vector<double>(x.begin(), x.end())}, {"y", p.data.ys[i]}});
            }
            rec["data"] = std::move(data);
            os << rec.dump() << "\n";
        }
    });
}

std::string function_to_json(const FunctionSample& fs) {
    json j;
    j["dim"] = fs.dim;
    j["num_features"] = fs.num_features();
    j["gamma2"] = fs.gamma2;
    j["lengthscales"] = fs.lengthscales;
    j["W"] = fs.W;
    j["b"] = fs.b;
    j["beta"] = fs.beta;
    return j.dump();
}

FunctionSample function_from_json(const std::string& json_text) {
    const json j = json::parse(json_text);
    FunctionSample fs;
    fs.dim = j.at("dim").get<int>();
    fs.gamma2 = j.at("gamma2").get<double>();
    fs.lengthscales = j.at("lengthscales").get<std::vector<double>>();
    fs.W = j.at("W").get<std::vector<double>>();
    fs.b = j.at("b").get<std::vector<double>>();
    fs.beta = j.at("beta").get<std::vector<double>>();
    require(fs.W.size() == fs.b.size() * fs.dim && fs.b.size() == fs.beta.size(),
            "function_from_json: inconsistent array sizes");
    return fs;
}

}  // namespace fibo::prior

#include "fibo/bo_loop.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "fibo/io_util.hpp"

namespace fibo::bo {

using nlohmann::json;

std::vector<std::vector<double>> fibo_suggest(const model::Model& m, const Dataset& data, int q,
                                              Rng& rng) {
    require(data.size() > 0, "fibo_suggest: empty dataset");
    require(data.dim == m.cfg.dim, "fibo_suggest: dataset dimension " + std::to_string(data.dim) +
                                       " does not match checkpoint dimension " +
                                       std::to_string(m.cfg.dim));
    const std::vector<double> context = model::encode_raw(m, data);
    return model::sample_raw(m, context, q, rng);
}

std::vector<std::vector<double>> random_suggest(int dim, int q, Rng& rng) {
    require(dim >= 1 && q >= 1, "random_suggest: bad arguments");
    std::vector<std::vector<double>> out(q, std::vector<double>(dim));
    for (auto& x : out)
        for (auto& v : x) v = rng.uniform();
    return out;
}

namespace {

// dense Cholesky, lower-triangular in place
void cholesky(std::vector<double>& a, int n) {
    for (int j = 0; j < n; ++j) {
        double d = a[static_cast<std::size_t>(j) * n + j];
        for (int k = 0; k < j; ++k) {
            const double v = a[static_cast<std::size_t>(j) * n + k];
            d -= v * v;
        }
        require(d > 0.0, "gp_ts: posterior covariance not positive definite");
        const double dj = std::sqrt(d);
        a[static_cast<std::size_t>(j) * n + j] = dj;
        for (int i = j + 1; i < n; ++i) {
            double s = a[static_cast<std::size_t>(i) * n + j];
            for (int k = 0; k < j; ++k)
                s -= a[static_cast<std::size_t>(i) * n + k] * a[static_cast<std::size_t>(j) * n + k];
            a[static_cast<std::size_t>(i) * n + j] = s / dj;
        }
    }
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) a[static_cast<std::size_t>(i) * n + j] = 0.0;
}

void solve_lower(const std::vector<double>& l, int n, std::vector<double>& x) {
    for (int i = 0; i < n; ++i) {
        double s = x[i];
        for (int k = 0; k < i; ++k) s -= l[static_cast<std::size_t>(i) * n + k] * x[k];
        x[i] = s / l[static_cast<std::size_t>(i) * n + i];
    }
}

void solve_lower_t(const std::vector<double>& l, int n, std::vector<double>& x) {
    for (int i = n - 1; i >= 0; --i) {
        double s = x[i];
        for (int k = i + 1; k < n; ++k) s -= l[static_cast<std::size_t>(k) * n + i] * x[k];
        x[i] = s / l[static_cast<std::size_t>(i) * n + i];
    }
}

}  // namespace

GpTsSuggester::GpTsSuggester(const prior::PriorHyperparams& hp, const GpTsOptions& opts, Rng& rng)
    : opts_(opts) {
    hp.validate();
    basis_.dim = hp.dim;
    basis_.gamma2 = 0.5 * (hp.signal_var_lo + hp.signal_var_hi);
    basis_.lengthscales.assign(hp.dim, 0.5 * (hp.lengthscale_lo + hp.lengthscale_hi));
    const int m = opts.num_features;
    basis_.W.resize(static_cast<std::size_t>(m) * hp.dim);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < hp.dim; ++j)
            basis_.W[static_cast<std::size_t>(i) * hp.dim + j] = rng.normal() / basis_.lengthscales[j];
    basis_.b.resize(m);
    for (auto& v : basis_.b) v = rng.uniform(0.0, 2.0 * M_PI);
    basis_.beta.assign(m, 0.0);
}

GpTsSuggester::GpTsSuggester(prior::FunctionSample basis, const GpTsOptions& opts)
    : basis_(std::move(basis)), opts_(opts) {
    basis_.beta.assign(basis_.num_features(), 0.0);
}

std::vector<double> GpTsSuggester::sample_weights(const Dataset& data, Rng& rng) {
    require(data.size() > 0, "gp_ts: empty dataset");
    require(data.dim == basis_.dim, "gp_ts: dataset dimension mismatch");
    const int n = data.size();
    const int m = basis_.num_features();
    const double noise = opts_.noise;

    // A = I + Phi^T Phi / noise ; rhs = Phi^T y / noise
    std::vector<double> a(static_cast<std::size_t>(m) * m, 0.0);
    std::vector<double> rhs(m, 0.0);
    std::vector<double> phi;
    for (int i = 0; i < n; ++i) {
        phi = basis_.features(data.x(i));
        for (int r = 0; r < m; ++r) {
            const double pr = phi[r] / noise;
            rhs[r] += pr * data.ys[i];
            double* arow = a.data() + static_cast<std::size_t>(r) * m;
            for (int c = r; c < m; ++c) arow[c] += pr * phi[c];
        }
    }
    for (int r = 0; r < m; ++r) {
        a[static_cast<std::size_t>(r) * m + r] += 1.0;
        for (int c = r + 1; c < m; ++c)
            a[static_cast<std::size_t>(c) * m + r] = a[static_cast<std::size_t>(r) * m + c];
    }
    cholesky(a, m);
    // mean = A^-1 rhs
    std::vector<double> mean = rhs;
    solve_lower(a, m, mean);
    solve_lower_t(a, m, mean);
    // beta = mean + L^-T z gives cov A^-1
    std::vector<double> z(m);
    for (auto& v : z) v = rng.normal();
    solve_lower_t(a, m, z);
    for (int r = 0; r < m; ++r) z[r] += mean[r];
    return z;
}

std::vector<std::vector<double>> GpTsSuggester::suggest(const Dataset& data, int q, Rng& rng) {
    require(q >= 1, "gp_ts: q must be >= 1");
    std::vector<std::vector<double>> out;
    out.reserve(q);
    prior::FunctionSample draw = basis_;
    for (int s = 0; s < q; ++s) {
        draw.beta = sample_weights(data, rng);
        prior::Optimum opt = prior::find_optimum(draw, opts_.restarts, rng);
        out.push_back(std::move(opt.x));
    }
    return out;
}

std::vector<std::vector<double>> gp_ts_suggest(const Dataset& data, int q,
                                               const prior::PriorHyperparams& hp, double noise,
                                               Rng& rng) {
    GpTsOptions opts;
    opts.noise = noise;
    opts.num_features = hp.num_features;
    opts.restarts = prior::default_restarts(hp.dim);
    GpTsSuggester s(hp, opts, rng);
    return s.suggest(data, q, rng);
}

RunTrace run_bo(const Objective& objective, Suggester& suggester, const RunOptions& opts) {
    require(opts.dim >= 1, "run_bo: dim must be positive");
    require(opts.q >= 1, "run_bo: q must be positive");
    require(opts.total_evals >= opts.q && opts.total_evals % opts.q == 0,
            "run_bo: total evaluations (" + std::to_string(opts.total_evals) +
                ") must be the initial batch plus whole batches of q=" + std::to_string(opts.q));
    const int iterations = opts.total_evals / opts.q - 1;

    RunTrace trace;
    trace.objective_id = opts.objective_id;
    trace.method_id = suggester.id();
    trace.dim = opts.dim;
    trace.q = opts.q;
    trace.iterations = iterations;
    trace.total_evals = opts.total_evals;
    trace.seed = opts.seed;

    Rng rng = Rng(opts.seed).derive(0xB0);
    Dataset data;
    data.dim = opts.dim;
    double best = -std::numeric_limits<double>::infinity();

    auto eval_batch = [&](IterationRecord& rec) -> bool {
        rec.values.reserve(rec.batch.size());
        for (const auto& x : rec.batch) {
            const double y = objective(x);
            if (!is_finite(y)) {
                trace.error = "objective returned a non-finite value";
                trace.records.push_back(rec);
                return false;
            }
            rec.values.push_back(y);
            data.push(x, y);
            best = std::max(best, y);
        }
        rec.best_so_far = best;
        trace.records.push_back(rec);
        return true;
    };

    IterationRecord init;
    init.batch = random_suggest(opts.dim, opts.q, rng);
    if (!eval_batch(init)) return trace;

    for (int t = 0; t < iterations; ++t) {
        IterationRecord rec;
        const auto t0 = std::chrono::steady_clock::now();
        rec.batch = suggester.suggest(data, opts.q, rng);
        const auto t1 = std::chrono::steady_clock::now();
        if (opts.record_timing)
            rec.suggest_seconds = std::chrono::duration<double>(t1 - t0).count();
        require(static_cast<int>(rec.batch.size()) == opts.q, "run_bo: suggester returned wrong batch size");
        if (!eval_batch(rec)) return trace;
    }
    return trace;
}

std::vector<double> gap_series(const RunTrace& trace, double y_star) {
    require(!trace.records.empty(), "gap: empty trace");
    const auto& init = trace.records[0];
    require(!init.values.empty(), "gap: trace has no initial design");
    double y0 = init.values[0];
    for (double v : init.values) y0 = std::max(y0, v);
    require(y_star >= y0, "gap: y* below the best initial value");
    std::vector<double> series;
    series.reserve(trace.total_evals);
    double best = -std::numeric_limits<double>::infinity();
    const double denom = y_star - y0;
    for (const auto& rec : trace.records) {
        for (double y : rec.values) {
            best = std::max(best, y);
            double g;
            if (denom == 0.0) {
                g = 1.0;  // optimum attained during initialization
            } else {
                g = (best - y0) / denom;
            }
            series.push_back(std::clamp(g, 0.0, 1.0));
        }
    }
    return series;
}

double final_gap(const RunTrace& trace, double y_star) {
    const auto s = gap_series(trace, y_star);
    return s.back();
}

namespace {

json record_to_json(const IterationRecord& rec, int t) {
    json j;
    j["type"] = "iteration";
    j["t"] = t;
    j["batch"] = rec.batch;
    j["y"] = rec.values;
    j["best"] = rec.best_so_far;
    j["suggest_seconds"] = rec.suggest_seconds;
    return j;
}

}  // namespace

void write_trace_jsonl(const std::string& path, const RunTrace& trace) {
    io::atomic_write(path, [&](std::ostream& os) {
        json header;
        header["type"] = "header";
        header["objective"] = trace.objective_id;
        header["method"] = trace.method_id;
        header["dim"] = trace.dim;
        header["q"] = trace.q;
        header["iterations"] = trace.iterations;
        header["total_evals"] = trace.total_evals;
        header["seed"] = trace.seed;
        header["error"] = trace.error;
        os << header.dump() << "\n";
        for (std::size_t t = 0; t < trace.records.size(); ++t)
            os << record_to_json(trace.records[t], static_cast<int>(t)).dump() << "\n";
    });
}

RunTrace read_trace_jsonl(const std::string& path) {
    std::ifstream is(path);
    require(is.good(), "cannot open trace: " + path);
    RunTrace trace;
    std::string line;
    bool have_header = false;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const json j = json::parse(line);
        const std::string type = j.at("type").get<std::string>();
        if (type == "header") {
            trace.objective_id = j.at("objective").get<std::string>();
            trace.method_id = j.at("method").get<std::string>();
            trace.dim = j.at("dim").get<int>();
            trace.q = j.at("q").get<int>();
            trace.iterations = j.at("iterations").get<int>();
            trace.total_evals = j.at("total_evals").get<int>();
            trace.seed = j.at("seed").get<std::uint64_t>();
            trace.error = j.at("error").get<std::string>();
            have_header = true;
        } else if (type == "iteration") {
            IterationRecord rec;
            rec.batch = j.at("batch").get<std::vector<std::vector<double>>>();
            rec.values = j.at("y").get<std::vector<double>>();
            rec.best_so_far = j.at("best").get<double>();
            rec.suggest_seconds = j.at("suggest_seconds").get<double>();
            trace.records.push_back(std::move(rec));
        }
    }
    require(have_header, "trace has no header record: " + path);
    return trace;
}

void write_trace_csv(const std::string& path, const RunTrace& trace) {
    io::atomic_write(path, [&](std::ostream& os) {
        os << "iteration,eval_index,y,best,suggest_seconds\n";
        int eval_index = 0;
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t t = 0; t < trace.records.size(); ++t) {
            const auto& rec = trace.records[t];
            for (double y : rec.values) {
                ++eval_index;
                best = std::max(best, y);
                char buf[160];
                std::snprintf(buf, sizeof(buf), "%zu,%d,%.17g,%.17g,%.9f\n", t, eval_index, y, best,
                              rec.suggest_seconds);
                os << buf;
            }
        }
    });
}

}  // namespace fibo::bo

#pragma once

#include <span>
#include <string>
#include <vector>

#include "fibo/dataset.hpp"
#include "fibo/rng.hpp"

namespace fibo::prior {

struct PriorHyperparams {
    int dim = 1;
    int num_features = 512;
    double lengthscale_lo = 0.01;
    double lengthscale_hi = 5.0;
    double signal_var_lo = 1.0;
    double signal_var_hi = 2.0;

    void validate() const;
};

// One parametric draw from the approximate GP prior:
//   f(x) = sqrt(2*gamma2/m) * cos(W x + b) . beta
// with rows of W ~ N(0, diag(l^-2)), b ~ U(0, 2pi), beta ~ N(0, I).
struct FunctionSample {
    int dim = 0;
    std::vector<double> W;  // m x dim, row-major
    std::vector<double> b;  // m
    std::vector<double> beta;
    double gamma2 = 1.0;
    std::vector<double> lengthscales;

    int num_features() const { return static_cast<int>(b.size()); }

    // phi(x), length m; inner products of these approximate the RBF kernel
    std::vector<double> features(std::span<const double> x) const;
};

struct EvalResult {
    double value;
    std::vector<double> gradient;
};

struct Optimum {
    std::vector<double> x;
    double value;
};

struct TrainingPair {
    std::vector<double> x_star;
    double y_star;
    Dataset data;
};

struct Corpus {
    int dim = 0;
    std::vector<TrainingPair> pairs;
};

FunctionSample sample_function(const PriorHyperparams& hp, Rng& rng);

EvalResult eval_function(const FunctionSample& fs, std::span<const double> x);
double eval_value(const FunctionSample& fs, std::span<const double> x);

struct AscentOptions {
    int max_iters = 200;
    double grad_tol = 1e-8;
    double armijo_c1 = 1e-4;
    int max_backtracks = 40;
    // Uniform probe candidates scored before the ascents; the best
    // `restarts` of them become the start points.
    int probes_per_restart = 250;
};

// Multi-start projected gradient ascent over [0,1]^d.
Optimum find_optimum(const FunctionSample& fs, int restarts, Rng& rng,
                     const AscentOptions& opts = {});

// Single ascent from a given start (used for corpus fix-up and baselines).
Optimum ascend_from(const FunctionSample& fs, std::span<const double> start,
                    const AscentOptions& opts = {});

Dataset sample_dataset(const FunctionSample& fs, int n, Rng& rng);

int default_restarts(int dim);  // 32 for d<=2, 64 for d=3..4

struct CorpusOptions {
    int count = 0;
    int n_min = 8;
    int n_max = 100;
    int restarts = 0;  // 0 -> default_restarts(dim)
    int bins_per_dim = 4;
    std::uint64_t draw_budget = 0;  // 0 -> 250 * count
    int workers = 1;
};

// Draws (x*, D) pairs and rejection-samples them into equal per-bin quotas
// so the marginal over optima is uniform. Deterministic for a given seed,
// independent of worker count.
Corpus generate_corpus(const PriorHyperparams& hp, const CorpusOptions& opts, const Rng& rng);

// Per-bin fill counts for the last generate_corpus call diagnostics.
struct BinReport {
    int bins_per_dim = 0;
    std::vector<int> fills;
    std::uint64_t draws = 0;
};

Corpus generate_corpus(const PriorHyperparams& hp, const CorpusOptions& opts, const Rng& rng,
                       BinReport* report);

int bin_index(std::span<const double> x, int bins_per_dim);

// Binary corpus file, magic "FIBC". JSONL exporter mirrors the fields.
void write_corpus(const std::string& path, const Corpus& corpus);
void write_corpus_stream(std::ostream& os, const Corpus& corpus);
std::uint64_t corpus_content_hash(const Corpus& corpus);
Corpus read_corpus(const std::string& path);
void write_corpus_jsonl(const std::string& path, const Corpus& corpus);

// FunctionSample serialization (benchmark objectives are stored draws).
std::string function_to_json(const FunctionSample& fs);
FunctionSample function_from_json(const std::string& json_text);

}  // namespace fibo::prior

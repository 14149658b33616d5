#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "fibo/dataset.hpp"
#include "fibo/func_prior.hpp"
#include "fibo/model.hpp"
#include "fibo/rng.hpp"

namespace fibo::bo {

// Objective over unit-cube coordinates, maximization convention.
using Objective = std::function<double(std::span<const double>)>;

struct IterationRecord {
    std::vector<std::vector<double>> batch;  // q suggested points
    std::vector<double> values;
    double best_so_far = 0.0;
    double suggest_seconds = 0.0;  // 0 for the initial design
};

struct RunTrace {
    std::string objective_id;
    std::string method_id;
    int dim = 0;
    int q = 0;
    int iterations = 0;  // T, excludes the initial design
    int total_evals = 0;
    std::uint64_t seed = 0;
    std::vector<IterationRecord> records;  // records[0] is the initial design
    std::string error;                     // set when the run aborted

    bool aborted() const { return !error.empty(); }
};

// Batch suggesters. GP-TS keeps per-run state (its feature basis is drawn
// once per run), hence the interface.
class Suggester {
public:
    virtual ~Suggester() = default;
    virtual std::string id() const = 0;
    virtual std::vector<std::vector<double>> suggest(const Dataset& data, int q, Rng& rng) = 0;
};

// One encoder pass, q flow samples; no fitting, no inner optimization.
std::vector<std::vector<double>> fibo_suggest(const model::Model& m, const Dataset& data, int q,
                                              Rng& rng);

std::vector<std::vector<double>> random_suggest(int dim, int q, Rng& rng);

struct GpTsOptions {
    double noise = 1e-6;
    int restarts = 32;
    int num_features = 512;
};

// Thompson sampling from an exact Bayesian linear regression on random
// Fourier features; each draw is maximized by multi-restart ascent.
class GpTsSuggester : public Suggester {
public:
    // kernel hyperparameters fixed at the midpoint of the hp ranges;
    // feature basis drawn once from rng
    GpTsSuggester(const prior::PriorHyperparams& hp, const GpTsOptions& opts, Rng& rng);
    // injected basis (posterior-collapse tests)
    GpTsSuggester(prior::FunctionSample basis, const GpTsOptions& opts);

    std::string id() const override { return "gp_ts"; }
    std::vector<std::vector<double>> suggest(const Dataset& data, int q, Rng& rng) override;

    // f-hat for the last posterior draw (diagnostics/tests)
    const prior::FunctionSample& basis() const { return basis_; }
    std::vector<double> sample_weights(const Dataset& data, Rng& rng);

private:
    prior::FunctionSample basis_;
    GpTsOptions opts_;
};

std::vector<std::vector<double>> gp_ts_suggest(const Dataset& data, int q,
                                               const prior::PriorHyperparams& hp, double noise,
                                               Rng& rng);

class FiboSuggester : public Suggester {
public:
    explicit FiboSuggester(const model::Model& m) : model_(&m) {}
    std::string id() const override { return "fibo"; }
    std::vector<std::vector<double>> suggest(const Dataset& data, int q, Rng& rng) override {
        return fibo_suggest(*model_, data, q, rng);
    }

private:
    const model::Model* model_;
};

class RandomSuggester : public Suggester {
public:
    explicit RandomSuggester(int dim) : dim_(dim) {}
    std::string id() const override { return "random"; }
    std::vector<std::vector<double>> suggest(const Dataset&, int q, Rng& rng) override {
        return random_suggest(dim_, q, rng);
    }

private:
    int dim_;
};

struct RunOptions {
    int dim = 0;
    int q = 10;
    int total_evals = 200;  // initial q + T full batches
    std::uint64_t seed = 0;
    bool record_timing = true;
    std::string objective_id;
};

RunTrace run_bo(const Objective& objective, Suggester& suggester, const RunOptions& opts);

// Per-evaluation GAP series, clipped to [0,1]; y0 is the best initial value.
std::vector<double> gap_series(const RunTrace& trace, double y_star);
double final_gap(const RunTrace& trace, double y_star);

void write_trace_jsonl(const std::string& path, const RunTrace& trace);
RunTrace read_trace_jsonl(const std::string& path);
void write_trace_csv(const std::string& path, const RunTrace& trace);

}  // namespace fibo::bo

#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fibo/bo_loop.hpp"
#include "fibo/checkpoint.hpp"
#include "fibo/func_prior.hpp"

namespace fibo::bench {

// Per-dimension affine map between a native box and the unit cube.
struct DomainMap {
    std::vector<std::pair<double, double>> bounds;

    int dim() const { return static_cast<int>(bounds.size()); }
    std::vector<double> to_native(std::span<const double> unit) const;
    std::vector<double> to_unit(std::span<const double> native) const;
};

struct Objective {
    std::string id;
    int dim = 0;
    DomainMap domain;
    std::function<double(std::span<const double>)> eval_native;  // maximization convention
    bool has_known_optimum = false;
    double optimum_value = 0.0;
    std::vector<double> optimum_location;  // native; empty if unknown
    std::shared_ptr<const prior::FunctionSample> prior_sample;  // set for stored prior draws
};

// Maps unit coordinates to the native box and evaluates. Errors outside
// the cube.
double eval_objective(const Objective& obj, std::span<const double> x_unit);

Objective make_ackley(int dim);      // [-32.768, 32.768]^d, max 0 at origin
Objective make_levy(int dim);        // [-10, 10]^d, max 0 at (1,...,1)
Objective make_rosenbrock(int dim);  // [-5, 10]^d, max 0 at (1,...,1)
Objective make_hartmann3();          // [0,1]^3, max ~3.86278

// ackley/levy/rosenbrock for d in {3,4} plus hartmann3
std::vector<Objective> builtin_objectives();
Objective builtin_objective(const std::string& id);

// A stored prior draw on the unit cube; every method sees the identical
// function.
Objective make_prior_objective(std::string id, prior::FunctionSample fs, double y_star,
                               std::vector<double> x_star);

struct PriorTaskSpec {
    int dim = 2;
    int count = 10;
    std::uint64_t seed = 0;
    prior::PriorHyperparams hp;  // dim forced to `dim`
};

// Draws `count` objectives from the prior; optima located with a heavy
// multi-start budget and stored with the functions.
std::vector<Objective> make_prior_objectives(const PriorTaskSpec& spec);

struct SuiteSpec {
    std::string task_set = "suite";
    std::vector<std::string> objectives;        // builtin ids
    std::optional<PriorTaskSpec> prior_tasks;   // generated objectives
    std::vector<std::string> methods;           // fibo | gp_ts | random
    std::vector<int> q_list;
    std::vector<std::uint64_t> seeds;
    int total_evals = 200;
    std::map<int, std::string> checkpoints;     // dim -> checkpoint path
    std::string output_dir;
    bool record_timing = true;
    int workers = 1;
    bo::GpTsOptions gp_ts;
    prior::PriorHyperparams gp_ts_hp;  // dim adjusted per objective
};

SuiteSpec load_suite_spec(const std::string& path);
void save_suite_spec(const std::string& path, const SuiteSpec& spec);

struct CellResult {
    std::string objective_id;
    std::string method;
    int q = 0;
    std::uint64_t seed = 0;
    bo::RunTrace trace;
    double final_gap = 0.0;
    double mean_suggest_seconds = 0.0;
};

struct SummaryRow {
    std::string task_set;
    std::string objective_id;
    std::string method;
    int q = 0;
    double gap_mean = 0.0, gap_se = 0.0;
    double time_mean = 0.0, time_se = 0.0;
};

struct SuiteResult {
    std::vector<CellResult> cells;
    std::vector<SummaryRow> summary;
    std::vector<std::string> errors;  // per-cell error messages
};

// Runs every (objective x method x q x seed) cell, writes one trace file
// per cell plus summary.csv under output_dir.
SuiteResult run_suite(const SuiteSpec& spec);

std::string summary_csv(const std::vector<SummaryRow>& rows);

}  // namespace fibo::bench

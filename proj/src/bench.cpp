#include "fibo/bench.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <thread>

#include <nlohmann/json.hpp>

#include "fibo/io_util.hpp"

namespace fibo::bench {

using nlohmann::json;
namespace fs = std::filesystem;

std::vector<double> DomainMap::to_native(std::span<const double> unit) const {
    require(unit.size() == bounds.size(), "domain map: dimension mismatch");
    std::vector<double> out(unit.size());
    for (std::size_t j = 0; j < unit.size(); ++j)
        out[j] = bounds[j].first + unit[j] * (bounds[j].second - bounds[j].first);
    return out;
}

std::vector<double> DomainMap::to_unit(std::span<const double> native) const {
    require(native.size() == bounds.size(), "domain map: dimension mismatch");
    std::vector<double> out(native.size());
    for (std::size_t j = 0; j < native.size(); ++j)
        out[j] = (native[j] - bounds[j].first) / (bounds[j].second - bounds[j].first);
    return out;
}

double eval_objective(const Objective& obj, std::span<const double> x_unit) {
    require(static_cast<int>(x_unit.size()) == obj.dim, "eval_objective: dimension mismatch");
    for (double v : x_unit)
        require(v >= 0.0 && v <= 1.0, "eval_objective: point outside the unit cube");
    const std::vector<double> native = obj.domain.to_native(x_unit);
    return obj.eval_native(native);
}

Objective make_ackley(int dim) {
    Objective o;
    o.id = "ackley" + std::to_string(dim);
    o.dim = dim;
    o.domain.bounds.assign(dim, {-32.768, 32.768});
    o.eval_native = [dim](std::span<const double> x) {
        const double a = 20.0, b = 0.2, c = 2.0 * M_PI;
        double sq = 0.0, cs = 0.0;
        for (double v : x) {
            sq += v * v;
            cs += std::cos(c * v);
        }
        const double f =
            -a * std::exp(-b * std::sqrt(sq / dim)) - std::exp(cs / dim) + a + std::exp(1.0);
        return -f;
    };
    o.has_known_optimum = true;
    o.optimum_value = 0.0;
    o.optimum_location.assign(dim, 0.0);
    return o;
}

Objective make_levy(int dim) {
    Objective o;
    o.id = "levy" + std::to_string(dim);
    o.dim = dim;
    o.domain.bounds.assign(dim, {-10.0, 10.0});
    o.eval_native = [dim](std::span<const double> x) {
        auto w = [&](int i) { return 1.0 + (x[i] - 1.0) / 4.0; };
        const double s1 = std::sin(M_PI * w(0));
        double f = s1 * s1;
        for (int i = 0; i < dim - 1; ++i) {
            const double wi = w(i);
            const double s = std::sin(M_PI * wi + 1.0);
            f += (wi - 1.0) * (wi - 1.0) * (1.0 + 10.0 * s * s);
        }
        const double wd = w(dim - 1);
        const double sd = std::sin(2.0 * M_PI * wd);
        f += (wd - 1.0) * (wd - 1.0) * (1.0 + sd * sd);
        return -f;
    };
    o.has_known_optimum = true;
    o.optimum_value = 0.0;
    o.optimum_location.assign(dim, 1.0);
    return o;
}

Objective make_rosenbrock(int dim) {
    Objective o;
    o.id = "rosenbrock" + std::to_string(dim);
    o.dim = dim;
    o.domain.bounds.assign(dim, {-5.0, 10.0});
    o.eval_native = [dim](std::span<const double> x) {
        double f = 0.0;
        for (int i = 0; i < dim - 1; ++i) {
            const double t = x[i + 1] - x[i] * x[i];
            f += 100.0 * t * t + (x[i] - 1.0) * (x[i] - 1.0);
        }
        return -f;
    };
    o.has_known_optimum = true;
    o.optimum_value = 0.0;
    o.optimum_location.assign(dim, 1.0);
    return o;
}

Objective make_hartmann3() {
    Objective o;
    o.id = "hartmann3";
    o.dim = 3;
    o.domain.bounds.assign(3, {0.0, 1.0});
    o.eval_native = [](std::span<const double> x) {
        static const double alpha[4] = {1.0, 1.2, 3.0, 3.2};
        static const double A[4][3] = {
            {3.0, 10.0, 30.0}, {0.1, 10.0, 35.0}, {3.0, 10.0, 30.0}, {0.1, 10.0, 35.0}};
        static const double P[4][3] = {{0.3689, 0.1170, 0.2673},
                                       {0.4699, 0.4387, 0.7470},
                                       {0.1091, 0.8732, 0.5547},
                                       {0.0381, 0.5743, 0.8828}};
        double f = 0.0;
        for (int i = 0; i < 4; ++i) {
            double e = 0.0;
            for (int j = 0; j < 3; ++j) {
                const double d = x[j] - P[i][j];
                e += A[i][j] * d * d;
            }
            f += alpha[i] * std::exp(-e);
        }
        return f;  // already a maximization problem after negating the classic form
    };
    o.has_known_optimum = true;
    o.optimum_value = 3.86278214782076;
    o.optimum_location = {0.114614, 0.555649, 0.852547};
    return o;
}

std::vector<Objective> builtin_objectives() {
    std::vector<Objective> out;
    for (int d : {3, 4}) {
        out.push_back(make_ackley(d));
        out.push_back(make_levy(d));
        out.push_back(make_rosenbrock(d));
    }
    out.push_back(make_hartmann3());
    return out;
}

Objective builtin_objective(const std::string& id) {
    for (auto& o : builtin_objectives())
        if (o.id == id) return o;
    fail("unknown objective id: " + id);
}

Objective make_prior_objective(std::string id, prior::FunctionSample fs, double y_star,
                               std::vector<double> x_star) {
    Objective o;
    o.id = std::move(id);
    o.dim = fs.dim;
    o.domain.bounds.assign(fs.dim, {0.0, 1.0});
    o.has_known_optimum = true;
    o.optimum_value = y_star;
    o.optimum_location = std::move(x_star);
    auto shared = std::make_shared<const prior::FunctionSample>(std::move(fs));
    o.prior_sample = shared;
    o.eval_native = [shared](std::span<const double> x) { return prior::eval_value(*shared, x); };
    return o;
}

std::vector<Objective> make_prior_objectives(const PriorTaskSpec& spec) {
    prior::PriorHyperparams hp = spec.hp;
    hp.dim = spec.dim;
    std::vector<Objective> out;
    out.reserve(spec.count);
    const Rng master(spec.seed);
    for (int i = 0; i < spec.count; ++i) {
        Rng rng = master.derive(0x0B7EC7ull + static_cast<std::uint64_t>(i));
        prior::FunctionSample fs = prior::sample_function(hp, rng);
        // heavier budget than corpus generation: these optima normalize GAP
        prior::Optimum opt = prior::find_optimum(fs, 4 * prior::default_restarts(spec.dim), rng);
        char buf[64];
        std::snprintf(buf, sizeof(buf), "prior-d%d-%03d", spec.dim, i);
        out.push_back(make_prior_objective(buf, std::move(fs), opt.value, std::move(opt.x)));
    }
    return out;
}

SuiteSpec load_suite_spec(const std::string& path) {
    const json j = json::parse(io::read_text(path));
    SuiteSpec s;
    s.task_set = j.value("task_set", std::string("suite"));
    if (j.contains("objectives")) s.objectives = j.at("objectives").get<std::vector<std::string>>();
    if (j.contains("prior_tasks")) {
        PriorTaskSpec pt;
        const auto& p = j.at("prior_tasks");
        pt.dim = p.value("dim", 2);
        pt.count = p.value("count", 10);
        pt.seed = p.value("seed", 0ull);
        if (p.contains("num_features")) pt.hp.num_features = p.at("num_features").get<int>();
        if (p.contains("lengthscale")) {
            pt.hp.lengthscale_lo = p.at("lengthscale")[0].get<double>();
            pt.hp.lengthscale_hi = p.at("lengthscale")[1].get<double>();
        }
        if (p.contains("signal_variance")) {
            pt.hp.signal_var_lo = p.at("signal_variance")[0].get<double>();
            pt.hp.signal_var_hi = p.at("signal_variance")[1].get<double>();
        }
        s.prior_tasks = pt;
    }
    s.methods = j.at("methods").get<std::vector<std::string>>();
    s.q_list = j.at("q").get<std::vector<int>>();
    s.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    s.total_evals = j.value("total_evals", 200);
    if (j.contains("checkpoints"))
        for (const auto& [k, v] : j.at("checkpoints").items())
            s.checkpoints[std::stoi(k)] = v.get<std::string>();
    s.output_dir = j.at("output_dir").get<std::string>();
    s.record_timing = j.value("record_timing", true);
    s.workers = j.value("workers", 1);
    if (j.contains("gp_ts")) {
        const auto& g = j.at("gp_ts");
        s.gp_ts.noise = g.value("noise", 1e-6);
        s.gp_ts.restarts = g.value("restarts", 32);
        s.gp_ts.num_features = g.value("num_features", 512);
        if (g.contains("lengthscale")) {
            s.gp_ts_hp.lengthscale_lo = g.at("lengthscale")[0].get<double>();
            s.gp_ts_hp.lengthscale_hi = g.at("lengthscale")[1].get<double>();
        }
        if (g.contains("signal_variance")) {
            s.gp_ts_hp.signal_var_lo = g.at("signal_variance")[0].get<double>();
            s.gp_ts_hp.signal_var_hi = g.at("signal_variance")[1].get<double>();
        }
    }
    return s;
}

void save_suite_spec(const std::string& path, const SuiteSpec& s) {
    json j;
    j["task_set"] = s.task_set;
    j["objectives"] = s.objectives;
    if (s.prior_tasks) {
        j["prior_tasks"] = {{"dim", s.prior_tasks->dim},
                            {"count", s.prior_tasks->count},
                            {"seed", s.prior_tasks->seed},
                            {"num_features", s.prior_tasks->hp.num_features},
                            {"lengthscale",
                             {s.prior_tasks->hp.lengthscale_lo, s.prior_tasks->hp.lengthscale_hi}},
                            {"signal_variance",
                             {s.prior_tasks->hp.signal_var_lo, s.prior_tasks->hp.signal_var_hi}}};
    }
    j["methods"] = s.methods;
    j["q"] = s.q_list;
    j["seeds"] = s.seeds;
    j["total_evals"] = s.total_evals;
    json cps = json::object();
    for (const auto& [dim, path2] : s.checkpoints) cps[std::to_string(dim)] = path2;
    j["checkpoints"] = cps;
    j["output_dir"] = s.output_dir;
    j["record_timing"] = s.record_timing;
    j["workers"] = s.workers;
    j["gp_ts"] = {{"noise", s.gp_ts.noise},
                  {"restarts", s.gp_ts.restarts},
                  {"num_features", s.gp_ts.num_features},
                  {"lengthscale", {s.gp_ts_hp.lengthscale_lo, s.gp_ts_hp.lengthscale_hi}},
                  {"signal_variance", {s.gp_ts_hp.signal_var_lo, s.gp_ts_hp.signal_var_hi}}};
    io::atomic_write_text(path, j.dump(2) + "\n");
}

namespace {

struct Cell {
    const Objective* objective;
    std::string method;
    int q;
    std::uint64_t seed;
};

double sample_se(const std::vector<double>& v) {
    if (v.size() <= 1) return 0.0;
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    var /= static_cast<double>(v.size() - 1);
    return std::sqrt(var / static_cast<double>(v.size()));
}

double mean_of(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m += x;
    return v.empty() ? 0.0 : m / static_cast<double>(v.size());
}

}  // namespace

std::string summary_csv(const std::vector<SummaryRow>& rows) {
    std::string out = "task-set,objective,method,q,gap-mean,gap-se,time-mean,time-se\n";
    for (const auto& r : rows) {
        char buf[256];
        std::snprintf(buf, sizeof(buf), "%s,%s,%s,%d,%.6f,%.6f,%.6f,%.6f\n", r.task_set.c_str(),
                      r.objective_id.c_str(), r.method.c_str(), r.q, r.gap_mean, r.gap_se,
                      r.time_mean, r.time_se);
        out += buf;
    }
    return out;
}

SuiteResult run_suite(const SuiteSpec& spec) {
    require(!spec.methods.empty() && !spec.q_list.empty() && !spec.seeds.empty(),
            "run_suite: methods, q and seeds must be non-empty");

    std::vector<Objective> objectives;
    for (const auto& id : spec.objectives) objectives.push_back(builtin_objective(id));
    if (spec.prior_tasks) {
        auto prior_objs = make_prior_objectives(*spec.prior_tasks);
        for (auto& o : prior_objs) objectives.push_back(std::move(o));
    }
    require(!objectives.empty(), "run_suite: no objectives");

    fs::create_directories(spec.output_dir);

    // store prior draws next to the results so runs can be re-examined
    if (spec.prior_tasks) {
        fs::create_directories(fs::path(spec.output_dir) / "objectives");
        for (const auto& o : objectives)
            if (o.prior_sample)
                io::atomic_write_text(
                    (fs::path(spec.output_dir) / "objectives" / (o.id + ".json")).string(),
                    prior::function_to_json(*o.prior_sample) + "\n");
    }

    // load checkpoints for every dimension fibo needs
    std::map<int, train::Checkpoint> models;
    const bool wants_fibo =
        std::find(spec.methods.begin(), spec.methods.end(), "fibo") != spec.methods.end();
    if (wants_fibo) {
        std::string missing;
        for (const auto& o : objectives) {
            if (models.count(o.dim)) continue;
            auto it = spec.checkpoints.find(o.dim);
            if (it == spec.checkpoints.end()) {
                missing += (missing.empty() ? "" : ", ") + std::to_string(o.dim);
                continue;
            }
            models.emplace(o.dim, train::load_checkpoint(it->second));
        }
        require(missing.empty(), "run_suite: missing checkpoint for dimension(s) " + missing);
    }

    std::vector<Cell> cells;
    for (const auto& o : objectives)
        for (const auto& method : spec.methods)
            for (int q : spec.q_list)
                for (std::uint64_t seed : spec.seeds) cells.push_back({&o, method, q, seed});

    SuiteResult result;
    result.cells.resize(cells.size());
    std::vector<std::string> cell_errors(cells.size());

    auto run_cell = [&](std::size_t ci) {
        const Cell& cell = cells[ci];
        const Objective& obj = *cell.objective;
        CellResult& out = result.cells[ci];
        out.objective_id = obj.id;
        out.method = cell.method;
        out.q = cell.q;
        out.seed = cell.seed;
        try {
            std::unique_ptr<bo::Suggester> suggester;
            Rng method_rng = Rng(cell.seed).derive(0x6e7d);
            if (cell.method == "fibo") {
                suggester = std::make_unique<bo::FiboSuggester>(models.at(obj.dim).model);
            } else if (cell.method == "gp_ts") {
                prior::PriorHyperparams hp = spec.gp_ts_hp;
                hp.dim = obj.dim;
                hp.num_features = spec.gp_ts.num_features;
                suggester = std::make_unique<bo::GpTsSuggester>(hp, spec.gp_ts, method_rng);
            } else if (cell.method == "random") {
                suggester = std::make_unique<bo::RandomSuggester>(obj.dim);
            } else {
                fail("run_suite: unknown method " + cell.method);
            }
            bo::RunOptions ropts;
            ropts.dim = obj.dim;
            ropts.q = cell.q;
            ropts.total_evals = spec.total_evals;
            ropts.seed = cell.seed;
            ropts.record_timing = spec.record_timing;
            ropts.objective_id = obj.id;
            bo::Objective fn = [&obj](std::span<const double> x) { return eval_objective(obj, x); };
            out.trace = bo::run_bo(fn, *suggester, ropts);
            if (out.trace.aborted()) {
                cell_errors[ci] = obj.id + "/" + cell.method + ": " + out.trace.error;
            }
            std::vector<double> times;
            for (std::size_t t = 1; t < out.trace.records.size(); ++t)
                times.push_back(out.trace.records[t].suggest_seconds);
            out.mean_suggest_seconds = mean_of(times);
            const std::string fname = obj.id + "_" + cell.method + "_q" + std::to_string(cell.q) +
                                      "_s" + std::to_string(cell.seed) + ".jsonl";
            bo::write_trace_jsonl((fs::path(spec.output_dir) / fname).string(), out.trace);
        } catch (const std::exception& e) {
            cell_errors[ci] = obj.id + "/" + cell.method + ": " + e.what();
        }
    };

    const int workers = std::max(1, spec.workers);
    if (workers == 1) {
        for (std::size_t ci = 0; ci < cells.size(); ++ci) run_cell(ci);
    } else {
        std::vector<std::thread> threads;
        for (int w = 0; w < workers; ++w)
            threads.emplace_back([&, w]() {
                for (std::size_t ci = w; ci < cells.size(); ci += static_cast<std::size_t>(workers))
                    run_cell(ci);
            });
        for (auto& t : threads) t.join();
    }
    for (auto& e : cell_errors)
        if (!e.empty()) result.errors.push_back(e);

    // y* per objective: known optimum, otherwise the best across all runs
    // and methods in the comparison set
    std::map<std::string, double> best_observed;
    for (const auto& c : result.cells) {
        double best = -std::numeric_limits<double>::infinity();
        for (const auto& rec : c.trace.records)
            for (double y : rec.values) best = std::max(best, y);
        auto [it, inserted] = best_observed.emplace(c.objective_id, best);
        if (!inserted) it->second = std::max(it->second, best);
    }
    std::map<std::string, double> y_star;
    for (const auto& o : objectives)
        y_star[o.id] = o.has_known_optimum ? o.optimum_value : best_observed[o.id];
    for (auto& c : result.cells) {
        if (c.trace.records.empty() || c.trace.aborted()) continue;
        c.final_gap = bo::final_gap(c.trace, y_star.at(c.objective_id));
    }

    // summary aggregated over seeds
    std::map<std::tuple<std::string, std::string, int>, std::pair<std::vector<double>, std::vector<double>>>
        groups;
    for (const auto& c : result.cells) {
        if (c.trace.aborted() || c.trace.records.empty()) continue;
        auto& g = groups[{c.objective_id, c.method, c.q}];
        g.first.push_back(c.final_gap);
        g.second.push_back(c.mean_suggest_seconds);
    }
    for (const auto& [key, vals] : groups) {
        SummaryRow row;
        row.task_set = spec.task_set;
        row.objective_id = std::get<0>(key);
        row.method = std::get<1>(key);
        row.q = std::get<2>(key);
        row.gap_mean = mean_of(vals.first);
        row.gap_se = sample_se(vals.first);
        row.time_mean = mean_of(vals.second);
        row.time_se = sample_se(vals.second);
        result.summary.push_back(row);
    }
    io::atomic_write_text((fs::path(spec.output_dir) / "summary.csv").string(),
                          summary_csv(result.summary));
    return result;
}

}  // namespace fibo::bench

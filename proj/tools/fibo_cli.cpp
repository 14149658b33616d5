// Command-line pipeline: pretraining data generation, model training,
// benchmark runs, and file-based ask-tell sessions.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "fibo/bench.hpp"
#include "fibo/bo_loop.hpp"
#include "fibo/checkpoint.hpp"
#include "fibo/func_prior.hpp"
#include "fibo/io_util.hpp"
#include "fibo/session.hpp"
#include "fibo/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int env_workers() {
    const char* w = std::getenv("FIBO_WORKERS");
    if (!w) return 1;
    const int n = std::atoi(w);
    return n >= 1 ? n : 1;
}

// relative outputs land under FIBO_DATA_DIR when it is set
std::string resolve_path(const std::string& p) {
    if (p.empty()) return p;
    const char* base = std::getenv("FIBO_DATA_DIR");
    if (!base || fs::path(p).is_absolute()) return p;
    return (fs::path(base) / p).string();
}

std::vector<double> parse_csv_doubles(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.find_first_not_of(" \t\r\n") == std::string::npos) continue;
        out.push_back(std::stod(tok));
    }
    return out;
}

std::vector<std::pair<double, double>> parse_bounds(const std::string& text) {
    std::vector<std::pair<double, double>> out;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        const auto colon = tok.find(':');
        fibo::require(colon != std::string::npos, "bounds must be lo:hi,lo:hi,...");
        out.emplace_back(std::stod(tok.substr(0, colon)), std::stod(tok.substr(colon + 1)));
        fibo::require(out.back().first < out.back().second, "bounds must have lo < hi");
    }
    return out;
}

struct PriorFlags {
    int m = 512;
    double l_lo = 0.01, l_hi = 5.0;
    double g2_lo = 1.0, g2_hi = 2.0;

    void attach(CLI::App* cmd) {
        cmd->add_option("--m", m, "number of random Fourier features");
        cmd->add_option("--l-lo", l_lo, "lengthscale range low");
        cmd->add_option("--l-hi", l_hi, "lengthscale range high");
        cmd->add_option("--g2-lo", g2_lo, "signal variance range low");
        cmd->add_option("--g2-hi", g2_hi, "signal variance range high");
    }

    fibo::prior::PriorHyperparams to_hp(int dim) const {
        fibo::prior::PriorHyperparams hp;
        hp.dim = dim;
        hp.num_features = m;
        hp.lengthscale_lo = l_lo;
        hp.lengthscale_hi = l_hi;
        hp.signal_var_lo = g2_lo;
        hp.signal_var_hi = g2_hi;
        return hp;
    }
};

int cmd_gen_data(int dim, int count, int n_min, int n_max, int restarts, int bins,
                 std::uint64_t seed, const std::string& out, const PriorFlags& pf,
                 std::uint64_t budget, int workers, const std::string& jsonl) {
    fibo::prior::CorpusOptions opts;
    opts.count = count;
    opts.n_min = n_min;
    opts.n_max = n_max;
    opts.restarts = restarts;
    opts.bins_per_dim = bins;
    opts.draw_budget = budget;
    opts.workers = workers;
    fibo::prior::BinReport report;
    const auto corpus =
        fibo::prior::generate_corpus(pf.to_hp(dim), opts, fibo::Rng(seed), &report);
    const std::string path = resolve_path(out);
    fibo::prior::write_corpus(path, corpus);
    if (!jsonl.empty()) fibo::prior::write_corpus_jsonl(resolve_path(jsonl), corpus);
    std::cout << "wrote " << corpus.pairs.size() << " pairs to " << path << "\n";
    std::cout << "bin fills (" << report.bins_per_dim << " per dim, " << report.draws
              << " draws):";
    for (std::size_t i = 0; i < report.fills.size(); ++i) std::cout << " " << report.fills[i];
    std::cout << "\n";
    return 0;
}

int cmd_train(const std::string& corpus_path, fibo::train::TrainConfig cfg, int context_dim,
              int hidden, int width, int blocks, int bins_k, double tail, int cond_hidden,
              bool attention, const PriorFlags& pf) {
    const std::string cpath = resolve_path(corpus_path);
    const auto corpus = fibo::prior::read_corpus(cpath);
    cfg.corpus_hash = fibo::io::hex64(fibo::io::file_hash(cpath));
    cfg.prior_hp = pf.to_hp(corpus.dim);
    auto mcfg = fibo::model::default_model_config(corpus.dim);
    if (context_dim > 0) mcfg.enc.context_dim = context_dim;
    mcfg.enc.hidden = hidden;
    mcfg.enc.width = width;
    mcfg.enc.attention = attention;
    if (blocks > 0) mcfg.flow.blocks = blocks;
    mcfg.flow.bins = bins_k;
    mcfg.flow.tail = tail;
    mcfg.flow.cond_hidden = cond_hidden;
    cfg.model_cfg = mcfg;
    cfg.model_cfg_set = true;
    cfg.checkpoint_path = resolve_path(cfg.checkpoint_path);
    const auto result = fibo::train::train(corpus, cfg);
    json j;
    j["checkpoint"] = cfg.checkpoint_path;
    j["epochs"] = result.checkpoint.epochs;
    j["initial_val_nll"] = result.checkpoint.initial_val_nll;
    j["final_train_nll"] = result.checkpoint.final_train_nll;
    j["final_val_nll"] = result.checkpoint.final_val_nll;
    std::cout << j.dump() << "\n";
    return 0;
}

int cmd_bench(const std::string& suite_path, int workers_override) {
    auto spec = fibo::bench::load_suite_spec(resolve_path(suite_path));
    if (workers_override > 0) spec.workers = workers_override;
    spec.output_dir = resolve_path(spec.output_dir);
    for (auto& [dim, p] : spec.checkpoints) p = resolve_path(p);
    const auto result = fibo::bench::run_suite(spec);
    std::cout << fibo::bench::summary_csv(result.summary);
    if (!result.errors.empty()) {
        for (const auto& e : result.errors) std::cerr << "cell error: " << e << "\n";
        return 1;
    }
    return 0;
}

int cmd_suggest(const std::string& dir, int q, std::uint64_t seed, bool force_discard,
                const std::string& checkpoint, const std::string& bounds_text,
                const std::string& name) {
    fibo::session::SessionLock lock(dir);
    fibo::session::SessionState state;
    if (fibo::session::session_exists(dir)) {
        state = fibo::session::load_session(dir);
    } else {
        fibo::require(!checkpoint.empty() && !bounds_text.empty(),
                      "new session: --checkpoint and --bounds are required");
        state.experiment_id = name.empty() ? fs::path(dir).filename().string() : name;
        state.checkpoint_path = resolve_path(checkpoint);
        state.bounds = parse_bounds(bounds_text);
        state.dim = static_cast<int>(state.bounds.size());
    }
    const auto ckpt = fibo::train::load_checkpoint(state.checkpoint_path);
    const auto points = fibo::session::session_suggest(state, ckpt.model, q, seed, force_discard);
    fibo::session::save_session(dir, state);
    json j;
    j["points"] = points;
    j["pending"] = points.size();
    std::cout << j.dump() << "\n";
    return 0;
}

int cmd_tell(const std::string& dir, const std::string& values_text, const std::string& csv_path) {
    fibo::session::SessionLock lock(dir);
    auto state = fibo::session::load_session(dir);
    std::vector<double> values;
    if (!csv_path.empty()) {
        std::ifstream is(resolve_path(csv_path));
        fibo::require(is.good(), "cannot open values file: " + csv_path);
        std::string line;
        while (std::getline(is, line)) {
            if (line.empty()) continue;
            for (double v : parse_csv_doubles(line)) values.push_back(v);
        }
    } else {
        values = parse_csv_doubles(values_text);
    }
    fibo::session::session_tell(state, values);
    fibo::session::save_session(dir, state);
    const auto st = fibo::session::session_status(state);
    json j;
    j["history"] = st.history_size;
    j["best"] = st.best_y;
    std::cout << j.dump() << "\n";
    return 0;
}

int cmd_status(const std::string& dir, double y_star, bool has_y_star) {
    const auto state = fibo::session::load_session(dir);
    const auto st = fibo::session::session_status(state);
    json j;
    j["experiment_id"] = state.experiment_id;
    j["dim"] = state.dim;
    j["history"] = st.history_size;
    j["pending"] = st.pending_size;
    if (st.has_best) j["best"] = st.best_y;
    if (has_y_star && st.has_best) {
        // y0 is the best of the first resolved batch (the initial design)
        const int init = std::max(1, std::min<int>(state.initial_count,
                                                   static_cast<int>(state.history_y.size())));
        double y0 = state.history_y[0];
        for (int i = 1; i < init; ++i) y0 = std::max(y0, state.history_y[i]);
        fibo::require(y_star >= y0, "status: --ystar below the best initial value");
        j["gap"] = y_star == y0 ? 1.0
                                : std::clamp((st.best_y - y0) / (y_star - y0), 0.0, 1.0);
    }
    std::cout << j.dump() << "\n";
    return 0;
}

int cmd_inspect(const std::string& path) {
    const auto ckpt = fibo::train::load_checkpoint(resolve_path(path));
    std::cout << fibo::train::checkpoint_meta_json(ckpt) << "\n";
    std::cout << "parameters: " << ckpt.model.params.count() << " tensors, "
              << ckpt.model.params.total_scalars() << " scalars\n";
    for (int i = 0; i < ckpt.model.params.count(); ++i)
        std::cout << "  " << ckpt.model.params.name(i) << " "
                  << ckpt.model.params.value(i).shape_str() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"in-context Bayesian optimization pipeline"};
    app.require_subcommand(1);

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "sample (x*, D) pretraining pairs from the prior");
    int g_dim = 1, g_count = 1000, g_nmin = 8, g_nmax = 100, g_restarts = 0, g_bins = 4;
    std::uint64_t g_seed = 0, g_budget = 0;
    int g_workers = env_workers();
    std::string g_out, g_jsonl;
    PriorFlags g_pf;
    gen->add_option("--dim", g_dim, "input dimension")->required();
    gen->add_option("--count", g_count, "number of pairs")->required();
    gen->add_option("--n-min", g_nmin, "minimum dataset size");
    gen->add_option("--n-max", g_nmax, "maximum dataset size");
    gen->add_option("--restarts", g_restarts, "ascent restarts (0 = per-dim default)");
    gen->add_option("--bins", g_bins, "bins per dimension for the uniformity quotas");
    gen->add_option("--seed", g_seed, "master seed")->required();
    gen->add_option("--out", g_out, "output corpus file")->required();
    gen->add_option("--budget", g_budget, "candidate draw budget (0 = 250x count)");
    gen->add_option("--workers", g_workers, "parallel candidate workers");
    gen->add_option("--jsonl", g_jsonl, "also write a JSONL debug export");
    g_pf.attach(gen);

    // train
    auto* tr = app.add_subcommand("train", "pretrain the posterior sampler on a corpus");
    std::string t_corpus, t_out;
    fibo::train::TrainConfig t_cfg;
    int t_context = 0, t_hidden = 64, t_width = 64, t_blocks = 0, t_bins = 8, t_cond = 64;
    double t_tail = 3.0;
    bool t_attention = false;
    std::uint64_t t_seed = 0;
    PriorFlags t_pf;
    tr->add_option("--corpus", t_corpus, "corpus file")->required();
    tr->add_option("--epochs", t_cfg.epochs, "training epochs");
    tr->add_option("--batch", t_cfg.batch_size, "batch size");
    tr->add_option("--lr", t_cfg.learning_rate, "initial learning rate (cosine to zero)");
    tr->add_option("--seed", t_seed, "seed")->required();
    tr->add_option("--out", t_out, "checkpoint path")->required();
    tr->add_option("--val-frac", t_cfg.val_fraction, "validation fraction");
    tr->add_option("--aug-min", t_cfg.aug_min, "augmentation minimum subset size");
    tr->add_option("--aug-max", t_cfg.aug_max, "augmentation maximum subset size");
    tr->add_option("--clip", t_cfg.grad_clip, "global gradient-norm clip");
    tr->add_option("--context-dim", t_context, "context vector size (0 = per-dim default)");
    tr->add_option("--hidden", t_hidden, "encoder hidden layer size");
    tr->add_option("--width", t_width, "encoder width");
    tr->add_option("--blocks", t_blocks, "flow blocks (0 = per-dim default)");
    tr->add_option("--bins-k", t_bins, "spline bins per transform");
    tr->add_option("--tail", t_tail, "spline tail bound");
    tr->add_option("--cond-hidden", t_cond, "conditioner hidden size");
    tr->add_flag("--attention", t_attention, "enable the pre-pooling attention block");
    t_pf.attach(tr);

    // bench
    auto* be = app.add_subcommand("bench", "run a benchmark suite spec");
    std::string b_suite;
    int b_workers = 0;
    be->add_option("--suite", b_suite, "suite spec JSON file")->required();
    be->add_option("--workers", b_workers, "override suite workers");

    // suggest
    auto* su = app.add_subcommand("suggest", "propose the next batch for a session");
    std::string s_dir, s_checkpoint, s_bounds, s_name;
    int s_q = 1;
    std::uint64_t s_seed = 0;
    bool s_force = false;
    su->add_option("--session", s_dir, "session directory")->required();
    su->add_option("--q", s_q, "batch size")->required();
    su->add_option("--seed", s_seed, "seed")->required();
    su->add_flag("--force-discard", s_force, "drop an unresolved pending batch");
    su->add_option("--checkpoint", s_checkpoint, "checkpoint (new sessions)");
    su->add_option("--bounds", s_bounds, "native bounds lo:hi,... (new sessions)");
    su->add_option("--name", s_name, "experiment id (new sessions)");

    // tell
    auto* te = app.add_subcommand("tell", "report results for the pending batch");
    std::string te_dir, te_values, te_csv;
    te->add_option("--session", te_dir, "session directory")->required();
    te->add_option("--values", te_values, "comma-separated y values");
    te->add_option("--csv", te_csv, "file with one y value per line");

    // status
    auto* st = app.add_subcommand("status", "session history and best value");
    std::string st_dir;
    double st_ystar = 0.0;
    st->add_option("--session", st_dir, "session directory")->required();
    auto* ystar_opt = st->add_option("--ystar", st_ystar, "known optimum for GAP");

    // inspect-checkpoint
    auto* in = app.add_subcommand("inspect-checkpoint", "print checkpoint metadata");
    std::string in_path;
    in->add_option("--checkpoint", in_path, "checkpoint file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed())
            return cmd_gen_data(g_dim, g_count, g_nmin, g_nmax, g_restarts, g_bins, g_seed, g_out,
                                g_pf, g_budget, g_workers, g_jsonl);
        if (tr->parsed()) {
            t_cfg.seed = t_seed;
            t_cfg.checkpoint_path = t_out;
            return cmd_train(t_corpus, t_cfg, t_context, t_hidden, t_width, t_blocks, t_bins, t_tail,
                             t_cond, t_attention, t_pf);
        }
        if (be->parsed()) return cmd_bench(b_suite, b_workers);
        if (su->parsed()) return cmd_suggest(s_dir, s_q, s_seed, s_force, s_checkpoint, s_bounds, s_name);
        if (te->parsed()) return cmd_tell(te_dir, te_values, te_csv);
        if (st->parsed()) return cmd_status(st_dir, st_ystar, ystar_opt->count() > 0);
        if (in->parsed()) return cmd_inspect(in_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

#include "fibo/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fibo/io_util.hpp"

namespace fibo::train {

namespace {

using model::Model;
using model::ModelHandles;
using prior::TrainingPair;

template <class E>
typename E::H nll_graph(E& eng, const ModelHandles<typename E::H>& mh, const model::ModelConfig& cfg,
                        std::span<const TrainingPair* const> batch, bool zero_context) {
    using H = typename E::H;
    const int bs = static_cast<int>(batch.size());
    H ctx;
    if (zero_context) {
        ctx = eng.constant(ad::Tensor({bs, cfg.enc.context_dim}, 0.0));
    } else {
        std::vector<H> rows;
        rows.reserve(bs);
        for (const TrainingPair* p : batch) rows.push_back(encode_graph(eng, mh.enc, cfg.enc, p->data));
        ctx = bs == 1 ? rows[0] : eng.concat(rows, 0);
    }
    ad::Tensor x({bs, cfg.dim});
    for (int i = 0; i < bs; ++i) {
        require(static_cast<int>(batch[i]->x_star.size()) == cfg.dim, "nll_loss: pair dimension mismatch");
        for (int j = 0; j < cfg.dim; ++j) x.at(i, j) = model::clamp_unit(batch[i]->x_star[j]);
    }
    typename E::H lp = log_prob_graph(eng, mh, cfg, x, ctx);
    return eng.affine(eng.sum_all(lp), -1.0 / bs, 0.0);
}

double nll_value(const Model& m, std::span<const TrainingPair* const> batch, bool zero_context) {
    ad::RawEngine eng;
    auto mh = bind_model(eng, m);
    return nll_graph(eng, mh, m.cfg, batch, zero_context).item();
}

double nll_value_diagnosed(const Model& m, std::span<const TrainingPair* const> batch,
                           bool zero_context) {
    try {
        return nll_value(m, batch, zero_context);
    } catch (const FiboError& err) {
        for (std::size_t i = 0; i < batch.size(); ++i) {
            const TrainingPair* one[] = {batch[i]};
            try {
                (void)nll_value(m, {one, 1}, zero_context);
            } catch (const FiboError&) {
                fail("nll_loss: non-finite loss at pair index " + std::to_string(i) + " (" +
                     err.what() + ")");
            }
        }
        throw;
    }
}

struct AdamState {
    std::vector<ad::Tensor> m1, m2;
    int t = 0;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

    void init(const model::ParamStore& params) {
        m1.clear();
        m2.clear();
        for (int i = 0; i < params.count(); ++i) {
            m1.emplace_back(params.value(i).shape());
            m2.emplace_back(params.value(i).shape());
        }
    }

    void step(model::ParamStore& params, const std::vector<ad::Tensor>& grads, double lr) {
        ++t;
        const double bc1 = 1.0 - std::pow(beta1, t);
        const double bc2 = 1.0 - std::pow(beta2, t);
        for (int i = 0; i < params.count(); ++i) {
            ad::Tensor& p = params.value(i);
            const ad::Tensor& g = grads[i];
            for (std::size_t k = 0; k < p.size(); ++k) {
                m1[i][k] = beta1 * m1[i][k] + (1.0 - beta1) * g[k];
                m2[i][k] = beta2 * m2[i][k] + (1.0 - beta2) * g[k] * g[k];
                p[k] -= lr * (m1[i][k] / bc1) / (std::sqrt(m2[i][k] / bc2) + eps);
            }
        }
    }
};

void clip_global_norm(std::vector<ad::Tensor>& grads, double max_norm) {
    double sq = 0.0;
    for (const auto& g : grads)
        for (std::size_t k = 0; k < g.size(); ++k) sq += g[k] * g[k];
    const double norm = std::sqrt(sq);
    if (norm > max_norm) {
        const double scale = max_norm / norm;
        for (auto& g : grads)
            for (std::size_t k = 0; k < g.size(); ++k) g[k] *= scale;
    }
}

}  // namespace

double cosine_lr(double initial, int step, int total_steps) {
    if (total_steps <= 1) return initial;
    const double t = static_cast<double>(step) / static_cast<double>(total_steps - 1);
    return initial * 0.5 * (1.0 + std::cos(M_PI * std::min(1.0, t)));
}

double nll_loss(const Model& m, std::span<const TrainingPair> batch, bool zero_context) {
    require(!batch.empty(), "nll_loss: empty batch");
    std::vector<const TrainingPair*> ptrs;
    ptrs.reserve(batch.size());
    for (const auto& p : batch) ptrs.push_back(&p);
    return nll_value_diagnosed(m, ptrs, zero_context);
}

prior::TrainingPair augment(const TrainingPair& pair, Rng& rng, int n_lo, int n_hi) {
    const int n_total = pair.data.size();
    require(1 <= n_lo && n_lo <= n_hi, "augment: need 1 <= n_lo <= n_hi");
    require(n_hi <= n_total, "augment: n_hi " + std::to_string(n_hi) + " exceeds dataset size " +
                                 std::to_string(n_total));
    const int n = static_cast<int>(rng.uniform_int(n_lo, n_hi));
    // partial Fisher-Yates: first n entries are a uniform subset
    std::vector<int> idx(n_total);
    std::iota(idx.begin(), idx.end(), 0);
    for (int i = 0; i < n; ++i) {
        const int j = static_cast<int>(rng.uniform_int(i, n_total - 1));
        std::swap(idx[i], idx[j]);
    }
    TrainingPair out;
    out.x_star = pair.x_star;
    out.y_star = pair.y_star;
    out.data.dim = pair.data.dim;
    for (int i = 0; i < n; ++i) out.data.push(pair.data.x(idx[i]), pair.data.ys[idx[i]]);
    return out;
}

TrainResult train(const prior::Corpus& corpus, const TrainConfig& cfg, EpochCallback cb) {
    require(!corpus.pairs.empty(), "train: empty corpus");
    require(cfg.batch_size >= 1, "train: batch_size must be >= 1");
    require(cfg.epochs >= 0, "train: epochs must be >= 0");
    const int dim = corpus.dim;
    model::ModelConfig mcfg = cfg.model_cfg_set ? cfg.model_cfg : model::default_model_config(dim);
    require(mcfg.dim == dim, "train: corpus dimension " + std::to_string(dim) +
                                 " does not match model dimension " + std::to_string(mcfg.dim));
    Model m = model::init_model(mcfg, cfg.seed);

    const int n_total = static_cast<int>(corpus.pairs.size());
    std::vector<std::size_t> perm = Rng(cfg.seed).derive(0x5B17).permutation(n_total);
    int n_val = 0;
    if (cfg.val_fraction > 0.0 && n_total >= 2)
        n_val = std::clamp(static_cast<int>(std::lround(cfg.val_fraction * n_total)), 1, n_total - 1);
    std::vector<const TrainingPair*> val_set, train_set;
    for (int i = 0; i < n_val; ++i) val_set.push_back(&corpus.pairs[perm[i]]);
    for (int i = n_val; i < n_total; ++i) train_set.push_back(&corpus.pairs[perm[i]]);
    const int n_train = static_cast<int>(train_set.size());
    const std::vector<const TrainingPair*>& eval_set = val_set.empty() ? train_set : val_set;

    TrainResult result;
    Checkpoint& ckpt = result.checkpoint;
    ckpt.prior_hp = cfg.prior_hp;
    ckpt.seed = cfg.seed;
    ckpt.corpus_hash =
        !cfg.corpus_hash.empty() ? cfg.corpus_hash : io::hex64(prior::corpus_content_hash(corpus));
    ckpt.initial_val_nll = nll_value_diagnosed(m, eval_set, false);

    AdamState adam;
    adam.init(m.params);
    const int steps_per_epoch = (n_train + cfg.batch_size - 1) / cfg.batch_size;
    const int total_steps = std::max(1, cfg.epochs * steps_per_epoch);
    int step = 0;
    double last_train_nll = ckpt.initial_val_nll;
    double last_val_nll = ckpt.initial_val_nll;
    model::ParamStore snapshot = m.params;
    int snapshot_epoch = 0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const std::vector<std::size_t> order =
            Rng(cfg.seed).derive(0xE70000ull + static_cast<std::uint64_t>(epoch)).permutation(n_train);
        Rng aug_rng = Rng(cfg.seed).derive(0xA6000000ull + static_cast<std::uint64_t>(epoch));
        double loss_sum = 0.0;
        int loss_count = 0;
        for (int start = 0; start < n_train; start += cfg.batch_size) {
            const int bs = std::min(cfg.batch_size, n_train - start);
            std::vector<TrainingPair> batch_storage;
            std::vector<const TrainingPair*> batch;
            batch_storage.reserve(bs);
            for (int i = 0; i < bs; ++i) {
                const TrainingPair& src = *train_set[order[start + i]];
                const int lo = std::min(cfg.aug_min, src.data.size());
                const int hi = std::min(cfg.aug_max, src.data.size());
                batch_storage.push_back(augment(src, aug_rng, lo, hi));
            }
            for (const auto& p : batch_storage) batch.push_back(&p);

            const double lr = cosine_lr(cfg.learning_rate, step, total_steps);
            try {
                ad::Tape tape;
                ad::TapeEngine eng(tape);
                auto mh = bind_model(eng, m);
                ad::Value loss = nll_graph(eng, mh, m.cfg, batch, false);
                require(is_finite(loss.item()), "loss is non-finite");
                tape.backward(loss);
                std::vector<ad::Tensor> grads;
                grads.reserve(mh.flat.size());
                for (const ad::Value& v : mh.flat) grads.push_back(tape.grad(v));
                clip_global_norm(grads, cfg.grad_clip);
                adam.step(m.params, grads, lr);
                loss_sum += loss.item() * bs;
                loss_count += bs;
            } catch (const FiboError& err) {
                m.params = snapshot;
                ckpt.model = m;
                ckpt.epochs = snapshot_epoch;
                ckpt.final_train_nll = last_train_nll;
                ckpt.final_val_nll = last_val_nll;
                ckpt.diverged = true;
                if (!cfg.checkpoint_path.empty()) save_checkpoint(cfg.checkpoint_path, ckpt);
                fail("train: diverged at epoch " + std::to_string(epoch) + " step " +
                     std::to_string(step) + ", last good checkpoint retained (" + err.what() + ")");
            }
            ++step;
        }
        last_train_nll = loss_sum / std::max(1, loss_count);
        last_val_nll = nll_value_diagnosed(m, eval_set, false);
        result.epoch_train_nll.push_back(last_train_nll);
        result.epoch_val_nll.push_back(last_val_nll);
        snapshot = m.params;
        snapshot_epoch = epoch + 1;
        if (cb) cb(epoch, m, last_train_nll, last_val_nll);
    }

    ckpt.model = std::move(m);
    ckpt.epochs = cfg.epochs;
    ckpt.final_train_nll = last_train_nll;
    ckpt.final_val_nll = last_val_nll;
    ckpt.diverged = false;
    if (!cfg.checkpoint_path.empty()) save_checkpoint(cfg.checkpoint_path, ckpt);
    return result;
}

}  // namespace fibo::train

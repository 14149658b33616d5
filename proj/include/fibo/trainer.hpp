#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "fibo/checkpoint.hpp"
#include "fibo/func_prior.hpp"
#include "fibo/model.hpp"

namespace fibo::train {

struct TrainConfig {
    int epochs = 40;
    int batch_size = 64;
    double learning_rate = 3e-4;  // cosine-decayed to zero over all steps
    std::uint64_t seed = 0;
    int aug_min = 8;   // subsampling augmentation bounds, clamped per pair
    int aug_max = 100;
    double val_fraction = 0.1;
    double grad_clip = 10.0;
    std::string checkpoint_path;            // empty: keep in memory only
    prior::PriorHyperparams prior_hp;       // recorded into the checkpoint
    model::ModelConfig model_cfg;           // used when model_cfg_set
    bool model_cfg_set = false;
    std::string corpus_hash;                // hex hash of the corpus file
};

// Mean negative log-likelihood of a batch under the model. zero_context
// feeds the flow a zero vector instead of the encoded dataset.
double nll_loss(const model::Model& m, std::span<const prior::TrainingPair> batch,
                bool zero_context = false);

// Same x*, D replaced by a uniform subset of size U{n_lo..n_hi}.
prior::TrainingPair augment(const prior::TrainingPair& pair, Rng& rng, int n_lo, int n_hi);

double cosine_lr(double initial, int step, int total_steps);

struct TrainResult {
    Checkpoint checkpoint;
    std::vector<double> epoch_train_nll;
    std::vector<double> epoch_val_nll;
};

// Called after each epoch with the live model (for mid-training snapshots).
using EpochCallback =
    std::function<void(int epoch, const model::Model& m, double train_nll, double val_nll)>;

// Adam + cosine schedule + global-norm clipping over shuffled, augmented
// batches; validation split held out before augmentation. Deterministic
// for a given config.
TrainResult train(const prior::Corpus& corpus, const TrainConfig& cfg, EpochCallback cb = nullptr);

}  // namespace fibo::train

#pragma once

#include <string>

#include "fibo/func_prior.hpp"
#include "fibo/model.hpp"

namespace fibo::train {

// Self-describing model snapshot: configs and weights load without the
// original flags. File format "FIBM": magic, version, then length-prefixed
// named sections ("meta" JSON, "weights" f64 arrays with shapes).
struct Checkpoint {
    model::Model model;
    prior::PriorHyperparams prior_hp;
    std::string corpus_hash;
    std::uint64_t seed = 0;
    int epochs = 0;
    double initial_val_nll = 0.0;
    double final_train_nll = 0.0;
    double final_val_nll = 0.0;
    bool diverged = false;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

std::string checkpoint_meta_json(const Checkpoint& ckpt);  // for inspection

}  // namespace fibo::train

#include "fibo/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "fibo/io_util.hpp"

namespace fibo::train {

using nlohmann::json;

namespace {

json config_to_json(const model::ModelConfig& cfg) {
    json j;
    j["dim"] = cfg.dim;
    j["encoder"] = {{"hidden", cfg.enc.hidden},
                    {"width", cfg.enc.width},
                    {"context_dim", cfg.enc.context_dim},
                    {"attention", cfg.enc.attention}};
    j["flow"] = {{"blocks", cfg.flow.blocks},   {"bins", cfg.flow.bins},
                 {"tail", cfg.flow.tail},       {"cond_hidden", cfg.flow.cond_hidden},
                 {"min_bin", cfg.flow.min_bin}, {"min_deriv", cfg.flow.min_deriv}};
    return j;
}

model::ModelConfig config_from_json(const json& j) {
    model::ModelConfig cfg;
    cfg.dim = j.at("dim").get<int>();
    cfg.enc.dim = cfg.dim;
    cfg.enc.hidden = j.at("encoder").at("hidden").get<int>();
    cfg.enc.width = j.at("encoder").at("width").get<int>();
    cfg.enc.context_dim = j.at("encoder").at("context_dim").get<int>();
    cfg.enc.attention = j.at("encoder").at("attention").get<bool>();
    cfg.flow.dim = cfg.dim;
    cfg.flow.blocks = j.at("flow").at("blocks").get<int>();
    cfg.flow.bins = j.at("flow").at("bins").get<int>();
    cfg.flow.tail = j.at("flow").at("tail").get<double>();
    cfg.flow.cond_hidden = j.at("flow").at("cond_hidden").get<int>();
    cfg.flow.min_bin = j.at("flow").at("min_bin").get<double>();
    cfg.flow.min_deriv = j.at("flow").at("min_deriv").get<double>();
    return cfg;
}

json meta_json(const Checkpoint& c) {
    json j;
    j["format_version"] = 1;
    j["dim"] = c.model.cfg.dim;
    j["model"] = config_to_json(c.model.cfg);
    j["prior"] = {{"dim", c.prior_hp.dim},
                  {"num_features", c.prior_hp.num_features},
                  {"lengthscale", {c.prior_hp.lengthscale_lo, c.prior_hp.lengthscale_hi}},
                  {"signal_variance", {c.prior_hp.signal_var_lo, c.prior_hp.signal_var_hi}}};
    j["training"] = {{"corpus_hash", c.corpus_hash},
                     {"seed", c.seed},
                     {"epochs", c.epochs},
                     {"initial_val_nll", c.initial_val_nll},
                     {"final_train_nll", c.final_train_nll},
                     {"final_val_nll", c.final_val_nll},
                     {"diverged", c.diverged}};
    return j;
}

void write_section(std::ostream& os, const std::string& name, const std::string& payload) {
    io::write_u32(os, static_cast<std::uint32_t>(name.size()));
    io::write_bytes(os, name.data(), name.size());
    io::write_u64(os, payload.size());
    io::write_bytes(os, payload.data(), payload.size());
}

}  // namespace

std::string checkpoint_meta_json(const Checkpoint& ckpt) { return meta_json(ckpt).dump(2); }

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    std::ostringstream weights;
    const auto& params = ckpt.model.params;
    io::write_u32(weights, static_cast<std::uint32_t>(params.count()));
    for (int i = 0; i < params.count(); ++i) {
        const std::string& name = params.name(i);
        const ad::Tensor& t = params.value(i);
        io::write_u32(weights, static_cast<std::uint32_t>(name.size()));
        io::write_bytes(weights, name.data(), name.size());
        io::write_u32(weights, static_cast<std::uint32_t>(t.rank()));
        for (int e : t.shape()) io::write_u64(weights, static_cast<std::uint64_t>(e));
        for (double v : t.vals()) io::write_f64(weights, v);
    }

    io::atomic_write(path, [&](std::ostream& os) {
        io::write_bytes(os, "FIBM", 4);
        io::write_u32(os, 1);
        io::write_u32(os, 2);  // section count
        write_section(os, "meta", meta_json(ckpt).dump());
        write_section(os, "weights", weights.str());
    });
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    require(is.good(), "cannot open checkpoint: " + path);
    char magic[4];
    io::read_bytes(is, magic, 4);
    require(std::string(magic, 4) == "FIBM", "not a checkpoint file (bad magic): " + path);
    const std::uint32_t version = io::read_u32(is);
    require(version == 1, "unsupported checkpoint version " + std::to_string(version));
    const std::uint32_t nsec = io::read_u32(is);
    std::string meta_text, weights_text;
    for (std::uint32_t s = 0; s < nsec; ++s) {
        const std::uint32_t name_len = io::read_u32(is);
        std::string name(name_len, '\0');
        io::read_bytes(is, name.data(), name_len);
        const std::uint64_t payload_len = io::read_u64(is);
        std::string payload(payload_len, '\0');
        io::read_bytes(is, payload.data(), payload_len);
        if (name == "meta") meta_text = std::move(payload);
        else if (name == "weights") weights_text = std::move(payload);
    }
    require(!meta_text.empty() && !weights_text.empty(), "checkpoint missing sections: " + path);

    Checkpoint c;
    const json j = json::parse(meta_text);
    c.model.cfg = config_from_json(j.at("model"));
    c.prior_hp.dim = j.at("prior").at("dim").get<int>();
    c.prior_hp.num_features = j.at("prior").at("num_features").get<int>();
    c.prior_hp.lengthscale_lo = j.at("prior").at("lengthscale")[0].get<double>();
    c.prior_hp.lengthscale_hi = j.at("prior").at("lengthscale")[1].get<double>();
    c.prior_hp.signal_var_lo = j.at("prior").at("signal_variance")[0].get<double>();
    c.prior_hp.signal_var_hi = j.at("prior").at("signal_variance")[1].get<double>();
    c.corpus_hash = j.at("training").at("corpus_hash").get<std::string>();
    c.seed = j.at("training").at("seed").get<std::uint64_t>();
    c.epochs = j.at("training").at("epochs").get<int>();
    c.initial_val_nll = j.at("training").at("initial_val_nll").get<double>();
    c.final_train_nll = j.at("training").at("final_train_nll").get<double>();
    c.final_val_nll = j.at("training").at("final_val_nll").get<double>();
    c.diverged = j.at("training").at("diverged").get<bool>();

    std::istringstream ws(weights_text);
    const std::uint32_t count = io::read_u32(ws);
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t name_len = io::read_u32(ws);
        std::string name(name_len, '\0');
        io::read_bytes(ws, name.data(), name_len);
        const std::uint32_t rank = io::read_u32(ws);
        std::vector<int> shape(rank);
        std::size_t numel = 1;
        for (auto& e : shape) {
            e = static_cast<int>(io::read_u64(ws));
            numel *= static_cast<std::size_t>(e);
        }
        std::vector<double> data(numel);
        for (auto& v : data) v = io::read_f64(ws);
        c.model.params.add(std::move(name), ad::Tensor(std::move(shape), std::move(data)));
    }
    return c;
}

}  // namespace fibo::train

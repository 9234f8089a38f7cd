#pragma once

#include <json.hpp>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "hydrossm/dataset.hpp"
#include "hydrossm/model.hpp"

namespace hydrossm {

/// Optimization hyperparameters. weight_decay applies to encoder/decoder/
/// norm tensors, wd to SSM-internal tensors; log_dt trains undecayed at its
/// own learning rate.
struct TrainConfig {
    enum class Loss { Mse, BasinNse };

    std::size_t epochs = 50;
    std::size_t epochs_scheduler = 50;
    std::size_t batch_size = 128;
    double lr = 4e-4;
    double lr_min = 4e-5;
    double lr_dt = 1e-3;
    double weight_decay = 3e-2;
    double wd = 2e-2;
    std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5, 6, 7, 8};
    Loss loss = Loss::Mse;
    double grad_clip = 1.0;

    std::vector<std::string> violations() const {
        std::vector<std::string> v;
        if (epochs == 0) v.push_back("epochs must be positive");
        if (epochs_scheduler == 0) v.push_back("epochs_scheduler must be positive");
        if (batch_size == 0) v.push_back("batch_size must be positive");
        if (!(lr > 0.0)) v.push_back("lr must be positive");
        if (!(lr_min >= 0.0) || lr_min > lr) v.push_back("lr_min must satisfy 0 <= lr_min <= lr");
        if (!(lr_dt > 0.0)) v.push_back("lr_dt must be positive");
        if (weight_decay < 0.0) v.push_back("weight_decay must be nonnegative");
        if (wd < 0.0) v.push_back("wd must be nonnegative");
        if (seeds.empty()) v.push_back("seeds must be nonempty");
        if (grad_clip < 0.0) v.push_back("grad_clip must be nonnegative (0 disables)");
        return v;
    }

    void validate() const {
        auto v = violations();
        if (v.empty()) return;
        std::string msg = "invalid train config:";
        for (const auto& s : v) msg += "\n  - " + s;
        throw std::invalid_argument(msg);
    }
};

inline std::string loss_name(TrainConfig::Loss loss) {
    return loss == TrainConfig::Loss::Mse ? "mse" : "basin_nse";
}

inline TrainConfig::Loss loss_from_name(const std::string& name) {
    if (name == "mse") return TrainConfig::Loss::Mse;
    if (name == "basin_nse") return TrainConfig::Loss::BasinNse;
    throw std::invalid_argument("unknown loss '" + name + "' (expected mse or basin_nse)");
}

// ---------------------------------------------------------------------------
// JSON adapters
// ---------------------------------------------------------------------------

inline void reject_unknown_keys(const nlohmann::json& j, const std::vector<std::string>& allowed,
                                const std::string& section) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const auto& k : allowed) ok = ok || (it.key() == k);
        if (!ok)
            throw std::invalid_argument("unknown key '" + it.key() + "' in " + section);
    }
}

inline nlohmann::json to_json(const ModelConfig& c) {
    return {{"d_model", c.d_model},   {"d_state", c.d_state},
            {"n_layer", c.n_layer},   {"dropout", c.dropout},
            {"cfi", c.cfi},           {"cfr", c.cfr},
            {"min_dt", c.dt_bounds.min_dt}, {"max_dt", c.dt_bounds.max_dt},
            {"input_dim", c.input_dim}, {"lookback", c.lookback}};
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
    reject_unknown_keys(j,
                        {"d_model", "d_state", "n_layer", "dropout", "cfi", "cfr", "min_dt",
                         "max_dt", "input_dim", "lookback"},
                        "model config");
    ModelConfig c;
    c.d_model = j.value("d_model", c.d_model);
    c.d_state = j.value("d_state", c.d_state);
    c.n_layer = j.value("n_layer", c.n_layer);
    c.dropout = j.value("dropout", c.dropout);
    c.cfi = j.value("cfi", c.cfi);
    c.cfr = j.value("cfr", c.cfr);
    c.dt_bounds.min_dt = j.value("min_dt", c.dt_bounds.min_dt);
    c.dt_bounds.max_dt = j.value("max_dt", c.dt_bounds.max_dt);
    c.input_dim = j.value("input_dim", c.input_dim);
    c.lookback = j.value("lookback", c.lookback);
    return c;
}

inline nlohmann::json to_json(const TrainConfig& c) {
    return {{"epochs", c.epochs},
            {"epochs_scheduler", c.epochs_scheduler},
            {"batch_size", c.batch_size},
            {"lr", c.lr},
            {"lr_min", c.lr_min},
            {"lr_dt", c.lr_dt},
            {"weight_decay", c.weight_decay},
            {"wd", c.wd},
            {"seeds", c.seeds},
            {"loss", loss_name(c.loss)},
            {"grad_clip", c.grad_clip}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
    reject_unknown_keys(j,
                        {"epochs", "epochs_scheduler", "batch_size", "lr", "lr_min", "lr_dt",
                         "weight_decay", "wd", "seeds", "loss", "grad_clip"},
                        "train config");
    TrainConfig c;
    c.epochs = j.value("epochs", c.epochs);
    c.epochs_scheduler = j.value("epochs_scheduler", c.epochs_scheduler);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.lr = j.value("lr", c.lr);
    c.lr_min = j.value("lr_min", c.lr_min);
    c.lr_dt = j.value("lr_dt", c.lr_dt);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.wd = j.value("wd", c.wd);
    if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    if (j.contains("loss")) c.loss = loss_from_name(j.at("loss").get<std::string>());
    c.grad_clip = j.value("grad_clip", c.grad_clip);
    return c;
}

inline nlohmann::json to_json(const Normalizer& n) {
    return {{"input_mean", std::vector<double>(n.input_mean.begin(), n.input_mean.end())},
            {"input_std", std::vector<double>(n.input_std.begin(), n.input_std.end())},
            {"discharge_mean", n.discharge_mean},
            {"discharge_std", n.discharge_std}};
}

inline Normalizer normalizer_from_json(const nlohmann::json& j) {
    Normalizer n;
    const auto mean = j.at("input_mean").get<std::vector<double>>();
    const auto sd = j.at("input_std").get<std::vector<double>>();
    if (mean.size() != kInputDim || sd.size() != kInputDim)
        throw std::invalid_argument("normalizer: expected " + std::to_string(kInputDim) +
                                    " feature statistics");
    std::copy(mean.begin(), mean.end(), n.input_mean.begin());
    std::copy(sd.begin(), sd.end(), n.input_std.begin());
    n.discharge_mean = j.at("discharge_mean").get<double>();
    n.discharge_std = j.at("discharge_std").get<double>();
    return n;
}

}  // namespace hydrossm

#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hydrossm/config_json.hpp"
#include "hydrossm/trainer.hpp"

namespace hydrossm {

/// Single-file checkpoint: an 8-byte magic, a u64 header length, a JSON
/// header (config snapshot, seed, epoch, normalizer, tensor manifest) and
/// raw little-endian float64 blocks in manifest order. Reload plus one
/// forward reproduces pre-save outputs exactly.
struct Checkpoint {
    ModelConfig model_config;
    TrainConfig train_config;
    std::uint64_t seed = 0;
    std::size_t epoch = 0;
    Normalizer normalizer;
    DeepSSMModel model;
    std::vector<std::vector<Moments>> moments;  // per group, per tensor
    std::size_t optimizer_step = 0;
};

namespace detail {

inline constexpr char kCkptMagic[8] = {'H', 'S', 'S', 'M', 'C', 'K', 'P', '1'};

static_assert(std::endian::native == std::endian::little,
              "checkpoint blocks are little-endian float64");

inline void write_block(std::ofstream& out, const std::vector<double>& data) {
    out.write(reinterpret_cast<const char*>(data.data()),
              static_cast<std::streamsize>(data.size() * sizeof(double)));
}

inline void read_block(std::ifstream& in, std::vector<double>& data) {
    in.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(double)));
    if (!in) throw std::runtime_error("checkpoint: truncated tensor block");
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, const DeepSSMModel& model,
                            const AdamOptimizer& optimizer, const TrainConfig& train_config,
                            std::uint64_t seed, std::size_t epoch, const Normalizer& normalizer) {
    nlohmann::json manifest = nlohmann::json::array();
    std::vector<const std::vector<double>*> blocks;

    for (const auto& [name, tensor] : model.named_parameters()) {
        manifest.push_back({{"name", name}, {"shape", tensor.shape()}});
        blocks.push_back(&tensor.data());
    }
    const auto& groups = optimizer.groups();
    const auto& moments = optimizer.moments();
    for (std::size_t gi = 0; gi < groups.size(); ++gi)
        for (std::size_t pi = 0; pi < groups[gi].params.size(); ++pi) {
            const auto& name = groups[gi].params[pi].first;
            const auto& mom = moments[gi][pi];
            if (mom.m.empty()) continue;  // never stepped
            manifest.push_back({{"name", name + ".adam_m"},
                                {"shape", std::vector<std::size_t>{mom.m.size()}}});
            blocks.push_back(&mom.m);
            manifest.push_back({{"name", name + ".adam_v"},
                                {"shape", std::vector<std::size_t>{mom.v.size()}}});
            blocks.push_back(&mom.v);
        }

    nlohmann::json header{{"format", 1},
                          {"model", to_json(model.config)},
                          {"train", to_json(train_config)},
                          {"seed", seed},
                          {"epoch", epoch},
                          {"optimizer_step", optimizer.step_count()},
                          {"normalizer", to_json(normalizer)},
                          {"tensors", manifest}};
    const std::string header_text = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint " + path);
    out.write(detail::kCkptMagic, sizeof(detail::kCkptMagic));
    const std::uint64_t len = header_text.size();
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
    for (const auto* b : blocks) detail::write_block(out, *b);
    if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || !std::equal(magic, magic + 8, detail::kCkptMagic))
        throw std::runtime_error(path + ": not a checkpoint file");
    std::uint64_t len = 0;
    in.read(reinterpret_cast<char*>(&len), sizeof(len));
    std::string header_text(len, '\0');
    in.read(header_text.data(), static_cast<std::streamsize>(len));
    if (!in) throw std::runtime_error(path + ": truncated header");
    const auto header = nlohmann::json::parse(header_text);

    Checkpoint ckpt;
    ckpt.model_config = model_config_from_json(header.at("model"));
    ckpt.train_config = train_config_from_json(header.at("train"));
    ckpt.seed = header.at("seed").get<std::uint64_t>();
    ckpt.epoch = header.at("epoch").get<std::size_t>();
    ckpt.optimizer_step = header.at("optimizer_step").get<std::size_t>();
    ckpt.normalizer = normalizer_from_json(header.at("normalizer"));

    // Rebuild the model skeleton, then overwrite every tensor from the file.
    ckpt.model = build_model(ckpt.model_config, ckpt.seed);
    std::map<std::string, ag::Tensor> by_name;
    for (auto& [name, tensor] : ckpt.model.named_parameters()) by_name.emplace(name, tensor);

    auto groups = make_param_groups(ckpt.model);
    ckpt.moments.clear();
    for (const auto& g : groups) ckpt.moments.emplace_back(g.params.size());
    auto moment_slot = [&](const std::string& base, bool first) -> std::vector<double>* {
        for (std::size_t gi = 0; gi < groups.size(); ++gi)
            for (std::size_t pi = 0; pi < groups[gi].params.size(); ++pi)
                if (groups[gi].params[pi].first == base) {
                    auto& mom = ckpt.moments[gi][pi];
                    if (mom.m.empty()) {
                        const std::size_t n = groups[gi].params[pi].second.size();
                        mom.m.assign(n, 0.0);
                        mom.v.assign(n, 0.0);
                    }
                    return first ? &mom.m : &mom.v;
                }
        return nullptr;
    };

    for (const auto& entry : header.at("tensors")) {
        const std::string name = entry.at("name").get<std::string>();
        const auto shape = entry.at("shape").get<std::vector<std::size_t>>();
        std::size_t count = 1;
        for (auto d : shape) count *= d;
        std::vector<double> data(count);
        detail::read_block(in, data);

        if (name.ends_with(".adam_m") || name.ends_with(".adam_v")) {
            const bool first = name.ends_with(".adam_m");
            const std::string base = name.substr(0, name.size() - 7);
            auto* slot = moment_slot(base, first);
            if (!slot) throw std::runtime_error(path + ": moment for unknown parameter " + base);
            if (slot->size() != count)
                throw std::runtime_error(path + ": moment size mismatch for " + base);
            *slot = std::move(data);
        } else {
            auto it = by_name.find(name);
            if (it == by_name.end())
                throw std::runtime_error(path + ": unknown tensor '" + name + "'");
            if (it->second.shape() != shape)
                throw std::runtime_error(path + ": shape mismatch for tensor '" + name + "'");
            it->second.data() = std::move(data);
        }
    }
    return ckpt;
}

/// Restores an optimizer whose groups alias the checkpoint's model tensors.
inline AdamOptimizer restore_optimizer(const Checkpoint& ckpt) {
    AdamOptimizer opt(make_param_groups(ckpt.model), ckpt.train_config);
    opt.moments() = ckpt.moments;
    opt.set_step_count(ckpt.optimizer_step);
    return opt;
}

}  // namespace hydrossm

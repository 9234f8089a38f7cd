#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "hydrossm/config_json.hpp"
#include "hydrossm/dataset.hpp"
#include "hydrossm/model.hpp"
#include "hydrossm/random.hpp"

namespace hydrossm {

// ---------------------------------------------------------------------------
// Parameter groups
// ---------------------------------------------------------------------------

/// A: log_dt at its own learning rate, undecayed. B: SSM pole/C/D tensors
/// at lr with decay wd. C: encoder/decoder/norm tensors at lr with decay
/// weight_decay.
enum class ParamGroupKind { DtRate, SsmInternal, General };

struct ParamGroup {
    ParamGroupKind kind;
    std::vector<std::pair<std::string, ag::Tensor>> params;
};

inline std::vector<ParamGroup> make_param_groups(const DeepSSMModel& model) {
    std::vector<ParamGroup> groups{{ParamGroupKind::DtRate, {}},
                                   {ParamGroupKind::SsmInternal, {}},
                                   {ParamGroupKind::General, {}}};
    for (const auto& [name, tensor] : model.named_parameters()) {
        if (name.ends_with("ssm.log_dt"))
            groups[0].params.emplace_back(name, tensor);
        else if (name.find(".ssm.") != std::string::npos)
            groups[1].params.emplace_back(name, tensor);
        else
            groups[2].params.emplace_back(name, tensor);
    }
    // the partition must cover the parameter set exactly once
    auto all = model.parameters();
    std::size_t covered = 0;
    for (const auto& g : groups)
        for (const auto& [name, t] : g.params) {
            bool found = false;
            for (const auto& p : all) found = found || p.same_storage(t);
            if (!found) throw std::runtime_error("make_param_groups: orphan parameter " + name);
            ++covered;
        }
    if (covered != all.size())
        throw std::runtime_error("make_param_groups: group partition covers " +
                                 std::to_string(covered) + " of " + std::to_string(all.size()) +
                                 " parameters");
    return groups;
}

// ---------------------------------------------------------------------------
// Learning-rate schedule
// ---------------------------------------------------------------------------

struct GroupLr {
    double general;  // groups B and C
    double dt;       // group A
};

/// Cosine annealing from lr to lr_min over epochs_scheduler; the dt group
/// follows the same cosine factor relative to its own floor lr_dt*(lr_min/lr).
inline GroupLr cosine_lr(std::size_t epoch, const TrainConfig& cfg) {
    const double theta = M_PI * static_cast<double>(epoch) /
                         static_cast<double>(cfg.epochs_scheduler);
    const double general = cfg.lr_min + 0.5 * (cfg.lr - cfg.lr_min) * (1.0 + std::cos(theta));
    return {general, cfg.lr_dt * general / cfg.lr};
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

struct Moments {
    std::vector<double> m, v;
};

/// One decoupled-weight-decay Adam update on a single tensor. beta1 = 0.9,
/// beta2 = 0.999, eps = 1e-8, bias-corrected; the decay multiplies the
/// parameter before the Adam delta.
inline void adam_step(ag::Tensor& param, Moments& mom, std::size_t t, double lr_t, double decay,
                      const std::string& name = "") {
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    if (mom.m.empty()) {
        mom.m.assign(param.size(), 0.0);
        mom.v.assign(param.size(), 0.0);
    }
    const auto& g = param.grad();
    for (double gv : g)
        if (!std::isfinite(gv))
            throw std::runtime_error("adam_step: non-finite gradient in parameter '" + name + "'");
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    double* p = param.ptr();
    for (std::size_t i = 0; i < param.size(); ++i) {
        p[i] *= (1.0 - lr_t * decay);
        mom.m[i] = beta1 * mom.m[i] + (1.0 - beta1) * g[i];
        mom.v[i] = beta2 * mom.v[i] + (1.0 - beta2) * g[i] * g[i];
        const double mhat = mom.m[i] / bc1;
        const double vhat = mom.v[i] / bc2;
        p[i] -= lr_t * mhat / (std::sqrt(vhat) + eps);
    }
}

/// Adam over the three parameter groups. Moments live here so a checkpoint
/// can carry the full optimizer state.
class AdamOptimizer {
public:
    AdamOptimizer(std::vector<ParamGroup> groups, const TrainConfig& cfg)
        : groups_(std::move(groups)), cfg_(cfg) {
        for (const auto& g : groups_) moments_.emplace_back(g.params.size());
    }

    /// Applies one update using per-group learning rates and decays.
    void step(const GroupLr& lr) {
        ++t_;
        for (std::size_t gi = 0; gi < groups_.size(); ++gi) {
            auto& group = groups_[gi];
            const double rate = group.kind == ParamGroupKind::DtRate ? lr.dt : lr.general;
            const double decay = group.kind == ParamGroupKind::DtRate ? 0.0
                                 : group.kind == ParamGroupKind::SsmInternal ? cfg_.wd
                                                                             : cfg_.weight_decay;
            for (std::size_t pi = 0; pi < group.params.size(); ++pi)
                adam_step(group.params[pi].second, moments_[gi][pi], t_, rate, decay,
                          group.params[pi].first);
        }
    }

    std::size_t step_count() const { return t_; }
    void set_step_count(std::size_t t) { t_ = t; }
    const std::vector<ParamGroup>& groups() const { return groups_; }
    std::vector<std::vector<Moments>>& moments() { return moments_; }
    const std::vector<std::vector<Moments>>& moments() const { return moments_; }

private:
    std::vector<ParamGroup> groups_;
    TrainConfig cfg_;
    std::vector<std::vector<Moments>> moments_;
    std::size_t t_ = 0;
};

/// Global-norm gradient clipping across every parameter; 0 disables.
inline double clip_gradients(const std::vector<ParamGroup>& groups, double max_norm) {
    double sq = 0.0;
    for (const auto& g : groups)
        for (const auto& [name, t] : g.params)
            for (double gv : t.grad()) sq += gv * gv;
    const double norm = std::sqrt(sq);
    if (max_norm > 0.0 && norm > max_norm) {
        const double scale = max_norm / norm;
        for (const auto& g : groups)
            for (const auto& [name, t] : g.params) {
                auto& grad = const_cast<ag::Tensor&>(t).grad();
                for (auto& gv : grad) gv *= scale;
            }
    }
    return norm;
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

struct EpochLog {
    std::size_t epoch;
    double train_loss;
    double lr;
};

namespace detail {

inline void fill_batch(const WindowDataset& data, const std::vector<std::size_t>& indices,
                       std::size_t begin, std::size_t count, ag::Tensor& inputs,
                       ag::Tensor& targets) {
    const std::size_t L = data.lookback();
    for (std::size_t b = 0; b < count; ++b) {
        const std::size_t i = indices[begin + b];
        data.fill_input(i, inputs.ptr() + b * L * kInputDim);
        targets[b] = data.target_standardized(i);
    }
}

/// Per-record standard deviation of the standardized targets, for the
/// basin-variance-weighted loss.
inline std::vector<double> per_record_target_std(const WindowDataset& data) {
    std::map<std::size_t, std::pair<double, double>> acc;  // record -> (sum, sumsq)
    std::map<std::size_t, std::size_t> count;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto& ref = data.ref(i);
        const double y = data.target_standardized(i);
        acc[ref.record].first += y;
        acc[ref.record].second += y * y;
        ++count[ref.record];
    }
    std::size_t max_rec = 0;
    for (const auto& [r, c] : count) max_rec = std::max(max_rec, r);
    std::vector<double> stds(max_rec + 1, 1.0);
    for (const auto& [r, sums] : acc) {
        const double n = static_cast<double>(count[r]);
        const double mean = sums.first / n;
        stds[r] = std::sqrt(std::max(0.0, sums.second / n - mean * mean));
    }
    return stds;
}

}  // namespace detail

/// Seeded epoch loop: shuffle, batch, forward, loss, backward, clipped Adam
/// per group under the cosine schedule. Deterministic per (seed, data, cfg).
inline std::vector<EpochLog> train_model(DeepSSMModel& model, AdamOptimizer& optimizer,
                                         const WindowDataset& data, const TrainConfig& cfg,
                                         std::uint64_t seed,
                                         const std::function<void(const EpochLog&)>& on_epoch = {}) {
    cfg.validate();
    if (data.size() == 0) throw std::invalid_argument("train_model: no training windows");
    model.set_trainable(true);

    std::uint64_t stream = seed;
    Rng shuffle_rng(split_seed(stream));
    Rng dropout_rng(split_seed(stream));

    std::vector<double> basin_w;
    if (cfg.loss == TrainConfig::Loss::BasinNse) {
        auto stds = detail::per_record_target_std(data);
        basin_w.resize(stds.size());
        for (std::size_t r = 0; r < stds.size(); ++r) {
            const double s = stds[r] + 0.1;  // eps guards near-constant basins
            basin_w[r] = 1.0 / (s * s);
        }
    }

    std::vector<std::size_t> indices(data.size());
    std::iota(indices.begin(), indices.end(), 0);
    const std::size_t L = data.lookback();

    std::vector<EpochLog> log;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle_rng.shuffle(indices);
        const GroupLr lr = cosine_lr(epoch, cfg);
        double loss_sum = 0.0;
        std::size_t batches = 0;

        for (std::size_t begin = 0; begin < indices.size(); begin += cfg.batch_size) {
            const std::size_t count = std::min(cfg.batch_size, indices.size() - begin);
            ag::Tensor inputs = ag::Tensor::zeros({count, L, kInputDim});
            ag::Tensor targets = ag::Tensor::zeros({count, 1});
            detail::fill_batch(data, indices, begin, count, inputs, targets);

            ag::Tape tape;
            double loss_value;
            {
                ag::TapeScope scope(tape);
                namespace op = ag::ops;
                auto pred = model_forward(model, inputs, /*train_mode=*/true, &dropout_rng);
                auto err = op::sub(pred, targets);
                ag::Tensor loss;
                if (cfg.loss == TrainConfig::Loss::BasinNse) {
                    ag::Tensor w = ag::Tensor::zeros({count, 1});
                    for (std::size_t b = 0; b < count; ++b)
                        w[b] = basin_w[data.ref(indices[begin + b]).record];
                    loss = op::mean(op::mul(w, op::mul(err, err)));
                } else {
                    loss = op::mean(op::mul(err, err));
                }
                loss_value = loss.value();
                if (!std::isfinite(loss_value))
                    throw std::runtime_error("train_model: non-finite loss at epoch " +
                                             std::to_string(epoch) + " batch " +
                                             std::to_string(batches));
                tape.backward(loss);
            }
            clip_gradients(optimizer.groups(), cfg.grad_clip);
            optimizer.step(lr);
            loss_sum += loss_value;
            ++batches;
        }
        EpochLog entry{epoch, loss_sum / static_cast<double>(batches), lr.general};
        log.push_back(entry);
        if (on_epoch) on_epoch(entry);
    }
    return log;
}

// ---------------------------------------------------------------------------
// Prediction and ensembling
// ---------------------------------------------------------------------------

struct BasinPrediction {
    Date date;
    double q_sim_mm_day;
};

/// Eval-mode forwards over a window dataset, denormalized to mm/day.
inline std::map<std::string, std::vector<BasinPrediction>> predict_windows(
    const DeepSSMModel& model, const WindowDataset& data, std::size_t batch_size = 128) {
    std::map<std::string, std::vector<BasinPrediction>> out;
    const std::size_t L = data.lookback();
    ag::NoGradScope no_grad;
    for (std::size_t begin = 0; begin < data.size(); begin += batch_size) {
        const std::size_t count = std::min(batch_size, data.size() - begin);
        ag::Tensor inputs = ag::Tensor::zeros({count, L, kInputDim});
        for (std::size_t b = 0; b < count; ++b)
            data.fill_input(begin + b, inputs.ptr() + b * L * kInputDim);
        auto pred = model_forward(model, inputs, /*train_mode=*/false);
        for (std::size_t b = 0; b < count; ++b) {
            const std::size_t i = begin + b;
            out[data.record_of(i).basin_id].push_back(
                {data.target_date(i), data.normalizer().denormalize_discharge(pred[b])});
        }
    }
    return out;
}

struct EnsembleInputs {
    ModelConfig model_config;
    TrainConfig train_config;
    const std::vector<BasinRecord>* records = nullptr;
    Normalizer normalizer;
    DatePeriod train_period;
    DatePeriod test_period;
};

struct MemberResult {
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;
    std::vector<EpochLog> log;
    std::map<std::string, std::vector<BasinPrediction>> predictions;
    DeepSSMModel model;
};

/// Trains one member per seed, each fully isolated (own model, tape,
/// optimizer). A failed member reports its error without aborting the rest.
inline std::vector<MemberResult> run_ensemble(const EnsembleInputs& in, std::size_t jobs = 1) {
    in.model_config.validate();
    in.train_config.validate();
    if (!in.records || in.records->empty())
        throw std::invalid_argument("run_ensemble: no basin records");

    const auto& seeds = in.train_config.seeds;
    std::vector<MemberResult> results(seeds.size());

    WindowDataset train_data(*in.records, in.train_period, in.normalizer,
                             in.model_config.lookback);
    WindowDataset test_data(*in.records, in.test_period, in.normalizer, in.model_config.lookback);

    auto run_member = [&](std::size_t k) {
        MemberResult& r = results[k];
        r.seed = seeds[k];
        try {
            r.model = build_model(in.model_config, seeds[k]);
            AdamOptimizer opt(make_param_groups(r.model), in.train_config);
            r.log = train_model(r.model, opt, train_data, in.train_config, seeds[k]);
            r.predictions = predict_windows(r.model, test_data, in.train_config.batch_size);
            r.ok = true;
        } catch (const std::exception& e) {
            r.ok = false;
            r.error = e.what();
        }
    };

    if (jobs <= 1) {
        for (std::size_t k = 0; k < seeds.size(); ++k) run_member(k);
    } else {
        std::vector<std::thread> pool;
        std::size_t next = 0;
        const std::size_t workers = std::min(jobs, seeds.size());
        std::mutex mu;
        for (std::size_t w = 0; w < workers; ++w)
            pool.emplace_back([&]() {
                while (true) {
                    std::size_t k;
                    {
                        std::lock_guard<std::mutex> lock(mu);
                        if (next >= seeds.size()) return;
                        k = next++;
                    }
                    run_member(k);
                }
            });
        for (auto& t : pool) t.join();
    }
    return results;
}

}  // namespace hydrossm

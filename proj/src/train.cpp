#include "matnet/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>

#include "matnet/common.hpp"
#include "matnet/ops.hpp"

namespace matnet {

AdamState::AdamState(const ParamStore& params, AdamConfig config) : cfg_(config) {
    if (cfg_.lr <= 0.0) throw ConfigError("learning rate must be positive");
    sizes_.reserve(params.size());
    for (const auto& [name, t] : params.items()) {
        sizes_.push_back(t.numel());
        m_.emplace_back(t.numel(), 0.0);
        v_.emplace_back(t.numel(), 0.0);
    }
}

void AdamState::set_lr(double lr) {
    if (lr <= 0.0) throw ConfigError("learning rate must be positive");
    cfg_.lr = lr;
}

void AdamState::step(ParamStore& params) {
    if (params.size() != sizes_.size()) {
        throw ContractError("optimizer state covers " + std::to_string(sizes_.size()) +
                            " parameters but the store has " + std::to_string(params.size()));
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t p = 0; p < sizes_.size(); ++p) {
        Tensor& tensor = params.items()[p].second;
        if (tensor.numel() != sizes_[p]) {
            throw ContractError("parameter '" + params.items()[p].first +
                                "' changed size under the optimizer");
        }
        const bool has_grad = tensor.has_grad();
        const std::vector<double>* grad = has_grad ? &tensor.grad() : nullptr;
        auto& values = tensor.mutable_values();
        auto& m = m_[p];
        auto& v = v_[p];
        for (std::size_t i = 0; i < sizes_[p]; ++i) {
            const double g = has_grad ? (*grad)[i] : 0.0;
            m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
            v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
            const double m_hat = m[i] / bc1;
            const double v_hat = v[i] / bc2;
            values[i] -= cfg_.lr * m_hat / (std::sqrt(v_hat) + cfg_.eps);
        }
    }
}

AdamSnapshot AdamState::snapshot() const { return AdamSnapshot{t_, cfg_.lr, m_, v_}; }

void AdamState::restore(const AdamSnapshot& snap, const ParamStore& params) {
    if (snap.m.size() != params.size() || snap.v.size() != params.size()) {
        throw IncompatibilityError("optimizer snapshot covers " + std::to_string(snap.m.size()) +
                                   " parameters but the store has " +
                                   std::to_string(params.size()));
    }
    sizes_.clear();
    for (std::size_t p = 0; p < params.size(); ++p) {
        const std::size_t n = params.items()[p].second.numel();
        if (snap.m[p].size() != n || snap.v[p].size() != n) {
            throw IncompatibilityError("optimizer snapshot shape mismatch at parameter '" +
                                       params.items()[p].first + "'");
        }
        sizes_.push_back(n);
    }
    t_ = snap.t;
    cfg_.lr = snap.lr;
    m_ = snap.m;
    v_ = snap.v;
}

PlateauScheduler::PlateauScheduler(PlateauConfig config, double initial_lr)
    : cfg_(config), lr_(initial_lr) {
    if (cfg_.factor <= 0.0 || cfg_.factor >= 1.0) {
        throw ConfigError("plateau factor must be in (0,1), got " + std::to_string(cfg_.factor));
    }
    if (cfg_.patience < 0) throw ConfigError("plateau patience must be non-negative");
    if (initial_lr <= 0.0) throw ConfigError("learning rate must be positive");
}

double PlateauScheduler::observe(double metric) {
    if (!seen_ || metric < best_ - cfg_.min_delta) {
        best_ = metric;
        seen_ = true;
        stale_ = 0;
        return lr_;
    }
    ++stale_;
    if (stale_ > cfg_.patience) {
        lr_ *= cfg_.factor;
        stale_ = 0;
        log_info("plateau: reducing learning rate to " + std::to_string(lr_));
    }
    return lr_;
}

double train_epoch(Model& model, std::span<const SampleWindow> samples, AdamState& adam,
                   RngStream& shuffle_rng, RngStream& dropout_rng, std::size_t batch_size,
                   bool shuffle) {
    if (samples.empty()) throw ConfigError("training set is empty");
    if (batch_size == 0) throw ConfigError("batch size must be positive");
    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (shuffle) shuffle_rng.shuffle(order);

    double total = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += batch_size) {
        const std::size_t end = std::min(order.size(), begin + batch_size);
        model.params.zero_grads();
        for (std::size_t i = begin; i < end; ++i) {
            const SampleWindow& sample = samples[order[i]];
            Tensor out = model_forward(sample, model, true, &dropout_rng);
            Tensor target = Tensor::from_values({sample.step_out}, sample.target);
            Tensor loss = mse_loss(out, target);
            total += loss.value();
            loss.backward();
        }
        const double inv = 1.0 / static_cast<double>(end - begin);
        for (auto& [name, t] : model.params.items()) {
            if (!t.has_grad()) continue;
            for (double& g : t.mutable_grad()) g *= inv;
        }
        adam.step(model.params);
    }
    return total / static_cast<double>(samples.size());
}

double mean_mse(Model& model, std::span<const SampleWindow> samples) {
    if (samples.empty()) throw ContractError("mean_mse: no samples");
    double total = 0.0;
    for (const auto& sample : samples) {
        Tensor out = model_forward(sample, model, false, nullptr);
        double acc = 0.0;
        for (std::size_t i = 0; i < sample.target.size(); ++i) {
            const double d = out.values()[i] - sample.target[i];
            acc += d * d;
        }
        total += acc / static_cast<double>(sample.target.size());
    }
    return total / static_cast<double>(samples.size());
}

TrainResult fit(Model& model, std::span<const SampleWindow> train_samples,
                const TrainConfig& config, const MinMaxScaler* scaler) {
    if (config.epochs < 1) throw ConfigError("epochs must be at least 1");
    if (train_samples.empty()) throw ConfigError("training set is empty");
    if (config.val_fraction < 0.0 || config.val_fraction >= 1.0) {
        throw ConfigError("validation fraction must be in [0,1)");
    }

    const std::size_t val_n =
        static_cast<std::size_t>(config.val_fraction * static_cast<double>(train_samples.size()));
    const std::size_t fit_n = train_samples.size() - val_n;
    if (fit_n == 0) throw ConfigError("validation split leaves no training samples");
    auto fit_span = train_samples.subspan(0, fit_n);
    auto val_span = train_samples.subspan(fit_n);
    if (val_n == 0) {
        log_warn("no validation tail; scheduling and checkpoint selection use the training loss");
    }

    RngStream shuffle_rng = named_stream(config.seed, "shuffle");
    RngStream dropout_rng = named_stream(config.seed, "dropout");
    AdamConfig adam_cfg = config.adam;
    adam_cfg.lr = config.lr;
    AdamState adam(model.params, adam_cfg);
    PlateauScheduler scheduler(config.plateau, config.lr);

    TrainResult result;
    result.best_val = std::numeric_limits<double>::infinity();
    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        const double lr_used = adam.lr();
        const double train_loss = train_epoch(model, fit_span, adam, shuffle_rng, dropout_rng,
                                              config.batch_size, config.shuffle);
        const double val_loss = val_n > 0 ? mean_mse(model, val_span) : train_loss;
        result.history.push_back(EpochRecord{epoch, train_loss, val_loss, lr_used});
        if (val_loss < result.best_val) {
            result.best_val = val_loss;
            result.best_epoch = epoch;
            result.best = make_checkpoint(model, epoch);
            if (scaler) result.best.scaler = *scaler;
            if (config.save_optimizer) result.best.optimizer = adam.snapshot();
            result.best.rng_state = shuffle_rng.save_state() + "\n" + dropout_rng.save_state();
        }
        adam.set_lr(scheduler.observe(val_loss));
        log_debug("epoch " + std::to_string(epoch) + ": train " + std::to_string(train_loss) +
                  " val " + std::to_string(val_loss));
    }
    return result;
}

void write_history_csv(const std::vector<EpochRecord>& history, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path + "'");
    out << "epoch,train_mse,val_mse,lr\n";
    char buf[140];
    for (const auto& rec : history) {
        std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g\n", rec.epoch, rec.train_mse,
                      rec.val_mse, rec.lr);
        out << buf;
    }
    if (!out) throw DataError("write failed for '" + path + "'");
}

}  // namespace matnet

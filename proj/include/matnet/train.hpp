#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "matnet/data.hpp"
#include "matnet/model.hpp"
#include "matnet/rng.hpp"

namespace matnet {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamSnapshot {
    std::int64_t t = 0;
    double lr = 0.0;
    std::vector<std::vector<double>> m, v;
};

// Adam with bias correction. State vectors are kept in parameter-store order.
class AdamState {
public:
    AdamState() = default;
    explicit AdamState(const ParamStore& params, AdamConfig config = {});

    // One update from the gradients currently held by `params`; a parameter
    // without an allocated gradient buffer counts as zero gradient.
    void step(ParamStore& params);

    double lr() const { return cfg_.lr; }
    void set_lr(double lr);
    std::int64_t steps_taken() const { return t_; }

    AdamSnapshot snapshot() const;
    void restore(const AdamSnapshot& snap, const ParamStore& params);

private:
    AdamConfig cfg_{};
    std::int64_t t_ = 0;
    std::vector<std::size_t> sizes_;
    std::vector<std::vector<double>> m_, v_;
};

struct PlateauConfig {
    double factor = 0.2;
    int patience = 20;
    double min_delta = 1e-6;
};

// Reduce-on-plateau: an epoch improves when the watched value drops below
// best - min_delta; after more than `patience` consecutive non-improving
// epochs the rate is multiplied by `factor` and the counter resets.
class PlateauScheduler {
public:
    PlateauScheduler() = default;
    PlateauScheduler(PlateauConfig config, double initial_lr);

    double observe(double metric);  // returns the rate to use next

    double lr() const { return lr_; }
    double best() const { return best_; }
    int stale_epochs() const { return stale_; }

private:
    PlateauConfig cfg_{};
    double lr_ = 0.0;
    double best_ = 0.0;
    int stale_ = 0;
    bool seen_ = false;
};

struct NamedArray {
    std::string name;
    std::vector<std::size_t> shape;
    std::vector<double> values;
};

struct Checkpoint {
    ModelConfig config;
    std::vector<NamedArray> params;
    MinMaxScaler scaler;  // may be unfitted
    std::map<std::string, std::string> extra;
    std::string rng_state;
    int epoch = 0;
    std::optional<AdamSnapshot> optimizer;
};

Checkpoint make_checkpoint(const Model& model, int epoch);
Model model_from_checkpoint(const Checkpoint& checkpoint);

// Binary container with per-section CRC32. Version bumps refuse to load;
// corruption and truncation raise integrity errors.
void checkpoint_save(const std::string& path, const Checkpoint& checkpoint);
Checkpoint checkpoint_load(const std::string& path);

struct TrainConfig {
    int epochs = 200;
    std::size_t batch_size = 32;
    double lr = 1e-3;
    std::uint64_t seed = 0;
    bool shuffle = true;
    double val_fraction = 0.1;  // validation tail carved from the end
    PlateauConfig plateau{};
    AdamConfig adam{};  // lr field is overridden by `lr`
    bool save_optimizer = false;
};

struct EpochRecord {
    int epoch = 0;  // 1-based
    double train_mse = 0.0;
    double val_mse = 0.0;
    double lr = 0.0;  // rate in effect during the epoch
};

struct TrainResult {
    std::vector<EpochRecord> history;
    Checkpoint best;  // parameters from the best validation epoch
    int best_epoch = 0;
    double best_val = 0.0;
};

// One pass over the samples: per-batch gradient accumulation, mean scaling,
// one Adam step per batch. Returns the mean per-sample training loss.
double train_epoch(Model& model, std::span<const SampleWindow> samples, AdamState& adam,
                   RngStream& shuffle_rng, RngStream& dropout_rng, std::size_t batch_size,
                   bool shuffle);

// Mean per-sample MSE in eval mode.
double mean_mse(Model& model, std::span<const SampleWindow> samples);

// Full loop: validation tail, plateau scheduling on validation loss,
// best-epoch checkpointing. The model is left at its final-epoch parameters.
TrainResult fit(Model& model, std::span<const SampleWindow> train_samples,
                const TrainConfig& config, const MinMaxScaler* scaler = nullptr);

void write_history_csv(const std::vector<EpochRecord>& history, const std::string& path);

}  // namespace matnet

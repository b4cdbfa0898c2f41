#pragma once

#include <string>

#include "matnet/data.hpp"
#include "matnet/model.hpp"
#include "matnet/train.hpp"

namespace matnet {

// Everything a run needs, assembled from defaults, an optional key=value
// config file, and command-line overrides applied in that order.
struct RunConfig {
    ModelConfig model;
    TrainConfig train;
    PipelineConfig pipeline;
};

// Applies one key. Unknown keys raise a config error naming the key.
void apply_config_key(RunConfig& config, const std::string& key, const std::string& value);

// key=value lines; blank lines and lines starting with '#' are skipped.
RunConfig load_run_config(const std::string& path);
void apply_config_file(RunConfig& config, const std::string& path);

}  // namespace matnet

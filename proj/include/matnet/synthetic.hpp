#pragma once

#include <cstdint>
#include <vector>

#include "matnet/data.hpp"

namespace matnet {

// Synthetic Sydney-like plant corpus: half-hourly pv per unit plus hourly
// weather, with per-day sky regimes. Clear days reach a normalized peak of
// exactly 1.0 at solar noon; night hours are exactly zero. Output is fully
// deterministic in the seed.
struct SynthConfig {
    int days = 60;
    int units = 3;
    std::uint64_t seed = 0;
    CivilDate start{2012, 1, 1};
    double clear_weight = 0.6;
    double cloudy_weight = 0.25;
    double rainy_weight = 0.15;
};

enum class SkyRegime { clear, cloudy, rainy };

struct SynthResult {
    std::vector<PvSeries> pv_units;  // half-hourly, in kWh per slot
    WeatherSeries weather;           // hourly
    std::vector<SkyRegime> regimes;  // one per day
};

SynthResult generate_synthetic(const SynthConfig& config);

}  // namespace matnet

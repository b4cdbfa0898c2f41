#include "matnet/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "matnet/common.hpp"
#include "matnet/rng.hpp"

namespace matnet {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Half-width of the daylight window in hours; southern-hemisphere phase so
// January days are the longest.
double daylight_half_width(int doy) {
    return 6.0 + 1.2 * std::cos(2.0 * kPi * static_cast<double>(doy - 1) / 365.25);
}

double solar_elevation(double hour_mid, double half_width) {
    const double sunrise = 12.0 - half_width;
    const double sunset = 12.0 + half_width;
    if (hour_mid <= sunrise || hour_mid >= sunset) return 0.0;
    return std::sin(kPi * (hour_mid - sunrise) / (sunset - sunrise));
}

std::size_t pick_description(SkyRegime regime, double u) {
    switch (regime) {
        case SkyRegime::clear:
            return weather_description_index(u < 0.85 ? "sky is clear" : "few clouds");
        case SkyRegime::cloudy:
            if (u < 0.34) return weather_description_index("scattered clouds");
            if (u < 0.67) return weather_description_index("broken clouds");
            return weather_description_index("overcast clouds");
        case SkyRegime::rainy:
            if (u < 0.5) return weather_description_index("light rain");
            if (u < 0.85) return weather_description_index("moderate rain");
            return weather_description_index("heavy intensity rain");
    }
    throw ContractError("unreachable sky regime");
}

}  // namespace

SynthResult generate_synthetic(const SynthConfig& config) {
    if (config.days < 2) {
        throw ConfigError("synthetic generator needs at least 2 days, got " +
                          std::to_string(config.days));
    }
    if (config.units < 1) throw ConfigError("synthetic generator needs at least 1 unit");
    const double wsum = config.clear_weight + config.cloudy_weight + config.rainy_weight;
    if (config.clear_weight < 0.0 || config.cloudy_weight < 0.0 || config.rainy_weight < 0.0 ||
        wsum <= 0.0) {
        throw ConfigError("regime weights must be non-negative with a positive sum");
    }

    RngStream regime_rng = named_stream(config.seed, "synth.regime");
    RngStream weather_rng = named_stream(config.seed, "synth.weather");
    RngStream unit_rng = named_stream(config.seed, "synth.unit");

    SynthResult result;
    result.pv_units.resize(static_cast<std::size_t>(config.units));
    for (int u = 0; u < config.units; ++u) {
        auto& series = result.pv_units[static_cast<std::size_t>(u)];
        char id[16];
        std::snprintf(id, sizeof(id), "unit%02d", u + 1);
        series.unit_id = id;
        series.capacity_kwp = 2.0 + 3.0 * unit_rng.uniform();
    }

    const std::int64_t start_ts = make_timestamp(config.start);
    const double clear_cut = config.clear_weight / wsum;
    const double cloudy_cut = clear_cut + config.cloudy_weight / wsum;

    for (int d = 0; d < config.days; ++d) {
        const std::int64_t day_base = start_ts + static_cast<std::int64_t>(d) * 86400;
        const CivilDate date = date_of(day_base);
        const int doy = day_of_year(date);
        const double half_width = daylight_half_width(doy);

        const double u_regime = regime_rng.uniform();
        const double u_atten = regime_rng.uniform();
        SkyRegime regime;
        double atten;
        if (u_regime < clear_cut) {
            regime = SkyRegime::clear;
            atten = 1.0;
        } else if (u_regime < cloudy_cut) {
            regime = SkyRegime::cloudy;
            atten = 0.40 + 0.15 * u_atten;
        } else {
            regime = SkyRegime::rainy;
            atten = 0.12 + 0.10 * u_atten;
        }
        result.regimes.push_back(regime);

        // Normalize the day's profile so the peak hour of a clear day is 1.
        std::array<double, 24> elev{};
        double elev_max = 0.0;
        for (int h = 1; h <= 24; ++h) {
            elev[static_cast<std::size_t>(h - 1)] =
                solar_elevation(static_cast<double>(h) - 0.5, half_width);
            elev_max = std::max(elev_max, elev[static_cast<std::size_t>(h - 1)]);
        }

        const double season = std::cos(2.0 * kPi * static_cast<double>(doy - 1) / 365.25);
        for (int h = 1; h <= 24; ++h) {
            const double shape = elev[static_cast<std::size_t>(h - 1)] / elev_max;
            const double prod = shape * atten;  // normalized hourly production

            for (auto& series : result.pv_units) {
                const double hourly_kwh = prod * series.capacity_kwp;
                const std::int64_t slot0 = day_base + static_cast<std::int64_t>(h - 1) * 3600;
                series.entries.push_back(PvEntry{slot0, hourly_kwh / 2.0});
                series.entries.push_back(PvEntry{slot0 + 1800, hourly_kwh / 2.0});
            }

            const double u_wind = weather_rng.uniform();
            const double u_deg = weather_rng.uniform();
            const double u_gust = weather_rng.uniform();
            const double u_tn = weather_rng.uniform();
            const double u_pn = weather_rng.uniform();
            const double u_cl = weather_rng.uniform();
            const double u_rain = weather_rng.uniform();
            const double u_desc = weather_rng.uniform();

            WeatherRow row;
            row.timestamp = day_base + static_cast<std::int64_t>(h) * 3600;
            const double regime_adj =
                regime == SkyRegime::clear ? 1.0 : (regime == SkyRegime::cloudy ? -1.0 : -3.0);
            const double temp =
                288.0 + 8.0 * season + 7.0 * shape + regime_adj + 1.2 * (u_tn - 0.5);
            const double wind = 1.5 + 4.0 * u_wind;
            const double rain =
                regime == SkyRegime::rainy ? 0.2 + 3.0 * u_rain : 0.0;
            double clouds;
            double humidity;
            switch (regime) {
                case SkyRegime::clear:
                    clouds = 12.0 * u_cl;
                    humidity = 45.0;
                    break;
                case SkyRegime::cloudy:
                    clouds = 55.0 + 35.0 * u_cl;
                    humidity = 68.0;
                    break;
                default:
                    clouds = 82.0 + 18.0 * u_cl;
                    humidity = 88.0;
                    break;
            }
            clouds = std::clamp(clouds, 0.0, 100.0);
            humidity = std::clamp(humidity + 10.0 * (u_pn - 0.5), 5.0, 100.0);

            const double ghi = 1000.0 * prod;
            const double dni = ghi * (1.0 - clouds / 100.0);
            const double dhi = ghi - 0.85 * dni;

            row.numeric[0] = temp;
            row.numeric[1] = temp - 0.2 * wind - (rain > 0.0 ? 1.5 : 0.0);
            row.numeric[2] = 1013.0 + 9.0 * std::sin(2.0 * kPi * doy / 365.25 + 1.3) +
                             1.5 * (u_pn - 0.5);
            row.numeric[3] = humidity;
            row.numeric[4] = temp - (100.0 - humidity) / 5.0;
            row.numeric[5] = wind;
            row.numeric[6] = 359.9 * u_deg;
            row.numeric[7] = wind * (1.25 + 0.5 * u_gust);
            row.numeric[8] = clouds;
            row.numeric[9] = rain;
            row.numeric[10] = dni;
            row.numeric[11] = dhi;
            row.numeric[12] = ghi;
            row.description = pick_description(regime, u_desc);
            result.weather.entries.push_back(row);
        }
    }
    return result;
}

}  // namespace matnet

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "matnet/common.hpp"
#include "matnet/timeutil.hpp"

namespace matnet {

inline constexpr std::size_t kWeatherNumericCount = 13;
inline constexpr std::size_t kWeatherLevelCount = 22;
inline constexpr std::size_t kEncodedWeatherWidth = kWeatherNumericCount + kWeatherLevelCount;

// Numeric weather column names in CSV and encoding order.
const std::array<std::string_view, kWeatherNumericCount>& weather_numeric_columns();

// Categorical sky-description levels in one-hot encoding order.
const std::array<std::string_view, kWeatherLevelCount>& weather_description_levels();
std::size_t weather_description_index(std::string_view level);  // throws DataError on unknown

struct PvEntry {
    std::int64_t timestamp = 0;  // period-ending stamp
    double generation_kwh = 0.0;
};

struct PvSeries {
    std::string unit_id;
    double capacity_kwp = 0.0;
    std::vector<PvEntry> entries;  // strictly increasing timestamps
};

struct WeatherRow {
    std::int64_t timestamp = 0;
    std::array<double, kWeatherNumericCount> numeric{};
    std::size_t description = 0;  // index into weather_description_levels()
};

struct WeatherSeries {
    std::vector<WeatherRow> entries;  // strictly increasing hourly timestamps
};

// Per-column min-max statistics fitted on training rows only.
class MinMaxScaler {
public:
    // Fits on rows with timestamp <= last_train_timestamp.
    void fit(const WeatherSeries& series, std::int64_t last_train_timestamp);
    void set_stats(const std::array<double, kWeatherNumericCount>& mins,
                   const std::array<double, kWeatherNumericCount>& maxs);
    bool fitted() const { return fitted_; }

    // (v - min) / (max - min); a constant column maps to 0. Values outside the
    // fitted range are not clamped.
    double transform(double value, std::size_t column) const;

    const std::array<double, kWeatherNumericCount>& mins() const { return mins_; }
    const std::array<double, kWeatherNumericCount>& maxs() const { return maxs_; }

private:
    std::array<double, kWeatherNumericCount> mins_{};
    std::array<double, kWeatherNumericCount> maxs_{};
    bool fitted_ = false;
};

// Weather rows encoded as 13 scaled numerics followed by a 22-wide one-hot
// description block, row-major.
struct EncodedWeather {
    std::vector<std::int64_t> timestamps;
    std::vector<double> data;

    std::size_t rows() const { return timestamps.size(); }
    double at(std::size_t r, std::size_t c) const { return data[r * kEncodedWeatherWidth + c]; }
};

// One training/evaluation example: step_in hours of pv history and historical
// weather, step_out hours of future weather, and the step_out target.
struct SampleWindow {
    std::size_t step_in = 0;
    std::size_t step_out = 0;
    std::size_t weather_dim = kEncodedWeatherWidth;
    std::vector<double> pv;      // step_in
    std::vector<double> hw;      // step_in x weather_dim, row-major
    std::vector<double> fw;      // step_out x weather_dim, row-major
    std::vector<double> target;  // step_out
    std::vector<std::int64_t> target_timestamps;
    std::string day_id;  // date of the forecast day, "YYYY-MM-DD"
};

struct DatasetSplit {
    std::vector<SampleWindow> train;
    std::vector<SampleWindow> test;
    CivilDate boundary{};
};

// Sums consecutive (HH:00, HH:30) half-hour pairs into one entry stamped at
// the following hour boundary. Throws GapError naming the first missing or
// misaligned half-hour slot.
PvSeries resample_hourly(const PvSeries& series);

// Divides by installed capacity; readings above capacity clamp to 1 with a
// warning. The returned series has capacity 1.
PvSeries normalize_by_peak(const PvSeries& series);

// Mean across units at each timestamp; all series must share an identical
// timestamp grid.
PvSeries aggregate_mean(const std::vector<PvSeries>& units);

EncodedWeather encode_weather(const WeatherSeries& series, const MinMaxScaler& scaler);

// Sliding windows over an aligned pv/weather pair. `stride` is the window
// start spacing in hours.
std::vector<SampleWindow> build_windows(const PvSeries& pv, const EncodedWeather& weather,
                                        std::size_t step_in, std::size_t stride,
                                        std::size_t step_out);

// Train: every target timestamp <= boundary midnight. Test: every target
// timestamp after it. Windows straddling the boundary are dropped.
DatasetSplit split_by_date(const std::vector<SampleWindow>& samples, const CivilDate& boundary);

// CSV IO. PV files: timestamp,unit_id,capacity_kwp,generation_kwh.
// Weather files: timestamp, the 13 numeric columns, description.
std::vector<PvSeries> load_pv_csv(const std::string& path);
WeatherSeries load_weather_csv(const std::string& path);
void write_pv_csv(const std::string& path, const std::vector<PvSeries>& units);
void write_weather_csv(const std::string& path, const WeatherSeries& series);

// Median spacing between consecutive entries, in seconds.
std::int64_t detect_cadence_seconds(const PvSeries& series);

struct PipelineConfig {
    std::size_t step_in = 24;
    std::size_t stride = 24;
    std::size_t step_out = 24;
    std::optional<CivilDate> boundary;  // default: 80/20 split by sample count
};

struct PreparedData {
    DatasetSplit split;
    MinMaxScaler scaler;
};

// Full preprocessing: per-unit resample to hourly when the cadence is
// half-hourly, capacity normalization, mean aggregation, weather encoding
// with train-only scaler statistics, windowing, and the date split. Passing
// `fixed_scaler` (evaluation against a saved model) skips fitting and reuses
// those statistics.
PreparedData prepare_dataset(const std::vector<PvSeries>& units, const WeatherSeries& weather,
                             const PipelineConfig& config,
                             const MinMaxScaler* fixed_scaler = nullptr);

}  // namespace matnet

#include "matnet/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

#include "matnet/common.hpp"

namespace matnet {

const std::array<std::string_view, kWeatherNumericCount>& weather_numeric_columns() {
    static const std::array<std::string_view, kWeatherNumericCount> columns = {
        "temperature", "feels_like", "pressure",   "humidity", "dew_point", "wind_speed",
        "wind_deg",    "wind_gust",  "clouds_all", "rain_1h",  "dni",       "dhi",
        "ghi"};
    return columns;
}

const std::array<std::string_view, kWeatherLevelCount>& weather_description_levels() {
    static const std::array<std::string_view, kWeatherLevelCount> levels = {
        "scattered clouds",
        "few clouds",
        "broken clouds",
        "overcast clouds",
        "sky is clear",
        "light rain",
        "thunderstorm",
        "moderate rain",
        "fog",
        "light intensity shower rain",
        "mist",
        "haze",
        "heavy intensity rain",
        "light intensity drizzle",
        "shower rain",
        "smoke",
        "thunderstorm with rain",
        "proximity squalls",
        "very heavy rain",
        "light intensity drizzle rain",
        "rain and drizzle",
        "drizzle"};
    return levels;
}

std::size_t weather_description_index(std::string_view level) {
    const auto& levels = weather_description_levels();
    for (std::size_t i = 0; i < levels.size(); ++i) {
        if (levels[i] == level) return i;
    }
    throw DataError("unknown weather description '" + std::string(level) + "'");
}

void MinMaxScaler::fit(const WeatherSeries& series, std::int64_t last_train_timestamp) {
    bool any = false;
    for (const auto& row : series.entries) {
        if (row.timestamp > last_train_timestamp) continue;
        if (!any) {
            mins_ = row.numeric;
            maxs_ = row.numeric;
            any = true;
            continue;
        }
        for (std::size_t c = 0; c < kWeatherNumericCount; ++c) {
            mins_[c] = std::min(mins_[c], row.numeric[c]);
            maxs_[c] = std::max(maxs_[c], row.numeric[c]);
        }
    }
    if (!any) throw DataError("scaler fit: no weather rows at or before the training boundary");
    fitted_ = true;
}

void MinMaxScaler::set_stats(const std::array<double, kWeatherNumericCount>& mins,
                             const std::array<double, kWeatherNumericCount>& maxs) {
    mins_ = mins;
    maxs_ = maxs;
    fitted_ = true;
}

double MinMaxScaler::transform(double value, std::size_t column) const {
    if (!fitted_) throw ContractError("scaler used before fit");
    if (column >= kWeatherNumericCount) throw DimensionError("scaler column out of range");
    const double span = maxs_[column] - mins_[column];
    if (span == 0.0) return 0.0;
    return (value - mins_[column]) / span;
}

PvSeries resample_hourly(const PvSeries& series) {
    PvSeries out;
    out.unit_id = series.unit_id;
    out.capacity_kwp = series.capacity_kwp;
    const auto& entries = series.entries;
    out.entries.reserve(entries.size() / 2);
    for (std::size_t i = 0; i < entries.size(); i += 2) {
        const std::int64_t first = entries[i].timestamp;
        if (first % 3600 != 0) {
            throw GapError("unit " + series.unit_id + ": missing half-hour slot at " +
                           format_iso8601(first - 1800));
        }
        if (i + 1 >= entries.size() || entries[i + 1].timestamp != first + 1800) {
            throw GapError("unit " + series.unit_id + ": missing half-hour slot at " +
                           format_iso8601(first + 1800));
        }
        out.entries.push_back(
            PvEntry{first + 3600, entries[i].generation_kwh + entries[i + 1].generation_kwh});
    }
    return out;
}

PvSeries normalize_by_peak(const PvSeries& series) {
    if (series.capacity_kwp <= 0.0) {
        throw DataError("unit " + series.unit_id + ": capacity must be positive, got " +
                        std::to_string(series.capacity_kwp));
    }
    PvSeries out;
    out.unit_id = series.unit_id;
    out.capacity_kwp = 1.0;
    out.entries.reserve(series.entries.size());
    std::size_t clamped = 0;
    for (const auto& e : series.entries) {
        double v = e.generation_kwh / series.capacity_kwp;
        if (v < 0.0) {
            throw DataError("unit " + series.unit_id + ": negative generation at " +
                            format_iso8601(e.timestamp));
        }
        if (v > 1.0) {
            v = 1.0;
            ++clamped;
        }
        out.entries.push_back(PvEntry{e.timestamp, v});
    }
    if (clamped > 0) {
        log_warn("unit " + series.unit_id + ": clamped " + std::to_string(clamped) +
                 " readings above installed capacity");
    }
    return out;
}

PvSeries aggregate_mean(const std::vector<PvSeries>& units) {
    if (units.empty()) throw ContractError("aggregate_mean: no series given");
    const auto& base = units.front();
    PvSeries out;
    out.unit_id = "aggregate";
    double cap_sum = 0.0;
    for (const auto& u : units) {
        if (u.entries.size() != base.entries.size()) {
            throw AlignmentError("unit " + u.unit_id + ": has " +
                                 std::to_string(u.entries.size()) + " entries, expected " +
                                 std::to_string(base.entries.size()));
        }
        for (std::size_t i = 0; i < base.entries.size(); ++i) {
            if (u.entries[i].timestamp != base.entries[i].timestamp) {
                throw AlignmentError("unit " + u.unit_id + ": timestamp mismatch at " +
                                     format_iso8601(u.entries[i].timestamp) + ", expected " +
                                     format_iso8601(base.entries[i].timestamp));
            }
        }
        cap_sum += u.capacity_kwp;
    }
    out.capacity_kwp = cap_sum / static_cast<double>(units.size());
    out.entries.reserve(base.entries.size());
    for (std::size_t i = 0; i < base.entries.size(); ++i) {
        double sum = 0.0;
        for (const auto& u : units) sum += u.entries[i].generation_kwh;
        out.entries.push_back(
            PvEntry{base.entries[i].timestamp, sum / static_cast<double>(units.size())});
    }
    return out;
}

EncodedWeather encode_weather(const WeatherSeries& series, const MinMaxScaler& scaler) {
    if (!scaler.fitted()) throw ContractError("encode_weather: scaler is not fitted");
    EncodedWeather out;
    out.timestamps.reserve(series.entries.size());
    out.data.assign(series.entries.size() * kEncodedWeatherWidth, 0.0);
    for (std::size_t r = 0; r < series.entries.size(); ++r) {
        const auto& row = series.entries[r];
        out.timestamps.push_back(row.timestamp);
        double* dst = out.data.data() + r * kEncodedWeatherWidth;
        for (std::size_t c = 0; c < kWeatherNumericCount; ++c) {
            dst[c] = scaler.transform(row.numeric[c], c);
        }
        if (row.description >= kWeatherLevelCount) {
            throw DataError("weather row at " + format_iso8601(row.timestamp) +
                            ": description index out of range");
        }
        dst[kWeatherNumericCount + row.description] = 1.0;
    }
    return out;
}

std::vector<SampleWindow> build_windows(const PvSeries& pv, const EncodedWeather& weather,
                                        std::size_t step_in, std::size_t stride,
                                        std::size_t step_out) {
    if (step_in == 0 || step_out == 0 || stride == 0) {
        throw ConfigError("build_windows: step_in, stride and step_out must be positive");
    }
    if (pv.entries.size() != weather.rows()) {
        throw AlignmentError("pv series has " + std::to_string(pv.entries.size()) +
                             " entries but weather has " + std::to_string(weather.rows()));
    }
    for (std::size_t i = 0; i < pv.entries.size(); ++i) {
        if (pv.entries[i].timestamp != weather.timestamps[i]) {
            throw AlignmentError("pv/weather timestamp mismatch at row " + std::to_string(i) +
                                 ": " + format_iso8601(pv.entries[i].timestamp) + " vs " +
                                 format_iso8601(weather.timestamps[i]));
        }
        const double v = pv.entries[i].generation_kwh;
        if (v < 0.0 || v > 1.0) {
            throw DataError("pv value " + std::to_string(v) + " at " +
                            format_iso8601(pv.entries[i].timestamp) +
                            " is outside [0,1]; normalize before windowing");
        }
    }
    const std::size_t n = pv.entries.size();
    std::vector<SampleWindow> samples;
    if (n < step_in + step_out) {
        log_warn("series too short for a single window (" + std::to_string(n) + " rows)");
        return samples;
    }
    const std::size_t count = (n - step_in - step_out) / stride + 1;
    samples.reserve(count);
    for (std::size_t w = 0; w < count; ++w) {
        const std::size_t start = w * stride;
        SampleWindow s;
        s.step_in = step_in;
        s.step_out = step_out;
        s.weather_dim = kEncodedWeatherWidth;
        s.pv.reserve(step_in);
        s.hw.reserve(step_in * kEncodedWeatherWidth);
        for (std::size_t i = 0; i < step_in; ++i) {
            s.pv.push_back(pv.entries[start + i].generation_kwh);
            const double* src = weather.data.data() + (start + i) * kEncodedWeatherWidth;
            s.hw.insert(s.hw.end(), src, src + kEncodedWeatherWidth);
        }
        s.fw.reserve(step_out * kEncodedWeatherWidth);
        for (std::size_t i = 0; i < step_out; ++i) {
            const std::size_t r = start + step_in + i;
            const double* src = weather.data.data() + r * kEncodedWeatherWidth;
            s.fw.insert(s.fw.end(), src, src + kEncodedWeatherWidth);
            s.target.push_back(pv.entries[r].generation_kwh);
            s.target_timestamps.push_back(pv.entries[r].timestamp);
        }
        s.day_id = format_date(s.target_timestamps[step_out / 2]);
        samples.push_back(std::move(s));
    }
    return samples;
}

DatasetSplit split_by_date(const std::vector<SampleWindow>& samples, const CivilDate& boundary) {
    DatasetSplit split;
    split.boundary = boundary;
    const std::int64_t cut = make_timestamp(boundary);
    std::size_t dropped = 0;
    for (const auto& s : samples) {
        if (s.target_timestamps.empty()) throw ContractError("split_by_date: window without targets");
        const std::int64_t first = s.target_timestamps.front();
        const std::int64_t last = s.target_timestamps.back();
        if (last <= cut) {
            split.train.push_back(s);
        } else if (first > cut) {
            split.test.push_back(s);
        } else {
            ++dropped;
        }
    }
    if (dropped > 0) {
        log_warn("dropped " + std::to_string(dropped) + " windows straddling the split boundary " +
                 format_date(boundary));
    }
    return split;
}

namespace {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return fields;
}

double parse_double_field(const std::string& field, const std::string& where) {
    double value = 0.0;
    const char* first = field.data();
    const char* last = first + field.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last || field.empty()) {
        throw ParseError(where + ": bad numeric value '" + field + "'");
    }
    return value;
}

// Reads lines, strips a trailing CR, skips a final empty line.
class CsvReader {
public:
    explicit CsvReader(const std::string& path) : path_(path), in_(path) {
        if (!in_) throw DataError("cannot open '" + path + "'");
    }

    bool next(std::string& line) {
        while (std::getline(in_, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            ++line_no_;
            if (line.empty()) continue;
            return true;
        }
        return false;
    }

    std::string where() const { return path_ + ":" + std::to_string(line_no_); }
    int line_no() const { return line_no_; }

private:
    std::string path_;
    std::ifstream in_;
    int line_no_ = 0;
};

std::string pv_header() { return "timestamp,unit_id,capacity_kwp,generation_kwh"; }

std::string weather_header() {
    std::string h = "timestamp";
    for (auto c : weather_numeric_columns()) {
        h += ',';
        h += c;
    }
    h += ",description";
    return h;
}

}  // namespace

std::vector<PvSeries> load_pv_csv(const std::string& path) {
    CsvReader reader(path);
    std::string line;
    if (!reader.next(line)) throw ParseError(path + ": empty file");
    if (line != pv_header()) {
        throw ParseError(reader.where() + ": expected header '" + pv_header() + "'");
    }
    std::vector<PvSeries> units;
    std::unordered_map<std::string, std::size_t> index;
    while (reader.next(line)) {
        const auto fields = split_fields(line);
        if (fields.size() != 4) {
            throw ParseError(reader.where() + ": expected 4 fields, got " +
                             std::to_string(fields.size()));
        }
        std::int64_t ts;
        try {
            ts = parse_iso8601(fields[0]);
        } catch (const ParseError& e) {
            throw ParseError(reader.where() + ": " + e.what());
        }
        const std::string& unit = fields[1];
        if (unit.empty()) throw ParseError(reader.where() + ": empty unit_id");
        const double capacity = parse_double_field(fields[2], reader.where());
        const double generation = parse_double_field(fields[3], reader.where());
        if (generation < 0.0) {
            throw DataError(reader.where() + ": negative generation for unit " + unit);
        }
        auto [it, inserted] = index.try_emplace(unit, units.size());
        if (inserted) {
            units.push_back(PvSeries{unit, capacity, {}});
        } else if (units[it->second].capacity_kwp != capacity) {
            throw DataError(reader.where() + ": unit " + unit + " capacity changed from " +
                            fmt_double(units[it->second].capacity_kwp) + " to " +
                            fmt_double(capacity));
        }
        units[it->second].entries.push_back(PvEntry{ts, generation});
    }
    for (auto& u : units) {
        std::sort(u.entries.begin(), u.entries.end(),
                  [](const PvEntry& a, const PvEntry& b) { return a.timestamp < b.timestamp; });
        for (std::size_t i = 1; i < u.entries.size(); ++i) {
            if (u.entries[i].timestamp == u.entries[i - 1].timestamp) {
                throw DataError(path + ": unit " + u.unit_id + ": duplicate timestamp " +
                                format_iso8601(u.entries[i].timestamp));
            }
        }
    }
    if (units.empty()) throw DataError(path + ": no pv rows");
    return units;
}

WeatherSeries load_weather_csv(const std::string& path) {
    CsvReader reader(path);
    std::string line;
    if (!reader.next(line)) throw ParseError(path + ": empty file");
    if (line != weather_header()) {
        throw ParseError(reader.where() + ": expected header '" + weather_header() + "'");
    }
    WeatherSeries series;
    while (reader.next(line)) {
        const auto fields = split_fields(line);
        if (fields.size() != 2 + kWeatherNumericCount) {
            throw ParseError(reader.where() + ": expected " +
                             std::to_string(2 + kWeatherNumericCount) + " fields, got " +
                             std::to_string(fields.size()));
        }
        WeatherRow row;
        try {
            row.timestamp = parse_iso8601(fields[0]);
        } catch (const ParseError& e) {
            throw ParseError(reader.where() + ": " + e.what());
        }
        for (std::size_t c = 0; c < kWeatherNumericCount; ++c) {
            const std::string& f = fields[1 + c];
            if (f.empty() && weather_numeric_columns()[c] == "rain_1h") {
                row.numeric[c] = 0.0;  // absent rain means no rain
                continue;
            }
            row.numeric[c] = parse_double_field(f, reader.where());
        }
        const double humidity = row.numeric[3];
        const double clouds = row.numeric[8];
        if (humidity < 0.0 || humidity > 100.0) {
            throw DataError(reader.where() + ": humidity " + fmt_double(humidity) +
                            " outside [0,100]");
        }
        if (clouds < 0.0 || clouds > 100.0) {
            throw DataError(reader.where() + ": clouds_all " + fmt_double(clouds) +
                            " outside [0,100]");
        }
        for (std::size_t c : {9u, 10u, 11u, 12u}) {
            if (row.numeric[c] < 0.0) {
                throw DataError(reader.where() + ": " +
                                std::string(weather_numeric_columns()[c]) + " is negative");
            }
        }
        try {
            row.description = weather_description_index(fields[1 + kWeatherNumericCount]);
        } catch (const DataError& e) {
            throw DataError(reader.where() + ": " + e.what());
        }
        series.entries.push_back(row);
    }
    if (series.entries.empty()) throw DataError(path + ": no weather rows");
    std::sort(series.entries.begin(), series.entries.end(),
              [](const WeatherRow& a, const WeatherRow& b) { return a.timestamp < b.timestamp; });
    for (std::size_t i = 1; i < series.entries.size(); ++i) {
        const std::int64_t prev = series.entries[i - 1].timestamp;
        const std::int64_t cur = series.entries[i].timestamp;
        if (cur == prev) {
            throw DataError(path + ": duplicate weather timestamp " + format_iso8601(cur));
        }
        if (cur - prev != 3600) {
            throw GapError(path + ": weather rows jump from " + format_iso8601(prev) + " to " +
                           format_iso8601(cur) + "; expected hourly spacing");
        }
    }
    return series;
}

void write_pv_csv(const std::string& path, const std::vector<PvSeries>& units) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path + "'");
    out << pv_header() << '\n';
    for (const auto& u : units) {
        for (const auto& e : u.entries) {
            out << format_iso8601(e.timestamp) << ',' << u.unit_id << ','
                << fmt_double(u.capacity_kwp) << ',' << fmt_double(e.generation_kwh) << '\n';
        }
    }
    if (!out) throw DataError("write failed for '" + path + "'");
}

void write_weather_csv(const std::string& path, const WeatherSeries& series) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path + "'");
    out << weather_header() << '\n';
    for (const auto& row : series.entries) {
        out << format_iso8601(row.timestamp);
        for (std::size_t c = 0; c < kWeatherNumericCount; ++c) {
            out << ',' << fmt_double(row.numeric[c]);
        }
        out << ',' << weather_description_levels()[row.description] << '\n';
    }
    if (!out) throw DataError("write failed for '" + path + "'");
}

std::int64_t detect_cadence_seconds(const PvSeries& series) {
    if (series.entries.size() < 2) {
        throw DataError("unit " + series.unit_id + ": need at least 2 entries to detect cadence");
    }
    std::vector<std::int64_t> diffs;
    diffs.reserve(series.entries.size() - 1);
    for (std::size_t i = 1; i < series.entries.size(); ++i) {
        diffs.push_back(series.entries[i].timestamp - series.entries[i - 1].timestamp);
    }
    auto mid = diffs.begin() + static_cast<std::ptrdiff_t>(diffs.size() / 2);
    std::nth_element(diffs.begin(), mid, diffs.end());
    return *mid;
}

PreparedData prepare_dataset(const std::vector<PvSeries>& units, const WeatherSeries& weather,
                             const PipelineConfig& config, const MinMaxScaler* fixed_scaler) {
    if (units.empty()) throw ContractError("prepare_dataset: no pv units");
    std::vector<PvSeries> hourly;
    hourly.reserve(units.size());
    for (const auto& u : units) {
        const std::int64_t cadence = detect_cadence_seconds(u);
        if (cadence == 1800) {
            hourly.push_back(normalize_by_peak(resample_hourly(u)));
        } else if (cadence == 3600) {
            hourly.push_back(normalize_by_peak(u));
        } else {
            throw DataError("unit " + u.unit_id + ": unsupported cadence " +
                            std::to_string(cadence) + "s; expected 1800s or 3600s");
        }
    }
    PvSeries pv = aggregate_mean(hourly);

    // Trim both inputs to the overlapping timestamp range.
    if (weather.entries.empty()) throw DataError("prepare_dataset: empty weather series");
    if (pv.entries.empty()) throw DataError("prepare_dataset: empty pv series");
    const std::int64_t lo =
        std::max(pv.entries.front().timestamp, weather.entries.front().timestamp);
    const std::int64_t hi = std::min(pv.entries.back().timestamp, weather.entries.back().timestamp);
    if (lo > hi) throw AlignmentError("pv and weather series do not overlap in time");
    std::erase_if(pv.entries, [&](const PvEntry& e) { return e.timestamp < lo || e.timestamp > hi; });
    WeatherSeries trimmed;
    for (const auto& row : weather.entries) {
        if (row.timestamp >= lo && row.timestamp <= hi) trimmed.entries.push_back(row);
    }

    CivilDate boundary;
    if (config.boundary) {
        boundary = *config.boundary;
    } else {
        // Default 80/20 split on distinct covered days. Hour-ending stamps put
        // an entry's day at the hour it covers, hence the half-hour shift.
        std::vector<CivilDate> days;
        for (const auto& e : pv.entries) {
            CivilDate d = date_of(e.timestamp - 1800);
            if (days.empty() || days.back() != d) days.push_back(d);
        }
        if (days.size() < 2) throw DataError("need at least 2 days of data to split");
        std::size_t k = static_cast<std::size_t>(0.8 * static_cast<double>(days.size()));
        k = std::clamp<std::size_t>(k, 1, days.size() - 1);
        const CivilDate last_train = days[k - 1];
        boundary = civil_from_days(
            days_from_civil(last_train.year, last_train.month, last_train.day) + 1);
        log_info("auto split boundary: " + format_date(boundary));
    }

    PreparedData prepared;
    if (fixed_scaler) {
        if (!fixed_scaler->fitted()) throw ContractError("prepare_dataset: scaler is not fitted");
        prepared.scaler = *fixed_scaler;
    } else {
        prepared.scaler.fit(trimmed, make_timestamp(boundary));
    }
    EncodedWeather encoded = encode_weather(trimmed, prepared.scaler);
    auto samples = build_windows(pv, encoded, config.step_in, config.stride, config.step_out);
    prepared.split = split_by_date(samples, boundary);
    return prepared;
}

}  // namespace matnet

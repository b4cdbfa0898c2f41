#include "matnet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "matnet/common.hpp"

namespace matnet {

namespace {

void require_pair(std::span<const double> y, std::span<const double> y_hat, const char* op) {
    if (y.size() != y_hat.size()) {
        throw ContractError(std::string(op) + ": length mismatch " + std::to_string(y.size()) +
                            " vs " + std::to_string(y_hat.size()));
    }
    if (y.empty()) throw ContractError(std::string(op) + ": empty series");
}

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string fmt_opt(const std::optional<double>& v) { return v ? fmt_double(*v) : ""; }

}  // namespace

MetricKind metric_kind_from_string(std::string_view name) {
    if (name == "rmse") return MetricKind::rmse;
    if (name == "mae") return MetricKind::mae;
    if (name == "wmape") return MetricKind::wmape;
    if (name == "mase") return MetricKind::mase;
    throw ConfigError("unknown metric '" + std::string(name) + "'");
}

std::string_view to_string(MetricKind kind) {
    switch (kind) {
        case MetricKind::rmse: return "rmse";
        case MetricKind::mae: return "mae";
        case MetricKind::wmape: return "wmape";
        case MetricKind::mase: return "mase";
    }
    return "?";
}

double rmse(std::span<const double> y, std::span<const double> y_hat) {
    require_pair(y, y_hat, "rmse");
    double acc = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double d = y[i] - y_hat[i];
        acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(y.size()));
}

double mae(std::span<const double> y, std::span<const double> y_hat) {
    require_pair(y, y_hat, "mae");
    double acc = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) acc += std::abs(y[i] - y_hat[i]);
    return acc / static_cast<double>(y.size());
}

double wmape(std::span<const double> y, std::span<const double> y_hat) {
    require_pair(y, y_hat, "wmape");
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        num += std::abs(y[i] - y_hat[i]);
        den += std::abs(y[i]);
    }
    if (den == 0.0) throw UndefinedMetricError("wmape undefined: actuals sum to zero");
    return num / den;
}

double mase(std::span<const double> y, std::span<const double> y_hat) {
    require_pair(y, y_hat, "mase");
    if (y.size() < 2) throw UndefinedMetricError("mase undefined: need at least 2 observations");
    double num = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) num += std::abs(y[i] - y_hat[i]);
    num /= static_cast<double>(y.size());
    double den = 0.0;
    for (std::size_t i = 1; i < y.size(); ++i) den += std::abs(y[i] - y[i - 1]);
    den /= static_cast<double>(y.size() - 1);
    if (den == 0.0) {
        throw UndefinedMetricError("mase undefined: constant actuals give a zero naive error");
    }
    return num / den;
}

std::optional<double> DayMetrics::metric(MetricKind kind) const {
    switch (kind) {
        case MetricKind::rmse: return rmse;
        case MetricKind::mae: return mae;
        case MetricKind::wmape: return wmape;
        case MetricKind::mase: return mase;
    }
    return std::nullopt;
}

std::optional<double> MetricsReport::pooled(MetricKind kind) const {
    switch (kind) {
        case MetricKind::rmse: return pooled_rmse;
        case MetricKind::mae: return pooled_mae;
        case MetricKind::wmape: return pooled_wmape;
        case MetricKind::mase: return pooled_mase;
    }
    return std::nullopt;
}

namespace {

std::optional<double> guarded(double (*metric)(std::span<const double>, std::span<const double>),
                              std::span<const double> y, std::span<const double> y_hat) {
    try {
        return metric(y, y_hat);
    } catch (const UndefinedMetricError&) {
        return std::nullopt;
    }
}

}  // namespace

MetricsReport metrics_report(const std::vector<std::vector<double>>& predictions,
                             const std::vector<std::vector<double>>& targets,
                             const std::vector<std::string>& day_ids) {
    if (predictions.size() != targets.size() || predictions.size() != day_ids.size()) {
        throw ContractError("metrics_report: predictions, targets and day ids must align");
    }
    MetricsReport report;
    std::vector<double> all_y;
    std::vector<double> all_yh;
    for (std::size_t d = 0; d < predictions.size(); ++d) {
        const auto& yh = predictions[d];
        const auto& y = targets[d];
        if (y.size() != yh.size()) {
            throw ContractError("metrics_report: day " + day_ids[d] + " length mismatch");
        }
        DayMetrics dm;
        dm.day_id = day_ids[d];
        if (!y.empty()) {
            dm.rmse = guarded(rmse, y, yh);
            dm.mae = guarded(mae, y, yh);
            dm.wmape = guarded(wmape, y, yh);
            dm.mase = guarded(mase, y, yh);
            all_y.insert(all_y.end(), y.begin(), y.end());
            all_yh.insert(all_yh.end(), yh.begin(), yh.end());
        }
        report.days.push_back(std::move(dm));
    }
    report.observations = all_y.size();
    if (!all_y.empty()) {
        report.pooled_rmse = guarded(rmse, all_y, all_yh);
        report.pooled_mae = guarded(mae, all_y, all_yh);
        report.pooled_wmape = guarded(wmape, all_y, all_yh);
        report.pooled_mase = guarded(mase, all_y, all_yh);
    }
    return report;
}

DMOutcome diebold_mariano(std::span<const double> errors_a, std::span<const double> errors_b,
                          DMLoss loss, int horizon) {
    if (errors_a.size() != errors_b.size()) {
        throw ContractError("diebold_mariano: error series length mismatch");
    }
    const std::size_t n = errors_a.size();
    if (n < 10) {
        throw ContractError("diebold_mariano: need at least 10 observations, got " +
                            std::to_string(n));
    }
    if (horizon < 1) throw ContractError("diebold_mariano: horizon must be at least 1");

    DMOutcome out;
    out.loss = loss;
    out.horizon = horizon;

    std::vector<double> d(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (loss == DMLoss::squared) {
            d[i] = errors_a[i] * errors_a[i] - errors_b[i] * errors_b[i];
        } else {
            d[i] = std::abs(errors_a[i]) - std::abs(errors_b[i]);
        }
    }
    double mean = 0.0;
    for (double v : d) mean += v;
    mean /= static_cast<double>(n);

    auto gamma = [&](std::size_t k) {
        double acc = 0.0;
        for (std::size_t t = k; t < n; ++t) acc += (d[t] - mean) * (d[t - k] - mean);
        return acc / static_cast<double>(n);
    };

    const double g0 = gamma(0);
    if (g0 == 0.0) {
        // Identical losses at every step; the statistic is undefined and the
        // test carries no evidence either way.
        out.degenerate = true;
        out.statistic = 0.0;
        out.p_value = 1.0;
        return out;
    }
    double var = g0;
    const std::size_t max_lag = std::min<std::size_t>(static_cast<std::size_t>(horizon - 1), n - 1);
    for (std::size_t k = 1; k <= max_lag; ++k) var += 2.0 * gamma(k);
    if (var <= 0.0) {
        out.degenerate = true;
        out.statistic = 0.0;
        out.p_value = 1.0;
        log_warn("diebold_mariano: non-positive HAC variance, reporting the degenerate outcome");
        return out;
    }
    out.statistic = mean / std::sqrt(var / static_cast<double>(n));
    out.p_value = std::erfc(std::abs(out.statistic) / std::sqrt(2.0));
    return out;
}

std::vector<std::string> rank_days(const MetricsReport& report, MetricKind by, bool descending) {
    std::vector<const DayMetrics*> days;
    days.reserve(report.days.size());
    for (const auto& d : report.days) days.push_back(&d);
    std::sort(days.begin(), days.end(), [&](const DayMetrics* a, const DayMetrics* b) {
        const auto ma = a->metric(by);
        const auto mb = b->metric(by);
        if (ma.has_value() != mb.has_value()) return ma.has_value();
        if (ma && mb && *ma != *mb) return descending ? *ma > *mb : *ma < *mb;
        return a->day_id < b->day_id;
    });
    std::vector<std::string> ids;
    ids.reserve(days.size());
    for (const auto* d : days) ids.push_back(d->day_id);
    return ids;
}

void export_plot_data(const std::string& path, const std::string& day_id,
                      std::span<const double> actual, std::span<const double> forecast,
                      std::span<const double> previous_day_actual) {
    if (actual.size() != forecast.size()) {
        throw ContractError("export_plot_data: actual/forecast length mismatch");
    }
    const bool has_prev = !previous_day_actual.empty();
    if (has_prev && previous_day_actual.size() != actual.size()) {
        throw ContractError("export_plot_data: previous-day length mismatch");
    }
    if (!has_prev) {
        log_warn("plot data for " + day_id + ": no previous day available");
    }
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path + "'");
    out << "hour,actual,forecast,previous_day\n";
    for (std::size_t i = 0; i < actual.size(); ++i) {
        out << (i + 1) << ',' << fmt_double(actual[i]) << ',' << fmt_double(forecast[i]) << ',';
        if (has_prev) out << fmt_double(previous_day_actual[i]);
        out << '\n';
    }
    if (!out) throw DataError("write failed for '" + path + "'");
}

std::vector<double> predict_sample(Model& model, const SampleWindow& sample) {
    Tensor out = model_forward(sample, model, false, nullptr);
    return out.values();
}

std::vector<std::vector<double>> predict_samples(Model& model,
                                                 std::span<const SampleWindow> samples) {
    std::vector<std::vector<double>> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(predict_sample(model, s));
    return out;
}

namespace {

MetricsReport score_predictions(std::span<const SampleWindow> samples,
                                const std::vector<std::vector<double>>& predictions,
                                bool daylight_only) {
    std::vector<std::vector<double>> preds;
    std::vector<std::vector<double>> targets;
    std::vector<std::string> day_ids;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        std::vector<double> y;
        std::vector<double> yh;
        for (std::size_t t = 0; t < s.target.size(); ++t) {
            if (daylight_only && s.target[t] == 0.0) continue;
            y.push_back(s.target[t]);
            yh.push_back(predictions[i][t]);
        }
        targets.push_back(std::move(y));
        preds.push_back(std::move(yh));
        day_ids.push_back(s.day_id);
    }
    return metrics_report(preds, targets, day_ids);
}

}  // namespace

MetricsReport evaluate_model(Model& model, std::span<const SampleWindow> samples,
                             bool daylight_only) {
    if (samples.empty()) throw ContractError("evaluate_model: no samples");
    return score_predictions(samples, predict_samples(model, samples), daylight_only);
}

std::vector<AblationRow> run_ablation(Model& model, std::span<const SampleWindow> samples,
                                      bool daylight_only) {
    if (samples.empty()) throw ContractError("run_ablation: no samples");
    static constexpr bool kCombos[7][3] = {{true, false, false}, {false, true, false},
                                           {false, false, true}, {true, true, false},
                                           {true, false, true},  {false, true, true},
                                           {true, true, true}};
    std::vector<AblationRow> rows;
    rows.reserve(7);
    for (const auto& combo : kCombos) {
        AblationSpec spec{combo[0], combo[1], combo[2]};
        std::vector<std::vector<double>> preds;
        preds.reserve(samples.size());
        for (const auto& s : samples) {
            preds.push_back(ablate_forward(s, model, spec).values());
        }
        rows.push_back(AblationRow{spec, score_predictions(samples, preds, daylight_only)});
    }
    return rows;
}

void write_metrics_csv(const MetricsReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path + "'");
    out << "day,rmse,mae,wmape,mase\n";
    for (const auto& d : report.days) {
        out << d.day_id << ',' << fmt_opt(d.rmse) << ',' << fmt_opt(d.mae) << ','
            << fmt_opt(d.wmape) << ',' << fmt_opt(d.mase) << '\n';
    }
    out << "pooled," << fmt_opt(report.pooled_rmse) << ',' << fmt_opt(report.pooled_mae) << ','
        << fmt_opt(report.pooled_wmape) << ',' << fmt_opt(report.pooled_mase) << '\n';
    if (!out) throw DataError("write failed for '" + path + "'");
}

void write_ablation_csv(const std::vector<AblationRow>& rows, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path + "'");
    out << "pv,hw,fw,label,rmse,mae,wmape,mase\n";
    for (const auto& row : rows) {
        out << (row.spec.enable_pv ? 1 : 0) << ',' << (row.spec.enable_hw ? 1 : 0) << ','
            << (row.spec.enable_fw ? 1 : 0) << ',' << row.spec.label() << ','
            << fmt_opt(row.report.pooled_rmse) << ',' << fmt_opt(row.report.pooled_mae) << ','
            << fmt_opt(row.report.pooled_wmape) << ',' << fmt_opt(row.report.pooled_mase) << '\n';
    }
    if (!out) throw DataError("write failed for '" + path + "'");
}

void print_pooled_summary(const MetricsReport& report, std::string_view name, std::ostream& os) {
    auto cell = [](const std::optional<double>& v) {
        if (!v) return std::string("undef");
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.6f", *v);
        return std::string(buf);
    };
    os << name << ": rmse " << cell(report.pooled_rmse) << "  mae " << cell(report.pooled_mae)
       << "  wmape " << cell(report.pooled_wmape) << "  mase " << cell(report.pooled_mase)
       << "  (n=" << report.observations << ")\n";
}

}  // namespace matnet

#pragma once

#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "matnet/model.hpp"

namespace matnet {

enum class MetricKind { rmse, mae, wmape, mase };

MetricKind metric_kind_from_string(std::string_view name);
std::string_view to_string(MetricKind kind);

// All metrics take (actual, forecast) spans of equal positive length. wmape
// throws UndefinedMetricError when the actuals sum to zero; mase throws when
// the in-window naive forecast has zero error or the window is shorter than 2.
double rmse(std::span<const double> y, std::span<const double> y_hat);
double mae(std::span<const double> y, std::span<const double> y_hat);
double wmape(std::span<const double> y, std::span<const double> y_hat);
double mase(std::span<const double> y, std::span<const double> y_hat);

struct DayMetrics {
    std::string day_id;
    std::optional<double> rmse, mae, wmape, mase;

    std::optional<double> metric(MetricKind kind) const;
};

struct MetricsReport {
    std::optional<double> pooled_rmse, pooled_mae, pooled_wmape, pooled_mase;
    std::size_t observations = 0;
    std::vector<DayMetrics> days;

    std::optional<double> pooled(MetricKind kind) const;
};

// Per-day metrics plus pooled metrics over the concatenated horizon.
// Undefined metrics surface as missing values, never as NaN.
MetricsReport metrics_report(const std::vector<std::vector<double>>& predictions,
                             const std::vector<std::vector<double>>& targets,
                             const std::vector<std::string>& day_ids);

enum class DMLoss { squared, absolute };

struct DMOutcome {
    double statistic = 0.0;
    double p_value = 1.0;
    DMLoss loss = DMLoss::squared;
    int horizon = 1;
    bool degenerate = false;  // zero-variance loss differential
};

// Two-sided Diebold-Mariano test on forecast error series, with the HAC
// variance truncated at lag horizon-1.
DMOutcome diebold_mariano(std::span<const double> errors_a, std::span<const double> errors_b,
                          DMLoss loss = DMLoss::squared, int horizon = 24);

// Day ids ordered by a per-day metric; days where the metric is undefined sort
// last, ties break by day id.
std::vector<std::string> rank_days(const MetricsReport& report, MetricKind by,
                                   bool descending = false);

// One CSV row per horizon step: hour,actual,forecast,previous_day. The
// previous-day column is empty when no previous day is given.
void export_plot_data(const std::string& path, const std::string& day_id,
                      std::span<const double> actual, std::span<const double> forecast,
                      std::span<const double> previous_day_actual);

// Model evaluation over samples.
std::vector<double> predict_sample(Model& model, const SampleWindow& sample);
std::vector<std::vector<double>> predict_samples(Model& model,
                                                 std::span<const SampleWindow> samples);

// daylight_only drops hours whose actual value is zero before scoring.
MetricsReport evaluate_model(Model& model, std::span<const SampleWindow> samples,
                             bool daylight_only = false);

struct AblationRow {
    AblationSpec spec;
    MetricsReport report;
};

// The seven non-empty branch combinations, scored on the same samples.
std::vector<AblationRow> run_ablation(Model& model, std::span<const SampleWindow> samples,
                                      bool daylight_only = false);

void write_metrics_csv(const MetricsReport& report, const std::string& path);
void write_ablation_csv(const std::vector<AblationRow>& rows, const std::string& path);
void print_pooled_summary(const MetricsReport& report, std::string_view name, std::ostream& os);

}  // namespace matnet

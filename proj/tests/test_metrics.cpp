#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "matnet/metrics.hpp"
#include "matnet/rng.hpp"

using namespace matnet;

namespace {

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        path = std::filesystem::temp_directory_path() /
               ("matnet_metrics_test_" + std::to_string(::getpid()));
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

}  // namespace

TEST_CASE("point metrics match hand-computed examples") {
    std::vector<double> y{0.0, 0.0};
    std::vector<double> y_hat{3.0, 4.0};
    CHECK(rmse(y, y_hat) == doctest::Approx(std::sqrt(12.5)).epsilon(1e-12));
    CHECK(mae(y, y_hat) == doctest::Approx(3.5).epsilon(1e-12));

    std::vector<double> actual{2.0, 2.0};
    std::vector<double> forecast{1.0, 3.0};
    CHECK(wmape(actual, forecast) == doctest::Approx(0.5).epsilon(1e-12));

    std::vector<double> ramp{1.0, 2.0, 3.0};
    std::vector<double> lag{0.0, 1.0, 2.0};
    CHECK(mase(ramp, lag) == doctest::Approx(1.0).epsilon(1e-12));

    std::vector<double> same{5.0, 6.0, 7.0};
    CHECK(rmse(same, same) == 0.0);
    CHECK(mase(same, std::vector<double>{5.0, 6.0, 8.0}) ==
          doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("point metrics agree with a naive re-computation on random data") {
    RngStream rng(321);
    const std::size_t n = 1000;
    std::vector<double> y(n), y_hat(n);
    for (std::size_t i = 0; i < n; ++i) {
        y[i] = rng.uniform(0.0, 2.0);
        y_hat[i] = rng.uniform(0.0, 2.0);
    }
    double se = 0, ae = 0, num = 0, den = 0, naive = 0;
    for (std::size_t i = 0; i < n; ++i) {
        se += (y[i] - y_hat[i]) * (y[i] - y_hat[i]);
        ae += std::abs(y[i] - y_hat[i]);
        num += std::abs(y[i] - y_hat[i]);
        den += std::abs(y[i]);
        if (i > 0) naive += std::abs(y[i] - y[i - 1]);
    }
    CHECK(rmse(y, y_hat) == doctest::Approx(std::sqrt(se / n)).epsilon(1e-12));
    CHECK(mae(y, y_hat) == doctest::Approx(ae / n).epsilon(1e-12));
    CHECK(wmape(y, y_hat) == doctest::Approx(num / den).epsilon(1e-12));
    CHECK(mase(y, y_hat) ==
          doctest::Approx((ae / n) / (naive / (n - 1))).epsilon(1e-12));
}

TEST_CASE("undefined metrics throw instead of returning NaN") {
    std::vector<double> zeros{0.0, 0.0, 0.0};
    std::vector<double> pred{0.1, 0.2, 0.3};
    CHECK_THROWS_AS(wmape(zeros, pred), UndefinedMetricError);
    std::vector<double> constant{2.0, 2.0, 2.0};
    CHECK_THROWS_AS(mase(constant, pred), UndefinedMetricError);
    CHECK_THROWS_AS(mase(std::vector<double>{1.0}, std::vector<double>{1.0}),
                    UndefinedMetricError);
    CHECK_THROWS_AS(rmse(zeros, std::vector<double>{1.0}), ContractError);
    CHECK_THROWS_AS(mae(std::vector<double>{}, std::vector<double>{}), ContractError);
}

TEST_CASE("metric kinds parse and print") {
    CHECK(metric_kind_from_string("rmse") == MetricKind::rmse);
    CHECK(metric_kind_from_string("mase") == MetricKind::mase);
    CHECK(to_string(MetricKind::wmape) == "wmape");
    CHECK_THROWS_AS(metric_kind_from_string("mape"), ConfigError);
}

TEST_CASE("report carries per-day values and pools the concatenation") {
    std::vector<std::vector<double>> targets{{1.0, 2.0, 3.0}, {0.0, 0.0, 0.0}};
    std::vector<std::vector<double>> preds{{0.0, 1.0, 2.0}, {0.5, 0.5, 0.5}};
    MetricsReport report = metrics_report(preds, targets, {"2012-01-01", "2012-01-02"});

    REQUIRE(report.days.size() == 2);
    CHECK(report.observations == 6);
    CHECK(report.days[0].day_id == "2012-01-01");
    CHECK(report.days[0].mae.value() == doctest::Approx(1.0));
    CHECK(report.days[0].wmape.value() == doctest::Approx(0.5));
    CHECK(report.days[0].mase.value() == doctest::Approx(1.0));
    // Second day has all-zero actuals: wmape and mase undefined there.
    CHECK(report.days[1].rmse.value() == doctest::Approx(0.5));
    CHECK_FALSE(report.days[1].wmape.has_value());
    CHECK_FALSE(report.days[1].mase.has_value());
    // Pooled metrics span both days, so they stay defined.
    CHECK(report.pooled_mae.value() == doctest::Approx((3.0 + 1.5) / 6.0));
    CHECK(report.pooled_wmape.value() == doctest::Approx(4.5 / 6.0));
    CHECK(report.pooled(MetricKind::mae) == report.pooled_mae);
    CHECK(report.days[0].metric(MetricKind::rmse) == report.days[0].rmse);

    CHECK_THROWS_AS(metrics_report(preds, targets, {"only-one"}), ContractError);
}

TEST_CASE("diebold-mariano matches a direct transcription of the statistic") {
    RngStream rng(55);
    const std::size_t n = 48;
    std::vector<double> ea(n), eb(n);
    for (std::size_t i = 0; i < n; ++i) {
        ea[i] = rng.normal() * 0.1;
        eb[i] = rng.normal() * 0.1 + 0.05;
    }
    const int h = 24;
    DMOutcome out = diebold_mariano(ea, eb, DMLoss::squared, h);

    std::vector<double> d(n);
    for (std::size_t i = 0; i < n; ++i) d[i] = ea[i] * ea[i] - eb[i] * eb[i];
    double dbar = 0;
    for (double v : d) dbar += v;
    dbar /= static_cast<double>(n);
    auto gamma = [&](std::size_t k) {
        double g = 0;
        for (std::size_t i = k; i < n; ++i) g += (d[i] - dbar) * (d[i - k] - dbar);
        return g / static_cast<double>(n);
    };
    double var = gamma(0);
    for (std::size_t k = 1; k < static_cast<std::size_t>(h); ++k) var += 2.0 * gamma(k);
    const double stat = dbar / std::sqrt(var / static_cast<double>(n));
    const double p = std::erfc(std::abs(stat) / std::sqrt(2.0));

    CHECK(out.statistic == doctest::Approx(stat).epsilon(1e-10));
    CHECK(out.p_value == doctest::Approx(p).epsilon(1e-10));
    CHECK_FALSE(out.degenerate);
    CHECK(out.horizon == h);
}

TEST_CASE("diebold-mariano is antisymmetric and guards degenerate inputs") {
    RngStream rng(66);
    std::vector<double> ea(32), eb(32);
    for (std::size_t i = 0; i < 32; ++i) {
        ea[i] = rng.normal();
        eb[i] = rng.normal() * 1.5;
    }
    DMOutcome ab = diebold_mariano(ea, eb, DMLoss::absolute, 4);
    DMOutcome ba = diebold_mariano(eb, ea, DMLoss::absolute, 4);
    CHECK(ab.statistic == doctest::Approx(-ba.statistic).epsilon(1e-12));
    CHECK(ab.p_value == doctest::Approx(ba.p_value).epsilon(1e-12));

    // Identical errors: zero variance, degenerate outcome with p = 1.
    DMOutcome same = diebold_mariano(ea, ea, DMLoss::squared, 4);
    CHECK(same.degenerate);
    CHECK(same.p_value == 1.0);
    CHECK(same.statistic == 0.0);

    CHECK_THROWS_AS(diebold_mariano(std::vector<double>(5, 0.1), std::vector<double>(5, 0.2)),
                    ContractError);
    CHECK_THROWS_AS(diebold_mariano(ea, eb, DMLoss::squared, 0), ContractError);
    CHECK_THROWS_AS(diebold_mariano(ea, std::vector<double>(31, 0.0)), ContractError);
}

TEST_CASE("day ranking orders by metric with undefined days last") {
    std::vector<std::vector<double>> targets{
        {1.0, 2.0}, {1.0, 4.0}, {0.0, 0.0}, {1.0, 1.5}};
    std::vector<std::vector<double>> preds{
        {1.1, 2.1}, {2.0, 3.0}, {0.2, 0.2}, {1.1, 1.6}};
    MetricsReport report =
        metrics_report(preds, targets, {"d1", "d2", "d3", "d4"});
    auto ranked = rank_days(report, MetricKind::wmape);
    REQUIRE(ranked.size() == 4);
    CHECK(ranked[0] == "d1");  // 0.2/3
    CHECK(ranked[1] == "d4");  // 0.2/2.5
    CHECK(ranked[2] == "d2");  // 2/5
    CHECK(ranked[3] == "d3");  // undefined sorts last
    auto desc = rank_days(report, MetricKind::wmape, true);
    CHECK(desc[0] == "d2");
    CHECK(desc[3] == "d3");  // undefined stays last even descending
}

TEST_CASE("plot export writes one row per horizon step") {
    TempDir dir;
    std::vector<double> actual{0.0, 0.5, 1.0};
    std::vector<double> forecast{0.1, 0.4, 0.9};
    std::vector<double> prev{0.0, 0.6, 0.8};

    const std::string with_prev = dir.file("with_prev.csv");
    export_plot_data(with_prev, "2012-01-05", actual, forecast, prev);
    std::string text = slurp(with_prev);
    CHECK(text.find("hour,actual,forecast,previous_day") == 0);
    CHECK(text.find("1,0,0.1") != std::string::npos);
    CHECK(text.find("3,1,0.9") != std::string::npos);

    const std::string no_prev = dir.file("no_prev.csv");
    export_plot_data(no_prev, "2012-01-05", actual, forecast, {});
    std::string bare = slurp(no_prev);
    // Data rows keep the previous-day column present but empty.
    const std::size_t first_row = bare.find('\n') + 1;
    const std::size_t first_row_end = bare.find('\n', first_row);
    CHECK(bare[first_row_end - 1] == ',');

    CHECK_THROWS_AS(export_plot_data(dir.file("x.csv"), "d", actual, prev, actual.data() == nullptr
                                         ? std::span<const double>{}
                                         : std::span<const double>(actual.data(), 2)),
                    ContractError);
}

TEST_CASE("model evaluation scores the forward pass per forecast day") {
    ModelConfig cfg;
    cfg.d_model = 8;
    cfg.heads = 2;
    cfg.layers = 1;
    cfg.step_in = 4;
    cfg.step_out = 4;
    cfg.ffn_dim = 16;
    cfg.weather_dim = 3;
    cfg.dropout_p = 0.0;
    Model model = build_model(cfg, 17);

    RngStream rng(2);
    std::vector<SampleWindow> samples;
    for (int d = 0; d < 3; ++d) {
        SampleWindow s;
        s.step_in = cfg.step_in;
        s.step_out = cfg.step_out;
        s.weather_dim = cfg.weather_dim;
        s.day_id = "2012-02-0" + std::to_string(d + 1);
        for (std::size_t i = 0; i < cfg.step_in; ++i) s.pv.push_back(rng.uniform());
        for (std::size_t i = 0; i < cfg.step_in * cfg.weather_dim; ++i) {
            s.hw.push_back(rng.uniform());
        }
        for (std::size_t i = 0; i < cfg.step_out * cfg.weather_dim; ++i) {
            s.fw.push_back(rng.uniform());
        }
        for (std::size_t i = 0; i < cfg.step_out; ++i) {
            s.target.push_back(i == 0 ? 0.0 : rng.uniform());
            s.target_timestamps.push_back(3600 * static_cast<std::int64_t>(i + 1));
        }
        samples.push_back(std::move(s));
    }

    auto direct = predict_sample(model, samples[0]);
    Tensor via_forward = model_forward(samples[0], model);
    CHECK(direct == via_forward.values());

    auto many = predict_samples(model, samples);
    CHECK(many.size() == 3);
    CHECK(many[0] == direct);

    MetricsReport all = evaluate_model(model, samples);
    CHECK(all.observations == 12);
    CHECK(all.days.size() == 3);

    MetricsReport daylight = evaluate_model(model, samples, true);
    CHECK(daylight.observations == 9);  // one zero-actual hour dropped per day

    CHECK_THROWS_AS(evaluate_model(model, std::vector<SampleWindow>{}), ContractError);
}

TEST_CASE("ablation sweep covers the seven combinations in table order") {
    ModelConfig cfg;
    cfg.d_model = 8;
    cfg.heads = 2;
    cfg.layers = 1;
    cfg.step_in = 4;
    cfg.step_out = 4;
    cfg.ffn_dim = 16;
    cfg.weather_dim = 3;
    cfg.dropout_p = 0.0;
    Model model = build_model(cfg, 19);

    RngStream rng(8);
    std::vector<SampleWindow> samples(2);
    for (auto& s : samples) {
        s.step_in = cfg.step_in;
        s.step_out = cfg.step_out;
        s.weather_dim = cfg.weather_dim;
        s.day_id = "2012-03-01";
        for (std::size_t i = 0; i < cfg.step_in; ++i) s.pv.push_back(rng.uniform());
        for (std::size_t i = 0; i < cfg.step_in * cfg.weather_dim; ++i) {
            s.hw.push_back(rng.uniform());
        }
        for (std::size_t i = 0; i < cfg.step_out * cfg.weather_dim; ++i) {
            s.fw.push_back(rng.uniform());
        }
        for (std::size_t i = 0; i < cfg.step_out; ++i) {
            s.target.push_back(rng.uniform());
            s.target_timestamps.push_back(3600 * static_cast<std::int64_t>(i + 1));
        }
    }

    auto rows = run_ablation(model, samples);
    REQUIRE(rows.size() == 7);
    const std::vector<std::string> expected{"pv", "hw", "fw", "pv+hw",
                                            "pv+fw", "hw+fw", "pv+hw+fw"};
    for (std::size_t i = 0; i < 7; ++i) CHECK(rows[i].spec.label() == expected[i]);

    // The full combination equals the unablated evaluation bit for bit.
    MetricsReport plain = evaluate_model(model, samples);
    CHECK(rows[6].report.pooled_rmse.value() == plain.pooled_rmse.value());

    TempDir dir;
    const std::string path = dir.file("ablation.csv");
    write_ablation_csv(rows, path);
    std::string text = slurp(path);
    CHECK(text.find("pv,hw,fw,label,rmse,mae,wmape,mase") == 0);
    CHECK(text.find("1,1,1,pv+hw+fw") != std::string::npos);
    CHECK(text.find("0,1,0,hw") != std::string::npos);
}

TEST_CASE("metrics csv has day rows plus a pooled row; summary prints undef") {
    TempDir dir;
    std::vector<std::vector<double>> targets{{1.0, 2.0}, {0.0, 0.0}};
    std::vector<std::vector<double>> preds{{1.5, 2.5}, {0.5, 0.5}};
    MetricsReport report = metrics_report(preds, targets, {"2012-01-01", "2012-01-02"});

    const std::string path = dir.file("metrics.csv");
    write_metrics_csv(report, path);
    std::string text = slurp(path);
    CHECK(text.find("day,rmse,mae,wmape,mase") == 0);
    CHECK(text.find("2012-01-01,") != std::string::npos);
    CHECK(text.find("pooled,") != std::string::npos);
    // Undefined per-day cells stay empty rather than NaN.
    CHECK(text.find("nan") == std::string::npos);

    std::ostringstream os;
    print_pooled_summary(report, "check", os);
    CHECK(os.str().find("check:") != std::string::npos);
    CHECK(os.str().find("rmse") != std::string::npos);

    MetricsReport zero = metrics_report({{0.1, 0.2}}, {{0.0, 0.0}}, {"d"});
    std::ostringstream os2;
    print_pooled_summary(zero, "zero", os2);
    CHECK(os2.str().find("undef") != std::string::npos);
}

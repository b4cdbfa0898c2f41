#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "matnet/common.hpp"
#include "matnet/data.hpp"
#include "matnet/gradient_suite.hpp"
#include "matnet/metrics.hpp"
#include "matnet/model.hpp"
#include "matnet/runconfig.hpp"
#include "matnet/synthetic.hpp"
#include "matnet/timeutil.hpp"
#include "matnet/train.hpp"

namespace {

using namespace matnet;

int g_exit_code = 0;

struct CommonOpts {
    std::string config_path;
    std::vector<std::string> overrides;  // key=value pairs
    std::optional<std::uint64_t> seed;
    std::optional<std::string> encoder;
    std::optional<std::string> interpolation;
    std::optional<int> epochs;
    std::optional<std::size_t> stride;
    std::optional<std::string> boundary;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "key=value configuration file");
    cmd->add_option("--set", opts.overrides, "inline config override, key=value (repeatable)");
    cmd->add_option("--seed", opts.seed, "master rng seed");
    cmd->add_option("--encoder", opts.encoder,
                    "encoder kind: attention|lstm|gru|bilstm|bigru");
    cmd->add_option("--interpolation", opts.interpolation, "interpolation mode: fixed|learnable");
    cmd->add_option("--epochs", opts.epochs, "training epochs");
    cmd->add_option("--stride", opts.stride, "window start spacing in hours");
    cmd->add_option("--boundary", opts.boundary, "train/test boundary date YYYY-MM-DD");
}

RunConfig assemble_config(const CommonOpts& opts) {
    RunConfig cfg;
    if (!opts.config_path.empty()) apply_config_file(cfg, opts.config_path);
    for (const auto& kv : opts.overrides) {
        const std::size_t eq = kv.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("--set expects key=value, got '" + kv + "'");
        }
        apply_config_key(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (opts.seed) cfg.train.seed = *opts.seed;
    if (opts.encoder) cfg.model.encoder = encoder_kind_from_string(*opts.encoder);
    if (opts.interpolation) {
        cfg.model.interpolation = interpolation_mode_from_string(*opts.interpolation);
    }
    if (opts.epochs) cfg.train.epochs = *opts.epochs;
    if (opts.stride) cfg.pipeline.stride = *opts.stride;
    if (opts.boundary) cfg.pipeline.boundary = parse_date(*opts.boundary);
    cfg.pipeline.step_in = cfg.model.step_in;
    cfg.pipeline.step_out = cfg.model.step_out;
    return cfg;
}

PreparedData load_and_prepare(const std::string& pv_path, const std::string& weather_path,
                              const PipelineConfig& pipeline, const MinMaxScaler* fixed_scaler) {
    auto units = load_pv_csv(pv_path);
    auto weather = load_weather_csv(weather_path);
    return prepare_dataset(units, weather, pipeline, fixed_scaler);
}

void run_synth(const std::string& pv_out, const std::string& weather_out, int days, int units,
               std::uint64_t seed, const std::string& start) {
    SynthConfig cfg;
    cfg.days = days;
    cfg.units = units;
    cfg.seed = seed;
    if (!start.empty()) cfg.start = parse_date(start);
    SynthResult result = generate_synthetic(cfg);
    write_pv_csv(pv_out, result.pv_units);
    write_weather_csv(weather_out, result.weather);
    std::cout << "wrote " << result.pv_units.size() << " units x " << days << " days to " << pv_out
              << " and " << weather_out << "\n";
}

void run_train(const CommonOpts& common, const std::string& pv_path,
               const std::string& weather_path, const std::string& out_dir) {
    RunConfig cfg = assemble_config(common);
    cfg.model.validate();
    PreparedData prepared = load_and_prepare(pv_path, weather_path, cfg.pipeline, nullptr);
    if (prepared.split.train.empty()) throw DataError("no training windows before the boundary");
    log_info("training on " + std::to_string(prepared.split.train.size()) + " windows, testing on " +
             std::to_string(prepared.split.test.size()));

    Model model = build_model(cfg.model, cfg.train.seed);
    TrainResult result = fit(model, prepared.split.train, cfg.train, &prepared.scaler);
    result.best.extra["boundary"] = format_date(prepared.split.boundary);
    result.best.extra["stride"] = std::to_string(cfg.pipeline.stride);

    std::filesystem::create_directories(out_dir);
    const std::string ckpt_path = out_dir + "/checkpoint.bin";
    const std::string hist_path = out_dir + "/history.csv";
    checkpoint_save(ckpt_path, result.best);
    write_history_csv(result.history, hist_path);
    std::cout << "best epoch " << result.best_epoch << " val_mse " << result.best_val << "\n";
    std::cout << "saved " << ckpt_path << " and " << hist_path << "\n";

    if (!prepared.split.test.empty()) {
        Model best = model_from_checkpoint(result.best);
        MetricsReport report = evaluate_model(best, prepared.split.test);
        print_pooled_summary(report, "test", std::cout);
    }
}

PipelineConfig pipeline_from_checkpoint(const Checkpoint& ckpt, const CommonOpts& common) {
    PipelineConfig pipeline;
    pipeline.step_in = ckpt.config.step_in;
    pipeline.step_out = ckpt.config.step_out;
    auto it = ckpt.extra.find("stride");
    if (it != ckpt.extra.end()) pipeline.stride = std::stoul(it->second);
    if (common.stride) pipeline.stride = *common.stride;
    if (common.boundary) {
        pipeline.boundary = parse_date(*common.boundary);
    } else {
        auto bit = ckpt.extra.find("boundary");
        if (bit == ckpt.extra.end()) {
            throw ConfigError("checkpoint stores no boundary; pass --boundary");
        }
        pipeline.boundary = parse_date(bit->second);
    }
    return pipeline;
}

Checkpoint load_checkpoint_checked(const std::string& path, const CommonOpts& common) {
    Checkpoint ckpt = checkpoint_load(path);
    if (common.encoder) {
        const EncoderKind requested = encoder_kind_from_string(*common.encoder);
        if (requested != ckpt.config.encoder) {
            throw IncompatibilityError("checkpoint architecture '" +
                                       std::string(to_string(ckpt.config.encoder)) +
                                       "' does not match the requested '" +
                                       std::string(to_string(requested)) + "'");
        }
    }
    return ckpt;
}

void run_evaluate(const CommonOpts& common, const std::string& ckpt_path,
                  const std::string& pv_path, const std::string& weather_path,
                  const std::string& out_path, bool daylight_only, bool ablate_pv, bool ablate_hw,
                  bool ablate_fw, const std::string& baseline_ckpt_path) {
    Checkpoint ckpt = load_checkpoint_checked(ckpt_path, common);
    Model model = model_from_checkpoint(ckpt);
    PipelineConfig pipeline = pipeline_from_checkpoint(ckpt, common);
    if (!ckpt.scaler.fitted()) throw IncompatibilityError("checkpoint has no scaler statistics");
    PreparedData prepared = load_and_prepare(pv_path, weather_path, pipeline, &ckpt.scaler);
    if (prepared.split.test.empty()) throw DataError("no test windows after the boundary");
    const auto& samples = prepared.split.test;

    MetricsReport report;
    if (ablate_pv || ablate_hw || ablate_fw) {
        AblationSpec spec{!ablate_pv, !ablate_hw, !ablate_fw};
        spec.validate();
        std::vector<std::vector<double>> preds;
        std::vector<std::vector<double>> targets;
        std::vector<std::string> day_ids;
        for (const auto& s : samples) {
            preds.push_back(ablate_forward(s, model, spec).values());
            targets.push_back(s.target);
            day_ids.push_back(s.day_id);
        }
        report = metrics_report(preds, targets, day_ids);
        print_pooled_summary(report, "test[" + spec.label() + "]", std::cout);
    } else {
        report = evaluate_model(model, samples, daylight_only);
        print_pooled_summary(report, daylight_only ? "test[daylight]" : "test", std::cout);
    }
    if (!out_path.empty()) {
        write_metrics_csv(report, out_path);
        std::cout << "wrote " << out_path << "\n";
    }

    if (!baseline_ckpt_path.empty()) {
        Checkpoint base_ckpt = checkpoint_load(baseline_ckpt_path);
        Model baseline = model_from_checkpoint(base_ckpt);
        std::vector<double> errors_a, errors_b;
        for (const auto& s : samples) {
            auto pa = predict_sample(model, s);
            auto pb = predict_sample(baseline, s);
            for (std::size_t t = 0; t < s.target.size(); ++t) {
                if (daylight_only && s.target[t] == 0.0) continue;
                errors_a.push_back(s.target[t] - pa[t]);
                errors_b.push_back(s.target[t] - pb[t]);
            }
        }
        for (DMLoss loss : {DMLoss::squared, DMLoss::absolute}) {
            DMOutcome dm = diebold_mariano(errors_a, errors_b, loss,
                                           static_cast<int>(ckpt.config.step_out));
            std::cout << "dm[" << (loss == DMLoss::squared ? "squared" : "absolute")
                      << "]: stat " << dm.statistic << " p " << dm.p_value
                      << (dm.degenerate ? " (degenerate)" : "") << "\n";
        }
    }
}

void run_ablate_cmd(const CommonOpts& common, const std::string& ckpt_path,
                    const std::string& pv_path, const std::string& weather_path,
                    const std::string& out_path, bool daylight_only) {
    Checkpoint ckpt = load_checkpoint_checked(ckpt_path, common);
    Model model = model_from_checkpoint(ckpt);
    PipelineConfig pipeline = pipeline_from_checkpoint(ckpt, common);
    if (!ckpt.scaler.fitted()) throw IncompatibilityError("checkpoint has no scaler statistics");
    PreparedData prepared = load_and_prepare(pv_path, weather_path, pipeline, &ckpt.scaler);
    if (prepared.split.test.empty()) throw DataError("no test windows after the boundary");
    auto rows = run_ablation(model, prepared.split.test, daylight_only);
    for (const auto& row : rows) print_pooled_summary(row.report, row.spec.label(), std::cout);
    if (!out_path.empty()) {
        write_ablation_csv(rows, out_path);
        std::cout << "wrote " << out_path << "\n";
    }
}

void run_predict(const CommonOpts& common, const std::string& ckpt_path,
                 const std::string& pv_path, const std::string& weather_path,
                 const std::string& out_path, const std::string& day) {
    Checkpoint ckpt = load_checkpoint_checked(ckpt_path, common);
    Model model = model_from_checkpoint(ckpt);
    PipelineConfig pipeline = pipeline_from_checkpoint(ckpt, common);
    if (!ckpt.scaler.fitted()) throw IncompatibilityError("checkpoint has no scaler statistics");
    PreparedData prepared = load_and_prepare(pv_path, weather_path, pipeline, &ckpt.scaler);
    std::vector<const SampleWindow*> picked;
    for (const auto& s : prepared.split.test) {
        if (day.empty() || s.day_id == day) picked.push_back(&s);
    }
    if (picked.empty()) throw DataError(day.empty() ? "no test windows after the boundary"
                                                    : "no test window for day " + day);
    std::ofstream out(out_path);
    if (!out) throw DataError("cannot write '" + out_path + "'");
    out << "day,hour,timestamp,actual,forecast\n";
    char buf[120];
    for (const auto* s : picked) {
        auto forecast = predict_sample(model, *s);
        for (std::size_t t = 0; t < forecast.size(); ++t) {
            std::snprintf(buf, sizeof(buf), "%s,%zu,%s,%.17g,%.17g\n", s->day_id.c_str(), t + 1,
                          format_iso8601(s->target_timestamps[t]).c_str(), s->target[t],
                          forecast[t]);
            out << buf;
        }
    }
    if (!out) throw DataError("write failed for '" + out_path + "'");
    std::cout << "wrote forecasts for " << picked.size() << " days to " << out_path << "\n";
}

void run_plot(const CommonOpts& common, const std::string& ckpt_path, const std::string& pv_path,
              const std::string& weather_path, const std::string& out_path,
              const std::string& day) {
    Checkpoint ckpt = load_checkpoint_checked(ckpt_path, common);
    Model model = model_from_checkpoint(ckpt);
    PipelineConfig pipeline = pipeline_from_checkpoint(ckpt, common);
    if (!ckpt.scaler.fitted()) throw IncompatibilityError("checkpoint has no scaler statistics");
    PreparedData prepared = load_and_prepare(pv_path, weather_path, pipeline, &ckpt.scaler);

    auto find_day = [&](const std::string& id) -> const SampleWindow* {
        for (const auto& s : prepared.split.test) {
            if (s.day_id == id) return &s;
        }
        for (const auto& s : prepared.split.train) {
            if (s.day_id == id) return &s;
        }
        return nullptr;
    };
    const SampleWindow* sample = find_day(day);
    if (!sample) throw DataError("no window for day " + day);
    const CivilDate date = parse_date(day);
    const CivilDate prev_date =
        civil_from_days(days_from_civil(date.year, date.month, date.day) - 1);
    const SampleWindow* prev = find_day(format_date(prev_date));

    auto forecast = predict_sample(model, *sample);
    export_plot_data(out_path, day, sample->target, forecast,
                     prev ? std::span<const double>(prev->target) : std::span<const double>{});
    std::cout << "wrote " << out_path << "\n";
}

void run_gradcheck(std::uint64_t seed) {
    auto cases = run_gradient_suite(seed);
    for (const auto& c : cases) {
        std::cout << (c.pass ? "PASS" : "FAIL") << "  " << c.name << "  max_rel_error "
                  << c.max_rel_error << "  (" << c.seconds << "s)\n";
    }
    if (!all_pass(cases)) {
        log_error("gradient verification failed");
        g_exit_code = 3;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"day-ahead pv forecaster"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic pv/weather corpus");
    std::string synth_pv = "pv.csv", synth_weather = "weather.csv", synth_start;
    int synth_days = 60, synth_units = 3;
    std::uint64_t synth_seed = 0;
    synth->add_option("--out-pv", synth_pv, "pv csv output path");
    synth->add_option("--out-weather", synth_weather, "weather csv output path");
    synth->add_option("--days", synth_days, "number of days");
    synth->add_option("--units", synth_units, "number of pv units");
    synth->add_option("--seed", synth_seed, "generator seed");
    synth->add_option("--start", synth_start, "first day, YYYY-MM-DD");
    synth->callback([&] { run_synth(synth_pv, synth_weather, synth_days, synth_units, synth_seed,
                                    synth_start); });

    // train
    auto* train = app.add_subcommand("train", "train a model and save the best checkpoint");
    CommonOpts train_common;
    std::string train_pv, train_weather, train_out = "run";
    add_common(train, train_common);
    train->add_option("--pv-csv", train_pv, "pv csv path")->required();
    train->add_option("--weather-csv", train_weather, "weather csv path")->required();
    train->add_option("--out", train_out, "output directory");
    train->callback([&] { run_train(train_common, train_pv, train_weather, train_out); });

    // evaluate
    auto* eval = app.add_subcommand("evaluate", "score a checkpoint on the test period");
    CommonOpts eval_common;
    std::string eval_ckpt, eval_pv, eval_weather, eval_out, eval_baseline;
    bool eval_daylight = false, eval_ablate_pv = false, eval_ablate_hw = false,
         eval_ablate_fw = false;
    add_common(eval, eval_common);
    eval->add_option("--checkpoint", eval_ckpt, "checkpoint path")->required();
    eval->add_option("--pv-csv", eval_pv, "pv csv path")->required();
    eval->add_option("--weather-csv", eval_weather, "weather csv path")->required();
    eval->add_option("--out", eval_out, "per-day metrics csv output");
    eval->add_option("--baseline-checkpoint", eval_baseline,
                     "second checkpoint for a forecast comparison test");
    eval->add_flag("--daylight-only", eval_daylight, "score only hours with nonzero actuals");
    eval->add_flag("--ablate-pv", eval_ablate_pv, "zero the pv history branch");
    eval->add_flag("--ablate-hw", eval_ablate_hw, "zero the historical weather branch");
    eval->add_flag("--ablate-fw", eval_ablate_fw, "zero the future weather branch");
    eval->callback([&] {
        run_evaluate(eval_common, eval_ckpt, eval_pv, eval_weather, eval_out, eval_daylight,
                     eval_ablate_pv, eval_ablate_hw, eval_ablate_fw, eval_baseline);
    });

    // ablate
    auto* ablate = app.add_subcommand("ablate", "score all seven branch combinations");
    CommonOpts ablate_common;
    std::string ablate_ckpt, ablate_pv_path, ablate_weather, ablate_out;
    bool ablate_daylight = false;
    add_common(ablate, ablate_common);
    ablate->add_option("--checkpoint", ablate_ckpt, "checkpoint path")->required();
    ablate->add_option("--pv-csv", ablate_pv_path, "pv csv path")->required();
    ablate->add_option("--weather-csv", ablate_weather, "weather csv path")->required();
    ablate->add_option("--out", ablate_out, "ablation csv output");
    ablate->add_flag("--daylight-only", ablate_daylight, "score only hours with nonzero actuals");
    ablate->callback([&] {
        run_ablate_cmd(ablate_common, ablate_ckpt, ablate_pv_path, ablate_weather, ablate_out,
                       ablate_daylight);
    });

    // predict
    auto* predict = app.add_subcommand("predict", "write day-ahead forecasts");
    CommonOpts predict_common;
    std::string pred_ckpt, pred_pv, pred_weather, pred_out = "forecast.csv", pred_day;
    add_common(predict, predict_common);
    predict->add_option("--checkpoint", pred_ckpt, "checkpoint path")->required();
    predict->add_option("--pv-csv", pred_pv, "pv csv path")->required();
    predict->add_option("--weather-csv", pred_weather, "weather csv path")->required();
    predict->add_option("--out", pred_out, "forecast csv output");
    predict->add_option("--day", pred_day, "restrict to one forecast day, YYYY-MM-DD");
    predict->callback([&] {
        run_predict(predict_common, pred_ckpt, pred_pv, pred_weather, pred_out, pred_day);
    });

    // plot
    auto* plot = app.add_subcommand("plot", "export actual/forecast/previous-day curves");
    CommonOpts plot_common;
    std::string plot_ckpt, plot_pv, plot_weather, plot_out = "plot.csv", plot_day;
    add_common(plot, plot_common);
    plot->add_option("--checkpoint", plot_ckpt, "checkpoint path")->required();
    plot->add_option("--pv-csv", plot_pv, "pv csv path")->required();
    plot->add_option("--weather-csv", plot_weather, "weather csv path")->required();
    plot->add_option("--out", plot_out, "plot csv output");
    plot->add_option("--day", plot_day, "forecast day, YYYY-MM-DD")->required();
    plot->callback(
        [&] { run_plot(plot_common, plot_ckpt, plot_pv, plot_weather, plot_out, plot_day); });

    // gradcheck
    auto* grad = app.add_subcommand("gradcheck", "finite-difference verification of all gradients");
    std::uint64_t grad_seed = 7;
    grad->add_option("--seed", grad_seed, "suite seed");
    grad->callback([&] { run_gradcheck(grad_seed); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    } catch (const DataError& e) {
        log_error(e.what());
        return 2;
    } catch (const Error& e) {
        log_error(e.what());
        return 1;
    } catch (const std::exception& e) {
        log_error(e.what());
        return 1;
    }
    return g_exit_code;
}

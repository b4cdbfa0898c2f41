// Acceptance gate: one line per criterion, nonzero exit when any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "matnet/common.hpp"
#include "matnet/data.hpp"
#include "matnet/gradient_suite.hpp"
#include "matnet/metrics.hpp"
#include "matnet/model.hpp"
#include "matnet/rng.hpp"
#include "matnet/synthetic.hpp"
#include "matnet/train.hpp"

#ifdef _WIN32
#error "acceptance runner relies on POSIX process status macros"
#endif
#include <sys/wait.h>
#include <unistd.h>

namespace {

using namespace matnet;
namespace fs = std::filesystem;

struct Failure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void require(bool ok, const std::string& what) {
    if (!ok) throw Failure(what);
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

const std::string& workdir() {
    static const std::string dir = [] {
        std::string d = (fs::temp_directory_path() /
                         ("matnet_acceptance_" + std::to_string(::getpid())))
                            .string();
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

struct CliResult {
    int exit_code = -1;
    std::string output;
};

CliResult run_cli(const std::string& args) {
    static int call = 0;
    const std::string capture = workdir() + "/cli_" + std::to_string(call++) + ".out";
    const std::string command =
        std::string(MATNET_CLI_PATH) + " " + args + " > " + capture + " 2>&1";
    const int status = std::system(command.c_str());
    CliResult result;
    if (WIFEXITED(status)) result.exit_code = WEXITSTATUS(status);
    std::ifstream in(capture, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    result.output = buf.str();
    return result;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), "cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::size_t count_lines(const std::string& text) {
    std::size_t n = 0;
    for (char c : text)
        if (c == '\n') ++n;
    return n;
}

// Shared CLI corpus: a 16-day synthetic plant plus two identically seeded
// training runs, used by the ablation and determinism criteria.
struct CliCorpus {
    std::string pv, weather, run_a, run_b;
};

const CliCorpus& cli_corpus() {
    static const CliCorpus corpus = [] {
        CliCorpus c;
        c.pv = workdir() + "/pv.csv";
        c.weather = workdir() + "/weather.csv";
        c.run_a = workdir() + "/run_a";
        c.run_b = workdir() + "/run_b";
        CliResult synth = run_cli("synth --out-pv " + c.pv + " --out-weather " + c.weather +
                                  " --days 16 --units 2 --seed 5");
        require(synth.exit_code == 0, "synth failed: " + synth.output);
        const std::string train_args =
            " --pv-csv " + c.pv + " --weather-csv " + c.weather +
            " --set d_model=16 --set heads=2 --set layers=1 --set ffn_dim=32"
            " --set epochs=3 --set batch_size=8 --seed 3 --out ";
        CliResult a = run_cli("train" + train_args + c.run_a);
        require(a.exit_code == 0, "train run_a failed: " + a.output);
        CliResult b = run_cli("train" + train_args + c.run_b);
        require(b.exit_code == 0, "train run_b failed: " + b.output);
        return c;
    }();
    return corpus;
}

ModelConfig toy_config(EncoderKind kind = EncoderKind::attention) {
    ModelConfig m;
    m.d_model = 16;
    m.heads = 2;
    m.layers = 1;
    m.ffn_dim = 32;
    m.dropout_p = 0.0;
    m.encoder = kind;
    return m;
}

SampleWindow make_sample(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(0.05, 0.95);
    SampleWindow s;
    s.step_in = 24;
    s.step_out = 24;
    s.pv.resize(24);
    s.hw.resize(24 * kEncodedWeatherWidth);
    s.fw.resize(24 * kEncodedWeatherWidth);
    s.target.resize(24);
    for (auto& v : s.pv) v = uni(rng);
    for (auto& v : s.hw) v = uni(rng);
    for (auto& v : s.fw) v = uni(rng);
    for (auto& v : s.target) v = uni(rng);
    s.day_id = "2012-01-02";
    return s;
}

// Lazily prepared 60-day seasonal split shared by the skill and parity
// criteria.
const PreparedData& seasonal_data() {
    static const PreparedData prepared = [] {
        SynthConfig synth;
        synth.days = 60;
        synth.units = 3;
        synth.seed = 17;
        SynthResult gen = generate_synthetic(synth);
        PipelineConfig pipe;
        return prepare_dataset(gen.pv_units, gen.weather, pipe);
    }();
    return prepared;
}

// 1. Finite-difference verification of every differentiable block and the
//    whole toy model, within the runtime budget.
std::string criterion_gradients() {
    const auto start = std::chrono::steady_clock::now();
    const std::vector<GradientCase> cases = run_gradient_suite(7);
    const double elapsed = seconds_since(start);
    require(!cases.empty(), "gradient suite returned no cases");
    double worst = 0.0;
    for (const auto& c : cases) {
        require(c.pass, "gradient case failed: " + c.name);
        require(c.max_rel_error <= 1e-4,
                "gradient case " + c.name + " rel error " + fmt(c.max_rel_error));
        worst = std::max(worst, c.max_rel_error);
    }
    for (const char* needed :
         {"conv1d", "layer_norm", "encoder_layer", "dense_interpolation_fixed",
          "dense_interpolation_learnable", "lstm_step", "gru_step", "fusion_head",
          "full_model_attention"}) {
        const bool found = std::any_of(cases.begin(), cases.end(),
                                       [&](const GradientCase& c) { return c.name == needed; });
        require(found, std::string("gradient suite is missing case ") + needed);
    }
    require(elapsed < 60.0, "gradient suite took " + fmt(elapsed) + "s, budget 60s");
    return std::to_string(cases.size()) + " cases, worst rel " + fmt(worst) + ", " +
           fmt(elapsed) + "s";
}

// 2. Structural facts: output arity and range, default head width, weather
//    encoding width with exact one-hot rows, first positional-encoding row.
std::string criterion_structure() {
    require(ModelConfig{}.d_head() == 64, "default head width is not 64");
    require(kEncodedWeatherWidth == 35, "encoded weather width is not 35");

    Model model = build_model(toy_config(), 1);
    const SampleWindow sample = make_sample(2);
    const Tensor out = model_forward(sample, model);
    require(out.numel() == 24, "forward output is not 24 steps");
    for (double v : out.values())
        require(v > 0.0 && v < 1.0, "forward output leaves (0,1): " + fmt(v));

    SynthConfig synth;
    synth.days = 4;
    synth.units = 1;
    synth.seed = 3;
    SynthResult gen = generate_synthetic(synth);
    MinMaxScaler scaler;
    scaler.fit(gen.weather, gen.weather.entries.back().timestamp);
    const EncodedWeather encoded = encode_weather(gen.weather, scaler);
    require(encoded.rows() == gen.weather.entries.size(), "encoded row count mismatch");
    for (std::size_t r = 0; r < encoded.rows(); ++r) {
        double onehot = 0.0;
        for (std::size_t c = kWeatherNumericCount; c < kEncodedWeatherWidth; ++c)
            onehot += encoded.at(r, c);
        require(onehot == 1.0, "one-hot block does not sum to 1 at row " + std::to_string(r));
    }

    const Tensor pe = positional_encoding(24, 16);
    for (std::size_t c = 0; c < 16; ++c) {
        const double expected = (c % 2 == 0) ? 0.0 : 1.0;
        require(pe.values()[c] == expected, "positional encoding row 0 is not (0,1,0,1,...)");
    }
    return "24 outputs in (0,1), 35 weather columns, head width 64";
}

// 3. Metric implementations against direct-summation references on random
//    pairs, plus the exact hand examples.
std::string criterion_metrics() {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> act(0.05, 2.0);
    std::uniform_real_distribution<double> fct(0.0, 2.0);
    const std::size_t n = 48;
    double worst = 0.0;
    for (int pair = 0; pair < 1000; ++pair) {
        std::vector<double> y(n), y_hat(n);
        for (auto& v : y) v = act(rng);
        for (auto& v : y_hat) v = fct(rng);

        double sq = 0.0, abs_err = 0.0, abs_act = 0.0, naive = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double e = y[i] - y_hat[i];
            sq += e * e;
            abs_err += std::abs(e);
            abs_act += std::abs(y[i]);
            if (i > 0) naive += std::abs(y[i] - y[i - 1]);
        }
        const double dn = static_cast<double>(n);
        const double ref_rmse = std::sqrt(sq / dn);
        const double ref_mae = abs_err / dn;
        const double ref_wmape = abs_err / abs_act;
        const double ref_mase = (abs_err / dn) / (naive / (dn - 1.0));

        worst = std::max(worst, std::abs(rmse(y, y_hat) - ref_rmse));
        worst = std::max(worst, std::abs(mae(y, y_hat) - ref_mae));
        worst = std::max(worst, std::abs(wmape(y, y_hat) - ref_wmape));
        worst = std::max(worst, std::abs(mase(y, y_hat) - ref_mase));
    }
    require(worst <= 1e-12, "metric deviates from reference by " + fmt(worst));

    const std::vector<double> y1{2.0, 2.0}, f1{1.0, 3.0};
    require(wmape(y1, f1) == 0.5, "wmape hand example failed");
    const std::vector<double> y2{1.0, 2.0, 3.0}, f2{0.0, 1.0, 2.0};
    require(mase(y2, f2) == 1.0, "mase hand example failed");
    return "4000 comparisons, worst deviation " + fmt(worst);
}

// 4. Disabling a branch makes its input values irrelevant bit-for-bit, and
//    the ablation command emits the seven branch combinations.
std::string criterion_ablation() {
    Model model = build_model(toy_config(), 9);
    SampleWindow a = make_sample(10);
    SampleWindow b = a;
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> uni(-5.0, 5.0);
    for (auto& v : a.hw) v = uni(rng);
    for (auto& v : b.hw) v = uni(rng);

    AblationSpec spec;
    spec.enable_hw = false;
    const Tensor out_a = ablate_forward(a, model, spec);
    const Tensor out_b = ablate_forward(b, model, spec);
    for (std::size_t i = 0; i < out_a.numel(); ++i) {
        require(out_a.values()[i] == out_b.values()[i],
                "disabled-branch output depends on the branch input");
    }

    const CliCorpus& corpus = cli_corpus();
    const std::string csv_path = workdir() + "/ablation.csv";
    CliResult ablate = run_cli("ablate --checkpoint " + corpus.run_a +
                               "/checkpoint.bin --pv-csv " + corpus.pv + " --weather-csv " +
                               corpus.weather + " --out " + csv_path);
    require(ablate.exit_code == 0, "ablate command failed: " + ablate.output);
    const std::string csv = slurp(csv_path);
    require(count_lines(csv) == 8, "ablation csv does not hold header plus 7 rows");

    std::istringstream lines(csv);
    std::string line;
    std::getline(lines, line);  // header
    std::set<std::string> combos;
    while (std::getline(lines, line)) combos.insert(line.substr(0, 5));  // "p,h,f" bit triple
    require(combos.size() == 7, "ablation rows are not 7 distinct combinations");
    require(combos.count("0,0,0") == 0, "ablation rows include the all-disabled combination");
    return "knockout bit-identical, 7 combination rows";
}

// 5. The toy model overfits a 16-sample clear-sky set by >= 95% within 300
//    epochs, identically across two seeded runs.
std::string criterion_overfit() {
    const auto start = std::chrono::steady_clock::now();
    SynthConfig synth;
    synth.days = 24;
    synth.units = 1;
    synth.seed = 11;
    synth.clear_weight = 1.0;
    synth.cloudy_weight = 0.0;
    synth.rainy_weight = 0.0;
    SynthResult gen = generate_synthetic(synth);
    PipelineConfig pipe;
    pipe.boundary = CivilDate{2012, 1, 19};
    PreparedData prepared = prepare_dataset(gen.pv_units, gen.weather, pipe);
    require(prepared.split.train.size() >= 16,
            "clear-sky corpus yields only " + std::to_string(prepared.split.train.size()) +
                " training samples");
    std::vector<SampleWindow> samples(prepared.split.train.begin(),
                                      prepared.split.train.begin() + 16);

    TrainConfig train;
    train.epochs = 300;
    train.batch_size = 8;
    train.lr = 3e-3;
    train.seed = 4;
    train.val_fraction = 0.0;

    auto run_once = [&] {
        Model model = build_model(toy_config(), 4);
        const double before = mean_mse(model, samples);
        fit(model, samples, train);
        const double after = mean_mse(model, samples);
        return std::pair<double, double>(before, after);
    };
    const auto [before, after] = run_once();
    const auto [before2, after2] = run_once();
    require(before == before2 && after == after2, "seeded overfit runs diverge");
    require(before > 0.0, "untrained loss is not positive");
    const double reduction = 1.0 - after / before;
    require(reduction >= 0.95,
            "training mse fell only " + fmt(100.0 * reduction) + "% (" + fmt(before) + " -> " +
                fmt(after) + ")");
    const double elapsed = seconds_since(start);
    require(elapsed < 300.0, "overfit check took " + fmt(elapsed) + "s, budget 300s");
    return "mse " + fmt(before) + " -> " + fmt(after) + " (" + fmt(100.0 * reduction) +
           "% drop), " + fmt(elapsed) + "s";
}

// 6. Trained on a 60-day seasonal corpus, the toy model beats the one-step
//    naive forecaster on held-out days.
std::string criterion_skill() {
    const auto start = std::chrono::steady_clock::now();
    const PreparedData& prepared = seasonal_data();
    require(!prepared.split.test.empty(), "seasonal split has no held-out days");

    Model model = build_model(toy_config(), 6);
    TrainConfig train;
    train.epochs = 60;
    train.batch_size = 16;
    train.lr = 2e-3;
    train.seed = 6;
    train.val_fraction = 0.15;
    fit(model, prepared.split.train, train);

    const MetricsReport report = evaluate_model(model, prepared.split.test);
    require(report.pooled_mase.has_value(), "pooled mase is undefined on the held-out days");
    const double pooled = *report.pooled_mase;
    require(pooled < 1.0, "pooled mase " + fmt(pooled) + " does not beat the naive forecaster");
    const double elapsed = seconds_since(start);
    require(elapsed < 600.0, "skill check took " + fmt(elapsed) + "s, budget 600s");
    return "pooled mase " + fmt(pooled) + " on " + std::to_string(prepared.split.test.size()) +
           " held-out days, " + fmt(elapsed) + "s";
}

// 7. Every encoder kind trains end-to-end on the same split and reports the
//    same day rows; learnable interpolation starts bit-identical to fixed.
std::string criterion_parity() {
    const PreparedData& prepared = seasonal_data();
    std::vector<std::string> day_ids;
    const EncoderKind kinds[] = {EncoderKind::attention, EncoderKind::lstm, EncoderKind::gru,
                                 EncoderKind::bilstm, EncoderKind::bigru};
    for (std::size_t i = 0; i < 5; ++i) {
        Model model = build_model(toy_config(kinds[i]), 31 + i);
        TrainConfig train;
        train.epochs = 2;
        train.batch_size = 16;
        train.seed = 31 + i;
        fit(model, prepared.split.train, train);
        const MetricsReport report = evaluate_model(model, prepared.split.test);
        require(report.pooled_rmse.has_value() && report.pooled_mae.has_value(),
                "pooled metrics missing for an encoder kind");
        require(std::isfinite(*report.pooled_rmse) && std::isfinite(*report.pooled_mae),
                "non-finite pooled metrics for an encoder kind");
        std::vector<std::string> ids;
        for (const auto& day : report.days) ids.push_back(day.day_id);
        require(!ids.empty(), "report has no day rows");
        if (day_ids.empty())
            day_ids = ids;
        else
            require(ids == day_ids, "encoder kinds report different day rows");
    }

    ModelConfig fixed_cfg = toy_config();
    ModelConfig learn_cfg = toy_config();
    learn_cfg.interpolation = InterpolationMode::learnable;
    Model fixed_model = build_model(fixed_cfg, 77);
    Model learn_model = build_model(learn_cfg, 77);
    const SampleWindow sample = make_sample(78);
    const Tensor out_fixed = model_forward(sample, fixed_model);
    const Tensor out_learn = model_forward(sample, learn_model);
    for (std::size_t i = 0; i < out_fixed.numel(); ++i) {
        require(out_fixed.values()[i] == out_learn.values()[i],
                "learnable interpolation does not start at the fixed weights");
    }
    return "5 encoder kinds over " + std::to_string(day_ids.size()) + " held-out days";
}

// 8. A forced 21-epoch plateau cuts the rate to exactly 2e-4; the first Adam
//    step has the closed-form magnitude.
std::string criterion_schedule() {
    PlateauScheduler scheduler(PlateauConfig{}, 1e-3);
    scheduler.observe(1.0);
    for (int i = 0; i < 20; ++i) scheduler.observe(1.0);
    require(scheduler.lr() == 1e-3, "rate cut before the patience ran out");
    scheduler.observe(1.0);
    require(scheduler.lr() == 2e-4, "rate after the plateau is not exactly 2e-4");

    ParamStore store;
    store.add("w", Tensor::from_values({1}, {0.0}, true));
    AdamConfig adam_cfg;
    adam_cfg.lr = 1e-3;
    AdamState adam(store, adam_cfg);
    store.get("w").mutable_grad() = {1.0};
    adam.step(store);
    const double expected = -1e-3 / (1.0 + 1e-8);
    require(std::abs(store.get("w").values()[0] - expected) <= 1e-12,
            "first adam step is not the closed-form magnitude");
    return "plateau 1e-3 -> 2e-4, adam step " + fmt(-expected);
}

// 9. Identical seed and configuration give byte-identical artifacts, and a
//    checkpoint round-trip preserves eval outputs bit-exactly.
std::string criterion_determinism() {
    const CliCorpus& corpus = cli_corpus();
    require(slurp(corpus.run_a + "/history.csv") == slurp(corpus.run_b + "/history.csv"),
            "history csvs differ between identically seeded runs");
    require(slurp(corpus.run_a + "/checkpoint.bin") == slurp(corpus.run_b + "/checkpoint.bin"),
            "checkpoints differ between identically seeded runs");

    const Checkpoint loaded = checkpoint_load(corpus.run_a + "/checkpoint.bin");
    Model model = model_from_checkpoint(loaded);
    const SampleWindow sample = make_sample(90);
    const Tensor before = model_forward(sample, model);

    const std::string copy_path = workdir() + "/roundtrip.bin";
    Checkpoint copy = make_checkpoint(model, loaded.epoch);
    copy.scaler = loaded.scaler;
    checkpoint_save(copy_path, copy);
    Model reloaded = model_from_checkpoint(checkpoint_load(copy_path));
    const Tensor after = model_forward(sample, reloaded);
    for (std::size_t i = 0; i < before.numel(); ++i) {
        require(before.values()[i] == after.values()[i],
                "checkpoint round-trip changed an eval output");
    }
    return "byte-identical artifacts, bit-exact round-trip";
}

// 10. The forecast-comparison statistic matches a direct-formula reference,
//     and identical forecasts report the degenerate outcome.
std::string criterion_comparison() {
    std::mt19937_64 rng(123);
    std::normal_distribution<double> noise(0.0, 1.0);
    const std::size_t n = 240;
    std::vector<double> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
        a[i] = noise(rng);
        b[i] = 0.8 * a[i] + 0.3 * noise(rng);
    }

    double worst = 0.0;
    for (DMLoss loss : {DMLoss::squared, DMLoss::absolute}) {
        const int horizon = 24;
        std::vector<double> d(n);
        for (std::size_t i = 0; i < n; ++i) {
            d[i] = loss == DMLoss::squared ? a[i] * a[i] - b[i] * b[i]
                                           : std::abs(a[i]) - std::abs(b[i]);
        }
        double mean = 0.0;
        for (double v : d) mean += v;
        mean /= static_cast<double>(n);
        auto gamma = [&](std::size_t k) {
            double acc = 0.0;
            for (std::size_t t = k; t < n; ++t) acc += (d[t] - mean) * (d[t - k] - mean);
            return acc / static_cast<double>(n);
        };
        double var = gamma(0);
        for (std::size_t k = 1; k + 1 <= static_cast<std::size_t>(horizon); ++k)
            var += 2.0 * gamma(k);
        const double ref_stat = mean / std::sqrt(var / static_cast<double>(n));
        const double ref_p = std::erfc(std::abs(ref_stat) / std::sqrt(2.0));

        const DMOutcome out = diebold_mariano(a, b, loss, horizon);
        require(!out.degenerate, "comparison test degenerated on distinct error series");
        worst = std::max(worst, std::abs(out.statistic - ref_stat));
        worst = std::max(worst, std::abs(out.p_value - ref_p));
    }
    require(worst <= 1e-10, "comparison test deviates from reference by " + fmt(worst));

    const DMOutcome same = diebold_mariano(a, a, DMLoss::squared, 24);
    require(same.degenerate && same.statistic == 0.0 && same.p_value == 1.0,
            "identical forecasts do not report the degenerate outcome");
    return "worst deviation " + fmt(worst) + ", degenerate case flagged";
}

struct Criterion {
    int number;
    const char* label;
    std::string (*run)();
};

}  // namespace

int main() {
    const Criterion criteria[] = {
        {1, "gradient suite", criterion_gradients},
        {2, "shapes and structure", criterion_structure},
        {3, "metric oracle", criterion_metrics},
        {4, "ablation soundness", criterion_ablation},
        {5, "overfit capability", criterion_overfit},
        {6, "skill over naive", criterion_skill},
        {7, "encoder parity and interpolation init", criterion_parity},
        {8, "optimizer and scheduler", criterion_schedule},
        {9, "determinism and persistence", criterion_determinism},
        {10, "forecast comparison test", criterion_comparison},
    };
    int failed = 0;
    for (const Criterion& criterion : criteria) {
        std::string verdict, detail;
        try {
            detail = criterion.run();
            verdict = "PASS";
        } catch (const std::exception& e) {
            detail = e.what();
            verdict = "FAIL";
            ++failed;
        }
        std::printf("criterion %2d (%s): %s (%s)\n", criterion.number, criterion.label,
                    verdict.c_str(), detail.c_str());
        std::fflush(stdout);
    }
    std::printf("acceptance: %d/10 criteria passed\n", 10 - failed);
    fs::remove_all(workdir());
    return failed == 0 ? 0 : 1;
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "matnet/runconfig.hpp"

using namespace matnet;

namespace {

namespace fs = std::filesystem;

struct RunResult {
    int exit_code = -1;
    std::string output;  // stdout and stderr combined
};

const fs::path& work_dir() {
    static const fs::path dir = [] {
        fs::path p = fs::temp_directory_path() / ("matnet_cli_test_" + std::to_string(::getpid()));
        fs::create_directories(p);
        return p;
    }();
    return dir;
}

std::string wpath(const std::string& name) { return (work_dir() / name).string(); }

RunResult run_cli(const std::string& args) {
    static int counter = 0;
    const std::string capture = wpath("capture_" + std::to_string(counter++) + ".txt");
    const std::string cmd = std::string(MATNET_CLI_PATH) + " " + args + " > " + capture + " 2>&1";
    const int raw = std::system(cmd.c_str());
    RunResult result;
    result.exit_code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    std::ifstream in(capture);
    std::ostringstream os;
    os << in.rdbuf();
    result.output = os.str();
    return result;
}

// Shared tiny corpus and trained checkpoint, built once.
struct Corpus {
    std::string pv = wpath("pv.csv");
    std::string weather = wpath("weather.csv");
    std::string run_dir = wpath("run");
    std::string ckpt = wpath("run/checkpoint.bin");

    Corpus() {
        RunResult synth = run_cli("synth --out-pv " + pv + " --out-weather " + weather +
                                  " --days 16 --units 2 --seed 5");
        REQUIRE(synth.exit_code == 0);
        RunResult train = run_cli("train --pv-csv " + pv + " --weather-csv " + weather + " --out " +
                                  run_dir +
                                  " --set d_model=16 --set heads=2 --set layers=1"
                                  " --set ffn_dim=32 --set epochs=4 --set batch_size=8 --seed 2");
        REQUIRE(train.exit_code == 0);
    }
};

const Corpus& corpus() {
    static Corpus c;
    return c;
}

}  // namespace

TEST_CASE("config files and overrides assemble a run configuration") {
    const std::string path = wpath("run.conf");
    std::ofstream out(path);
    out << "# model geometry\n"
        << "d_model = 64\n"
        << "heads=4\n"
        << "\n"
        << "encoder = bigru\n"
        << "interpolation=learnable\n"
        << "attention_scale = full_width\n"
        << "epochs = 12\n"
        << "lr = 0.002\n"
        << "batch_size=16\n"
        << "val_fraction = 0.25\n"
        << "plateau_patience = 5\n"
        << "stride = 12\n"
        << "step_in = 48\n"
        << "boundary = 2012-06-01\n"
        << "dropout = 0.35\n";
    out.close();

    RunConfig cfg = load_run_config(path);
    CHECK(cfg.model.d_model == 64);
    CHECK(cfg.model.heads == 4);
    CHECK(cfg.model.encoder == EncoderKind::bigru);
    CHECK(cfg.model.interpolation == InterpolationMode::learnable);
    CHECK(cfg.model.attention_scale == AttentionScale::full_width);
    CHECK(cfg.model.dropout_p == 0.35);
    CHECK(cfg.model.step_in == 48);
    CHECK(cfg.pipeline.step_in == 48);
    CHECK(cfg.pipeline.stride == 12);
    REQUIRE(cfg.pipeline.boundary.has_value());
    CHECK(*cfg.pipeline.boundary == CivilDate{2012, 6, 1});
    CHECK(cfg.train.epochs == 12);
    CHECK(cfg.train.lr == 0.002);
    CHECK(cfg.train.batch_size == 16);
    CHECK(cfg.train.val_fraction == 0.25);
    CHECK(cfg.train.plateau.patience == 5);

    RunConfig layered = cfg;
    apply_config_key(layered, "epochs", "3");
    CHECK(layered.train.epochs == 3);
    CHECK_THROWS_WITH_AS(apply_config_key(layered, "learning_rate", "0.1"),
                         doctest::Contains("unknown config key 'learning_rate'"), ConfigError);
    CHECK_THROWS_AS(apply_config_key(layered, "epochs", "many"), ConfigError);
    CHECK_THROWS_AS(apply_config_key(layered, "boundary", "junk"), ParseError);

    const std::string bad = wpath("bad.conf");
    std::ofstream(bad) << "d_model 64\n";
    CHECK_THROWS_WITH_AS(load_run_config(bad), doctest::Contains(":1"), ConfigError);
    CHECK_THROWS_AS(load_run_config(wpath("missing.conf")), ConfigError);
}

TEST_CASE("synthesis writes loadable csv files") {
    const Corpus& c = corpus();
    std::ifstream pv(c.pv);
    std::string header;
    std::getline(pv, header);
    CHECK(header == "timestamp,unit_id,capacity_kwp,generation_kwh");
    std::ifstream weather(c.weather);
    std::getline(weather, header);
    CHECK(header.find("timestamp,temperature") == 0);
    CHECK(fs::file_size(c.pv) > 10000);
}

TEST_CASE("training leaves a checkpoint, a history and a test summary") {
    const Corpus& c = corpus();
    CHECK(fs::exists(c.ckpt));
    CHECK(fs::exists(wpath("run/history.csv")));
    std::ifstream hist(wpath("run/history.csv"));
    std::string line;
    int rows = 0;
    while (std::getline(hist, line)) ++rows;
    CHECK(rows == 5);  // header + 4 epochs
}

TEST_CASE("training is reproducible at the file level") {
    const Corpus& c = corpus();
    RunResult again = run_cli("train --pv-csv " + c.pv + " --weather-csv " + c.weather + " --out " +
                              wpath("run_again") +
                              " --set d_model=16 --set heads=2 --set layers=1"
                              " --set ffn_dim=32 --set epochs=4 --set batch_size=8 --seed 2");
    REQUIRE(again.exit_code == 0);
    auto slurp_binary = [](const std::string& p) {
        std::ifstream in(p, std::ios::binary);
        return std::string(std::istreambuf_iterator<char>(in), {});
    };
    CHECK(slurp_binary(wpath("run_again/checkpoint.bin")) == slurp_binary(c.ckpt));
    CHECK(slurp_binary(wpath("run_again/history.csv")) == slurp_binary(wpath("run/history.csv")));
}

TEST_CASE("evaluation prints pooled metrics and writes the per-day csv") {
    const Corpus& c = corpus();
    RunResult eval = run_cli("evaluate --checkpoint " + c.ckpt + " --pv-csv " + c.pv +
                             " --weather-csv " + c.weather + " --out " + wpath("metrics.csv"));
    CHECK(eval.exit_code == 0);
    CHECK(eval.output.find("rmse") != std::string::npos);
    std::ifstream in(wpath("metrics.csv"));
    std::string header;
    std::getline(in, header);
    CHECK(header == "day,rmse,mae,wmape,mase");
    bool pooled = false;
    std::string line;
    while (std::getline(in, line)) {
        if (line.rfind("pooled,", 0) == 0) pooled = true;
    }
    CHECK(pooled);

    RunResult daylight =
        run_cli("evaluate --checkpoint " + c.ckpt + " --pv-csv " + c.pv + " --weather-csv " +
                c.weather + " --daylight-only");
    CHECK(daylight.exit_code == 0);
    CHECK(daylight.output.find("daylight") != std::string::npos);
}

TEST_CASE("a single branch can be knocked out at evaluation time") {
    const Corpus& c = corpus();
    RunResult masked = run_cli("evaluate --checkpoint " + c.ckpt + " --pv-csv " + c.pv +
                               " --weather-csv " + c.weather + " --ablate-hw --ablate-fw");
    CHECK(masked.exit_code == 0);
    CHECK(masked.output.find("[pv]") != std::string::npos);
}

TEST_CASE("the ablation sweep writes seven combinations") {
    const Corpus& c = corpus();
    RunResult ablate = run_cli("ablate --checkpoint " + c.ckpt + " --pv-csv " + c.pv +
                               " --weather-csv " + c.weather + " --out " + wpath("ablation.csv"));
    CHECK(ablate.exit_code == 0);
    std::ifstream in(wpath("ablation.csv"));
    std::string line;
    int rows = 0;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == 8);  // header + 7 combinations
}

TEST_CASE("prediction and plot export cover a chosen day") {
    const Corpus& c = corpus();
    RunResult predict = run_cli("predict --checkpoint " + c.ckpt + " --pv-csv " + c.pv +
                                " --weather-csv " + c.weather + " --out " + wpath("forecast.csv"));
    CHECK(predict.exit_code == 0);
    std::ifstream in(wpath("forecast.csv"));
    std::string header;
    std::getline(in, header);
    CHECK(header == "day,hour,timestamp,actual,forecast");

    RunResult plot = run_cli("plot --checkpoint " + c.ckpt + " --pv-csv " + c.pv +
                             " --weather-csv " + c.weather + " --day 2012-01-15 --out " +
                             wpath("plot.csv"));
    CHECK(plot.exit_code == 0);
    std::ifstream pin(wpath("plot.csv"));
    std::getline(pin, header);
    CHECK(header == "hour,actual,forecast,previous_day");

    RunResult missing = run_cli("plot --checkpoint " + c.ckpt + " --pv-csv " + c.pv +
                                " --weather-csv " + c.weather + " --day 2031-01-01 --out " +
                                wpath("plot2.csv"));
    CHECK(missing.exit_code == 2);
}

TEST_CASE("gradient verification succeeds from the command line") {
    RunResult grad = run_cli("gradcheck");
    CHECK(grad.exit_code == 0);
    CHECK(grad.output.find("PASS") != std::string::npos);
    CHECK(grad.output.find("FAIL") == std::string::npos);
    CHECK(grad.output.find("full_model_attention") != std::string::npos);
}

TEST_CASE("usage and configuration mistakes exit with code 1") {
    const Corpus& c = corpus();
    CHECK(run_cli("").exit_code == 1);
    CHECK(run_cli("frobnicate").exit_code == 1);
    CHECK(run_cli("train --pv-csv " + c.pv).exit_code == 1);  // missing required flag
    RunResult badkey = run_cli("train --pv-csv " + c.pv + " --weather-csv " + c.weather +
                               " --out " + wpath("x") + " --set nonsense=1");
    CHECK(badkey.exit_code == 1);
    CHECK(badkey.output.find("unknown config key") != std::string::npos);
    CHECK(run_cli("--help").exit_code == 0);
}

TEST_CASE("data problems exit with code 2") {
    const Corpus& c = corpus();
    CHECK(run_cli("evaluate --checkpoint " + wpath("nothing.bin") + " --pv-csv " + c.pv +
                  " --weather-csv " + c.weather)
              .exit_code == 2);
    const std::string broken = wpath("broken.csv");
    std::ofstream(broken) << "timestamp,unit_id,capacity_kwp,generation_kwh\njunk,u1,5,1\n";
    RunResult r = run_cli("train --pv-csv " + broken + " --weather-csv " + c.weather + " --out " +
                          wpath("y"));
    CHECK(r.exit_code == 2);
}

TEST_CASE("a checkpoint refuses to score as a different architecture") {
    const Corpus& c = corpus();
    RunResult clash = run_cli("evaluate --checkpoint " + c.ckpt + " --pv-csv " + c.pv +
                              " --weather-csv " + c.weather + " --encoder lstm");
    CHECK(clash.exit_code == 2);
    CHECK(clash.output.find("attention") != std::string::npos);
    CHECK(clash.output.find("lstm") != std::string::npos);
}

TEST_CASE("checkpoint evaluation reuses the stored normalization and boundary") {
    const Corpus& c = corpus();
    // Same data, explicit later boundary: fewer test days, still works.
    RunResult shifted = run_cli("evaluate --checkpoint " + c.ckpt + " --pv-csv " + c.pv +
                                " --weather-csv " + c.weather + " --boundary 2012-01-15");
    CHECK(shifted.exit_code == 0);
    CHECK(shifted.output.find("n=48") != std::string::npos);  // two held-out days
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdlib>
#include <fstream>
#include <string>

#include "doctest.h"
#include "idr/config.hpp"
#include "idr/errors.hpp"

using namespace idr;

namespace {

const char* kFull = R"(# full example
[run]
out = runs/demo
seed = 42
workers = 2
timing_in_csv = true

[data]
root = /tmp/idr_data
train = tr
test = te

[model]
levels = 2
base_channels = 4
in_channels = 1
leaky_slope = 0.2

[noise]
variant = poisson_gaussian
iso = 100 800
k0 = 0.01
sigma0 = 0.005

[schedule]
mode = full
rounds = 3
epochs_per_round = 2
iters_per_epoch = 100
batch = 2
patch = 16
lr = 0.001
lr_factor = 0.25
milestones = 50 150
)";

std::string patched(const std::string& base, const std::string& from, const std::string& to) {
    std::string s = base;
    const auto at = s.find(from);
    REQUIRE(at != std::string::npos);
    return s.replace(at, from.size(), to);
}

}  // namespace

TEST_CASE("full config parses with every field") {
    const ExperimentConfig cfg = parse_experiment_config(kFull);
    CHECK(cfg.out_dir == "runs/demo");
    CHECK(cfg.seed == 42);
    CHECK(cfg.workers == 2);
    CHECK(cfg.timing_in_csv);
    CHECK(cfg.data_root == "/tmp/idr_data");
    CHECK(cfg.train_split == "tr");
    CHECK(cfg.test_split == "te");
    CHECK(cfg.model.levels == 2);
    CHECK(cfg.model.base_channels == 4);
    CHECK(cfg.model.leaky_slope == doctest::Approx(0.2));
    CHECK(cfg.noise.kind == NoiseKind::kPoissonGaussian);
    CHECK(cfg.noise.level_lo == doctest::Approx(100));
    CHECK(cfg.noise.level_hi == doctest::Approx(800));
    CHECK(cfg.schedule.mode == RunMode::kFull);
    CHECK(cfg.schedule.rounds == 3);
    CHECK(cfg.schedule.epochs_per_round == 2);
    CHECK(cfg.schedule.lr.factor == doctest::Approx(0.25));
    CHECK(cfg.schedule.lr.milestones == std::vector<long>{50, 150});
    // the run seed is mirrored into the schedule
    CHECK(cfg.schedule.seed == 42);
}

TEST_CASE("defaults fill in and the data root falls back to the environment") {
    const char* minimal = R"(
[noise]
variant = gaussian
sigma = 25

[schedule]
mode = fast
rounds = 1
iters_per_epoch = 1
)";
    setenv("IDR_DATA_DIR", "/tmp/idr_env_root", 1);
    ExperimentConfig cfg = parse_experiment_config(minimal);
    CHECK(cfg.data_root == "/tmp/idr_env_root");
    CHECK(cfg.out_dir == "runs/run");
    CHECK(cfg.seed == 0);
    CHECK(cfg.workers == 1);
    CHECK_FALSE(cfg.timing_in_csv);
    CHECK(cfg.model.levels == 3);
    CHECK(cfg.schedule.batch == 4);
    CHECK(cfg.schedule.patch == 48);
    CHECK(cfg.schedule.lr.milestones.empty());

    unsetenv("IDR_DATA_DIR");
    cfg = parse_experiment_config(minimal);
    CHECK(cfg.data_root == "data");
}

TEST_CASE("resolved text round-trips to the same config") {
    setenv("IDR_DATA_DIR", "/tmp/idr_env_root", 1);
    const ExperimentConfig a = parse_experiment_config(kFull);
    const std::string text = resolved_config_text(a);
    const ExperimentConfig b = parse_experiment_config(text);
    CHECK(resolved_config_text(b) == text);
    CHECK(b.seed == a.seed);
    CHECK(b.noise.k0 == a.noise.k0);
    CHECK(b.schedule.lr.milestones == a.schedule.lr.milestones);
    unsetenv("IDR_DATA_DIR");
}

TEST_CASE("auto milestones serialize as 'auto' and parse back to empty") {
    const ExperimentConfig cfg = parse_experiment_config(
        "[noise]\nvariant = gaussian\nsigma = 25\n[schedule]\nmode = fast\nrounds = 2\n"
        "iters_per_epoch = 10\nmilestones = auto\n");
    CHECK(cfg.schedule.lr.milestones.empty());
    const std::string text = resolved_config_text(cfg);
    CHECK(text.find("milestones = auto") != std::string::npos);
}

TEST_CASE("unknown keys and sections are hard errors") {
    CHECK_THROWS_AS(parse_experiment_config(patched(kFull, "workers = 2", "wrkers = 2")),
                    ConfigError);
    CHECK_THROWS_AS(parse_experiment_config(patched(kFull, "[data]", "[dta]")), ConfigError);
    CHECK_THROWS_AS(parse_experiment_config(patched(kFull, "levels = 2", "depth = 2")),
                    ConfigError);
    CHECK_THROWS_AS(parse_experiment_config(patched(kFull, "batch = 2", "batchsize = 2")),
                    ConfigError);
    // unknown noise keys bubble up from the spec assembly
    CHECK_THROWS_AS(parse_experiment_config(patched(kFull, "k0 = 0.01", "gain = 0.01")),
                    ConfigError);
}

TEST_CASE("structural problems are format errors") {
    CHECK_THROWS_AS(parse_experiment_config(patched(kFull, "workers = 2", "workers 2")),
                    FormatError);
    CHECK_THROWS_AS(parse_experiment_config(patched(kFull, "seed = 42", "seed = 42\nseed = 7")),
                    FormatError);
    CHECK_THROWS_AS(parse_experiment_config("key = 1\n[run]\nout = x\n"), FormatError);
    CHECK_THROWS_AS(parse_experiment_config(patched(kFull, "[run]", "[run")), FormatError);
}

TEST_CASE("value validation") {
    CHECK_THROWS_AS(parse_experiment_config(patched(kFull, "seed = 42", "seed = -3")),
                    ConfigError);
    CHECK_THROWS_AS(parse_experiment_config(patched(kFull, "workers = 2", "workers = zero")),
                    ConfigError);
    CHECK_THROWS_AS(
        parse_experiment_config(patched(kFull, "timing_in_csv = true", "timing_in_csv = yes")),
        ConfigError);
    CHECK_THROWS_AS(parse_experiment_config(patched(kFull, "mode = full", "mode = turbo")),
                    ConfigError);
    CHECK_THROWS_AS(parse_experiment_config(patched(kFull, "levels = 2", "levels = 0")),
                    ConfigError);
    CHECK_THROWS_AS(parse_experiment_config(patched(kFull, "workers = 2", "workers = 0")),
                    ConfigError);
    // milestones must stay below the per-model budget (2 epochs x 100 iters)
    CHECK_THROWS_AS(
        parse_experiment_config(patched(kFull, "milestones = 50 150", "milestones = 50 200")),
        ConfigError);
    CHECK_THROWS_AS(
        parse_experiment_config(patched(kFull, "milestones = 50 150", "milestones = 150 50")),
        ConfigError);
    CHECK_THROWS_AS(parse_experiment_config(patched(kFull, "lr_factor = 0.25", "lr_factor = 1.5")),
                    ConfigError);
}

TEST_CASE("patch must respect the model alignment") {
    // levels 3 -> alignment 4; patch 30 is not divisible
    const std::string bad = patched(patched(kFull, "levels = 2", "levels = 3"),
                                    "patch = 16", "patch = 30");
    CHECK_THROWS_WITH_AS(parse_experiment_config(bad),
                         doctest::Contains("alignment"), ConfigError);
}

TEST_CASE("file save and load") {
    const ExperimentConfig a = parse_experiment_config(kFull);
    const std::string path = "/tmp/idr_test_cfg_roundtrip.cfg";
    save_experiment_config(a, path);
    const ExperimentConfig b = load_experiment_config(path);
    CHECK(resolved_config_text(b) == resolved_config_text(a));
    std::remove(path.c_str());
    CHECK_THROWS_AS(load_experiment_config("/tmp/definitely_missing_dir/x.cfg"), DataError);
}

TEST_CASE("parse errors carry the origin and line number") {
    try {
        parse_experiment_config("[run]\nworkers 2\n", "demo.cfg");
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find("demo.cfg:2") != std::string::npos);
    }
}

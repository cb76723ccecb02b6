#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "idr/errors.hpp"
#include "idr/pilot.hpp"

using namespace idr;

namespace {

PilotConfig micro_pilot() {
    PilotConfig cfg;
    cfg.epochs = 1;
    cfg.iters_per_epoch = 3;
    cfg.batch = 2;
    cfg.patch = 8;
    cfg.model.levels = 2;
    cfg.model.base_channels = 4;
    cfg.num_seeds = 1;
    cfg.test_levels = 2;
    return cfg;
}

NoiseSpec gauss(float lo, float hi) {
    NoiseSpec s;
    s.level_lo = lo;
    s.level_hi = hi;
    return s;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("median: odd, even, empty") {
    CHECK(median({3.0, 1.0, 2.0}) == 2.0);
    CHECK(median({4.0, 1.0, 2.0, 3.0}) == 2.5);
    CHECK(median({7.0}) == 7.0);
    CHECK_THROWS_AS(median({}), ShapeError);
}

TEST_CASE("pilot corpus: deterministic, in range, structured") {
    const auto a = make_pilot_corpus(6, 32, 13);
    const auto b = make_pilot_corpus(6, 32, 13);
    REQUIRE(a.size() == 6);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].h == 32);
        CHECK(a[i].w == 32);
        CHECK(a[i].c == 1);
        CHECK(a[i].v == b[i].v);  // bitwise reproducible
        for (float v : a[i].v) {
            CHECK(v >= 0.0f);
            CHECK(v <= 1.0f);
        }
    }

    // ids are stable and unique
    std::set<std::string> ids;
    for (const auto& img : a) ids.insert(img.source_id);
    CHECK(ids.size() == a.size());
    CHECK(a[0].source_id == "pilot_0000");

    // different seeds and different indices give different pictures
    const auto c = make_pilot_corpus(6, 32, 14);
    CHECK(c[0].v != a[0].v);
    CHECK(a[0].v != a[1].v);

    // not degenerate: every image has real contrast
    for (const auto& img : a) {
        const auto [lo, hi] = std::minmax_element(img.v.begin(), img.v.end());
        CHECK(*hi - *lo > 0.05f);
    }
}

TEST_CASE("finding 1 on a zero-noise spec short-circuits to the sentinel") {
    const CleanSet clean{make_pilot_corpus(6, 16, 21)};
    PilotConfig cfg = micro_pilot();
    cfg.test_levels = 3;
    const Finding1Report rep = run_finding1(clean, gauss(0, 0), cfg);
    REQUIRE(rep.levels.size() == 3);
    REQUIRE(rep.noisy_input.size() == 3);
    for (std::size_t j = 0; j < rep.levels.size(); ++j) {
        CHECK(std::isinf(rep.noisy_input[j]));
        // nothing was corrupted, so every condition coincides with the input
        CHECK(rep.noisier_noisy[j] == rep.noisy_input[j]);
        CHECK(rep.noisy_clean[j] == rep.noisy_input[j]);
    }
}

TEST_CASE("finding 1: report structure on a micro run") {
    const CleanSet clean{make_pilot_corpus(6, 16, 22)};
    PilotConfig cfg = micro_pilot();
    const Finding1Report rep = run_finding1(clean, gauss(5, 20), cfg);

    REQUIRE(rep.levels.size() == 2);
    CHECK(rep.levels[0] == doctest::Approx(5.0));
    CHECK(rep.levels[1] == doctest::Approx(20.0));
    CHECK(rep.noisy_input.size() == 2);
    CHECK(rep.noisier_noisy.size() == 2);
    CHECK(rep.noisy_clean.size() == 2);
    // 3 conditions x 2 levels x 1 seed
    CHECK(rep.cells.size() == 6);

    // more test noise, lower input PSNR
    CHECK(rep.noisy_input[0] > rep.noisy_input[1]);

    // medians match the cells they summarize
    for (const auto& cell : rep.cells) {
        CHECK(std::isfinite(cell.psnr));
        CHECK((cell.condition == "noisy_input" || cell.condition == "noisier_noisy" ||
               cell.condition == "noisy_clean"));
    }

    PilotConfig no_ref = cfg;
    no_ref.with_reference = false;
    const Finding1Report lean = run_finding1(clean, gauss(5, 20), no_ref);
    CHECK(lean.noisy_clean.empty());
    CHECK(lean.cells.size() == 4);
    // dropping the control must not move the other conditions
    CHECK(lean.noisier_noisy == rep.noisier_noisy);
    CHECK(lean.noisy_input == rep.noisy_input);
}

TEST_CASE("finding 2: sigma zero is exactly the reference arm") {
    const CleanSet clean{make_pilot_corpus(6, 16, 23)};
    PilotConfig cfg = micro_pilot();
    const std::vector<float> sigmas{0.0f, 4.0f};
    const Finding2Report rep =
        run_finding2(clean, gauss(10, 10), BiasKind::kGaussianNoise, sigmas, cfg);

    REQUIRE(rep.sigmas.size() == 2);
    REQUIRE(rep.psnr.size() == 2);
    REQUIRE(rep.drop.size() == 2);
    CHECK(rep.drop[0] == 0.0);  // bitwise: the sigma-0 arm is the reference model
    CHECK(rep.psnr[0] == rep.reference);
    CHECK(std::isfinite(rep.psnr[1]));

    // one reference row plus one row per (sigma, seed)
    int refs = 0, arms = 0;
    for (const auto& cell : rep.cells) {
        if (cell.condition == "noisy_clean") ++refs;
        else if (cell.condition == "bias_gn") ++arms;
    }
    CHECK(refs == 1);
    CHECK(arms == 2);
}

TEST_CASE("finding 2: sigma list validation") {
    const CleanSet clean{make_pilot_corpus(6, 16, 24)};
    const PilotConfig cfg = micro_pilot();
    CHECK_THROWS_AS(run_finding2(clean, gauss(10, 10), BiasKind::kGaussianNoise, {}, cfg),
                    ConfigError);
    CHECK_THROWS_AS(
        run_finding2(clean, gauss(10, 10), BiasKind::kGaussianNoise, {-1.0f, 2.0f}, cfg),
        ConfigError);
    CHECK_THROWS_AS(
        run_finding2(clean, gauss(10, 10), BiasKind::kGaussianNoise, {2.0f, 1.0f}, cfg),
        ConfigError);
}

TEST_CASE("tiny corpora are rejected before any training") {
    const CleanSet clean{make_pilot_corpus(3, 16, 25)};
    CHECK_THROWS_AS(run_finding1(clean, gauss(5, 20), micro_pilot()), DataError);
}

TEST_CASE("csv outputs: format and rewrite stability") {
    const CleanSet clean{make_pilot_corpus(6, 16, 26)};
    PilotConfig cfg = micro_pilot();
    const Finding1Report r1 = run_finding1(clean, gauss(5, 20), cfg);
    const Finding2Report r2 =
        run_finding2(clean, gauss(10, 10), BiasKind::kGaussianBlur, {0.0f, 1.5f}, cfg);

    const std::string p1 = "/tmp/idr_test_pilot1.csv";
    const std::string p2 = "/tmp/idr_test_pilot2.csv";
    write_finding1_csv(r1, p1);
    write_finding2_csv(r2, p2);

    const std::string csv1 = slurp(p1);
    CHECK(csv1.rfind("level,condition,psnr,seed\n", 0) == 0);
    CHECK(std::count(csv1.begin(), csv1.end(), '\n') == 1 + 6);
    const std::string csv2 = slurp(p2);
    CHECK(csv2.rfind("level,condition,psnr,seed\n", 0) == 0);
    CHECK(csv2.find("bias_gb") != std::string::npos);

    write_finding1_csv(r1, p1);
    CHECK(slurp(p1) == csv1);  // rewriting is byte-stable
    std::remove(p1.c_str());
    std::remove(p2.c_str());
}

TEST_CASE("finding 1 medians really are medians over seeds") {
    const CleanSet clean{make_pilot_corpus(6, 16, 27)};
    PilotConfig cfg = micro_pilot();
    cfg.num_seeds = 3;
    cfg.test_levels = 1;
    const Finding1Report rep = run_finding1(clean, gauss(12, 12), cfg);
    std::vector<double> nn;
    for (const auto& cell : rep.cells)
        if (cell.condition == "noisier_noisy") nn.push_back(cell.psnr);
    REQUIRE(nn.size() == 3);
    CHECK(rep.noisier_noisy[0] == median(nn));
}

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "idr/dataset.hpp"
#include "idr/noise.hpp"
#include "idr/scheduler.hpp"
#include "idr/unet.hpp"

namespace idr {

struct PilotConfig {
    int epochs = 4;
    int iters_per_epoch = 2000;
    int batch = 4;
    int patch = 48;
    LrSchedule lr;
    ModelConfig model;
    std::uint64_t seed = 0;  // runs use seed .. seed+num_seeds-1
    int num_seeds = 3;
    int test_levels = 4;
    // finding 1: also train the supervised {y+n, y} control (one extra model
    // per seed); the red-vs-blue comparison works without it
    bool with_reference = true;
    int workers = 1;
};

// Structured grayscale images (gradient + blobs + rectangles + a wave),
// values in [0,1], deterministic in (n, size, seed). First 70% of the
// order is the training split.
std::vector<ImageBuffer> make_pilot_corpus(int n, int size, std::uint64_t seed);

struct PilotCell {
    double level = 0.0;  // test noise level (finding 1) or bias sigma (finding 2)
    std::string condition;
    double psnr = 0.0;
    std::uint64_t seed = 0;
};

struct Finding1Report {
    std::vector<double> levels;
    std::vector<PilotCell> cells;  // long format, one row per (level, condition, seed)
    // medians across seeds, indexed like `levels`
    std::vector<double> noisy_input;
    std::vector<double> noisier_noisy;
    std::vector<double> noisy_clean;  // empty when with_reference is off
};

Finding1Report run_finding1(const CleanSet& clean, const NoiseSpec& spec, const PilotConfig& cfg);

struct Finding2Report {
    BiasKind bias = BiasKind::kGaussianNoise;
    std::vector<float> sigmas;
    std::vector<PilotCell> cells;
    double reference = 0.0;    // median noisy-clean PSNR
    std::vector<double> psnr;  // median per sigma
    std::vector<double> drop;  // psnr[i] - reference, expected <= 0 and shrinking
};

Finding2Report run_finding2(const CleanSet& clean, const NoiseSpec& spec, BiasKind bias,
                            const std::vector<float>& sigmas, const PilotConfig& cfg);

// level,condition,psnr,seed
void write_finding1_csv(const Finding1Report& report, const std::string& path);
void write_finding2_csv(const Finding2Report& report, const std::string& path);

double median(std::vector<double> xs);

}  // namespace idr

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "idr/dataset.hpp"
#include "idr/metrics.hpp"
#include "idr/noise.hpp"
#include "idr/unet.hpp"

namespace idr {

struct LrSchedule {
    float initial = 3e-4f;
    // Global iteration indices at which the rate is multiplied by `factor`.
    // Empty means "derive them": 50% and 80% of the per-model budget.
    std::vector<long> milestones;
    float factor = 0.5f;
};

enum class RunMode { kBaseline, kFull, kFast };

const char* run_mode_name(RunMode mode);
RunMode run_mode_from_name(const std::string& name);

struct IdrConfig {
    RunMode mode = RunMode::kFast;
    // Refinement rounds (full) or total epochs (fast/baseline).
    int rounds = 10;
    int epochs_per_round = 4;  // full mode only
    int iters_per_epoch = 2000;
    int batch = 4;
    int patch = 48;
    LrSchedule lr;
    std::uint64_t seed = 0;
};

void validate(const IdrConfig& cfg);

// Iteration budget of one trained model: epochs_per_round * iters (full)
// or rounds * iters (fast/baseline). The lr schedule spans this.
long total_model_iters(const IdrConfig& cfg);

std::vector<long> resolve_milestones(const LrSchedule& lr, long total_iters);
float lr_at(const LrSchedule& lr, const std::vector<long>& milestones, long iter);

struct EpochRecord {
    int epoch = 0;  // global epoch index within the run
    int round = 0;  // owning round (full) / refinement count so far (fast)
    double loss = 0.0;
    double seconds = 0.0;  // training time of this epoch
    double t_end = 0.0;    // offset from run start; strictly increasing
};

struct EvalRecord {
    int epoch = 0;
    int round = 0;
    std::string split;
    double psnr = 0.0;
    double ssim = 0.0;
    double seconds = 0.0;
};

struct RunRecord {
    std::vector<EpochRecord> epochs;
    std::vector<EvalRecord> evals;  // filled by the run driver's hooks
    double train_seconds = 0.0;
    double refine_seconds = 0.0;
    double eval_seconds = 0.0;
    long refinements = 0;
    // One combined checksum per target-store generation (index = round).
    std::vector<std::string> store_checksums;
    std::vector<std::string> model_hashes;
    std::vector<std::string> checkpoint_paths;
};

struct TrainHooks {
    // After each completed epoch. `model` is the state at that point.
    std::function<void(int epoch, int round, const UNet& model)> on_epoch;
    // Full IDR only: after round m's model finishes training.
    std::function<void(int round, const UNet& model)> on_round;
};

// All three consume only noisy data; clean references never enter here.
UNet train_baseline(const NoisySet& noisy, const NoiseSpec& spec, const ModelConfig& mcfg,
                    const IdrConfig& cfg, RunRecord* rec = nullptr,
                    const TrainHooks& hooks = {});

// Returns F_0 .. F_M; round m+1 trains a fresh model on targets produced by
// applying F_m to the original noisy images.
std::vector<UNet> train_full_idr(const NoisySet& noisy, const NoiseSpec& spec,
                                 const ModelConfig& mcfg, const IdrConfig& cfg,
                                 RunRecord* rec = nullptr, const TrainHooks& hooks = {});

UNet train_fast_idr(const NoisySet& noisy, const NoiseSpec& spec, const ModelConfig& mcfg,
                    const IdrConfig& cfg, RunRecord* rec = nullptr,
                    const TrainHooks& hooks = {});

// Mean (psnr, ssim) over pairs. The only entry point that accepts clean
// data. The reduction is order-invariant: per-image values are sorted
// before summation, so permuting the test set cannot move the mean.
std::pair<double, double> evaluate(const DenoiseFn& fn, int alignment, const NoisySet& inputs,
                                   const CleanSet& refs, MetricReport* per_image = nullptr);
std::pair<double, double> evaluate(const UNet& model, const NoisySet& inputs,
                                   const CleanSet& refs, MetricReport* per_image = nullptr);

}  // namespace idr

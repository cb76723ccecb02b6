#pragma once

#include <string>

#include "idr/config.hpp"
#include "idr/scheduler.hpp"

namespace idr {

// Executes one configured run end to end and writes the run directory:
// config.resolved, metrics.csv (epoch,round,split,psnr,ssim,loss,seconds),
// run.json and checkpoints/ (per epoch for baseline/fast, per round for
// full IDR). Pass empty test sets to skip evaluation rows.
RunRecord run_experiment(const ExperimentConfig& cfg, const NoisySet& train,
                         const NoisySet& test_noisy, const CleanSet& test_clean);

// Disk-backed variant: train split via load_split, eval pairs from the test
// split when that directory exists.
RunRecord run_experiment(const ExperimentConfig& cfg);

// Human-readable resolved schedule for --dry-run.
std::string describe_schedule(const ExperimentConfig& cfg);

}  // namespace idr

#pragma once

#include <cstdint>
#include <string>

#include "idr/noise.hpp"
#include "idr/scheduler.hpp"
#include "idr/unet.hpp"

namespace idr {

// One declarative run description. Files are flat "key = value" lines under
// [run] / [data] / [model] / [noise] / [schedule] headers; unknown sections
// or keys are hard errors so typos cannot silently fall back to defaults.
struct ExperimentConfig {
    // [run]
    std::string out_dir = "runs/run";
    std::uint64_t seed = 0;
    int workers = 1;
    bool timing_in_csv = false;  // metrics.csv seconds column stays 0.000 when off

    // [data]
    std::string data_root;  // resolved from $IDR_DATA_DIR (or "data") when unset
    std::string train_split = "train";
    std::string test_split = "test";

    ModelConfig model;   // [model]
    NoiseSpec noise;     // [noise]
    IdrConfig schedule;  // [schedule]; seed mirrors run.seed after parsing
};

ExperimentConfig parse_experiment_config(const std::string& text,
                                         const std::string& origin = "<config>");
ExperimentConfig load_experiment_config(const std::string& path);

// Every effective key with defaults expanded; parses back to the same config.
std::string resolved_config_text(const ExperimentConfig& cfg);
void save_experiment_config(const ExperimentConfig& cfg, const std::string& path);

}  // namespace idr

#pragma once

// Noise synthesis: gaussian, poisson-gaussian (iso-scaled), binomial mask,
// impulse, and kernel-correlated noise, plus level sampling over ranges.

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "idr/image.hpp"
#include "idr/rng.hpp"

namespace idr {

enum class NoiseKind { kGaussian, kPoissonGaussian, kBinomial, kImpulse, kCorrelated };

// Small dense kernel, row-major.
struct NoiseKernel {
    int rows = 0;
    int cols = 0;
    std::vector<float> w;

    bool empty() const { return rows <= 0 || cols <= 0 || w.empty(); }
};

// Tagged description of one noise model. level_lo/level_hi is the sampling
// range whose meaning depends on the kind: sigma in 1/255 integer units for
// gaussian and correlated, ISO for poisson-gaussian, probability for binomial
// and impulse. A degenerate range pins the level.
struct NoiseSpec {
    NoiseKind kind = NoiseKind::kGaussian;
    float level_lo = 0.0f;
    float level_hi = 0.0f;
    // poisson-gaussian calibration at ISO 100: k = k0*iso/100, sigma_r = sigma0*iso/100
    float k0 = 0.0f;
    float sigma0 = 0.0f;
    // correlated noise kernel (resolved), plus the name it was resolved from
    std::string kernel_name;
    NoiseKernel kernel;
};

const char* noise_kind_name(NoiseKind kind);

// True when the spec provably corrupts nothing (degenerate zero level).
// Poisson-Gaussian always has shot noise, so it is never zero.
bool is_zero_noise(const NoiseSpec& spec);

// Throws ConfigError when ranges are unordered, probabilities leave [0, 0.95],
// sigma is negative, or a correlated kernel is missing/non-finite.
void validate(const NoiseSpec& spec);

// Uniform draw over the spec's level range; a degenerate range returns its value.
float sample_level(const NoiseSpec& spec, RngStream& rng);

// x = y + N(0, sigma^2), sigma in [0,1]-normalized units. Not clipped.
ImageBuffer apply_gaussian(const ImageBuffer& img, float sigma, RngStream& rng);

// x = k*Poisson(y/k) + N(0, sigma_r^2) with k = k0*iso/100, sigma_r = sigma0*iso/100.
ImageBuffer apply_poisson_gaussian(const ImageBuffer& img, float iso, const NoiseSpec& spec,
                                   RngStream& rng);

// One-channel Bernoulli(1-p) mask broadcast across channels, multiplied in.
ImageBuffer apply_binomial(const ImageBuffer& img, float p, RngStream& rng);

// Per pixel-channel, with probability p replace the value by a fair {0,1} draw.
ImageBuffer apply_impulse(const ImageBuffer& img, float p, RngStream& rng);

// x = y + (sigma*v) (x) g with v ~ N(0,1) i.i.d., zero-padded correlation.
ImageBuffer apply_correlated(const ImageBuffer& img, float sigma, const NoiseKernel& g,
                             RngStream& rng);

// Sample-free dispatcher: applies the spec's variant at a concrete level,
// converting 255-unit sigmas to normalized units where needed.
ImageBuffer apply_noise(const ImageBuffer& img, const NoiseSpec& spec, float level,
                        RngStream& rng);

// Registry of named default kernels: delta, blur3 (3x3 gaussian, sigma 0.75,
// sums to 1), hline5 (1x5), vline5 (5x1), ring5 (5x5 border); the line and
// ring kernels carry unit L2 norm so marginal noise std stays sigma.
NoiseKernel make_named_kernel(const std::string& name);
std::vector<std::string> named_kernel_list();

// Kernel file: first line "rows cols", then row-major floats.
NoiseKernel load_kernel(const std::string& path);
void save_kernel(const NoiseKernel& k, const std::string& path);

// Calibration file: lines "iso k sigma_r"; blank lines and # comments skipped.
struct CalibrationRow {
    float iso = 0.0f;
    float k = 0.0f;
    float sigma_r = 0.0f;
};
std::vector<CalibrationRow> load_calibration(const std::string& path);
// First row rescaled to ISO 100, i.e. the (k0, sigma0) pair a spec needs.
CalibrationRow calibration_at_iso100(const std::vector<CalibrationRow>& rows);

// Noise-spec assembly from "key = value" pairs (variant, sigma/iso/p ranges,
// k0/sigma0 or calibration path, kernel name or path). Unknown keys throw.
NoiseSpec noise_spec_from_keys(const std::map<std::string, std::string>& keys);
// Inverse of the above, in emission order; feeds spec files and run configs.
std::vector<std::pair<std::string, std::string>> noise_spec_to_keys(const NoiseSpec& spec);
NoiseSpec load_noise_spec(const std::string& path);
void save_noise_spec(const NoiseSpec& spec, const std::string& path);

}  // namespace idr

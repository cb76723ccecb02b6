#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "idr/image.hpp"
#include "idr/noise.hpp"
#include "idr/unet.hpp"

namespace idr {

// Input/target pairs plus the level each input was corrupted at.
struct PairSet {
    std::vector<ImageBuffer> inputs;
    std::vector<ImageBuffer> targets;
    std::vector<float> levels;

    std::size_t size() const { return inputs.size(); }
};

// Refined targets x^(m) with provenance.
struct TargetStore {
    std::vector<ImageBuffer> targets;
    int round = 0;
    std::string model_hash;  // hash of the refining model, empty before round 1
};

// Noisy inputs and clean references are distinct types with no conversion
// between them, so a clean oracle cannot be handed to a training entry point;
// only evaluation accepts CleanSet.
struct NoisySet {
    std::vector<ImageBuffer> images;
    NoisySet() = default;
    explicit NoisySet(std::vector<ImageBuffer> imgs) : images(std::move(imgs)) {}
};

struct CleanSet {
    std::vector<ImageBuffer> images;
    CleanSet() = default;
    explicit CleanSet(std::vector<ImageBuffer> imgs) : images(std::move(imgs)) {}
};

// Loads data/<split>/<scene>.{png,pgm,ppm,raw}, sorted by filename.
std::vector<ImageBuffer> load_split(const std::string& data_root, const std::string& split);

// Evaluation split: every file must be <scene>.noisy.<ext> or
// <scene>.clean.<ext> and each scene needs both. Sorted by scene; noisy
// source_id keeps the full filename for per-image reports.
std::pair<NoisySet, CleanSet> load_eval_pairs(const std::string& data_root,
                                              const std::string& split);

// Uniformly random top-left corners; draw order per patch is (image, y, x).
std::vector<ImageBuffer> extract_patches(const std::vector<ImageBuffer>& images, int patch,
                                         int count, int alignment, RngStream& rng);

// Eq-1 style pairs (t+n, t). The base stream is only forked (per image), never
// consumed, so one call is a pure function of (targets, spec, rng).
PairSet make_noisier_noisy(const std::vector<ImageBuffer>& targets, const NoiseSpec& spec,
                           const RngStream& rng);

using DenoiseFn = std::function<Tensor<float>(const Tensor<float>&)>;

// Full-image inference over reflect-padded 256 tiles with 16-pixel overlap,
// center-cropped back into place. alignment pads tail tiles.
ImageBuffer denoise_image(const DenoiseFn& fn, int alignment, const ImageBuffer& img);
ImageBuffer denoise_image(const UNet& model, const ImageBuffer& img);

// New store with targets F(x_i) from the ORIGINAL noisy images, round + 1.
TargetStore refine_targets(const DenoiseFn& fn, int alignment, const std::string& model_hash,
                           const std::vector<ImageBuffer>& noisy, const TargetStore& store);
TargetStore refine_targets(const UNet& model, const std::vector<ImageBuffer>& noisy,
                           const TargetStore& store);

enum class BiasKind { kGaussianNoise, kGaussianBlur };

// y_gn = y + N(0, (sigma/255)^2) or y_gb = blur(y, sigma in pixels).
std::vector<ImageBuffer> make_biased_targets(const std::vector<ImageBuffer>& clean, BiasKind bias,
                                             float sigma, const RngStream& rng);

// Truncated 1-D Gaussian, radius ceil(3*sigma), normalized to sum 1.
std::vector<double> gaussian_blur_kernel(float sigma);
// Separable blur with reflected borders.
ImageBuffer gaussian_blur(const ImageBuffer& img, float sigma);

// CRC32 over the 16-bit quantized pixel stream; stable across store reloads.
std::string image_checksum_hex(const ImageBuffer& img);

// Per-image checksums chained into one value; identifies a store generation.
std::string target_store_checksum(const TargetStore& store);

// (N, c, h, w) batch from same-shaped images.
Tensor<float> stack_images(const std::vector<ImageBuffer>& images);

// Directory of 16-bit PNGs plus manifest.json (round, model hash, per-image
// checksums). The manifest is written last so a reader never sees a mix.
void save_target_store(const TargetStore& store, const std::string& dir);
TargetStore load_target_store(const std::string& dir);

}  // namespace idr

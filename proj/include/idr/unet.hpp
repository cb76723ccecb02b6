#pragma once

// The shallow U-Net denoiser: two 3x3 convs per level with LeakyReLU, 2x2
// max-pool down, nearest-neighbour up with skip concatenation, linear 3x3
// output head. No batch normalization anywhere.

#include <cstdint>
#include <string>
#include <vector>

#include "idr/adam.hpp"
#include "idr/autograd.hpp"
#include "idr/rng.hpp"
#include "idr/tensor.hpp"

namespace idr {

struct ModelConfig {
    int levels = 3;
    int base_channels = 8;
    int in_channels = 1;
    float leaky_slope = 0.1f;
    std::uint64_t init_seed = 0;
};

void validate(const ModelConfig& cfg);

struct ParamSpec {
    std::string name;
    Shape shape;
};

// Parameter order matches graph traversal: encoder blocks top-down, bottom
// block, decoder blocks bottom-up, output head. Weight then bias per conv.
std::vector<ParamSpec> unet_param_specs(const ModelConfig& cfg);

// Builds the forward graph on an existing tape. `params` must follow
// unet_param_specs order. Returns the output node id.
template <typename T>
int build_unet_graph(Tape<T>& tape, const ModelConfig& cfg, int input, const std::vector<int>& params) {
    const T slope = static_cast<T>(cfg.leaky_slope);
    std::size_t cursor = 0;
    auto conv_block = [&](int x, bool activate) {
        const int y = tape.conv2d(x, params[cursor], params[cursor + 1]);
        cursor += 2;
        return activate ? tape.leaky_relu(y, slope) : y;
    };

    std::vector<int> skips;
    int h = input;
    for (int l = 0; l + 1 < cfg.levels; ++l) {
        h = conv_block(h, true);
        h = conv_block(h, true);
        skips.push_back(h);
        h = tape.maxpool2(h);
    }
    h = conv_block(h, true);
    h = conv_block(h, true);
    for (int l = cfg.levels - 2; l >= 0; --l) {
        h = tape.upsample2(h);
        h = tape.concat_channels(h, skips[static_cast<std::size_t>(l)]);
        h = conv_block(h, true);
        h = conv_block(h, true);
    }
    return conv_block(h, false);
}

/// The float denoiser model: owns the parameter tensors. Immutable during
/// forward(); train_step requires exclusive access.
class UNet {
public:
    ModelConfig cfg;
    std::vector<Tensor<float>> params;

    static UNet build(const ModelConfig& cfg);

    // Input spatial extents must be divisible by alignment().
    int alignment() const { return 1 << (cfg.levels - 1); }

    Tensor<float> forward(const Tensor<float>& batch) const;

    // One forward/backward/Adam update; returns the pre-update L1 loss.
    // With lr == 0 only the step counter advances.
    float train_step(AdamState<float>& state, const Tensor<float>& inputs, const Tensor<float>& targets);

    std::vector<std::string> param_names() const;

    // FNV-1a over the raw parameter bytes, hex string. Used as checkpoint
    // provenance in target-store manifests.
    std::string param_hash() const;

private:
    void check_input(const Tensor<float>& batch) const;
};

}  // namespace idr

#include "idr/unet.hpp"

#include <cmath>
#include <cstdio>

#include "idr/errors.hpp"

namespace idr {

void validate(const ModelConfig& cfg) {
    if (cfg.levels < 1) throw ShapeError("model: levels must be >= 1");
    if (cfg.base_channels < 1) throw ShapeError("model: base_channels must be >= 1");
    if (cfg.in_channels != 1 && cfg.in_channels != 3 && cfg.in_channels != 4)
        throw ShapeError("model: in_channels must be 1, 3 or 4, got " + std::to_string(cfg.in_channels));
    if (!(cfg.leaky_slope >= 0.0f && cfg.leaky_slope < 1.0f))
        throw ShapeError("model: leaky_slope must lie in [0,1)");
}

std::vector<ParamSpec> unet_param_specs(const ModelConfig& cfg) {
    std::vector<ParamSpec> specs;
    auto add_conv = [&specs](const std::string& name, int cin, int cout) {
        specs.push_back({name + ".weight", Shape{cout, cin, 3, 3}});
        specs.push_back({name + ".bias", Shape{cout}});
    };
    auto width = [&cfg](int level) { return cfg.base_channels << level; };

    int cin = cfg.in_channels;
    for (int l = 0; l + 1 < cfg.levels; ++l) {
        const std::string tag = "enc" + std::to_string(l);
        add_conv(tag + ".conv0", cin, width(l));
        add_conv(tag + ".conv1", width(l), width(l));
        cin = width(l);
    }
    const int bottom = cfg.levels - 1;
    add_conv("bottom.conv0", cin, width(bottom));
    add_conv("bottom.conv1", width(bottom), width(bottom));
    for (int l = cfg.levels - 2; l >= 0; --l) {
        const std::string tag = "dec" + std::to_string(l);
        add_conv(tag + ".conv0", width(l + 1) + width(l), width(l));
        add_conv(tag + ".conv1", width(l), width(l));
    }
    add_conv("final", width(0), cfg.in_channels);
    return specs;
}

UNet UNet::build(const ModelConfig& cfg) {
    validate(cfg);
    UNet model;
    model.cfg = cfg;
    RngStream rng(cfg.init_seed, streams::kInit);
    for (const ParamSpec& spec : unet_param_specs(cfg)) {
        Tensor<float> t(spec.shape);
        if (spec.shape.size() == 4) {
            // He-uniform, fan-in scaled.
            const double fan_in = static_cast<double>(spec.shape[1]) * spec.shape[2] * spec.shape[3];
            const double bound = std::sqrt(6.0 / fan_in);
            for (auto& x : t.v) x = static_cast<float>(rng.uniform(-bound, bound));
        }
        model.params.push_back(std::move(t));
    }
    return model;
}

std::vector<std::string> UNet::param_names() const {
    std::vector<std::string> names;
    for (const ParamSpec& spec : unet_param_specs(cfg)) names.push_back(spec.name);
    return names;
}

std::string UNet::param_hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](const unsigned char* p, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) {
            h ^= p[i];
            h *= 0x100000001b3ULL;
        }
    };
    for (const auto& t : params)
        mix(reinterpret_cast<const unsigned char*>(t.v.data()), t.v.size() * sizeof(float));
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void UNet::check_input(const Tensor<float>& batch) const {
    if (batch.rank() != 4) throw ShapeError("denoise: batch must be 4-d");
    if (batch.dim(1) != cfg.in_channels)
        throw ShapeError("denoise: model expects " + std::to_string(cfg.in_channels) +
                         " channels, batch has " + std::to_string(batch.dim(1)));
    const int a = alignment();
    if (batch.dim(2) % a || batch.dim(3) % a)
        throw ShapeError("denoise: spatial extents " + std::to_string(batch.dim(2)) + "x" +
                         std::to_string(batch.dim(3)) + " must be multiples of " + std::to_string(a));
}

Tensor<float> UNet::forward(const Tensor<float>& batch) const {
    check_input(batch);
    Tape<float> tape(/*record=*/false);
    std::vector<int> ids;
    ids.reserve(params.size());
    for (const auto& p : params) ids.push_back(tape.leaf(p));
    const int x = tape.leaf(batch);
    const int out = build_unet_graph(tape, cfg, x, ids);
    return std::move(tape.val(out));
}

float UNet::train_step(AdamState<float>& state, const Tensor<float>& inputs,
                       const Tensor<float>& targets) {
    check_input(inputs);
    require_same_shape(inputs, targets, "train_step");
    Tape<float> tape;
    std::vector<int> ids;
    ids.reserve(params.size());
    for (const auto& p : params) ids.push_back(tape.leaf(p));
    const int x = tape.leaf(inputs);
    const int t = tape.leaf(targets);
    const int out = build_unet_graph(tape, cfg, x, ids);
    const int loss = tape.l1_loss(out, t);
    const float loss_v = tape.val(loss).v[0];
    if (!std::isfinite(loss_v))
        throw NumericError("train_step: non-finite loss at iteration " + std::to_string(state.t + 1));
    if (state.hp.lr == 0.0) {
        state.t += 1;
        return loss_v;
    }
    tape.backward(loss);
    std::vector<std::vector<float>> grads;
    grads.reserve(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        auto& g = tape.grad(ids[i]);
        if (g.empty()) g.assign(params[i].v.size(), 0.0f);
        grads.push_back(std::move(g));
    }
    adam_step(params, grads, state);
    return loss_v;
}

}  // namespace idr

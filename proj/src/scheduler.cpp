#include "idr/scheduler.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "idr/adam.hpp"
#include "idr/errors.hpp"
#include "idr/rng.hpp"

namespace idr {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Fresh-model seeds per round. fork() alone only mixes the stream id, so the
// run seed is folded in explicitly here.
std::uint64_t derived_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t sub) {
    using rng_detail::mix64;
    return mix64(seed ^ mix64(stream + 0x9e3779b97f4a7c15ULL * (sub + 1)));
}

struct EpochLoop {
    const NoiseSpec& spec;
    const IdrConfig& cfg;
    std::vector<long> milestones;

    // cfg.iters_per_epoch steps on fresh noisier-noisy pairs; mean loss.
    double run(UNet& model, AdamState<float>& adam, const std::vector<ImageBuffer>& targets,
               long iter_base, RngStream& patches, const RngStream& noise_base) const {
        double sum = 0.0;
        for (int it = 0; it < cfg.iters_per_epoch; ++it) {
            const long g = iter_base + it;
            auto batch = extract_patches(targets, cfg.patch, cfg.batch, model.alignment(), patches);
            const PairSet pairs =
                make_noisier_noisy(batch, spec, noise_base.fork(static_cast<std::uint64_t>(g)));
            adam.hp.lr = static_cast<double>(lr_at(cfg.lr, milestones, g));
            sum += static_cast<double>(
                model.train_step(adam, stack_images(pairs.inputs), stack_images(pairs.targets)));
        }
        return cfg.iters_per_epoch > 0 ? sum / cfg.iters_per_epoch : 0.0;
    }
};

// Baseline and fast IDR share this loop; `refine` is the only difference, so
// disabling refinement *is* baseline training, not a lookalike.
UNet run_linear(const NoisySet& noisy, const NoiseSpec& spec, const ModelConfig& mcfg,
                const IdrConfig& cfg, RunRecord* rec, const TrainHooks& hooks, bool refine) {
    validate(cfg);
    validate(spec);
    if (noisy.images.empty()) throw DataError("train: noisy training set is empty");
    const auto t0 = Clock::now();

    ModelConfig mc = mcfg;
    mc.init_seed = derived_seed(cfg.seed, streams::kInit, 0);
    UNet model = UNet::build(mc);
    AdamState<float> adam;
    adam.hp.lr = static_cast<double>(cfg.lr.initial);

    const EpochLoop loop{spec, cfg, resolve_milestones(cfg.lr, total_model_iters(cfg))};
    RngStream patches = RngStream(cfg.seed, streams::kPatches).fork(0);
    const RngStream noise_base = RngStream(cfg.seed, streams::kNoise).fork(0);

    TargetStore store{noisy.images, 0, ""};
    if (rec) rec->store_checksums.push_back(target_store_checksum(store));

    for (int epoch = 0; epoch < cfg.rounds; ++epoch) {
        const auto e0 = Clock::now();
        const double loss = loop.run(model, adam, store.targets,
                                     static_cast<long>(epoch) * cfg.iters_per_epoch, patches,
                                     noise_base);
        const double esec = seconds_since(e0);
        if (rec) {
            rec->epochs.push_back({epoch, store.round, loss, esec, seconds_since(t0)});
            rec->train_seconds += esec;
            rec->model_hashes.push_back(model.param_hash());
        }
        if (hooks.on_epoch) hooks.on_epoch(epoch, store.round, model);
        if (refine) {
            // after every epoch, the last one included: the final store is a
            // run artifact, and the overhead number must cover all passes
            const auto r0 = Clock::now();
            store = refine_targets(model, noisy.images, store);
            const double rsec = seconds_since(r0);
            if (rec) {
                rec->refine_seconds += rsec;
                rec->refinements += 1;
                rec->store_checksums.push_back(target_store_checksum(store));
            }
        }
    }
    return model;
}

double mean_sorted(std::vector<double> xs) {
    std::sort(xs.begin(), xs.end());
    double sum = 0.0;
    for (double x : xs) sum += x;
    return sum / static_cast<double>(xs.size());
}

}  // namespace

const char* run_mode_name(RunMode mode) {
    switch (mode) {
        case RunMode::kBaseline: return "baseline";
        case RunMode::kFull: return "full";
        case RunMode::kFast: return "fast";
    }
    return "?";
}

RunMode run_mode_from_name(const std::string& name) {
    if (name == "baseline") return RunMode::kBaseline;
    if (name == "full") return RunMode::kFull;
    if (name == "fast") return RunMode::kFast;
    throw ConfigError("unknown mode '" + name + "' (want baseline, full or fast)");
}

void validate(const IdrConfig& cfg) {
    if (cfg.mode == RunMode::kFull) {
        if (cfg.rounds < 0) throw ConfigError("schedule: rounds must be >= 0");
        if (cfg.epochs_per_round < 1) throw ConfigError("schedule: epochs_per_round must be >= 1");
    } else if (cfg.rounds < 1) {
        throw ConfigError("schedule: M must be >= 1");
    }
    if (cfg.iters_per_epoch < 0) throw ConfigError("schedule: iters_per_epoch must be >= 0");
    if (cfg.batch < 1) throw ConfigError("schedule: batch must be >= 1");
    if (cfg.patch < 1) throw ConfigError("schedule: patch must be >= 1");
    if (!(cfg.lr.initial > 0.0f) || !std::isfinite(cfg.lr.initial))
        throw ConfigError("schedule: lr must be positive");
    if (!(cfg.lr.factor > 0.0f) || cfg.lr.factor > 1.0f)
        throw ConfigError("schedule: lr_factor must be in (0, 1]");
    const long total = total_model_iters(cfg);
    long prev = 0;
    for (long m : cfg.lr.milestones) {
        if (m <= prev)
            throw ConfigError("schedule: milestones must be strictly increasing and positive");
        if (m >= total)
            throw ConfigError("schedule: milestone " + std::to_string(m) +
                              " is not below the total of " + std::to_string(total) +
                              " iterations");
        prev = m;
    }
}

long total_model_iters(const IdrConfig& cfg) {
    const long epochs = cfg.mode == RunMode::kFull ? cfg.epochs_per_round : cfg.rounds;
    return epochs * static_cast<long>(cfg.iters_per_epoch);
}

std::vector<long> resolve_milestones(const LrSchedule& lr, long total_iters) {
    if (!lr.milestones.empty()) return lr.milestones;
    std::vector<long> ms;
    const long half = total_iters / 2;
    const long four_fifths = (total_iters * 4) / 5;
    if (half > 0 && half < total_iters) ms.push_back(half);
    if (four_fifths > half && four_fifths < total_iters) ms.push_back(four_fifths);
    return ms;
}

float lr_at(const LrSchedule& lr, const std::vector<long>& milestones, long iter) {
    float value = lr.initial;
    for (long m : milestones)
        if (iter >= m) value *= lr.factor;
    return value;
}

UNet train_baseline(const NoisySet& noisy, const NoiseSpec& spec, const ModelConfig& mcfg,
                    const IdrConfig& cfg, RunRecord* rec, const TrainHooks& hooks) {
    return run_linear(noisy, spec, mcfg, cfg, rec, hooks, false);
}

UNet train_fast_idr(const NoisySet& noisy, const NoiseSpec& spec, const ModelConfig& mcfg,
                    const IdrConfig& cfg, RunRecord* rec, const TrainHooks& hooks) {
    return run_linear(noisy, spec, mcfg, cfg, rec, hooks, true);
}

std::vector<UNet> train_full_idr(const NoisySet& noisy, const NoiseSpec& spec,
                                 const ModelConfig& mcfg, const IdrConfig& cfg, RunRecord* rec,
                                 const TrainHooks& hooks) {
    validate(cfg);
    validate(spec);
    if (noisy.images.empty()) throw DataError("train: noisy training set is empty");
    const auto t0 = Clock::now();

    // each round trains a fresh model to its own schedule end
    const EpochLoop loop{spec, cfg, resolve_milestones(cfg.lr, total_model_iters(cfg))};

    std::vector<UNet> models;
    models.reserve(static_cast<std::size_t>(cfg.rounds) + 1);
    TargetStore store{noisy.images, 0, ""};
    if (rec) rec->store_checksums.push_back(target_store_checksum(store));

    int global_epoch = 0;
    for (int m = 0; m <= cfg.rounds; ++m) {
        if (m > 0) {
            // targets for round m come from F_{m-1} applied to the original
            // noisy images, never to the previous round's targets
            const auto r0 = Clock::now();
            store = refine_targets(models.back(), noisy.images, store);
            const double rsec = seconds_since(r0);
            if (rec) {
                rec->refine_seconds += rsec;
                rec->refinements += 1;
                rec->store_checksums.push_back(target_store_checksum(store));
            }
        }
        ModelConfig mc = mcfg;
        mc.init_seed = derived_seed(cfg.seed, streams::kInit, static_cast<std::uint64_t>(m));
        UNet model = UNet::build(mc);
        AdamState<float> adam;
        adam.hp.lr = static_cast<double>(cfg.lr.initial);
        RngStream patches = RngStream(cfg.seed, streams::kPatches).fork(static_cast<std::uint64_t>(m));
        const RngStream noise_base =
            RngStream(cfg.seed, streams::kNoise).fork(static_cast<std::uint64_t>(m));

        for (int e = 0; e < cfg.epochs_per_round; ++e) {
            const auto e0 = Clock::now();
            const double loss = loop.run(model, adam, store.targets,
                                         static_cast<long>(e) * cfg.iters_per_epoch, patches,
                                         noise_base);
            const double esec = seconds_since(e0);
            if (rec) {
                rec->epochs.push_back({global_epoch, m, loss, esec, seconds_since(t0)});
                rec->train_seconds += esec;
            }
            if (hooks.on_epoch) hooks.on_epoch(global_epoch, m, model);
            ++global_epoch;
        }
        if (rec) rec->model_hashes.push_back(model.param_hash());
        if (hooks.on_round) hooks.on_round(m, model);
        models.push_back(std::move(model));
    }
    return models;
}

std::pair<double, double> evaluate(const DenoiseFn& fn, int alignment, const NoisySet& inputs,
                                   const CleanSet& refs, MetricReport* per_image) {
    if (inputs.images.size() != refs.images.size())
        throw ShapeError("evaluate: " + std::to_string(inputs.images.size()) + " inputs vs " +
                         std::to_string(refs.images.size()) + " references");
    if (inputs.images.empty()) throw DataError("evaluate: empty test set");
    const std::size_t n = inputs.images.size();
    std::vector<double> ps(n), ss(n);
    for (std::size_t i = 0; i < n; ++i) {
        const ImageBuffer out = denoise_image(fn, alignment, inputs.images[i]);
        ps[i] = psnr(out, refs.images[i]);
        ss[i] = ssim(out, refs.images[i]);
        if (per_image) per_image->add(inputs.images[i].source_id, ps[i], ss[i]);
    }
    return {mean_sorted(ps), mean_sorted(ss)};
}

std::pair<double, double> evaluate(const UNet& model, const NoisySet& inputs, const CleanSet& refs,
                                   MetricReport* per_image) {
    return evaluate([&model](const Tensor<float>& t) { return model.forward(t); },
                    model.alignment(), inputs, refs, per_image);
}

}  // namespace idr

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "idr/checkpoint.hpp"
#include "idr/config.hpp"
#include "idr/dataset.hpp"
#include "idr/errors.hpp"
#include "idr/kernels.hpp"
#include "idr/pilot.hpp"
#include "idr/runner.hpp"
#include "json.hpp"

namespace {

using namespace idr;
namespace fs = std::filesystem;

std::string fmt_metric(double v) {
    if (std::isinf(v)) return v > 0.0 ? "inf" : "-inf";
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

ExperimentConfig load_config_for_cli(const std::string& path) {
    // every way a config can fail to load maps to the config-error exit code
    try {
        return load_experiment_config(path);
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
}

struct GlobalFlags {
    bool seed_set = false;
    std::uint64_t seed = 0;
    int workers = 0;  // 0 = keep config value
    bool dry_run = false;
};

int cmd_train(const std::string& config_path, const GlobalFlags& g) {
    ExperimentConfig cfg = load_config_for_cli(config_path);
    if (g.seed_set) {
        cfg.seed = g.seed;
        cfg.schedule.seed = g.seed;
    }
    if (g.workers > 0) cfg.workers = g.workers;

    if (g.dry_run) {
        const NoisySet train(load_split(cfg.data_root, cfg.train_split));
        std::size_t pairs = 0;
        std::error_code ec;
        if (fs::is_directory(fs::path(cfg.data_root) / cfg.test_split, ec))
            pairs = load_eval_pairs(cfg.data_root, cfg.test_split).first.images.size();
        std::cout << describe_schedule(cfg);
        std::cout << "train images: " << train.images.size() << ", eval pairs: " << pairs
                  << "\ndry run: nothing written\n";
        return 0;
    }

    const RunRecord rec = run_experiment(cfg);
    std::cout << "run dir: " << cfg.out_dir << "\n";
    if (!rec.epochs.empty())
        std::cout << "final train loss " << fmt_metric(rec.epochs.back().loss) << "\n";
    if (!rec.evals.empty())
        std::cout << "final test psnr " << fmt_metric(rec.evals.back().psnr) << " ssim "
                  << fmt_metric(rec.evals.back().ssim) << "\n";
    if (rec.refinements > 0) {
        const double busy = rec.train_seconds + rec.refine_seconds;
        std::cout << "refinement passes " << rec.refinements << ", overhead "
                  << fmt_metric(busy > 0.0 ? 100.0 * rec.refine_seconds / busy : 0.0) << "%\n";
    }
    return 0;
}

int cmd_eval(const std::string& ckpt, const std::string& dir, const std::string& out,
             bool per_image, const GlobalFlags& g) {
    kernels::set_threads(g.workers > 0 ? g.workers : 1);
    const UNet model = load_checkpoint(ckpt);
    auto [noisy, clean] = load_eval_pairs(dir, "");
    if (g.dry_run) {
        std::cout << "would evaluate " << noisy.images.size() << " pairs under " << dir
                  << " with " << ckpt << "\n";
        return 0;
    }
    MetricReport report;
    const auto [p, s] = evaluate(model, noisy, clean, &report);

    std::ofstream csv(out);
    if (!csv) throw DataError("cannot write " + out);
    csv << "file,psnr,ssim\n";
    if (per_image)
        for (std::size_t i = 0; i < report.file.size(); ++i)
            csv << report.file[i] << ',' << fmt_metric(report.psnr[i]) << ','
                << fmt_metric(report.ssim[i]) << '\n';
    csv << "mean," << fmt_metric(p) << ',' << fmt_metric(s) << '\n';
    if (!csv) throw DataError("failed writing " + out);

    std::cout << noisy.images.size() << " pairs: mean psnr " << fmt_metric(p) << ", mean ssim "
              << fmt_metric(s) << "\n"
              << "wrote " << out << "\n";
    return 0;
}

int cmd_refine(const std::string& ckpt, const std::string& images_dir,
               const std::string& store_dir, const std::string& out, const GlobalFlags& g) {
    kernels::set_threads(g.workers > 0 ? g.workers : 1);
    const UNet model = load_checkpoint(ckpt);
    auto noisy = load_split(images_dir, "");
    TargetStore store;
    if (store_dir.empty()) store = TargetStore{noisy, 0, ""};
    else store = load_target_store(store_dir);
    if (g.dry_run) {
        std::cout << "would refine " << noisy.size() << " targets (round " << store.round
                  << " -> " << store.round + 1 << ") into " << out << "\n";
        return 0;
    }
    const TargetStore next = refine_targets(model, noisy, store);
    save_target_store(next, out);
    std::cout << "round " << store.round << " -> " << next.round << ", " << next.targets.size()
              << " targets, checksum " << target_store_checksum(next) << "\nwrote " << out
              << "\n";
    return 0;
}

int cmd_noise_sim(const std::string& spec_path, const std::string& input, const std::string& out,
                  std::string stats_path, bool level_set, float level, const GlobalFlags& g) {
    NoiseSpec spec;
    try {
        spec = load_noise_spec(spec_path);
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
    const ImageBuffer img = load_image(input);
    RngStream rng(g.seed_set ? g.seed : 0, streams::kNoise);
    if (!level_set) level = sample_level(spec, rng);

    if (g.dry_run) {
        std::cout << "would corrupt " << input << " (" << img.h << "x" << img.w << "x" << img.c
                  << ") with " << noise_kind_name(spec.kind) << " at level " << level << "\n";
        return 0;
    }

    const ImageBuffer noisy = apply_noise(img, spec, level, rng);
    save_image(noisy, out, img.bit_depth);

    double mean = 0.0;
    for (std::size_t i = 0; i < img.v.size(); ++i)
        mean += static_cast<double>(noisy.v[i]) - static_cast<double>(img.v[i]);
    mean /= static_cast<double>(img.v.size());
    double var = 0.0;
    for (std::size_t i = 0; i < img.v.size(); ++i) {
        const double r = static_cast<double>(noisy.v[i]) - static_cast<double>(img.v[i]) - mean;
        var += r * r;
    }
    var /= static_cast<double>(img.v.size());

    if (stats_path.empty()) stats_path = out + ".stats.json";
    nlohmann::ordered_json j;
    j["variant"] = noise_kind_name(spec.kind);
    j["level"] = level;
    j["pixels"] = img.v.size();
    j["residual_mean"] = mean;
    j["residual_variance"] = var;
    std::ofstream js(stats_path);
    if (!js) throw DataError("cannot write " + stats_path);
    js << j.dump(2) << "\n";

    std::cout << "wrote " << out << " (level " << level << ", residual mean " << mean
              << ", variance " << var << ")\nstats: " << stats_path << "\n";
    return 0;
}

int cmd_pilot(const std::string& study, const std::string& config_path, const std::string& bias,
              std::vector<float> sigmas, int corpus_n, int corpus_size, int seeds, int levels,
              bool no_reference, const GlobalFlags& g) {
    ExperimentConfig cfg = load_config_for_cli(config_path);
    if (g.seed_set) {
        cfg.seed = g.seed;
        cfg.schedule.seed = g.seed;
    }
    if (g.workers > 0) cfg.workers = g.workers;
    if (cfg.model.in_channels != 1)
        throw ConfigError("the pilot corpus is grayscale; model.in_channels must be 1");

    PilotConfig pc;
    pc.epochs = cfg.schedule.mode == RunMode::kFull ? cfg.schedule.epochs_per_round
                                                    : cfg.schedule.rounds;
    pc.iters_per_epoch = cfg.schedule.iters_per_epoch;
    pc.batch = cfg.schedule.batch;
    pc.patch = cfg.schedule.patch;
    pc.lr = cfg.schedule.lr;
    pc.model = cfg.model;
    pc.seed = cfg.seed;
    pc.num_seeds = seeds;
    pc.test_levels = levels;
    pc.with_reference = !no_reference;
    pc.workers = cfg.workers;

    if (g.dry_run) {
        const int arms = study == "finding1"
                             ? (pc.with_reference ? 2 : 1)
                             : 1 + static_cast<int>(std::count_if(sigmas.begin(), sigmas.end(),
                                                                  [](float v) { return v > 0.0f; }));
        std::cout << "study " << study << ": " << corpus_n << " corpus images (" << corpus_size
                  << "px), " << pc.num_seeds << " seeds x " << arms << " models x "
                  << pc.epochs * pc.iters_per_epoch << " iters\ndry run: nothing written\n";
        return 0;
    }

    std::error_code ec;
    fs::create_directories(cfg.out_dir, ec);
    if (ec) throw DataError("cannot create run directory: " + cfg.out_dir);
    save_experiment_config(cfg, (fs::path(cfg.out_dir) / "config.resolved").string());
    const CleanSet corpus(make_pilot_corpus(corpus_n, corpus_size, cfg.seed));

    if (study == "finding1") {
        const Finding1Report rep = run_finding1(corpus, cfg.noise, pc);
        const std::string csv = (fs::path(cfg.out_dir) / "pilot_finding1.csv").string();
        write_finding1_csv(rep, csv);
        for (std::size_t j = 0; j < rep.levels.size(); ++j) {
            std::cout << "level " << rep.levels[j] << ": noisy " << fmt_metric(rep.noisy_input[j])
                      << ", noisier-noisy " << fmt_metric(rep.noisier_noisy[j]);
            if (!rep.noisy_clean.empty())
                std::cout << ", noisy-clean " << fmt_metric(rep.noisy_clean[j]);
            std::cout << "\n";
        }
        std::cout << "wrote " << csv << "\n";
    } else {
        const BiasKind kind = bias == "gb" ? BiasKind::kGaussianBlur : BiasKind::kGaussianNoise;
        const Finding2Report rep = run_finding2(corpus, cfg.noise, kind, sigmas, pc);
        const std::string csv = (fs::path(cfg.out_dir) / "pilot_finding2.csv").string();
        write_finding2_csv(rep, csv);
        std::cout << "noisy-clean reference: " << fmt_metric(rep.reference) << "\n";
        for (std::size_t k = 0; k < rep.sigmas.size(); ++k)
            std::cout << "bias sigma " << rep.sigmas[k] << ": psnr " << fmt_metric(rep.psnr[k])
                      << ", drop " << fmt_metric(rep.drop[k]) << "\n";
        std::cout << "wrote " << csv << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"self-supervised denoiser training with iterative data refinement"};
    app.require_subcommand(1);

    GlobalFlags g;
    auto* seed_opt = app.add_option("--seed", g.seed, "override the config seed");
    app.add_option("--workers", g.workers, "override the worker count");
    app.add_flag("--dry-run", g.dry_run, "validate and print the plan without running");

    auto* train = app.add_subcommand("train", "run a configured training schedule");
    train->fallthrough();
    std::string train_config;
    train->add_option("--config", train_config, "experiment config file")->required();

    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on noisy/clean pairs");
    eval->fallthrough();
    std::string eval_ckpt, eval_dir, eval_out = "eval.csv";
    bool per_image = false;
    eval->add_option("--checkpoint", eval_ckpt, "model checkpoint")->required();
    eval->add_option("--data", eval_dir, "directory of <scene>.noisy.* / <scene>.clean.* pairs")
        ->required();
    eval->add_option("--out", eval_out, "output CSV path");
    eval->add_flag("--per-image", per_image, "emit one CSV row per file before the mean");

    auto* refine = app.add_subcommand("refine", "denoise a target store with a checkpoint");
    refine->fallthrough();
    std::string refine_ckpt, refine_images, refine_store, refine_out;
    refine->add_option("--checkpoint", refine_ckpt, "model checkpoint")->required();
    refine->add_option("--images", refine_images, "directory of the original noisy images")
        ->required();
    refine->add_option("--store", refine_store, "existing target store to advance (optional)");
    refine->add_option("--out", refine_out, "output target store directory")->required();

    auto* nsim = app.add_subcommand("noise-sim", "corrupt one image with a noise spec");
    nsim->fallthrough();
    std::string nsim_spec, nsim_in, nsim_out, nsim_stats;
    float nsim_level = 0.0f;
    nsim->add_option("--spec", nsim_spec, "noise spec file")->required();
    nsim->add_option("--input", nsim_in, "input image")->required();
    nsim->add_option("--out", nsim_out, "output image")->required();
    auto* level_opt = nsim->add_option("--level", nsim_level, "fixed level instead of sampling");
    nsim->add_option("--stats", nsim_stats, "stats JSON path (default <out>.stats.json)");

    auto* pilot = app.add_subcommand("pilot", "run a pilot study and emit its CSV");
    pilot->fallthrough();
    std::string study, pilot_config, pilot_bias = "gn";
    std::vector<float> sigmas{0.0f, 1.0f, 3.0f, 5.0f};
    int corpus_n = 80, corpus_size = 128, pilot_seeds = 3, pilot_levels = 4;
    bool no_reference = false;
    pilot->add_option("study", study, "finding1 or finding2")
        ->required()
        ->check(CLI::IsMember({"finding1", "finding2"}));
    pilot->add_option("--config", pilot_config, "experiment config file")->required();
    pilot->add_option("--bias", pilot_bias, "finding2 bias kind: gn (noise) or gb (blur)")
        ->check(CLI::IsMember({"gn", "gb"}));
    pilot->add_option("--sigmas", sigmas, "finding2 bias strengths, ascending");
    pilot->add_option("--corpus", corpus_n, "procedural corpus size");
    pilot->add_option("--corpus-size", corpus_size, "corpus image edge length");
    pilot->add_option("--seeds", pilot_seeds, "seeds for the median");
    pilot->add_option("--levels", pilot_levels, "finding1 test levels");
    pilot->add_flag("--no-reference", no_reference, "skip the noisy-clean control in finding1");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }
    g.seed_set = seed_opt->count() > 0;

    try {
        if (*train) return cmd_train(train_config, g);
        if (*eval) return cmd_eval(eval_ckpt, eval_dir, eval_out, per_image, g);
        if (*refine) return cmd_refine(refine_ckpt, refine_images, refine_store, refine_out, g);
        if (*nsim)
            return cmd_noise_sim(nsim_spec, nsim_in, nsim_out, nsim_stats, level_opt->count() > 0,
                                 nsim_level, g);
        if (*pilot)
            return cmd_pilot(study, pilot_config, pilot_bias, sigmas, corpus_n, corpus_size,
                             pilot_seeds, pilot_levels, no_reference, g);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "numeric abort: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        // shape, format and data problems all trace back to the inputs
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    }
    return 2;
}

#include "idr/runner.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "idr/checkpoint.hpp"
#include "idr/errors.hpp"
#include "idr/kernels.hpp"
#include "json.hpp"

namespace idr {

namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fixed(double v, int places) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", places, v);
    return buf;
}

// metrics.csv cell; the PSNR sentinel must survive the round trip as text
std::string metric_cell(double v) {
    if (std::isinf(v)) return v > 0.0 ? "inf" : "-inf";
    return fixed(v, 6);
}

nlohmann::ordered_json metric_json(double v) {
    if (std::isinf(v)) return v > 0.0 ? "inf" : "-inf";
    return v;
}

}  // namespace

RunRecord run_experiment(const ExperimentConfig& cfg, const NoisySet& train,
                         const NoisySet& test_noisy, const CleanSet& test_clean) {
    if (test_noisy.images.size() != test_clean.images.size())
        throw ShapeError("run: " + std::to_string(test_noisy.images.size()) +
                         " eval inputs vs " + std::to_string(test_clean.images.size()) +
                         " references");
    kernels::set_threads(cfg.workers);
    const fs::path dir = cfg.out_dir;
    std::error_code ec;
    fs::create_directories(dir / "checkpoints", ec);
    if (ec) throw DataError("cannot create run directory: " + dir.string());
    save_experiment_config(cfg, (dir / "config.resolved").string());

    std::ofstream csv(dir / "metrics.csv");
    if (!csv) throw DataError("cannot write metrics.csv under " + dir.string());
    csv << "epoch,round,split,psnr,ssim,loss,seconds\n";

    RunRecord rec;
    const bool timing = cfg.timing_in_csv;
    const bool do_eval = !test_noisy.images.empty();
    const auto t0 = Clock::now();

    auto train_row = [&](const EpochRecord& e) {
        csv << e.epoch << ',' << e.round << ",train,,," << fixed(e.loss, 6) << ','
            << fixed(timing ? e.seconds : 0.0, 3) << '\n';
    };
    auto run_eval = [&](int epoch, int round, const UNet& model) {
        if (!do_eval) return;
        const auto e0 = Clock::now();
        const auto [p, s] = evaluate(model, test_noisy, test_clean);
        const double sec = seconds_since(e0);
        rec.eval_seconds += sec;
        rec.evals.push_back({epoch, round, "test", p, s, sec});
        csv << epoch << ',' << round << ",test," << metric_cell(p) << ',' << metric_cell(s)
            << ",," << fixed(timing ? sec : 0.0, 3) << '\n';
    };
    auto save_ckpt = [&](const std::string& name, const UNet& model) {
        const std::string path = (dir / "checkpoints" / name).string();
        save_checkpoint(model, path);
        rec.checkpoint_paths.push_back(path);
    };

    TrainHooks hooks;
    if (cfg.schedule.mode == RunMode::kFull) {
        hooks.on_epoch = [&](int, int, const UNet&) { train_row(rec.epochs.back()); };
        hooks.on_round = [&](int round, const UNet& model) {
            char name[32];
            std::snprintf(name, sizeof(name), "round_%02d.ckpt", round);
            save_ckpt(name, model);
            const int epoch = rec.epochs.empty() ? 0 : rec.epochs.back().epoch;
            run_eval(epoch, round, model);
        };
        train_full_idr(train, cfg.noise, cfg.model, cfg.schedule, &rec, hooks);
    } else {
        hooks.on_epoch = [&](int epoch, int round, const UNet& model) {
            train_row(rec.epochs.back());
            char name[32];
            std::snprintf(name, sizeof(name), "epoch_%03d.ckpt", epoch);
            save_ckpt(name, model);
            run_eval(epoch, round, model);
        };
        if (cfg.schedule.mode == RunMode::kFast)
            train_fast_idr(train, cfg.noise, cfg.model, cfg.schedule, &rec, hooks);
        else
            train_baseline(train, cfg.noise, cfg.model, cfg.schedule, &rec, hooks);
    }
    csv.flush();
    if (!csv) throw DataError("failed writing metrics.csv under " + dir.string());

    const double total = seconds_since(t0);
    const double train_plus_refine = rec.train_seconds + rec.refine_seconds;
    nlohmann::ordered_json j;
    j["mode"] = run_mode_name(cfg.schedule.mode);
    j["seed"] = cfg.seed;
    j["workers"] = cfg.workers;
    j["schedule"] = {{"rounds", cfg.schedule.rounds},
                     {"epochs_per_round", cfg.schedule.epochs_per_round},
                     {"iters_per_epoch", cfg.schedule.iters_per_epoch},
                     {"batch", cfg.schedule.batch},
                     {"patch", cfg.schedule.patch},
                     {"lr", cfg.schedule.lr.initial},
                     {"lr_factor", cfg.schedule.lr.factor},
                     {"milestones",
                      resolve_milestones(cfg.schedule.lr, total_model_iters(cfg.schedule))}};
    j["streams"] = {{"init", streams::kInit},       {"patches", streams::kPatches},
                    {"noise", streams::kNoise},     {"study", streams::kStudy},
                    {"corpus", streams::kCorpus},   {"eval", streams::kEval}};
    auto& je = j["epochs"] = nlohmann::ordered_json::array();
    for (const EpochRecord& e : rec.epochs)
        je.push_back({{"epoch", e.epoch},
                      {"round", e.round},
                      {"loss", e.loss},
                      {"seconds", e.seconds},
                      {"t_end", e.t_end}});
    auto& jv = j["evals"] = nlohmann::ordered_json::array();
    for (const EvalRecord& e : rec.evals)
        jv.push_back({{"epoch", e.epoch},
                      {"round", e.round},
                      {"split", e.split},
                      {"psnr", metric_json(e.psnr)},
                      {"ssim", metric_json(e.ssim)},
                      {"seconds", e.seconds}});
    j["phases"] = {{"train_seconds", rec.train_seconds},
                   {"refine_seconds", rec.refine_seconds},
                   {"eval_seconds", rec.eval_seconds},
                   {"total_seconds", total}};
    j["refinement"] = {
        {"passes", rec.refinements},
        {"seconds", rec.refine_seconds},
        {"overhead_vs_train", rec.train_seconds > 0.0 ? rec.refine_seconds / rec.train_seconds : 0.0},
        {"fraction_of_total", train_plus_refine > 0.0 ? rec.refine_seconds / train_plus_refine : 0.0}};
    j["checkpoints"] = rec.checkpoint_paths;
    j["model_hashes"] = rec.model_hashes;
    j["store_checksums"] = rec.store_checksums;

    std::ofstream js(dir / "run.json");
    if (!js) throw DataError("cannot write run.json under " + dir.string());
    js << j.dump(2) << "\n";
    return rec;
}

RunRecord run_experiment(const ExperimentConfig& cfg) {
    NoisySet train(load_split(cfg.data_root, cfg.train_split));
    NoisySet test_noisy;
    CleanSet test_clean;
    std::error_code ec;
    if (fs::is_directory(fs::path(cfg.data_root) / cfg.test_split, ec)) {
        auto pairs = load_eval_pairs(cfg.data_root, cfg.test_split);
        test_noisy = std::move(pairs.first);
        test_clean = std::move(pairs.second);
    }
    return run_experiment(cfg, train, test_noisy, test_clean);
}

std::string describe_schedule(const ExperimentConfig& cfg) {
    const IdrConfig& s = cfg.schedule;
    const long total = total_model_iters(s);
    const auto ms = resolve_milestones(s.lr, total);
    std::ostringstream o;
    o << "mode " << run_mode_name(s.mode) << ", seed " << cfg.seed << ", workers "
      << cfg.workers << "\n";
    o << "data: " << cfg.data_root << " (train '" << cfg.train_split << "', test '"
      << cfg.test_split << "')\n";
    o << "model: " << cfg.model.levels << " levels, " << cfg.model.base_channels
      << " base channels, " << cfg.model.in_channels << " in, alignment "
      << (1 << (cfg.model.levels - 1)) << "\n";
    o << "noise:";
    for (const auto& [key, value] : noise_spec_to_keys(cfg.noise))
        o << " " << key << "=" << value;
    o << "\n";
    if (s.mode == RunMode::kFull)
        o << "rounds 0.." << s.rounds << ", fresh model per round, " << s.epochs_per_round
          << " epochs x " << s.iters_per_epoch << " iters each\n";
    else
        o << s.rounds << " epochs x " << s.iters_per_epoch << " iters"
          << (s.mode == RunMode::kFast ? ", targets refined after every epoch" : "") << "\n";
    o << "batch " << s.batch << ", patch " << s.patch << "\n";
    o << "lr " << s.lr.initial;
    if (!ms.empty()) {
        o << ", x" << s.lr.factor << " at";
        for (long m : ms) o << " " << m;
    }
    o << " (" << total << " iters per model)\n";
    o << "out: " << cfg.out_dir << "\n";
    return o.str();
}

}  // namespace idr

#include "idr/config.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "idr/errors.hpp"

namespace idr {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::string fmt_float(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

[[noreturn]] void bad_value(const std::string& where, const std::string& value) {
    throw ConfigError(where + ": bad value '" + value + "'");
}

long parse_long(const std::string& where, const std::string& v) {
    try {
        std::size_t pos = 0;
        const long out = std::stol(v, &pos);
        if (pos != v.size()) bad_value(where, v);
        return out;
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception&) {
        bad_value(where, v);
    }
}

int parse_int(const std::string& where, const std::string& v) {
    return static_cast<int>(parse_long(where, v));
}

std::uint64_t parse_u64(const std::string& where, const std::string& v) {
    try {
        std::size_t pos = 0;
        const std::uint64_t out = std::stoull(v, &pos);
        if (pos != v.size() || v.front() == '-') bad_value(where, v);
        return out;
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception&) {
        bad_value(where, v);
    }
}

float parse_float(const std::string& where, const std::string& v) {
    try {
        std::size_t pos = 0;
        const float out = std::stof(v, &pos);
        if (pos != v.size()) bad_value(where, v);
        return out;
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception&) {
        bad_value(where, v);
    }
}

bool parse_bool(const std::string& where, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError(where + ": bad value '" + v + "' (want true or false)");
}

std::vector<long> parse_milestones(const std::string& where, const std::string& v) {
    if (v == "auto") return {};
    std::vector<long> out;
    std::istringstream iss(v);
    std::string tok;
    while (iss >> tok) out.push_back(parse_long(where, tok));
    if (out.empty()) bad_value(where, v);
    return out;
}

void set_run_key(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "out") cfg.out_dir = value;
    else if (key == "seed") cfg.seed = parse_u64("run.seed", value);
    else if (key == "workers") cfg.workers = parse_int("run.workers", value);
    else if (key == "timing_in_csv") cfg.timing_in_csv = parse_bool("run.timing_in_csv", value);
    else throw ConfigError("unknown key '" + key + "' in [run]");
}

void set_data_key(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "root") cfg.data_root = value;
    else if (key == "train") cfg.train_split = value;
    else if (key == "test") cfg.test_split = value;
    else throw ConfigError("unknown key '" + key + "' in [data]");
}

void set_model_key(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "levels") cfg.model.levels = parse_int("model.levels", value);
    else if (key == "base_channels") cfg.model.base_channels = parse_int("model.base_channels", value);
    else if (key == "in_channels") cfg.model.in_channels = parse_int("model.in_channels", value);
    else if (key == "leaky_slope") cfg.model.leaky_slope = parse_float("model.leaky_slope", value);
    else throw ConfigError("unknown key '" + key + "' in [model]");
}

void set_schedule_key(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
    IdrConfig& s = cfg.schedule;
    if (key == "mode") s.mode = run_mode_from_name(value);
    else if (key == "rounds") s.rounds = parse_int("schedule.rounds", value);
    else if (key == "epochs_per_round") s.epochs_per_round = parse_int("schedule.epochs_per_round", value);
    else if (key == "iters_per_epoch") s.iters_per_epoch = parse_int("schedule.iters_per_epoch", value);
    else if (key == "batch") s.batch = parse_int("schedule.batch", value);
    else if (key == "patch") s.patch = parse_int("schedule.patch", value);
    else if (key == "lr") s.lr.initial = parse_float("schedule.lr", value);
    else if (key == "lr_factor") s.lr.factor = parse_float("schedule.lr_factor", value);
    else if (key == "milestones") s.lr.milestones = parse_milestones("schedule.milestones", value);
    else throw ConfigError("unknown key '" + key + "' in [schedule]");
}

void check_model(const ModelConfig& m) {
    if (m.levels < 1 || m.levels > 8) throw ConfigError("model.levels must be in [1, 8]");
    if (m.base_channels < 1) throw ConfigError("model.base_channels must be >= 1");
    if (m.in_channels < 1) throw ConfigError("model.in_channels must be >= 1");
    if (!(m.leaky_slope >= 0.0f) || !std::isfinite(m.leaky_slope))
        throw ConfigError("model.leaky_slope must be finite and >= 0");
}

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& text, const std::string& origin) {
    ExperimentConfig cfg;
    std::map<std::string, std::string> noise_keys;
    std::istringstream in(text);
    std::string line;
    std::string section;
    std::set<std::string> seen;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string where = origin + ":" + std::to_string(lineno);
        std::string t = trim(line);
        if (const auto hash = t.find('#'); hash != std::string::npos) t = trim(t.substr(0, hash));
        if (t.empty()) continue;
        if (t.front() == '[') {
            if (t.back() != ']') throw FormatError(where + ": unterminated section header");
            section = trim(t.substr(1, t.size() - 2));
            if (section != "run" && section != "data" && section != "model" &&
                section != "noise" && section != "schedule")
                throw ConfigError(where + ": unknown section [" + section + "]");
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos) throw FormatError(where + ": expected 'key = value'");
        if (section.empty()) throw FormatError(where + ": key before any [section]");
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        if (key.empty() || value.empty()) throw FormatError(where + ": expected 'key = value'");
        if (!seen.insert(section + "." + key).second)
            throw FormatError(where + ": duplicate key '" + key + "' in [" + section + "]");
        if (section == "run") set_run_key(cfg, key, value);
        else if (section == "data") set_data_key(cfg, key, value);
        else if (section == "model") set_model_key(cfg, key, value);
        else if (section == "noise") noise_keys[key] = value;
        else set_schedule_key(cfg, key, value);
    }
    cfg.noise = noise_spec_from_keys(noise_keys);
    if (cfg.data_root.empty()) {
        const char* env = std::getenv("IDR_DATA_DIR");
        cfg.data_root = env && *env ? env : "data";
    }
    if (cfg.workers < 1) throw ConfigError("run.workers must be >= 1");
    cfg.schedule.seed = cfg.seed;
    check_model(cfg.model);
    validate(cfg.schedule);
    if (cfg.schedule.patch % (1 << (cfg.model.levels - 1)) != 0)
        throw ConfigError("schedule.patch " + std::to_string(cfg.schedule.patch) +
                          " is not divisible by the model alignment of " +
                          std::to_string(1 << (cfg.model.levels - 1)));
    return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open config: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_experiment_config(buf.str(), path);
}

std::string resolved_config_text(const ExperimentConfig& cfg) {
    // hand-built configs can have an unresolved root; apply the same
    // fallback parsing does, so the emitted text always round-trips
    std::string root = cfg.data_root;
    if (root.empty()) {
        const char* env = std::getenv("IDR_DATA_DIR");
        root = env && *env ? env : "data";
    }
    std::ostringstream out;
    out << "[run]\n"
        << "out = " << cfg.out_dir << "\n"
        << "seed = " << cfg.seed << "\n"
        << "workers = " << cfg.workers << "\n"
        << "timing_in_csv = " << (cfg.timing_in_csv ? "true" : "false") << "\n\n";
    out << "[data]\n"
        << "root = " << root << "\n"
        << "train = " << cfg.train_split << "\n"
        << "test = " << cfg.test_split << "\n\n";
    out << "[model]\n"
        << "levels = " << cfg.model.levels << "\n"
        << "base_channels = " << cfg.model.base_channels << "\n"
        << "in_channels = " << cfg.model.in_channels << "\n"
        << "leaky_slope = " << fmt_float(cfg.model.leaky_slope) << "\n\n";
    out << "[noise]\n";
    for (const auto& [key, value] : noise_spec_to_keys(cfg.noise))
        out << key << " = " << value << "\n";
    out << "\n[schedule]\n"
        << "mode = " << run_mode_name(cfg.schedule.mode) << "\n"
        << "rounds = " << cfg.schedule.rounds << "\n"
        << "epochs_per_round = " << cfg.schedule.epochs_per_round << "\n"
        << "iters_per_epoch = " << cfg.schedule.iters_per_epoch << "\n"
        << "batch = " << cfg.schedule.batch << "\n"
        << "patch = " << cfg.schedule.patch << "\n"
        << "lr = " << fmt_float(cfg.schedule.lr.initial) << "\n"
        << "lr_factor = " << fmt_float(cfg.schedule.lr.factor) << "\n";
    out << "milestones = ";
    if (cfg.schedule.lr.milestones.empty()) {
        out << "auto";
    } else {
        for (std::size_t i = 0; i < cfg.schedule.lr.milestones.size(); ++i)
            out << (i ? " " : "") << cfg.schedule.lr.milestones[i];
    }
    out << "\n";
    return out.str();
}

void save_experiment_config(const ExperimentConfig& cfg, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write config: " + path);
    out << resolved_config_text(cfg);
    if (!out) throw DataError("failed writing config: " + path);
}

}  // namespace idr

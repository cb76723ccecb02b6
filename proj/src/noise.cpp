#include "idr/noise.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
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

std::vector<float> parse_floats(const std::string& text, const std::string& what) {
    std::istringstream in(text);
    std::vector<float> out;
    std::string tok;
    while (in >> tok) {
        try {
            std::size_t used = 0;
            float f = std::stof(tok, &used);
            if (used != tok.size()) throw std::invalid_argument(tok);
            out.push_back(f);
        } catch (const std::exception&) {
            throw ConfigError("noise: bad number '" + tok + "' in " + what);
        }
    }
    return out;
}

std::string fmt_float(float v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(v));
    return buf;
}

void require_prob(float p, const char* who) {
    if (!(p >= 0.0f && p <= 1.0f))
        throw ConfigError(std::string(who) + ": probability " + fmt_float(p) + " outside [0,1]");
}

}  // namespace

const char* noise_kind_name(NoiseKind kind) {
    switch (kind) {
        case NoiseKind::kGaussian: return "gaussian";
        case NoiseKind::kPoissonGaussian: return "poisson_gaussian";
        case NoiseKind::kBinomial: return "binomial";
        case NoiseKind::kImpulse: return "impulse";
        case NoiseKind::kCorrelated: return "correlated";
    }
    return "?";
}

bool is_zero_noise(const NoiseSpec& spec) {
    if (spec.kind == NoiseKind::kPoissonGaussian) return false;
    return spec.level_lo == 0.0f && spec.level_hi == 0.0f;
}

void validate(const NoiseSpec& spec) {
    if (!(spec.level_lo <= spec.level_hi))
        throw ConfigError("noise: level range [" + fmt_float(spec.level_lo) + ", " +
                          fmt_float(spec.level_hi) + "] is unordered");
    if (!std::isfinite(spec.level_lo) || !std::isfinite(spec.level_hi))
        throw ConfigError("noise: level range must be finite");
    switch (spec.kind) {
        case NoiseKind::kGaussian:
        case NoiseKind::kCorrelated:
            if (spec.level_lo < 0.0f) throw ConfigError("noise: sigma must be >= 0");
            break;
        case NoiseKind::kBinomial:
        case NoiseKind::kImpulse:
            if (spec.level_lo < 0.0f || spec.level_hi > 0.95f)
                throw ConfigError("noise: p range must stay within [0, 0.95]");
            break;
        case NoiseKind::kPoissonGaussian:
            if (spec.level_lo <= 0.0f) throw ConfigError("noise: iso must be positive");
            if (!(spec.k0 > 0.0f))
                throw ConfigError("noise: poisson_gaussian needs k0 > 0, got " + fmt_float(spec.k0));
            if (spec.sigma0 < 0.0f) throw ConfigError("noise: sigma0 must be >= 0");
            break;
    }
    if (spec.kind == NoiseKind::kCorrelated) {
        if (spec.kernel.empty()) throw ConfigError("noise: correlated spec needs a kernel");
        for (float w : spec.kernel.w)
            if (!std::isfinite(w)) throw ConfigError("noise: kernel has non-finite entries");
        if (static_cast<std::size_t>(spec.kernel.rows) * spec.kernel.cols != spec.kernel.w.size())
            throw ConfigError("noise: kernel size does not match rows*cols");
    }
}

float sample_level(const NoiseSpec& spec, RngStream& rng) {
    return static_cast<float>(rng.uniform(spec.level_lo, spec.level_hi));
}

ImageBuffer apply_gaussian(const ImageBuffer& img, float sigma, RngStream& rng) {
    if (!(sigma >= 0.0f)) throw ConfigError("apply_gaussian: sigma must be >= 0");
    ImageBuffer out = img;
    const double s = sigma;
    for (float& v : out.v) v = static_cast<float>(v + s * rng.normal());
    return out;
}

ImageBuffer apply_poisson_gaussian(const ImageBuffer& img, float iso, const NoiseSpec& spec,
                                   RngStream& rng) {
    const double k = static_cast<double>(spec.k0) * iso / 100.0;
    const double sigma_r = static_cast<double>(spec.sigma0) * iso / 100.0;
    if (!(k > 0.0))
        throw ConfigError("apply_poisson_gaussian: k = k0*iso/100 must be positive, got " +
                          fmt_float(static_cast<float>(k)));
    ImageBuffer out = img;
    for (float& v : out.v) {
        const double shot = k * static_cast<double>(rng.poisson(v / k));
        v = static_cast<float>(shot + sigma_r * rng.normal());
    }
    return out;
}

ImageBuffer apply_binomial(const ImageBuffer& img, float p, RngStream& rng) {
    require_prob(p, "apply_binomial");
    ImageBuffer out = img;
    const std::size_t plane = out.pixels();
    for (std::size_t i = 0; i < plane; ++i) {
        const float mask = rng.uniform() < p ? 0.0f : 1.0f;
        for (int ch = 0; ch < out.c; ++ch) out.v[static_cast<std::size_t>(ch) * plane + i] *= mask;
    }
    return out;
}

ImageBuffer apply_impulse(const ImageBuffer& img, float p, RngStream& rng) {
    require_prob(p, "apply_impulse");
    ImageBuffer out = img;
    for (float& v : out.v) {
        const bool hit = rng.uniform() < p;
        const float coin = rng.uniform() < 0.5 ? 0.0f : 1.0f;
        if (hit) v = coin;
    }
    return out;
}

ImageBuffer apply_correlated(const ImageBuffer& img, float sigma, const NoiseKernel& g,
                             RngStream& rng) {
    if (g.empty()) throw ConfigError("apply_correlated: empty kernel");
    if (!(sigma >= 0.0f)) throw ConfigError("apply_correlated: sigma must be >= 0");
    for (float w : g.w)
        if (!std::isfinite(w)) throw ConfigError("apply_correlated: kernel has non-finite entries");

    ImageBuffer out = img;
    const int h = img.h, w = img.w;
    const std::size_t plane = img.pixels();
    std::vector<float> field(plane);
    const int ar = g.rows / 2, ac = g.cols / 2;
    for (int ch = 0; ch < img.c; ++ch) {
        for (std::size_t i = 0; i < plane; ++i)
            field[i] = static_cast<float>(sigma * rng.normal());
        float* dst = out.v.data() + static_cast<std::size_t>(ch) * plane;
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                double acc = 0.0;
                for (int r = 0; r < g.rows; ++r) {
                    const int sy = y + r - ar;
                    if (sy < 0 || sy >= h) continue;
                    for (int c = 0; c < g.cols; ++c) {
                        const int sx = x + c - ac;
                        if (sx < 0 || sx >= w) continue;
                        acc += static_cast<double>(g.w[static_cast<std::size_t>(r) * g.cols + c]) *
                               field[static_cast<std::size_t>(sy) * w + sx];
                    }
                }
                dst[static_cast<std::size_t>(y) * w + x] += static_cast<float>(acc);
            }
        }
    }
    return out;
}

ImageBuffer apply_noise(const ImageBuffer& img, const NoiseSpec& spec, float level,
                        RngStream& rng) {
    switch (spec.kind) {
        case NoiseKind::kGaussian: return apply_gaussian(img, level / 255.0f, rng);
        case NoiseKind::kPoissonGaussian: return apply_poisson_gaussian(img, level, spec, rng);
        case NoiseKind::kBinomial: return apply_binomial(img, level, rng);
        case NoiseKind::kImpulse: return apply_impulse(img, level, rng);
        case NoiseKind::kCorrelated: return apply_correlated(img, level / 255.0f, spec.kernel, rng);
    }
    throw ConfigError("apply_noise: unknown noise kind");
}

NoiseKernel make_named_kernel(const std::string& name) {
    NoiseKernel k;
    if (name == "delta") {
        k.rows = k.cols = 1;
        k.w = {1.0f};
    } else if (name == "blur3") {
        k.rows = k.cols = 3;
        k.w.resize(9);
        const double s2 = 2.0 * 0.75 * 0.75;
        double sum = 0.0;
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) {
                const double d2 = (r - 1) * (r - 1) + (c - 1) * (c - 1);
                const double v = std::exp(-d2 / s2);
                k.w[static_cast<std::size_t>(r) * 3 + c] = static_cast<float>(v);
                sum += v;
            }
        for (float& v : k.w) v = static_cast<float>(v / sum);
    } else if (name == "hline5" || name == "vline5") {
        const float v = static_cast<float>(1.0 / std::sqrt(5.0));
        k.rows = name == "hline5" ? 1 : 5;
        k.cols = name == "hline5" ? 5 : 1;
        k.w.assign(5, v);
    } else if (name == "ring5") {
        k.rows = k.cols = 5;
        k.w.assign(25, 0.0f);
        for (int r = 0; r < 5; ++r)
            for (int c = 0; c < 5; ++c)
                if (r == 0 || r == 4 || c == 0 || c == 4)
                    k.w[static_cast<std::size_t>(r) * 5 + c] = 0.25f;
    } else {
        throw ConfigError("noise: unknown kernel name '" + name +
                          "' (registry: delta blur3 hline5 vline5 ring5)");
    }
    return k;
}

std::vector<std::string> named_kernel_list() {
    return {"delta", "blur3", "hline5", "vline5", "ring5"};
}

NoiseKernel load_kernel(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open kernel file: " + path);
    NoiseKernel k;
    if (!(in >> k.rows >> k.cols)) throw FormatError(path + ": kernel header must be 'rows cols'");
    if (k.rows <= 0 || k.cols <= 0 || k.rows > 64 || k.cols > 64)
        throw FormatError(path + ": bad kernel extents " + std::to_string(k.rows) + "x" +
                          std::to_string(k.cols));
    const std::size_t n = static_cast<std::size_t>(k.rows) * k.cols;
    k.w.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!(in >> k.w[i]))
            throw FormatError(path + ": expected " + std::to_string(n) + " kernel values");
        if (!std::isfinite(k.w[i])) throw FormatError(path + ": non-finite kernel value");
    }
    float extra;
    if (in >> extra) throw FormatError(path + ": trailing values after kernel data");
    return k;
}

void save_kernel(const NoiseKernel& k, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write kernel file: " + path);
    out << k.rows << " " << k.cols << "\n";
    for (int r = 0; r < k.rows; ++r) {
        for (int c = 0; c < k.cols; ++c)
            out << (c ? " " : "") << fmt_float(k.w[static_cast<std::size_t>(r) * k.cols + c]);
        out << "\n";
    }
    if (!out) throw DataError("failed writing kernel file: " + path);
}

std::vector<CalibrationRow> load_calibration(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open calibration file: " + path);
    std::vector<CalibrationRow> rows;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string body = trim(line.substr(0, line.find('#')));
        if (body.empty()) continue;
        std::istringstream ls(body);
        CalibrationRow row;
        std::string extra;
        if (!(ls >> row.iso >> row.k >> row.sigma_r) || (ls >> extra))
            throw FormatError(path + ":" + std::to_string(lineno) +
                              ": calibration lines are 'iso k sigma_r'");
        if (!(row.iso > 0.0f))
            throw FormatError(path + ":" + std::to_string(lineno) + ": iso must be positive");
        rows.push_back(row);
    }
    if (rows.empty()) throw FormatError(path + ": no calibration rows");
    return rows;
}

CalibrationRow calibration_at_iso100(const std::vector<CalibrationRow>& rows) {
    if (rows.empty()) throw ConfigError("calibration: no rows");
    const CalibrationRow& r = rows.front();
    const float scale = 100.0f / r.iso;
    return CalibrationRow{100.0f, r.k * scale, r.sigma_r * scale};
}

NoiseSpec noise_spec_from_keys(const std::map<std::string, std::string>& keys) {
    auto it = keys.find("variant");
    if (it == keys.end()) throw ConfigError("noise: missing 'variant'");

    NoiseSpec spec;
    const std::string& variant = it->second;
    if (variant == "gaussian") spec.kind = NoiseKind::kGaussian;
    else if (variant == "poisson_gaussian") spec.kind = NoiseKind::kPoissonGaussian;
    else if (variant == "binomial") spec.kind = NoiseKind::kBinomial;
    else if (variant == "impulse") spec.kind = NoiseKind::kImpulse;
    else if (variant == "correlated") spec.kind = NoiseKind::kCorrelated;
    else
        throw ConfigError("noise: unknown variant '" + variant +
                          "' (gaussian poisson_gaussian binomial impulse correlated)");

    const char* range_key = nullptr;
    switch (spec.kind) {
        case NoiseKind::kGaussian:
        case NoiseKind::kCorrelated: range_key = "sigma"; break;
        case NoiseKind::kPoissonGaussian: range_key = "iso"; break;
        case NoiseKind::kBinomial:
        case NoiseKind::kImpulse: range_key = "p"; break;
    }

    for (const auto& [key, value] : keys) {
        if (key == "variant") continue;
        if (key == range_key) {
            const std::vector<float> r = parse_floats(value, "'" + key + "'");
            if (r.size() != 1 && r.size() != 2)
                throw ConfigError("noise: '" + key + "' takes one value or 'lo hi'");
            spec.level_lo = r.front();
            spec.level_hi = r.back();
        } else if (key == "k0" && spec.kind == NoiseKind::kPoissonGaussian) {
            const std::vector<float> r = parse_floats(value, "'k0'");
            if (r.size() != 1) throw ConfigError("noise: 'k0' takes one value");
            spec.k0 = r[0];
        } else if (key == "sigma0" && spec.kind == NoiseKind::kPoissonGaussian) {
            const std::vector<float> r = parse_floats(value, "'sigma0'");
            if (r.size() != 1) throw ConfigError("noise: 'sigma0' takes one value");
            spec.sigma0 = r[0];
        } else if (key == "calibration" && spec.kind == NoiseKind::kPoissonGaussian) {
            const CalibrationRow c = calibration_at_iso100(load_calibration(value));
            spec.k0 = c.k;
            spec.sigma0 = c.sigma_r;
        } else if (key == "kernel" && spec.kind == NoiseKind::kCorrelated) {
            spec.kernel_name = value;
            bool named = false;
            for (const std::string& n : named_kernel_list()) named = named || n == value;
            spec.kernel = named ? make_named_kernel(value) : load_kernel(value);
        } else {
            throw ConfigError("noise: unknown key '" + key + "' for variant " + variant);
        }
    }

    if (keys.find(range_key) == keys.end())
        throw ConfigError("noise: variant " + variant + " needs '" + std::string(range_key) + "'");
    if (spec.kind == NoiseKind::kCorrelated && spec.kernel.empty())
        throw ConfigError("noise: variant correlated needs 'kernel'");
    validate(spec);
    return spec;
}

NoiseSpec load_noise_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open noise spec: " + path);
    std::map<std::string, std::string> keys;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string body = trim(line.substr(0, line.find('#')));
        if (body.empty()) continue;
        const std::size_t eq = body.find('=');
        if (eq == std::string::npos)
            throw FormatError(path + ":" + std::to_string(lineno) + ": expected 'key = value'");
        const std::string key = trim(body.substr(0, eq));
        const std::string value = trim(body.substr(eq + 1));
        if (key.empty() || value.empty())
            throw FormatError(path + ":" + std::to_string(lineno) + ": empty key or value");
        if (!keys.emplace(key, value).second)
            throw FormatError(path + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
    }
    try {
        return noise_spec_from_keys(keys);
    } catch (const ConfigError& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

std::vector<std::pair<std::string, std::string>> noise_spec_to_keys(const NoiseSpec& spec) {
    std::vector<std::pair<std::string, std::string>> keys;
    keys.emplace_back("variant", noise_kind_name(spec.kind));
    const char* range_key = spec.kind == NoiseKind::kPoissonGaussian ? "iso"
                            : (spec.kind == NoiseKind::kBinomial || spec.kind == NoiseKind::kImpulse)
                                ? "p"
                                : "sigma";
    std::string range = fmt_float(spec.level_lo);
    if (spec.level_hi != spec.level_lo) range += " " + fmt_float(spec.level_hi);
    keys.emplace_back(range_key, range);
    if (spec.kind == NoiseKind::kPoissonGaussian) {
        keys.emplace_back("k0", fmt_float(spec.k0));
        keys.emplace_back("sigma0", fmt_float(spec.sigma0));
    }
    if (spec.kind == NoiseKind::kCorrelated) keys.emplace_back("kernel", spec.kernel_name);
    return keys;
}

void save_noise_spec(const NoiseSpec& spec, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write noise spec: " + path);
    for (const auto& [key, value] : noise_spec_to_keys(spec)) out << key << " = " << value << "\n";
    if (!out) throw DataError("failed writing noise spec: " + path);
}

}  // namespace idr

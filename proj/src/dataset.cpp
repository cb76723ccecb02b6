#include "idr/dataset.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>

#include "idr/errors.hpp"
#include "idr/kernels.hpp"
#include "json.hpp"

namespace fs = std::filesystem;

namespace idr {

namespace {

// reflect-101 index (mirror without repeating the border sample)
int mirror(int i, int n) {
    if (n == 1) return 0;
    while (i < 0 || i >= n) {
        if (i < 0) i = -i;
        if (i >= n) i = 2 * n - 2 - i;
    }
    return i;
}

ImageBuffer crop(const ImageBuffer& img, int y0, int x0, int h, int w) {
    ImageBuffer out(h, w, img.c);
    out.source_id = img.source_id;
    out.bit_depth = img.bit_depth;
    out.raw_black = img.raw_black;
    out.raw_white = img.raw_white;
    for (int ch = 0; ch < img.c; ++ch)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) out.at(ch, y, x) = img.at(ch, y0 + y, x0 + x);
    return out;
}

void require_same_channels(const std::vector<ImageBuffer>& images, const char* who) {
    for (std::size_t i = 1; i < images.size(); ++i)
        if (images[i].c != images[0].c)
            throw ShapeError(std::string(who) + ": image " + std::to_string(i) + " has " +
                             std::to_string(images[i].c) + " channels, expected " +
                             std::to_string(images[0].c));
}

}  // namespace

std::vector<ImageBuffer> load_split(const std::string& data_root, const std::string& split) {
    const fs::path dir = fs::path(data_root) / split;
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) throw DataError("split directory not found: " + dir.string());

    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir, ec)) {
        if (!entry.is_regular_file()) continue;
        const std::string ext = entry.path().extension().string();
        if (ext == ".png" || ext == ".pgm" || ext == ".ppm" || ext == ".raw")
            files.push_back(entry.path());
    }
    if (ec) throw DataError("cannot list split directory: " + dir.string());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw DataError("no images under " + dir.string());

    std::vector<ImageBuffer> images;
    images.reserve(files.size());
    for (const fs::path& p : files) {
        images.push_back(load_image(p.string()));
        images.back().source_id = p.stem().string();
    }
    return images;
}

std::pair<NoisySet, CleanSet> load_eval_pairs(const std::string& data_root,
                                              const std::string& split) {
    const fs::path dir = fs::path(data_root) / split;
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) throw DataError("split directory not found: " + dir.string());

    std::map<std::string, fs::path> noisy_by_scene, clean_by_scene;
    for (const auto& entry : fs::directory_iterator(dir, ec)) {
        if (!entry.is_regular_file()) continue;
        const fs::path& p = entry.path();
        const std::string ext = p.extension().string();
        if (ext != ".png" && ext != ".pgm" && ext != ".ppm" && ext != ".raw") continue;
        const std::string stem = p.stem().string();  // "<scene>.noisy" / "<scene>.clean"
        const std::string role = fs::path(stem).extension().string();
        const std::string scene = fs::path(stem).stem().string();
        if (role == ".noisy" && !scene.empty()) noisy_by_scene[scene] = p;
        else if (role == ".clean" && !scene.empty()) clean_by_scene[scene] = p;
        else throw DataError("eval file is neither <scene>.noisy nor <scene>.clean: " + p.string());
    }
    if (ec) throw DataError("cannot list split directory: " + dir.string());
    if (noisy_by_scene.empty()) throw DataError("no eval pairs under " + dir.string());

    std::vector<ImageBuffer> noisy, clean;
    for (const auto& [scene, npath] : noisy_by_scene) {
        const auto it = clean_by_scene.find(scene);
        if (it == clean_by_scene.end())
            throw DataError("missing clean reference for " + npath.string());
        noisy.push_back(load_image(npath.string()));
        noisy.back().source_id = npath.filename().string();
        clean.push_back(load_image(it->second.string()));
        clean.back().source_id = scene;
        clean_by_scene.erase(it);
    }
    if (!clean_by_scene.empty())
        throw DataError("missing noisy input for " +
                        clean_by_scene.begin()->second.string());
    return {NoisySet(std::move(noisy)), CleanSet(std::move(clean))};
}

std::vector<ImageBuffer> extract_patches(const std::vector<ImageBuffer>& images, int patch,
                                         int count, int alignment, RngStream& rng) {
    if (images.empty()) throw DataError("extract_patches: no images");
    if (patch <= 0 || count < 0) throw ShapeError("extract_patches: bad patch/count");
    if (alignment > 0 && patch % alignment != 0)
        throw ShapeError("extract_patches: patch " + std::to_string(patch) +
                         " not divisible by model alignment " + std::to_string(alignment));
    require_same_channels(images, "extract_patches");
    for (std::size_t i = 0; i < images.size(); ++i)
        if (patch > images[i].h || patch > images[i].w)
            throw ShapeError("extract_patches: patch " + std::to_string(patch) +
                             " exceeds image " + std::to_string(i) + " (" +
                             std::to_string(images[i].h) + "x" + std::to_string(images[i].w) + ")");

    std::vector<ImageBuffer> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int k = 0; k < count; ++k) {
        const auto i = static_cast<std::size_t>(rng.uniform_index(images.size()));
        const ImageBuffer& img = images[i];
        const int y = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(img.h - patch) + 1));
        const int x = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(img.w - patch) + 1));
        out.push_back(crop(img, y, x, patch, patch));
    }
    return out;
}

PairSet make_noisier_noisy(const std::vector<ImageBuffer>& targets, const NoiseSpec& spec,
                           const RngStream& rng) {
    validate(spec);
    PairSet set;
    set.inputs.resize(targets.size());
    set.targets = targets;
    set.levels.resize(targets.size());
    kernels::detail::parallel_tasks(static_cast<std::int64_t>(targets.size()), [&](std::int64_t i) {
        RngStream sub = rng.fork(static_cast<std::uint64_t>(i));
        const float level = sample_level(spec, sub);
        set.levels[static_cast<std::size_t>(i)] = level;
        set.inputs[static_cast<std::size_t>(i)] =
            apply_noise(targets[static_cast<std::size_t>(i)], spec, level, sub);
    });
    return set;
}

ImageBuffer denoise_image(const DenoiseFn& fn, int alignment, const ImageBuffer& img) {
    if (img.h <= 0 || img.w <= 0 || img.c <= 0) throw ShapeError("denoise_image: empty image");
    if (alignment <= 0) alignment = 1;
    constexpr int kOverlap = 16;
    constexpr int kCore = 256 - 2 * kOverlap;

    ImageBuffer out = img;
    for (int y0 = 0; y0 < img.h; y0 += kCore) {
        const int core_h = std::min(kCore, img.h - y0);
        for (int x0 = 0; x0 < img.w; x0 += kCore) {
            const int core_w = std::min(kCore, img.w - x0);
            int ih = core_h + 2 * kOverlap, iw = core_w + 2 * kOverlap;
            ih += (alignment - ih % alignment) % alignment;
            iw += (alignment - iw % alignment) % alignment;

            Tensor<float> tile({1, img.c, ih, iw});
            for (int ch = 0; ch < img.c; ++ch)
                for (int yy = 0; yy < ih; ++yy) {
                    const int sy = mirror(y0 - kOverlap + yy, img.h);
                    for (int xx = 0; xx < iw; ++xx)
                        tile.v[(static_cast<std::size_t>(ch) * ih + yy) * iw + xx] =
                            img.at(ch, sy, mirror(x0 - kOverlap + xx, img.w));
                }

            const Tensor<float> res = fn(tile);
            if (res.shape != tile.shape)
                throw ShapeError("denoise_image: denoiser changed the tile shape");
            for (int ch = 0; ch < img.c; ++ch)
                for (int yy = 0; yy < core_h; ++yy)
                    for (int xx = 0; xx < core_w; ++xx)
                        out.at(ch, y0 + yy, x0 + xx) =
                            res.v[(static_cast<std::size_t>(ch) * ih + kOverlap + yy) * iw +
                                  kOverlap + xx];
        }
    }
    return out;
}

ImageBuffer denoise_image(const UNet& model, const ImageBuffer& img) {
    if (img.c != model.cfg.in_channels)
        throw ShapeError("denoise_image: image has " + std::to_string(img.c) +
                         " channels, model expects " + std::to_string(model.cfg.in_channels));
    return denoise_image([&model](const Tensor<float>& t) { return model.forward(t); },
                         model.alignment(), img);
}

TargetStore refine_targets(const DenoiseFn& fn, int alignment, const std::string& model_hash,
                           const std::vector<ImageBuffer>& noisy, const TargetStore& store) {
    if (store.targets.size() != noisy.size())
        throw ShapeError("refine_targets: store holds " + std::to_string(store.targets.size()) +
                         " targets for " + std::to_string(noisy.size()) + " noisy images");
    for (std::size_t i = 0; i < noisy.size(); ++i)
        if (!store.targets[i].same_shape(noisy[i]))
            throw ShapeError("refine_targets: shape drift at image " + std::to_string(i));

    TargetStore next;
    next.round = store.round + 1;
    next.model_hash = model_hash;
    next.targets.resize(noisy.size());
    kernels::detail::parallel_tasks(static_cast<std::int64_t>(noisy.size()), [&](std::int64_t i) {
        next.targets[static_cast<std::size_t>(i)] =
            denoise_image(fn, alignment, noisy[static_cast<std::size_t>(i)]);
    });
    return next;
}

TargetStore refine_targets(const UNet& model, const std::vector<ImageBuffer>& noisy,
                           const TargetStore& store) {
    for (std::size_t i = 0; i < noisy.size(); ++i)
        if (noisy[i].c != model.cfg.in_channels)
            throw ShapeError("refine_targets: image " + std::to_string(i) + " has " +
                             std::to_string(noisy[i].c) + " channels, model expects " +
                             std::to_string(model.cfg.in_channels));
    return refine_targets([&model](const Tensor<float>& t) { return model.forward(t); },
                          model.alignment(), model.param_hash(), noisy, store);
}

std::vector<ImageBuffer> make_biased_targets(const std::vector<ImageBuffer>& clean, BiasKind bias,
                                             float sigma, const RngStream& rng) {
    if (!(sigma >= 0.0f)) throw ConfigError("make_biased_targets: sigma must be >= 0");
    std::vector<ImageBuffer> out(clean.size());
    kernels::detail::parallel_tasks(static_cast<std::int64_t>(clean.size()), [&](std::int64_t i) {
        const auto u = static_cast<std::size_t>(i);
        if (bias == BiasKind::kGaussianNoise) {
            RngStream sub = rng.fork(static_cast<std::uint64_t>(i));
            out[u] = apply_gaussian(clean[u], sigma / 255.0f, sub);
        } else {
            out[u] = gaussian_blur(clean[u], sigma);
        }
    });
    return out;
}

std::vector<double> gaussian_blur_kernel(float sigma) {
    if (!(sigma >= 0.0f)) throw ConfigError("gaussian_blur: sigma must be >= 0");
    const int radius = static_cast<int>(std::ceil(3.0 * static_cast<double>(sigma)));
    std::vector<double> k(static_cast<std::size_t>(2 * radius + 1), 0.0);
    if (radius == 0) {
        k[0] = 1.0;
        return k;
    }
    const double s2 = 2.0 * static_cast<double>(sigma) * sigma;
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        const double v = std::exp(-static_cast<double>(i) * i / s2);
        k[static_cast<std::size_t>(i + radius)] = v;
        sum += v;
    }
    for (double& v : k) v /= sum;
    return k;
}

ImageBuffer gaussian_blur(const ImageBuffer& img, float sigma) {
    const std::vector<double> k = gaussian_blur_kernel(sigma);
    const int radius = (static_cast<int>(k.size()) - 1) / 2;
    if (radius == 0) return img;

    ImageBuffer out = img;
    std::vector<double> row(static_cast<std::size_t>(img.h) * img.w);
    std::vector<double> tmp(row.size());
    for (int ch = 0; ch < img.c; ++ch) {
        // horizontal pass in double
        for (int y = 0; y < img.h; ++y)
            for (int x = 0; x < img.w; ++x) {
                double acc = 0.0;
                for (int t = -radius; t <= radius; ++t)
                    acc += k[static_cast<std::size_t>(t + radius)] * img.at(ch, y, mirror(x + t, img.w));
                tmp[static_cast<std::size_t>(y) * img.w + x] = acc;
            }
        // vertical pass
        for (int y = 0; y < img.h; ++y)
            for (int x = 0; x < img.w; ++x) {
                double acc = 0.0;
                for (int t = -radius; t <= radius; ++t)
                    acc += k[static_cast<std::size_t>(t + radius)] *
                           tmp[static_cast<std::size_t>(mirror(y + t, img.h)) * img.w + x];
                out.at(ch, y, x) = static_cast<float>(acc);
            }
    }
    return out;
}

std::string image_checksum_hex(const ImageBuffer& img) {
    // same quantization the 16-bit store files use
    std::vector<unsigned char> bytes;
    bytes.reserve(img.v.size() * 2);
    for (float f : img.v) {
        const double c = f < 0.0f ? 0.0 : (f > 1.0f ? 1.0 : static_cast<double>(f));
        const auto q = static_cast<std::uint16_t>(std::lround(c * 65535.0));
        bytes.push_back(static_cast<unsigned char>(q & 0xff));
        bytes.push_back(static_cast<unsigned char>(q >> 8));
    }
    const auto crc = static_cast<std::uint32_t>(
        crc32(0L, bytes.data(), static_cast<uInt>(bytes.size())));
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%08x", crc);
    return buf;
}

std::string target_store_checksum(const TargetStore& store) {
    std::string chain = std::to_string(store.round);
    for (const ImageBuffer& t : store.targets) {
        chain += ':';
        chain += image_checksum_hex(t);
    }
    const auto crc = static_cast<std::uint32_t>(crc32(
        0L, reinterpret_cast<const unsigned char*>(chain.data()), static_cast<uInt>(chain.size())));
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%08x", crc);
    return buf;
}

Tensor<float> stack_images(const std::vector<ImageBuffer>& images) {
    if (images.empty()) throw ShapeError("stack_images: empty batch");
    const ImageBuffer& head = images.front();
    Tensor<float> out(Shape{static_cast<int>(images.size()), head.c, head.h, head.w});
    const std::size_t plane = head.v.size();
    for (std::size_t i = 0; i < images.size(); ++i) {
        if (!images[i].same_shape(head))
            throw ShapeError("stack_images: image " + std::to_string(i) + " shape differs");
        std::copy(images[i].v.begin(), images[i].v.end(), out.v.begin() + i * plane);
    }
    return out;
}

void save_target_store(const TargetStore& store, const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw DataError("cannot create target store directory: " + dir);

    nlohmann::json manifest;
    manifest["round"] = store.round;
    manifest["model_hash"] = store.model_hash;
    manifest["images"] = nlohmann::json::array();
    for (std::size_t i = 0; i < store.targets.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "%04zu.png", i);
        save_image(store.targets[i], (fs::path(dir) / name).string(), 16);
        manifest["images"].push_back({{"file", name},
                                      {"source", store.targets[i].source_id},
                                      {"checksum", image_checksum_hex(store.targets[i])}});
    }
    // manifest last: readers never observe a half-written round
    std::ofstream out(fs::path(dir) / "manifest.json");
    if (!out) throw DataError("cannot write target store manifest under " + dir);
    out << manifest.dump(2) << "\n";
    if (!out) throw DataError("failed writing target store manifest under " + dir);
}

TargetStore load_target_store(const std::string& dir) {
    std::ifstream in(fs::path(dir) / "manifest.json");
    if (!in) throw DataError("target store manifest not found under " + dir);
    nlohmann::json manifest;
    try {
        in >> manifest;
        TargetStore store;
        store.round = manifest.at("round").get<int>();
        store.model_hash = manifest.at("model_hash").get<std::string>();
        for (const auto& entry : manifest.at("images")) {
            ImageBuffer img = load_image((fs::path(dir) / entry.at("file").get<std::string>()).string());
            img.source_id = entry.at("source").get<std::string>();
            if (image_checksum_hex(img) != entry.at("checksum").get<std::string>())
                throw DataError("target store checksum mismatch for " +
                                entry.at("file").get<std::string>());
            store.targets.push_back(std::move(img));
        }
        return store;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("bad target store manifest under " + dir + ": " + e.what());
    }
}

}  // namespace idr

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <type_traits>
#include <vector>

#include "doctest.h"
#include "idr/dataset.hpp"
#include "idr/errors.hpp"
#include "idr/metrics.hpp"

using namespace idr;
namespace fs = std::filesystem;

namespace {

ImageBuffer random_image(int h, int w, int c, RngStream rng, float lo = 0.0f, float hi = 1.0f) {
    ImageBuffer img(h, w, c);
    for (float& v : img.v) v = static_cast<float>(rng.uniform(lo, hi));
    return img;
}

ImageBuffer grid16_image(int h, int w, int c, RngStream rng) {
    ImageBuffer img(h, w, c);
    for (float& v : img.v)
        v = static_cast<float>(rng.uniform_index(65536)) / 65535.0f;
    return img;
}

struct TempDir {
    std::string path;
    explicit TempDir(std::string p) : path(std::move(p)) { fs::remove_all(path); }
    ~TempDir() { fs::remove_all(path); }
};

Tensor<float> identity_fn(const Tensor<float>& t) { return t; }

}  // namespace

TEST_CASE("extract_patches: full-image patch, determinism, bounds") {
    std::vector<ImageBuffer> images;
    images.push_back(random_image(24, 24, 1, RngStream(1, streams::kCorpus)));

    RngStream rng(2, streams::kPatches);
    const auto whole = extract_patches(images, 24, 3, 4, rng);
    REQUIRE(whole.size() == 3);
    for (const auto& p : whole) CHECK(p.v == images[0].v);

    images.push_back(random_image(32, 48, 1, RngStream(3, streams::kCorpus)));
    RngStream r1(4, streams::kPatches), r2(4, streams::kPatches);
    const auto a = extract_patches(images, 16, 200, 4, r1);
    const auto b = extract_patches(images, 16, 200, 4, r2);
    REQUIRE(a.size() == 200);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].h == 16);
        CHECK(a[i].w == 16);
        CHECK(a[i].v == b[i].v);  // same seed, same corners
    }

    bool saw_distinct = false;
    for (std::size_t i = 1; i < a.size(); ++i) saw_distinct = saw_distinct || a[i].v != a[0].v;
    CHECK(saw_distinct);
}

TEST_CASE("extract_patches: rejects bad geometry") {
    std::vector<ImageBuffer> images{random_image(24, 24, 1, RngStream(5, streams::kCorpus))};
    RngStream rng(6, streams::kPatches);
    CHECK_THROWS_WITH_AS(extract_patches(images, 48, 1, 4, rng), doctest::Contains("exceeds"),
                         ShapeError);
    CHECK_THROWS_WITH_AS(extract_patches(images, 18, 1, 4, rng), doctest::Contains("alignment"),
                         ShapeError);
    CHECK_THROWS_AS(extract_patches({}, 8, 1, 4, rng), DataError);

    images.push_back(random_image(24, 24, 3, RngStream(7, streams::kCorpus)));
    CHECK_THROWS_WITH_AS(extract_patches(images, 8, 1, 4, rng), doctest::Contains("channels"),
                         ShapeError);
}

TEST_CASE("make_noisier_noisy: zero noise gives (t, t), targets untouched") {
    std::vector<ImageBuffer> targets;
    for (int i = 0; i < 4; ++i)
        targets.push_back(random_image(16, 16, 1, RngStream(10 + i, streams::kCorpus)));
    const std::vector<ImageBuffer> copies = targets;

    NoiseSpec zero;
    zero.kind = NoiseKind::kGaussian;
    zero.level_lo = zero.level_hi = 0.0f;
    const PairSet pairs = make_noisier_noisy(targets, zero, RngStream(11, streams::kNoise));
    REQUIRE(pairs.size() == 4);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        CHECK(pairs.inputs[i].v == targets[i].v);
        CHECK(pairs.targets[i].v == targets[i].v);
        CHECK(pairs.levels[i] == 0.0f);
        CHECK(targets[i].v == copies[i].v);
    }
}

TEST_CASE("make_noisier_noisy: replay is bitwise, levels stay in range") {
    std::vector<ImageBuffer> targets;
    for (int i = 0; i < 8; ++i)
        targets.push_back(random_image(24, 24, 1, RngStream(20 + i, streams::kCorpus)));

    NoiseSpec spec;
    spec.kind = NoiseKind::kGaussian;
    spec.level_lo = 5.0f;
    spec.level_hi = 20.0f;

    const PairSet p1 = make_noisier_noisy(targets, spec, RngStream(21, streams::kNoise));
    const PairSet p2 = make_noisier_noisy(targets, spec, RngStream(21, streams::kNoise));
    const PairSet p3 = make_noisier_noisy(targets, spec, RngStream(22, streams::kNoise));
    float lo = 1e9f, hi = -1e9f;
    bool differs = false;
    for (std::size_t i = 0; i < p1.size(); ++i) {
        CHECK(p1.inputs[i].v == p2.inputs[i].v);
        CHECK(p1.levels[i] == p2.levels[i]);
        differs = differs || p1.inputs[i].v != p3.inputs[i].v;
        lo = std::min(lo, p1.levels[i]);
        hi = std::max(hi, p1.levels[i]);
    }
    CHECK(differs);  // different stream, different noise
    CHECK(lo >= 5.0f);
    CHECK(hi <= 20.0f);
    CHECK(lo < hi);  // per-pair fresh levels
}

TEST_CASE("make_noisier_noisy: sigma 25 pairs land at the closed-form PSNR") {
    std::vector<ImageBuffer> targets;
    for (int i = 0; i < 100; ++i)
        targets.push_back(random_image(64, 64, 1, RngStream(100 + i, streams::kCorpus), 0.25f, 0.75f));
    NoiseSpec spec;
    spec.kind = NoiseKind::kGaussian;
    spec.level_lo = spec.level_hi = 25.0f;
    const PairSet pairs = make_noisier_noisy(targets, spec, RngStream(23, streams::kNoise));
    double sum = 0.0;
    for (std::size_t i = 0; i < pairs.size(); ++i) sum += psnr(pairs.inputs[i], pairs.targets[i]);
    const double expected = 20.0 * std::log10(255.0 / 25.0);  // 20.17 dB
    CHECK(std::abs(sum / 100.0 - expected) < 0.06);
}

TEST_CASE("denoise_image: tiling is exact for pointwise denoisers") {
    // single tile
    const ImageBuffer small = random_image(128, 128, 1, RngStream(30, streams::kCorpus));
    const ImageBuffer out1 = denoise_image(identity_fn, 4, small);
    CHECK(out1.v == small.v);

    // multi-tile with ragged tails
    const ImageBuffer big = random_image(300, 500, 3, RngStream(31, streams::kCorpus));
    const ImageBuffer out2 = denoise_image(identity_fn, 4, big);
    CHECK(out2.v == big.v);

    const ImageBuffer out3 = denoise_image(
        [](const Tensor<float>& t) {
            Tensor<float> r = t;
            for (float& v : r.v) v = 0.5f * v + 0.125f;
            return r;
        },
        4, big);
    for (std::size_t i = 0; i < big.v.size(); ++i)
        CHECK(out3.v[i] == 0.5f * big.v[i] + 0.125f);
}

TEST_CASE("denoise_image: model channel mismatch is rejected") {
    ModelConfig cfg;
    cfg.levels = 2;
    cfg.base_channels = 2;
    cfg.in_channels = 1;
    const UNet model = UNet::build(cfg);
    const ImageBuffer rgb = random_image(16, 16, 3, RngStream(32, streams::kCorpus));
    CHECK_THROWS_WITH_AS(denoise_image(model, rgb), doctest::Contains("channels"), ShapeError);

    const ImageBuffer gray = random_image(16, 16, 1, RngStream(33, streams::kCorpus));
    const ImageBuffer out = denoise_image(model, gray);
    CHECK(out.same_shape(gray));
    for (float v : out.v) CHECK(std::isfinite(v));
}

TEST_CASE("refine_targets: identity model leaves the store unchanged, round advances") {
    std::vector<ImageBuffer> noisy;
    for (int i = 0; i < 5; ++i)
        noisy.push_back(random_image(40, 40, 1, RngStream(40 + i, streams::kCorpus)));

    TargetStore store;
    store.targets = noisy;
    store.round = 0;

    const TargetStore r1 = refine_targets(identity_fn, 4, "hash-a", noisy, store);
    CHECK(r1.round == 1);
    CHECK(r1.model_hash == "hash-a");
    REQUIRE(r1.targets.size() == noisy.size());
    for (std::size_t i = 0; i < noisy.size(); ++i) {
        CHECK(r1.targets[i].v == noisy[i].v);
        CHECK(r1.targets[i].same_shape(noisy[i]));
    }

    const TargetStore r2 = refine_targets(identity_fn, 4, "hash-b", noisy, r1);
    CHECK(r2.round == 2);
    CHECK(r2.targets.size() == noisy.size());

    TargetStore wrong_count;
    wrong_count.targets.assign(noisy.begin(), noisy.begin() + 3);
    CHECK_THROWS_AS(refine_targets(identity_fn, 4, "h", noisy, wrong_count), ShapeError);

    TargetStore drifted = store;
    drifted.targets[2] = random_image(20, 20, 1, RngStream(50, streams::kCorpus));
    CHECK_THROWS_WITH_AS(refine_targets(identity_fn, 4, "h", noisy, drifted),
                         doctest::Contains("drift"), ShapeError);
}

TEST_CASE("gaussian_blur: kernel normalization and degenerate sigma") {
    CHECK(gaussian_blur_kernel(0.0f) == std::vector<double>{1.0});
    for (const float sigma : {0.5f, 1.0f, 3.0f, 5.0f}) {
        const auto k = gaussian_blur_kernel(sigma);
        CAPTURE(sigma);
        CHECK(static_cast<int>(k.size()) == 2 * static_cast<int>(std::ceil(3.0 * sigma)) + 1);
        double sum = 0.0;
        for (double v : k) sum += v;
        CHECK(std::abs(sum - 1.0) < 1e-12);
        // symmetric and peaked at the center
        for (std::size_t i = 0; i < k.size() / 2; ++i) CHECK(k[i] == k[k.size() - 1 - i]);
        CHECK(k[k.size() / 2] == *std::max_element(k.begin(), k.end()));
    }

    const ImageBuffer img = random_image(20, 20, 1, RngStream(60, streams::kCorpus));
    const ImageBuffer same = gaussian_blur(img, 0.0f);
    CHECK(same.v == img.v);
}

TEST_CASE("gaussian_blur: impulse reads the kernel back out") {
    ImageBuffer impulse(33, 33, 1);
    impulse.at(0, 16, 16) = 1.0f;
    const ImageBuffer out = gaussian_blur(impulse, 1.0f);
    const auto k = gaussian_blur_kernel(1.0f);
    const int r = 3;
    for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx) {
            const double expected = k[static_cast<std::size_t>(dy + r)] * k[static_cast<std::size_t>(dx + r)];
            CHECK(out.at(0, 16 + dy, 16 + dx) == doctest::Approx(expected).epsilon(1e-6));
        }
    CHECK(out.at(0, 16, 16 + r + 1) == 0.0f);  // outside the support
    CHECK(out.at(0, 16 - r - 1, 16) == 0.0f);
}

TEST_CASE("gaussian_blur: constant images pass through, white noise shrinks by sum g^2") {
    const ImageBuffer flat = [&] {
        ImageBuffer img(64, 64, 1);
        for (float& v : img.v) v = 0.37f;
        return img;
    }();
    const ImageBuffer blurred = gaussian_blur(flat, 2.0f);
    for (float v : blurred.v) CHECK(v == doctest::Approx(0.37f).epsilon(1e-6));

    const ImageBuffer noise = random_image(512, 512, 1, RngStream(61, streams::kCorpus));
    const ImageBuffer nb = gaussian_blur(noise, 1.0f);
    const auto k = gaussian_blur_kernel(1.0f);
    double sum_k2 = 0.0;
    for (double v : k) sum_k2 += v * v;
    const double expected_ratio = sum_k2 * sum_k2;  // separable 2-d energy

    auto interior_var = [](const ImageBuffer& img, int margin) {
        double mean = 0.0;
        std::size_t n = 0;
        for (int y = margin; y < img.h - margin; ++y)
            for (int x = margin; x < img.w - margin; ++x) {
                mean += img.at(0, y, x);
                ++n;
            }
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (int y = margin; y < img.h - margin; ++y)
            for (int x = margin; x < img.w - margin; ++x) {
                const double d = img.at(0, y, x) - mean;
                var += d * d;
            }
        return var / static_cast<double>(n - 1);
    };
    const double ratio = interior_var(nb, 4) / interior_var(noise, 4);
    CHECK(ratio == doctest::Approx(expected_ratio).epsilon(0.02));
}

TEST_CASE("make_biased_targets: sigma 0 is identity, variants apply per image") {
    std::vector<ImageBuffer> clean;
    for (int i = 0; i < 10; ++i)
        clean.push_back(random_image(128, 128, 1, RngStream(70 + i, streams::kCorpus), 0.3f, 0.7f));

    const RngStream rng(71, streams::kStudy);
    for (const BiasKind kind : {BiasKind::kGaussianNoise, BiasKind::kGaussianBlur}) {
        const auto out = make_biased_targets(clean, kind, 0.0f, rng);
        REQUIRE(out.size() == clean.size());
        for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i].v == clean[i].v);
    }

    const auto gn = make_biased_targets(clean, BiasKind::kGaussianNoise, 5.0f, rng);
    const auto gn2 = make_biased_targets(clean, BiasKind::kGaussianNoise, 5.0f, rng);
    double se = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < gn.size(); ++i) {
        CHECK(gn[i].v == gn2[i].v);  // pure in the stream
        for (std::size_t j = 0; j < gn[i].v.size(); ++j) {
            const double d = gn[i].v[j] - static_cast<double>(clean[i].v[j]);
            se += d * d;
            ++n;
        }
    }
    const double sigma = 5.0 / 255.0;
    CHECK(se / static_cast<double>(n) == doctest::Approx(sigma * sigma).epsilon(0.02));

    const auto gb = make_biased_targets(clean, BiasKind::kGaussianBlur, 1.5f, rng);
    for (std::size_t i = 0; i < gb.size(); ++i)
        CHECK(gb[i].v == gaussian_blur(clean[i], 1.5f).v);

    CHECK_THROWS_AS(make_biased_targets(clean, BiasKind::kGaussianBlur, -1.0f, rng), ConfigError);
}

TEST_CASE("target store: save/load round-trip with checksums") {
    TargetStore store;
    store.round = 3;
    store.model_hash = "deadbeef01020304";
    for (int i = 0; i < 3; ++i) {
        store.targets.push_back(grid16_image(18, 22, 1, RngStream(80 + i, streams::kCorpus)));
        store.targets.back().source_id = "scene" + std::to_string(i);
    }

    TempDir dir("dataset_test_store");
    save_target_store(store, dir.path);
    CHECK(fs::exists(fs::path(dir.path) / "manifest.json"));
    CHECK(fs::exists(fs::path(dir.path) / "0000.png"));

    const TargetStore back = load_target_store(dir.path);
    CHECK(back.round == 3);
    CHECK(back.model_hash == store.model_hash);
    REQUIRE(back.targets.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(back.targets[i].v == store.targets[i].v);  // grid values survive 16-bit exactly
        CHECK(back.targets[i].source_id == store.targets[i].source_id);
    }
}

TEST_CASE("target store: tampering and missing pieces are caught") {
    TargetStore store;
    store.round = 1;
    store.model_hash = "cafe";
    store.targets.push_back(grid16_image(16, 16, 1, RngStream(90, streams::kCorpus)));

    TempDir dir("dataset_test_tamper");
    save_target_store(store, dir.path);

    // swap the image under the manifest's nose
    save_image(grid16_image(16, 16, 1, RngStream(91, streams::kCorpus)),
               (fs::path(dir.path) / "0000.png").string(), 16);
    CHECK_THROWS_WITH_AS(load_target_store(dir.path), doctest::Contains("checksum"), DataError);

    {
        std::ofstream m(fs::path(dir.path) / "manifest.json");
        m << "{ not json";
    }
    CHECK_THROWS_AS(load_target_store(dir.path), FormatError);
    CHECK_THROWS_AS(load_target_store("dataset_test_absent"), DataError);
}

TEST_CASE("image_checksum_hex: stable, format, sensitive to edits") {
    const ImageBuffer img = grid16_image(8, 8, 1, RngStream(95, streams::kCorpus));
    const std::string sum = image_checksum_hex(img);
    CHECK(sum.size() == 8);
    CHECK(sum == image_checksum_hex(img));
    ImageBuffer other = img;
    other.v[12] += 0.1f;
    CHECK(sum != image_checksum_hex(other));
}

TEST_CASE("load_split: sorted scan of the split directory") {
    TempDir root("dataset_test_data");
    fs::create_directories(fs::path(root.path) / "train");
    save_image(grid16_image(12, 12, 1, RngStream(96, streams::kCorpus)),
               (fs::path(root.path) / "train" / "b.png").string(), 16);
    save_image(grid16_image(12, 12, 1, RngStream(97, streams::kCorpus)),
               (fs::path(root.path) / "train" / "a.png").string(), 16);
    {
        std::ofstream notes(fs::path(root.path) / "train" / "notes.txt");
        notes << "ignored\n";
    }

    const auto images = load_split(root.path, "train");
    REQUIRE(images.size() == 2);
    CHECK(images[0].source_id == "a");
    CHECK(images[1].source_id == "b");

    CHECK_THROWS_AS(load_split(root.path, "test"), DataError);
    fs::create_directories(fs::path(root.path) / "empty");
    CHECK_THROWS_AS(load_split(root.path, "empty"), DataError);
}

TEST_CASE("noisy/clean sets stay distinct types") {
    std::vector<ImageBuffer> imgs{random_image(8, 8, 1, RngStream(98, streams::kCorpus))};
    NoisySet noisy(imgs);
    CleanSet clean(imgs);
    CHECK(noisy.images.size() == 1);
    CHECK(clean.images.size() == 1);
    static_assert(!std::is_convertible_v<CleanSet, NoisySet>);
    static_assert(!std::is_convertible_v<NoisySet, CleanSet>);
    static_assert(!std::is_constructible_v<NoisySet, const CleanSet&>);
}

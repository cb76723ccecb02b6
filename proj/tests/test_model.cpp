#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "idr/checkpoint.hpp"
#include "idr/errors.hpp"
#include "idr/rng.hpp"
#include "idr/unet.hpp"

using namespace idr;

namespace {

ModelConfig tiny_cfg(std::uint64_t seed = 7) {
    ModelConfig cfg;
    cfg.levels = 2;
    cfg.base_channels = 4;
    cfg.init_seed = seed;
    return cfg;
}

Tensor<float> random_batch(int n, int c, int h, int w, std::uint64_t seed) {
    Tensor<float> t({n, c, h, w});
    RngStream rng(seed, streams::kCorpus);
    for (float& v : t.v) v = static_cast<float>(rng.uniform(0.0, 1.0));
    return t;
}

}  // namespace

TEST_CASE("build: parameter tensors follow the spec list and the seed") {
    const ModelConfig cfg = tiny_cfg();
    const UNet model = UNet::build(cfg);
    const auto specs = unet_param_specs(cfg);
    REQUIRE(model.params.size() == specs.size());
    const auto names = model.param_names();
    REQUIRE(names.size() == specs.size());
    for (std::size_t i = 0; i < specs.size(); ++i) {
        CHECK(names[i] == specs[i].name);
        CHECK(model.params[i].shape == specs[i].shape);
    }

    const UNet again = UNet::build(cfg);
    CHECK(again.param_hash() == model.param_hash());
    ModelConfig other = cfg;
    other.init_seed = cfg.init_seed + 1;
    CHECK(UNet::build(other).param_hash() != model.param_hash());
}

TEST_CASE("forward: shape, purity, alignment check") {
    const UNet model = UNet::build(tiny_cfg());
    const std::string before = model.param_hash();
    const Tensor<float> x = random_batch(2, 1, 8, 12, 11);

    const Tensor<float> y1 = model.forward(x);
    const Tensor<float> y2 = model.forward(x);
    CHECK(y1.shape == x.shape);
    CHECK(y1.v == y2.v);
    CHECK(model.param_hash() == before);

    // levels 2 -> alignment 2; odd extents must be rejected
    CHECK(model.alignment() == 2);
    CHECK_THROWS_AS(model.forward(random_batch(1, 1, 7, 8, 12)), ShapeError);
    CHECK_THROWS_AS(model.forward(random_batch(1, 2, 8, 8, 13)), ShapeError);
}

TEST_CASE("forward: a batch equals its singles, element for element") {
    const UNet model = UNet::build(tiny_cfg(21));
    const Tensor<float> batch = random_batch(3, 1, 8, 8, 22);
    const Tensor<float> out = model.forward(batch);
    const std::size_t plane = static_cast<std::size_t>(8 * 8);
    for (int i = 0; i < 3; ++i) {
        Tensor<float> one({1, 1, 8, 8});
        std::copy(batch.v.begin() + static_cast<std::ptrdiff_t>(i * plane),
                  batch.v.begin() + static_cast<std::ptrdiff_t>((i + 1) * plane), one.v.begin());
        const Tensor<float> single = model.forward(one);
        for (std::size_t k = 0; k < plane; ++k)
            CHECK(single.v[k] == out.v[static_cast<std::size_t>(i) * plane + k]);
    }
}

TEST_CASE("forward: zero parameters map everything to zero") {
    UNet model = UNet::build(tiny_cfg());
    for (auto& p : model.params) std::fill(p.v.begin(), p.v.end(), 0.0f);
    const Tensor<float> y = model.forward(random_batch(1, 1, 8, 8, 31));
    for (float v : y.v) CHECK(v == 0.0f);
}

TEST_CASE("train_step: lr 0 reports the loss but moves nothing") {
    UNet model = UNet::build(tiny_cfg(41));
    const std::string before = model.param_hash();
    const Tensor<float> x = random_batch(2, 1, 8, 8, 42);
    const Tensor<float> t = random_batch(2, 1, 8, 8, 43);

    AdamState<float> adam;
    adam.hp.lr = 0.0;
    const float loss = model.train_step(adam, x, t);
    CHECK(model.param_hash() == before);
    CHECK(adam.t == 1);

    // the reported loss is the plain L1 between prediction and target
    const Tensor<float> y = model.forward(x);
    double acc = 0.0;
    for (std::size_t i = 0; i < y.v.size(); ++i) acc += std::abs(static_cast<double>(y.v[i] - t.v[i]));
    CHECK(loss == doctest::Approx(acc / static_cast<double>(y.v.size())).epsilon(1e-5));
}

TEST_CASE("train_step: overfits a single fixed pair") {
    UNet model = UNet::build(tiny_cfg(51));
    const Tensor<float> x = random_batch(1, 1, 16, 16, 52);
    const Tensor<float> t = random_batch(1, 1, 16, 16, 53);

    AdamState<float> adam;
    adam.hp.lr = 3e-3;
    const float first = model.train_step(adam, x, t);
    float last = first;
    for (int i = 0; i < 300; ++i) last = model.train_step(adam, x, t);
    CHECK(last < 0.25f * first);
}

TEST_CASE("train_step: bitwise repeatable from the same start") {
    const Tensor<float> x = random_batch(2, 1, 8, 8, 61);
    const Tensor<float> t = random_batch(2, 1, 8, 8, 62);
    std::string hashes[2];
    for (int trial = 0; trial < 2; ++trial) {
        UNet model = UNet::build(tiny_cfg(63));
        AdamState<float> adam;
        for (int i = 0; i < 10; ++i) model.train_step(adam, x, t);
        hashes[trial] = model.param_hash();
    }
    CHECK(hashes[0] == hashes[1]);
}

TEST_CASE("train_step: runaway learning rate raises NumericError") {
    UNet model = UNet::build(tiny_cfg(71));
    const Tensor<float> x = random_batch(1, 1, 8, 8, 72);
    const Tensor<float> t = random_batch(1, 1, 8, 8, 73);
    AdamState<float> adam;
    adam.hp.lr = 1e18;
    bool blew_up = false;
    for (int i = 0; i < 50 && !blew_up; ++i) {
        try {
            model.train_step(adam, x, t);
        } catch (const NumericError&) {
            blew_up = true;
        }
    }
    CHECK(blew_up);
}

TEST_CASE("checkpoint: round-trips bit-exactly") {
    UNet model = UNet::build(tiny_cfg(81));
    AdamState<float> adam;
    const Tensor<float> x = random_batch(1, 1, 8, 8, 82);
    for (int i = 0; i < 3; ++i) model.train_step(adam, x, x);

    const std::string path = "/tmp/idr_test_model.ckpt";
    save_checkpoint(model, path);
    const UNet loaded = load_checkpoint(path);
    CHECK(loaded.cfg.levels == model.cfg.levels);
    CHECK(loaded.cfg.base_channels == model.cfg.base_channels);
    CHECK(loaded.cfg.init_seed == model.cfg.init_seed);
    REQUIRE(loaded.params.size() == model.params.size());
    for (std::size_t i = 0; i < model.params.size(); ++i)
        CHECK(loaded.params[i].v == model.params[i].v);
    CHECK(checkpoint_hash(loaded) == checkpoint_hash(model));
    std::remove(path.c_str());
}

TEST_CASE("checkpoint: corruption and truncation are caught") {
    const UNet model = UNet::build(tiny_cfg(91));
    const std::string path = "/tmp/idr_test_model_bad.ckpt";
    save_checkpoint(model, path);

    std::ifstream in(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();

    {
        std::string flipped = bytes;
        flipped[flipped.size() / 2] = static_cast<char>(flipped[flipped.size() / 2] ^ 0x40);
        std::ofstream(path, std::ios::binary) << flipped;
        CHECK_THROWS_AS(load_checkpoint(path), FormatError);
    }
    {
        std::ofstream(path, std::ios::binary) << bytes.substr(0, bytes.size() - 9);
        CHECK_THROWS_AS(load_checkpoint(path), FormatError);
    }
    CHECK_THROWS_AS(load_checkpoint("/tmp/idr_no_such_file.ckpt"), FormatError);
    std::remove(path.c_str());
}

TEST_CASE("model config validation") {
    ModelConfig cfg = tiny_cfg();
    cfg.levels = 0;
    CHECK_THROWS_AS(validate(cfg), ShapeError);
    cfg = tiny_cfg();
    cfg.base_channels = 0;
    CHECK_THROWS_AS(validate(cfg), ShapeError);
    cfg = tiny_cfg();
    cfg.in_channels = 0;
    CHECK_THROWS_AS(validate(cfg), ShapeError);
}

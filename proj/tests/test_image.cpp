#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "idr/errors.hpp"
#include "idr/image.hpp"
#include "idr/rng.hpp"

using namespace idr;

namespace {

ImageBuffer random_image(int h, int w, int c, RngStream rng) {
    ImageBuffer img(h, w, c);
    for (float& v : img.v) v = static_cast<float>(rng.uniform());
    return img;
}

// values already on the quantization grid of the given depth
ImageBuffer grid_image(int h, int w, int c, int bit_depth, RngStream rng) {
    const unsigned maxval = bit_depth == 8 ? 255u : 65535u;
    ImageBuffer img(h, w, c);
    for (float& v : img.v)
        v = static_cast<float>(rng.uniform_index(maxval + 1)) / static_cast<float>(maxval);
    return img;
}

struct TempFile {
    std::string path;
    explicit TempFile(std::string p) : path(std::move(p)) {}
    ~TempFile() { std::remove(path.c_str()); }
};

void write_bytes(const std::string& path, const std::vector<unsigned char>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
}

std::vector<unsigned char> read_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    return std::vector<unsigned char>(std::istreambuf_iterator<char>(in),
                                      std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("png: grid-value images round-trip bitwise at both depths") {
    for (const int depth : {8, 16}) {
        CAPTURE(depth);
        const ImageBuffer img = grid_image(21, 17, 1, depth, RngStream(depth, 1));
        TempFile f("image_test_rt.png");
        save_image(img, f.path, depth);
        const ImageBuffer back = load_image(f.path);
        CHECK(back.h == img.h);
        CHECK(back.w == img.w);
        CHECK(back.c == img.c);
        CHECK(back.bit_depth == depth);
        CHECK(back.v == img.v);
    }
}

TEST_CASE("png: arbitrary floats survive one quantization, then stabilize") {
    const ImageBuffer img = random_image(14, 23, 3, RngStream(2, 1));
    TempFile f("image_test_q.png");
    save_image(img, f.path, 16);
    const ImageBuffer once = load_image(f.path);
    save_image(once, f.path, 16);
    const ImageBuffer twice = load_image(f.path);
    CHECK(once.v == twice.v);
    // quantization error bounded by half a 16-bit step
    for (std::size_t i = 0; i < img.v.size(); ++i)
        CHECK(std::abs(once.v[i] - img.v[i]) <= 0.5f / 65535.0f + 1e-7f);
}

TEST_CASE("png: rgba and rgb channel counts") {
    for (const int c : {3, 4}) {
        CAPTURE(c);
        const ImageBuffer img = grid_image(9, 11, c, 8, RngStream(c, 2));
        TempFile f("image_test_c.png");
        save_image(img, f.path, 8);
        const ImageBuffer back = load_image(f.path);
        CHECK(back.c == c);
        CHECK(back.v == img.v);
    }
    const ImageBuffer two(4, 4, 2);
    CHECK_THROWS_AS(save_image(two, "image_test_bad.png", 8), FormatError);
}

TEST_CASE("png: values outside [0,1] clamp on export") {
    ImageBuffer img(4, 4, 1);
    for (float& v : img.v) v = -0.25f;
    img.v[5] = 1.75f;
    TempFile f("image_test_clamp.png");
    save_image(img, f.path, 8);
    const ImageBuffer back = load_image(f.path);
    for (std::size_t i = 0; i < back.v.size(); ++i)
        CHECK(back.v[i] == (i == 5 ? 1.0f : 0.0f));
}

TEST_CASE("pnm: round-trips, comments, and malformed headers") {
    const ImageBuffer gray = grid_image(12, 7, 1, 16, RngStream(3, 1));
    TempFile fg("image_test.pgm");
    save_image(gray, fg.path, 16);
    CHECK(load_image(fg.path).v == gray.v);

    const ImageBuffer rgb = grid_image(6, 10, 3, 8, RngStream(4, 1));
    TempFile fc("image_test.ppm");
    save_image(rgb, fc.path, 8);
    CHECK(load_image(fc.path).v == rgb.v);

    {
        std::ofstream out("image_test_comment.pgm", std::ios::binary);
        out << "P5\n# a comment\n2 1\n255\n";
        out.put(char(0));
        out.put(char(255));
    }
    TempFile fm("image_test_comment.pgm");
    const ImageBuffer commented = load_image(fm.path);
    CHECK(commented.w == 2);
    CHECK(commented.at(0, 0, 0) == 0.0f);
    CHECK(commented.at(0, 0, 1) == 1.0f);

    {
        std::ofstream out("image_test_bad.pgm", std::ios::binary);
        out << "P5\n2 2\n100\nxxxx";  // maxval must be 255 or 65535
    }
    TempFile fb("image_test_bad.pgm");
    CHECK_THROWS_AS(load_image(fb.path), FormatError);

    {
        std::ofstream out("image_test_short.pgm", std::ios::binary);
        out << "P5\n4 4\n255\nab";  // truncated payload
    }
    TempFile fs("image_test_short.pgm");
    CHECK_THROWS_AS(load_image(fs.path), FormatError);
}

TEST_CASE("raw: RGGB packing and black-level anchors") {
    // 4x4 bayer frame, black 64, white 1023
    const std::uint16_t frame[16] = {64, 543, 100, 200,  300, 400,  500, 600,
                                     1023, 64, 700, 800,  900, 1000, 64,  1023};
    std::vector<unsigned char> bytes;
    const std::string header = "4 4 bayer=RGGB black=64 white=1023\n";
    bytes.insert(bytes.end(), header.begin(), header.end());
    for (std::uint16_t v : frame) {
        bytes.push_back(static_cast<unsigned char>(v & 0xff));
        bytes.push_back(static_cast<unsigned char>(v >> 8));
    }
    TempFile f("image_test_frame.raw");
    write_bytes(f.path, bytes);

    const ImageBuffer img = load_image(f.path);
    CHECK(img.h == 2);
    CHECK(img.w == 2);
    CHECK(img.c == 4);
    CHECK(img.raw_black == 64);
    CHECK(img.raw_white == 1023);

    CHECK(img.at(0, 0, 0) == 0.0f);  // pixel at black level
    CHECK(img.at(1, 0, 0) == doctest::Approx((543.0 - 64.0) / 959.0).epsilon(1e-6));
    CHECK(img.at(2, 0, 0) == doctest::Approx((300.0 - 64.0) / 959.0));  // raw(1,0)
    CHECK(img.at(3, 0, 0) == doctest::Approx((400.0 - 64.0) / 959.0));  // raw(1,1)
    CHECK(img.at(0, 0, 1) == doctest::Approx((100.0 - 64.0) / 959.0));
    CHECK(img.at(0, 1, 0) == 1.0f);  // raw(2,0) = white
    CHECK(img.at(1, 1, 0) == 0.0f);  // raw(2,1) = black
    CHECK(img.at(2, 1, 1) == 0.0f);  // raw(3,2) = 64
    CHECK(img.at(3, 1, 1) == 1.0f);  // raw(3,3) = white
}

TEST_CASE("raw: ingest then export reproduces the u16 payload") {
    RngStream rng(5, 1);
    std::vector<unsigned char> bytes;
    const std::string header = "8 6 bayer=RGGB black=64 white=1023\n";
    bytes.insert(bytes.end(), header.begin(), header.end());
    for (int i = 0; i < 48; ++i) {
        const auto v = static_cast<std::uint16_t>(64 + rng.uniform_index(1023 - 64 + 1));
        bytes.push_back(static_cast<unsigned char>(v & 0xff));
        bytes.push_back(static_cast<unsigned char>(v >> 8));
    }
    TempFile f("image_test_rt.raw");
    write_bytes(f.path, bytes);

    const ImageBuffer img = load_image(f.path);
    TempFile g("image_test_rt2.raw");
    save_image(img, g.path);
    CHECK(read_bytes(g.path) == bytes);
}

TEST_CASE("raw: malformed inputs") {
    auto reject = [](const std::string& name, const std::string& content) {
        const std::string path = "image_test_" + name;
        std::ofstream out(path, std::ios::binary);
        out << content;
        out.close();
        CHECK_THROWS_AS(load_image(path), FormatError);
        std::remove(path.c_str());
    };
    reject("r1.raw", "4 4 bayer=GRBG black=64 white=1023\n");        // wrong pattern
    reject("r2.raw", "3 4 bayer=RGGB black=64 white=1023\n");        // odd width
    reject("r3.raw", "4 4 bayer=RGGB black=200 white=100\n");        // black >= white
    reject("r4.raw", "4 4 bayer=RGGB black=64 white=1023\nxx");      // short payload
    reject("r5.raw", "4 4 bayer=RGGB black=64 white=1023 tint=2\n"); // unknown key
    reject("r6.raw", "nonsense\n");

    ImageBuffer not_raw(4, 4, 3);
    CHECK_THROWS_AS(save_image(not_raw, "image_test_x.raw"), FormatError);
    ImageBuffer no_levels(4, 4, 4);
    CHECK_THROWS_AS(save_image(no_levels, "image_test_x.raw"), FormatError);
}

TEST_CASE("dispatch and error taxonomy") {
    CHECK_THROWS_AS(load_image("image_test_missing.png"), DataError);
    CHECK_THROWS_AS(load_image("image_test.bmp"), FormatError);

    {
        std::ofstream out("image_test_not.png", std::ios::binary);
        out << "not a png at all";
    }
    TempFile fn("image_test_not.png");
    CHECK_THROWS_AS(load_image(fn.path), FormatError);

    {
        // valid signature, garbage chunks
        std::ofstream out("image_test_corrupt.png", std::ios::binary);
        const unsigned char sig[8] = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
        out.write(reinterpret_cast<const char*>(sig), 8);
        out << "garbage garbage garbage";
    }
    TempFile fc("image_test_corrupt.png");
    CHECK_THROWS_AS(load_image(fc.path), FormatError);

    CHECK_THROWS_AS(save_image(ImageBuffer(), "image_test_e.png", 8), ShapeError);
    CHECK_THROWS_AS(save_image(ImageBuffer(2, 2, 1), "image_test_e.png", 12), FormatError);
}

TEST_CASE("tensor bridge keeps layout and batch indexing") {
    const ImageBuffer img = random_image(5, 7, 3, RngStream(6, 1));
    const Tensor<float> t = image_to_tensor(img);
    REQUIRE(t.shape == (Shape{1, 3, 5, 7}));
    CHECK(std::vector<float>(t.v.begin(), t.v.end()) == img.v);

    const ImageBuffer back = tensor_to_image(t, 0);
    CHECK(back.same_shape(img));
    CHECK(back.v == img.v);

    Tensor<float> batch(Shape{2, 3, 5, 7});
    std::copy(t.v.begin(), t.v.end(), batch.v.begin() + static_cast<std::ptrdiff_t>(t.v.size()));
    const ImageBuffer second = tensor_to_image(batch, 1);
    CHECK(second.v == img.v);
    CHECK_THROWS_AS(tensor_to_image(batch, 2), ShapeError);
    CHECK_THROWS_AS(tensor_to_image(Tensor<float>(Shape{2, 3}), 0), ShapeError);
}

TEST_CASE("clamp01 clips both tails") {
    ImageBuffer img(1, 4, 1);
    img.v = {-1.0f, 0.25f, 0.75f, 2.0f};
    const ImageBuffer c = clamp01(img);
    CHECK(c.v == std::vector<float>{0.0f, 0.25f, 0.75f, 1.0f});
}

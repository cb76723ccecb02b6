#include "idr/image.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "idr/errors.hpp"

namespace idr {
namespace {

bool ends_with(const std::string& s, const char* suffix) {
    const std::size_t n = std::strlen(suffix);
    return s.size() >= n && s.compare(s.size() - n, n, suffix) == 0;
}

float dequant(unsigned v, unsigned maxval) { return static_cast<float>(v) / static_cast<float>(maxval); }

unsigned quant(float v, unsigned maxval) {
    const float x = std::min(1.f, std::max(0.f, v));
    return static_cast<unsigned>(std::lround(static_cast<double>(x) * maxval));
}

struct FileCloser {
    std::FILE* f;
    ~FileCloser() {
        if (f) std::fclose(f);
    }
};

// ---- PNG ----

ImageBuffer load_png(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw DataError("cannot open image: " + path);
    FileCloser closer{f};

    png_byte header[8];
    if (std::fread(header, 1, 8, f) != 8 || png_sig_cmp(header, 0, 8))
        throw FormatError("not a PNG file: " + path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw FormatError("libpng init failure");
    }

    std::vector<png_byte> data;
    std::vector<png_bytep> rows;
    int width = 0, height = 0, channels = 0, depth = 0;
    bool failed = false;
    if (setjmp(png_jmpbuf(png))) {
        failed = true;
    } else {
        png_init_io(png, f);
        png_set_sig_bytes(png, 8);
        png_read_info(png, info);

        width = static_cast<int>(png_get_image_width(png, info));
        height = static_cast<int>(png_get_image_height(png, info));
        depth = png_get_bit_depth(png, info);
        const int color = png_get_color_type(png, info);

        if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
        if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
        png_read_update_info(png, info);

        depth = png_get_bit_depth(png, info);
        channels = png_get_channels(png, info);
        const std::size_t rowbytes = png_get_rowbytes(png, info);
        data.resize(rowbytes * static_cast<std::size_t>(height));
        rows.resize(static_cast<std::size_t>(height));
        for (int y = 0; y < height; ++y) rows[static_cast<std::size_t>(y)] = data.data() + rowbytes * static_cast<std::size_t>(y);
        png_read_image(png, rows.data());
        png_read_end(png, nullptr);
    }
    png_destroy_read_struct(&png, &info, nullptr);
    if (failed) throw FormatError("corrupt PNG: " + path);
    if (depth != 8 && depth != 16) throw FormatError("unsupported PNG bit depth in " + path);
    if (channels < 1 || channels > 4) throw FormatError("unsupported PNG channel count in " + path);

    ImageBuffer img(height, width, channels);
    img.bit_depth = depth;
    img.source_id = path;
    const unsigned maxval = depth == 8 ? 255u : 65535u;
    const std::size_t stride = static_cast<std::size_t>(width) * channels * (depth / 8);
    for (int y = 0; y < height; ++y) {
        const png_byte* row = data.data() + stride * static_cast<std::size_t>(y);
        for (int x = 0; x < width; ++x)
            for (int ch = 0; ch < channels; ++ch) {
                unsigned raw;
                if (depth == 8) {
                    raw = row[x * channels + ch];
                } else {  // PNG stores 16-bit big-endian
                    const png_byte* p = row + 2 * (x * channels + ch);
                    raw = (static_cast<unsigned>(p[0]) << 8) | p[1];
                }
                img.at(ch, y, x) = dequant(raw, maxval);
            }
    }
    return img;
}

void save_png(const ImageBuffer& img, const std::string& path, int bit_depth) {
    if (bit_depth != 8 && bit_depth != 16) throw FormatError("PNG bit depth must be 8 or 16");
    int color;
    switch (img.c) {
        case 1: color = PNG_COLOR_TYPE_GRAY; break;
        case 3: color = PNG_COLOR_TYPE_RGB; break;
        case 4: color = PNG_COLOR_TYPE_RGBA; break;
        default: throw FormatError("PNG export supports 1/3/4 channels, image has " + std::to_string(img.c));
    }

    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw DataError("cannot open for writing: " + path);
    FileCloser closer{f};

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw FormatError("libpng init failure");
    }

    const unsigned maxval = bit_depth == 8 ? 255u : 65535u;
    const std::size_t stride = static_cast<std::size_t>(img.w) * img.c * (bit_depth / 8);
    std::vector<png_byte> data(stride * static_cast<std::size_t>(img.h));
    for (int y = 0; y < img.h; ++y) {
        png_byte* row = data.data() + stride * static_cast<std::size_t>(y);
        for (int x = 0; x < img.w; ++x)
            for (int ch = 0; ch < img.c; ++ch) {
                const unsigned q = quant(img.at(ch, y, x), maxval);
                if (bit_depth == 8) {
                    row[x * img.c + ch] = static_cast<png_byte>(q);
                } else {
                    row[2 * (x * img.c + ch)] = static_cast<png_byte>(q >> 8);
                    row[2 * (x * img.c + ch) + 1] = static_cast<png_byte>(q & 0xff);
                }
            }
    }
    std::vector<png_bytep> rows(static_cast<std::size_t>(img.h));
    for (int y = 0; y < img.h; ++y) rows[static_cast<std::size_t>(y)] = data.data() + stride * static_cast<std::size_t>(y);

    bool failed = false;
    if (setjmp(png_jmpbuf(png))) {
        failed = true;
    } else {
        png_init_io(png, f);
        png_set_IHDR(png, info, static_cast<png_uint_32>(img.w), static_cast<png_uint_32>(img.h),
                     bit_depth, color, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                     PNG_FILTER_TYPE_DEFAULT);
        png_write_info(png, info);
        png_write_image(png, rows.data());
        png_write_end(png, nullptr);
    }
    png_destroy_write_struct(&png, &info);
    if (failed) throw FormatError("PNG write failure: " + path);
}

// ---- PGM / PPM ----

int pnm_token(std::FILE* f) {
    // skips whitespace and '#' comments, returns a non-negative integer
    int ch = std::fgetc(f);
    while (ch != EOF) {
        if (ch == '#') {
            while (ch != EOF && ch != '\n') ch = std::fgetc(f);
        } else if (std::isspace(ch)) {
            ch = std::fgetc(f);
        } else {
            break;
        }
    }
    if (ch == EOF || !std::isdigit(ch)) return -1;
    int value = 0;
    while (ch != EOF && std::isdigit(ch)) {
        value = value * 10 + (ch - '0');
        ch = std::fgetc(f);
    }
    return value;
}

ImageBuffer load_pnm(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw DataError("cannot open image: " + path);
    FileCloser closer{f};

    char magic[2];
    if (std::fread(magic, 1, 2, f) != 2 || magic[0] != 'P' || (magic[1] != '5' && magic[1] != '6'))
        throw FormatError("not a P5/P6 PNM file: " + path);
    const int channels = magic[1] == '5' ? 1 : 3;

    const int width = pnm_token(f);
    const int height = pnm_token(f);
    const int maxval = pnm_token(f);
    if (width <= 0 || height <= 0 || (maxval != 255 && maxval != 65535))
        throw FormatError("bad PNM header in " + path);

    const int bytes = maxval > 255 ? 2 : 1;
    const std::size_t payload = static_cast<std::size_t>(width) * height * channels * bytes;
    std::vector<unsigned char> data(payload);
    if (std::fread(data.data(), 1, payload, f) != payload)
        throw FormatError("truncated PNM payload in " + path);

    ImageBuffer img(height, width, channels);
    img.bit_depth = bytes * 8;
    img.source_id = path;
    std::size_t off = 0;
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
            for (int ch = 0; ch < channels; ++ch) {
                unsigned raw;
                if (bytes == 1) {
                    raw = data[off++];
                } else {  // PNM 16-bit is big-endian
                    raw = (static_cast<unsigned>(data[off]) << 8) | data[off + 1];
                    off += 2;
                }
                img.at(ch, y, x) = dequant(raw, static_cast<unsigned>(maxval));
            }
    return img;
}

void save_pnm(const ImageBuffer& img, const std::string& path, int bit_depth) {
    if (img.c != 1 && img.c != 3)
        throw FormatError("PNM export supports 1 or 3 channels, image has " + std::to_string(img.c));
    if (bit_depth != 8 && bit_depth != 16) throw FormatError("PNM bit depth must be 8 or 16");

    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw DataError("cannot open for writing: " + path);
    FileCloser closer{f};

    const unsigned maxval = bit_depth == 8 ? 255u : 65535u;
    std::fprintf(f, "P%c\n%d %d\n%u\n", img.c == 1 ? '5' : '6', img.w, img.h, maxval);
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x)
            for (int ch = 0; ch < img.c; ++ch) {
                const unsigned q = quant(img.at(ch, y, x), maxval);
                if (bit_depth == 8) {
                    std::fputc(static_cast<int>(q), f);
                } else {
                    std::fputc(static_cast<int>(q >> 8), f);
                    std::fputc(static_cast<int>(q & 0xff), f);
                }
            }
}

// ---- packed raw ----

ImageBuffer load_raw(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open image: " + path);

    std::string header;
    if (!std::getline(in, header)) throw FormatError("missing raw header in " + path);

    int width = 0, height = 0, black = -1, white = -1;
    std::string bayer;
    std::istringstream hs(header);
    if (!(hs >> width >> height)) throw FormatError("bad raw header in " + path);
    std::string token;
    while (hs >> token) {
        const auto eq = token.find('=');
        if (eq == std::string::npos) throw FormatError("bad raw header token '" + token + "' in " + path);
        const std::string key = token.substr(0, eq), val = token.substr(eq + 1);
        if (key == "bayer") bayer = val;
        else if (key == "black") black = std::stoi(val);
        else if (key == "white") white = std::stoi(val);
        else throw FormatError("unknown raw header key '" + key + "' in " + path);
    }
    if (bayer != "RGGB") throw FormatError("unsupported bayer pattern '" + bayer + "' in " + path);
    if (width <= 0 || height <= 0 || width % 2 || height % 2)
        throw FormatError("raw extents must be positive and even in " + path);
    if (black < 0 || white <= black) throw FormatError("raw needs black < white levels in " + path);

    const std::size_t count = static_cast<std::size_t>(width) * height;
    std::vector<unsigned char> payload(count * 2);
    in.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
    if (static_cast<std::size_t>(in.gcount()) != payload.size())
        throw FormatError("raw payload size mismatch in " + path);

    // pack RGGB quads into 4 half-resolution planes
    ImageBuffer img(height / 2, width / 2, 4);
    img.bit_depth = 16;
    img.source_id = path;
    img.raw_black = black;
    img.raw_white = white;
    const float scale = 1.f / static_cast<float>(white - black);
    auto sample = [&](int y, int x) {
        const std::size_t i = (static_cast<std::size_t>(y) * width + x) * 2;
        const unsigned raw = static_cast<unsigned>(payload[i]) | (static_cast<unsigned>(payload[i + 1]) << 8);
        const float val = (static_cast<float>(raw) - static_cast<float>(black)) * scale;
        return std::min(1.f, std::max(0.f, val));
    };
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x) {
            img.at(0, y, x) = sample(2 * y, 2 * x);
            img.at(1, y, x) = sample(2 * y, 2 * x + 1);
            img.at(2, y, x) = sample(2 * y + 1, 2 * x);
            img.at(3, y, x) = sample(2 * y + 1, 2 * x + 1);
        }
    return img;
}

void save_raw(const ImageBuffer& img, const std::string& path) {
    if (img.c != 4) throw FormatError("raw export needs a packed 4-channel image");
    if (img.raw_black < 0 || img.raw_white <= img.raw_black)
        throw FormatError("raw export needs recorded black/white levels");

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open for writing: " + path);
    const int width = img.w * 2, height = img.h * 2;
    out << width << " " << height << " bayer=RGGB black=" << img.raw_black
        << " white=" << img.raw_white << "\n";

    const float span = static_cast<float>(img.raw_white - img.raw_black);
    std::vector<unsigned char> payload(static_cast<std::size_t>(width) * height * 2);
    auto emit = [&](int y, int x, float v) {
        const float clamped = std::min(1.f, std::max(0.f, v));
        const long q = std::lround(static_cast<double>(clamped) * span) + img.raw_black;
        const std::size_t i = (static_cast<std::size_t>(y) * width + x) * 2;
        payload[i] = static_cast<unsigned char>(q & 0xff);
        payload[i + 1] = static_cast<unsigned char>((q >> 8) & 0xff);
    };
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x) {
            emit(2 * y, 2 * x, img.at(0, y, x));
            emit(2 * y, 2 * x + 1, img.at(1, y, x));
            emit(2 * y + 1, 2 * x, img.at(2, y, x));
            emit(2 * y + 1, 2 * x + 1, img.at(3, y, x));
        }
    out.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
    if (!out) throw FormatError("short write on raw: " + path);
}

}  // namespace

ImageBuffer load_image(const std::string& path) {
    if (ends_with(path, ".png")) return load_png(path);
    if (ends_with(path, ".pgm") || ends_with(path, ".ppm")) return load_pnm(path);
    if (ends_with(path, ".raw")) return load_raw(path);
    throw FormatError("unsupported image format: " + path);
}

void save_image(const ImageBuffer& img, const std::string& path, int bit_depth) {
    if (img.h <= 0 || img.w <= 0 || img.c <= 0) throw ShapeError("save_image: empty image");
    if (ends_with(path, ".png")) return save_png(img, path, bit_depth);
    if (ends_with(path, ".pgm") || ends_with(path, ".ppm")) return save_pnm(img, path, bit_depth);
    if (ends_with(path, ".raw")) return save_raw(img, path);
    throw FormatError("unsupported image format: " + path);
}

Tensor<float> image_to_tensor(const ImageBuffer& img) {
    Tensor<float> t(Shape{1, img.c, img.h, img.w});
    std::copy(img.v.begin(), img.v.end(), t.v.begin());
    return t;
}

ImageBuffer tensor_to_image(const Tensor<float>& t, int batch_index) {
    if (t.rank() != 4) throw ShapeError("tensor_to_image: need a 4-d tensor");
    if (batch_index < 0 || batch_index >= t.dim(0)) throw ShapeError("tensor_to_image: batch index out of range");
    ImageBuffer img(t.dim(2), t.dim(3), t.dim(1));
    const std::size_t plane = img.v.size();
    std::copy_n(t.v.begin() + static_cast<std::ptrdiff_t>(plane) * batch_index, plane, img.v.begin());
    return img;
}

ImageBuffer clamp01(ImageBuffer img) {
    for (auto& x : img.v) x = std::min(1.f, std::max(0.f, x));
    return img;
}

}  // namespace idr

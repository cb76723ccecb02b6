#pragma once

#include <string>
#include <vector>

#include "idr/tensor.hpp"

namespace idr {

/// Planar CHW image with values in [0,1] at ingest (noise application may
/// push values outside; export clamps). Raw Bayer frames are packed into a
/// half-resolution 4-channel plane (R, G1, G2, B) and remember their black/
/// white levels so export can reproduce the original u16 payload.
struct ImageBuffer {
    int h = 0, w = 0, c = 0;
    std::vector<float> v;  // c*h*w, plane-major

    std::string source_id;
    int bit_depth = 8;
    int raw_black = -1;  // >= 0 only for packed raw frames
    int raw_white = -1;

    ImageBuffer() = default;
    ImageBuffer(int h_, int w_, int c_)
        : h(h_), w(w_), c(c_), v(static_cast<std::size_t>(h_) * w_ * c_, 0.f) {}

    float& at(int ch, int y, int x) {
        return v[(static_cast<std::size_t>(ch) * h + y) * w + x];
    }
    float at(int ch, int y, int x) const {
        return v[(static_cast<std::size_t>(ch) * h + y) * w + x];
    }
    std::size_t pixels() const { return static_cast<std::size_t>(h) * w; }
    bool same_shape(const ImageBuffer& o) const { return h == o.h && w == o.w && c == o.c; }
};

// Format picked from the extension: .png, .pgm/.ppm, .raw. Raw files carry a
// text header "w h bayer=RGGB black=.. white=.." and a little-endian u16
// plane; ingest subtracts the black level and divides by (white-black).
ImageBuffer load_image(const std::string& path);

// bit_depth 8 or 16 for PNG/PNM; ignored for .raw (always u16 with the
// buffer's recorded levels). Values are clamped to [0,1] before quantizing.
void save_image(const ImageBuffer& img, const std::string& path, int bit_depth = 8);

// Batch of one as an NCHW tensor and back.
Tensor<float> image_to_tensor(const ImageBuffer& img);
ImageBuffer tensor_to_image(const Tensor<float>& t, int batch_index = 0);

ImageBuffer clamp01(ImageBuffer img);

}  // namespace idr

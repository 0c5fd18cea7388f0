#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dehazekit/tensor.hpp"

namespace dhz {

// Images are H x W x 3 tensors of doubles in [0, 1]. 8-bit quantization
// happens only at file I/O so sub-1/255 perturbations survive in memory.
using Image = Tensor;

inline Image make_image(int height, int width, double fill = 0.0) {
    if (height < 1 || width < 1) throw std::invalid_argument("image: nonpositive size");
    return Image({height, width, 3}, fill);
}

inline bool is_image_shape(const Tensor& t) {
    return t.shape.size() == 3 && t.shape[2] == 3 && t.shape[0] >= 1 && t.shape[1] >= 1;
}

inline int image_height(const Image& im) { return im.dim(0); }
inline int image_width(const Image& im) { return im.dim(1); }

inline double& image_at(Image& im, int r, int c, int ch) {
    return im[(static_cast<int64_t>(r) * im.dim(1) + c) * 3 + ch];
}
inline double image_at(const Image& im, int r, int c, int ch) {
    return im[(static_cast<int64_t>(r) * im.dim(1) + c) * 3 + ch];
}

inline void clip01(Tensor& t) {
    for (double& v : t.data) v = std::clamp(v, 0.0, 1.0);
}

inline Tensor clipped01(Tensor t) {
    clip01(t);
    return t;
}

// Full value-range / minimum-size check, applied wherever images enter the
// toolkit from outside (file loads, synthesized datasets). Metric and attack
// internals work on smaller toy tensors in tests and skip this.
inline void validate_image(const Image& im, int min_side = 8) {
    if (!is_image_shape(im)) throw std::invalid_argument("image: expected HxWx3 tensor");
    if (im.dim(0) < min_side || im.dim(1) < min_side)
        throw std::invalid_argument("image: sides must be >= " + std::to_string(min_side));
    for (double v : im.data)
        if (!(v >= 0.0 && v <= 1.0))
            throw std::invalid_argument("image: values must lie in [0,1]");
}

// 8-bit quantization used by the PNG writer; exposed so synthesis can make
// file contents and in-memory values agree exactly.
inline uint8_t quantize8(double v) {
    double q = std::round(std::clamp(v, 0.0, 1.0) * 255.0);
    return static_cast<uint8_t>(q);
}

inline double dequantize8(uint8_t b) { return static_cast<double>(b) / 255.0; }

inline Image quantized(const Image& im) {
    Image out = im;
    for (double& v : out.data) v = dequantize8(quantize8(v));
    return out;
}

} // namespace dhz

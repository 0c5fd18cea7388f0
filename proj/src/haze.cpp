#include "dehazekit/haze.hpp"

#include <cmath>
#include <stdexcept>

namespace dhz {

Tensor transmission(const DepthMap& d, double beta) {
    if (beta < 0.0) throw std::domain_error("transmission: beta must be >= 0");
    if (d.shape.size() != 2) throw std::invalid_argument("transmission: depth must be HxW");
    for (double v : d.data)
        if (v < 0.0) throw std::domain_error("transmission: depth must be nonnegative");
    Tensor t = d;
    for (double& v : t.data) v = std::exp(-beta * v);
    return t;
}

Image apply_haze(const Image& x, const DepthMap& d, const ScatterParams& p) {
    if (!is_image_shape(x)) throw std::invalid_argument("apply_haze: expected HxWx3 image");
    if (d.shape.size() != 2 || d.dim(0) != x.dim(0) || d.dim(1) != x.dim(1))
        throw std::invalid_argument("apply_haze: depth/image shape mismatch");
    for (double a : p.atmospheric_light)
        if (!(a >= 0.0 && a <= 1.0))
            throw std::domain_error("apply_haze: atmospheric light must lie in [0,1]");

    Tensor t = transmission(d, p.beta);
    const int h = x.dim(0), w = x.dim(1);
    Image y = make_image(h, w);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            double ti = t[static_cast<int64_t>(r) * w + c];
            for (int ch = 0; ch < 3; ++ch)
                image_at(y, r, c, ch) =
                    image_at(x, r, c, ch) * ti + p.atmospheric_light[static_cast<size_t>(ch)] * (1.0 - ti);
        }
    return y;
}

Image invert_haze(const Image& y, const DepthMap& d, const ScatterParams& p, double t_floor) {
    if (!is_image_shape(y)) throw std::invalid_argument("invert_haze: expected HxWx3 image");
    if (d.shape.size() != 2 || d.dim(0) != y.dim(0) || d.dim(1) != y.dim(1))
        throw std::invalid_argument("invert_haze: depth/image shape mismatch");
    Tensor t = transmission(d, p.beta);
    const int h = y.dim(0), w = y.dim(1);
    Image x = make_image(h, w);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            double ti = t[static_cast<int64_t>(r) * w + c];
            for (int ch = 0; ch < 3; ++ch) {
                double yi = image_at(y, r, c, ch);
                if (ti < t_floor) {
                    image_at(x, r, c, ch) = yi;
                } else {
                    double a = p.atmospheric_light[static_cast<size_t>(ch)];
                    image_at(x, r, c, ch) = (yi - a * (1.0 - ti)) / ti;
                }
            }
        }
    return x;
}

} // namespace dhz

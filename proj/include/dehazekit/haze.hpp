#pragma once

#include <array>

#include "dehazekit/image.hpp"

namespace dhz {

// Atmospheric scattering forward model: y = x * t + A * (1 - t) with
// transmission t = exp(-beta * d).

struct ScatterParams {
    std::array<double, 3> atmospheric_light{0.9, 0.9, 0.9}; // per channel, in [0,1]
    double beta = 1.0;                                      // scattering coefficient, >= 0
};

// Scene depth, H x W, nonnegative, arbitrary units consistent with beta.
using DepthMap = Tensor;

inline DepthMap make_depth(int height, int width, double fill = 0.0) {
    return DepthMap({height, width}, fill);
}

// Elementwise exp(-beta * d); outputs in (0, 1].
Tensor transmission(const DepthMap& d, double beta);

// Per-pixel convex combination of the clean pixel and the atmospheric light.
Image apply_haze(const Image& x, const DepthMap& d, const ScatterParams& p);

// Analytic inversion x = (y - A*(1-t)) / t given ground-truth parameters.
// Used as the dataset-consistency oracle; pixels with t below t_floor are
// copied through unchanged.
Image invert_haze(const Image& y, const DepthMap& d, const ScatterParams& p,
                  double t_floor = 1e-6);

} // namespace dhz

#pragma once

#include "dehazekit/image.hpp"

namespace dhz {

// Identical images would give infinite PSNR; the cap keeps aggregates finite.
// 10*log10(1/1e-10) == 100, so cap and floor are consistent.
constexpr double kPsnrCap = 100.0;
constexpr double kMseFloor = 1e-10;

struct MetricPair {
    double psnr = 0.0;
    double ssim = 0.0;
};

// Peak signal-to-noise ratio in dB, MAX = 1.0.
double psnr(const Image& a, const Image& b);

// Mean structural similarity: 11x11 Gaussian window (sigma 1.5), K1 = 0.01,
// K2 = 0.03, dynamic range 1.0, computed per channel over valid windows and
// averaged. Both sides must be >= 11 pixels.
double ssim(const Image& a, const Image& b);

MetricPair metrics(const Image& a, const Image& b);

} // namespace dhz

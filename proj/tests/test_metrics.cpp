#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dehazekit/metrics.hpp"
#include "dehazekit/rng.hpp"

using namespace dhz;

namespace {

Image pattern_a(int h, int w) {
    Image img = make_image(h, w);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
            for (int ch = 0; ch < 3; ++ch)
                image_at(img, r, c, ch) = 0.5 + 0.45 * std::sin(0.31 * r + 0.73 * c + 1.1 * ch);
    return img;
}

Image pattern_b(int h, int w) {
    Image img = pattern_a(h, w);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
            for (int ch = 0; ch < 3; ++ch) {
                double v = image_at(img, r, c, ch) * 0.85 + 0.12 +
                           0.05 * std::cos(0.9 * r - 0.4 * c + ch);
                image_at(img, r, c, ch) = std::clamp(v, 0.0, 1.0);
            }
    return img;
}

Image random_image(int h, int w, uint64_t seed) {
    Rng rng(seed);
    Image img = make_image(h, w);
    for (double& v : img.data) v = rng.uniform();
    return img;
}

// Reference SSIM: direct 2-D windows, normalized 2-D kernel, no separable
// filtering. Deliberately a different code path from the library.
double ssim_reference(const Image& a, const Image& b) {
    const int h = a.dim(0), w = a.dim(1);
    double w2[11][11], wsum = 0.0;
    for (int i = 0; i < 11; ++i)
        for (int j = 0; j < 11; ++j) {
            double di = i - 5.0, dj = j - 5.0;
            w2[i][j] = std::exp(-(di * di + dj * dj) / (2.0 * 1.5 * 1.5));
            wsum += w2[i][j];
        }
    for (int i = 0; i < 11; ++i)
        for (int j = 0; j < 11; ++j) w2[i][j] /= wsum;

    const double c1 = 0.0001, c2 = 0.0009;
    double chan_acc = 0.0;
    for (int ch = 0; ch < 3; ++ch) {
        double acc = 0.0;
        int n = 0;
        for (int r0 = 0; r0 + 11 <= h; ++r0)
            for (int c0 = 0; c0 + 11 <= w; ++c0) {
                double mx = 0, my = 0, mxx = 0, myy = 0, mxy = 0;
                for (int i = 0; i < 11; ++i)
                    for (int j = 0; j < 11; ++j) {
                        double x = image_at(a, r0 + i, c0 + j, ch);
                        double y = image_at(b, r0 + i, c0 + j, ch);
                        mx += w2[i][j] * x;
                        my += w2[i][j] * y;
                        mxx += w2[i][j] * x * x;
                        myy += w2[i][j] * y * y;
                        mxy += w2[i][j] * x * y;
                    }
                double vx = mxx - mx * mx, vy = myy - my * my, cov = mxy - mx * my;
                acc += ((2 * mx * my + c1) * (2 * cov + c2)) /
                       ((mx * mx + my * my + c1) * (vx + vy + c2));
                ++n;
            }
        chan_acc += acc / n;
    }
    return chan_acc / 3.0;
}

} // namespace

TEST_CASE("psnr closed forms") {
    Image a = make_image(12, 12);
    a.fill(0.5);
    Image b = a;
    CHECK(psnr(a, b) == kPsnrCap);

    b.fill(0.6); // uniform diff 0.1 -> mse 0.01 -> 20 dB
    CHECK(psnr(a, b) == doctest::Approx(20.0).epsilon(1e-12));

    b.fill(0.5 + 0.025); // mse 0.000625 -> 10*log10(1600)
    CHECK(psnr(a, b) == doctest::Approx(10.0 * std::log10(1.0 / 0.000625)).epsilon(1e-12));
}

TEST_CASE("psnr mse floor caps near-identical pairs") {
    Image a = make_image(8, 8);
    a.fill(0.3);
    Image b = a;
    b.data[0] += 1e-6; // mse ~ 5e-15 < floor
    CHECK(psnr(a, b) == kPsnrCap);
    b.data[0] = 0.3 + 1e-3; // mse ~ 5e-9 > floor -> finite value below cap
    CHECK(psnr(a, b) < kPsnrCap);
    CHECK(psnr(a, b) > 0.0);
}

TEST_CASE("psnr symmetry and shape check") {
    Image a = random_image(16, 13, 5), b = random_image(16, 13, 6);
    CHECK(psnr(a, b) == psnr(b, a));
    Image c = make_image(16, 14);
    CHECK_THROWS_AS(psnr(a, c), std::invalid_argument);
}

TEST_CASE("ssim equals the direct-window reference") {
    Image a = random_image(18, 15, 11);
    Image b = random_image(18, 15, 12);
    CHECK(ssim(a, b) == doctest::Approx(ssim_reference(a, b)).epsilon(1e-12));

    // Correlated pair (more realistic regime than independent noise).
    Image c = a;
    Rng rng(77);
    for (double& v : c.data) v = std::clamp(v + rng.gaussian(0.0, 0.05), 0.0, 1.0);
    CHECK(ssim(a, c) == doctest::Approx(ssim_reference(a, c)).epsilon(1e-12));
    CHECK(ssim(a, c) > ssim(a, b)); // correlated pair scores higher
}

TEST_CASE("ssim frozen reference values") {
    // Values computed once with the standalone direct-window implementation.
    Image a = pattern_a(16, 20), b = pattern_b(16, 20);
    CHECK(ssim(a, b) == doctest::Approx(0.9705875162823524).epsilon(1e-12));
    CHECK(psnr(a, b) == doctest::Approx(22.453157432677081).epsilon(1e-12));
}

TEST_CASE("ssim identities and bounds") {
    Image a = pattern_a(14, 14);
    CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-12));
    Image b = pattern_b(14, 14);
    CHECK(ssim(a, b) == ssim(b, a));
    CHECK(ssim(a, b) <= 1.0);
    CHECK(ssim(a, b) >= -1.0);

    Image inv = a;
    for (double& v : inv.data) v = 1.0 - v; // anti-correlated -> worse than correlated
    CHECK(ssim(a, inv) < ssim(a, b));
}

TEST_CASE("ssim rejects images below the window size") {
    Image a = make_image(10, 32), b = make_image(10, 32);
    CHECK_THROWS_AS(ssim(a, b), std::invalid_argument);
    Image c = make_image(32, 10), d = make_image(32, 10);
    CHECK_THROWS_AS(ssim(c, d), std::invalid_argument);
    Image e = make_image(11, 11), f = make_image(11, 11);
    e.fill(0.4);
    f.fill(0.4);
    CHECK(ssim(e, f) == doctest::Approx(1.0)); // exactly one window
}

TEST_CASE("metrics bundles psnr and ssim") {
    Image a = pattern_a(16, 16), b = pattern_b(16, 16);
    MetricPair m = metrics(a, b);
    CHECK(m.psnr == psnr(a, b));
    CHECK(m.ssim == ssim(a, b));
}

#include "dehazekit/metrics.hpp"

#include <array>
#include <cmath>
#include <vector>

namespace dhz {

double psnr(const Image& a, const Image& b) {
    check_same_shape(a, b, "psnr");
    double sq = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        double d = a.data[i] - b.data[i];
        sq += d * d;
    }
    double mse = sq / static_cast<double>(a.data.size());
    if (mse < kMseFloor) return kPsnrCap;
    return 10.0 * std::log10(1.0 / mse);
}

namespace {

constexpr int kWin = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01; // (K1 * L)^2, L = 1
constexpr double kC2 = 0.03 * 0.03;

std::array<double, kWin> gaussian_kernel() {
    std::array<double, kWin> k{};
    double sum = 0.0;
    for (int i = 0; i < kWin; ++i) {
        double x = i - (kWin - 1) / 2.0;
        k[i] = std::exp(-x * x / (2.0 * kSigma * kSigma));
        sum += k[i];
    }
    for (double& v : k) v /= sum;
    return k;
}

// Separable Gaussian filter, valid region only (output is (h-10) x (w-10)).
void filter_valid(const std::vector<double>& src, int h, int w, std::vector<double>& tmp,
                  std::vector<double>& dst) {
    static const std::array<double, kWin> kern = gaussian_kernel();
    const int vw = w - kWin + 1;
    const int vh = h - kWin + 1;
    tmp.assign(static_cast<size_t>(h) * vw, 0.0);
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < vw; ++c) {
            double acc = 0.0;
            for (int k = 0; k < kWin; ++k) acc += kern[k] * src[static_cast<size_t>(r) * w + c + k];
            tmp[static_cast<size_t>(r) * vw + c] = acc;
        }
    }
    dst.assign(static_cast<size_t>(vh) * vw, 0.0);
    for (int r = 0; r < vh; ++r) {
        for (int c = 0; c < vw; ++c) {
            double acc = 0.0;
            for (int k = 0; k < kWin; ++k) acc += kern[k] * tmp[static_cast<size_t>(r + k) * vw + c];
            dst[static_cast<size_t>(r) * vw + c] = acc;
        }
    }
}

double ssim_channel(const std::vector<double>& x, const std::vector<double>& y, int h, int w) {
    const size_t n = x.size();
    std::vector<double> xx(n), yy(n), xy(n);
    for (size_t i = 0; i < n; ++i) {
        xx[i] = x[i] * x[i];
        yy[i] = y[i] * y[i];
        xy[i] = x[i] * y[i];
    }
    std::vector<double> tmp, mu_x, mu_y, m_xx, m_yy, m_xy;
    filter_valid(x, h, w, tmp, mu_x);
    filter_valid(y, h, w, tmp, mu_y);
    filter_valid(xx, h, w, tmp, m_xx);
    filter_valid(yy, h, w, tmp, m_yy);
    filter_valid(xy, h, w, tmp, m_xy);

    double total = 0.0;
    for (size_t i = 0; i < mu_x.size(); ++i) {
        double mx = mu_x[i], my = mu_y[i];
        double vx = m_xx[i] - mx * mx;
        double vy = m_yy[i] - my * my;
        double cov = m_xy[i] - mx * my;
        double num = (2.0 * mx * my + kC1) * (2.0 * cov + kC2);
        double den = (mx * mx + my * my + kC1) * (vx + vy + kC2);
        total += num / den;
    }
    return total / static_cast<double>(mu_x.size());
}

} // namespace

double ssim(const Image& a, const Image& b) {
    check_same_shape(a, b, "ssim");
    const int h = a.dim(0), w = a.dim(1);
    if (h < kWin || w < kWin)
        throw std::invalid_argument("ssim: image smaller than 11x11 window");
    std::vector<double> ca(static_cast<size_t>(h) * w), cb(ca.size());
    double acc = 0.0;
    for (int ch = 0; ch < 3; ++ch) {
        for (int r = 0; r < h; ++r)
            for (int c = 0; c < w; ++c) {
                ca[static_cast<size_t>(r) * w + c] = image_at(a, r, c, ch);
                cb[static_cast<size_t>(r) * w + c] = image_at(b, r, c, ch);
            }
        acc += ssim_channel(ca, cb, h, w);
    }
    return acc / 3.0;
}

MetricPair metrics(const Image& a, const Image& b) {
    return MetricPair{psnr(a, b), ssim(a, b)};
}

} // namespace dhz

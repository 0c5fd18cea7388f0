#pragma once

#include <cstdint>
#include <vector>

#include "dehazekit/net.hpp"

namespace dhz {

// Adversarial search against an image-to-image model. Both attacks maximize
// the q=1 objective ||T(clip(x+delta)) - y||_1; the zero perturbation is
// always kept as a candidate, so an attack can never improve the prediction.

struct LinfBudget {
    double epsilon = 1.0 / 255.0;
    int steps = 10;
    double step_size = 0.0; // <= 0 resolves to epsilon / 4
    uint64_t seed = 0;

    double resolved_step() const { return step_size > 0.0 ? step_size : epsilon / 4.0; }
    void validate() const;
};

struct L0Budget {
    int pixels = 1;
    int pop_size = 40;
    int iterations = 30;
    double mutation = 0.5;  // DE differential weight F
    double crossover = 0.7; // DE crossover rate CR
    uint64_t seed = 0;

    void validate() const;
};

// One replaced pixel: coordinates plus the values written there.
struct PixelTouch {
    int row = 0;
    int col = 0;
    double value[3] = {0.0, 0.0, 0.0};
};

struct Perturbation {
    Tensor delta;                   // dense, same shape as x
    std::vector<PixelTouch> pixels; // l0 attacks: the replaced pixels

    double linf_norm() const;
    int nonzero_pixel_count() const; // locations with any nonzero channel
};

struct AttackResult {
    Perturbation perturbation;
    double objective_value = 0.0; // ||T(adversarial_input) - y||_1
    Image adversarial_input;      // clip(x + delta)
    std::vector<double> trace;    // best-so-far objective per iteration
};

// PGD: signed-gradient ascent with projection onto the epsilon ball after
// each step. warm, when given, seeds the search (projected into the ball)
// alongside the random init and the zero candidate.
AttackResult linf_attack(const DehazeNet& model, const Image& x, const Image& y,
                         const LinfBudget& budget, const Tensor* warm = nullptr);

// One-pixel-style attack: DE/rand/1/bin over (row, col, r, g, b) tuples,
// coordinates continuous during evolution and rounded at evaluation. warm
// seeds one population member (padded with zero-change pixels if shorter).
AttackResult l0_attack(const DehazeNet& model, const Image& x, const Image& y,
                       const L0Budget& budget,
                       const std::vector<PixelTouch>* warm = nullptr);

// clip(x + n), n i.i.d. normal with standard deviation sigma.
Image gaussian_baseline(const Image& x, double sigma, uint64_t seed);

} // namespace dhz

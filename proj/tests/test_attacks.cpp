#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dehazekit/attacks.hpp"
#include "dehazekit/metrics.hpp"
#include "dehazekit/net.hpp"
#include "dehazekit/rng.hpp"

using namespace dhz;

namespace {

NetConfig tiny_config(uint64_t seed = 17) {
    NetConfig cfg;
    cfg.embed_dim = 4;
    cfg.num_blocks = 1;
    cfg.num_heads = 2;
    cfg.patch_size = 2;
    cfg.window_size = 2;
    cfg.seed = seed;
    return cfg;
}

// Zeroing the head makes the network exactly the identity on [0,1] inputs:
// the residual reconstruction vanishes and the clamp is inactive.
DehazeNet identity_model() {
    DehazeNet model = DehazeNet::build(tiny_config());
    for (const char* name : {"head.weight", "head.bias"}) {
        int i = model.find_param(name);
        REQUIRE(i >= 0);
        for (double& v : model.param(static_cast<size_t>(i)).values) v = 0.0;
    }
    return model;
}

Image test_image(int h, int w, uint64_t seed, double lo = 0.3, double hi = 0.7) {
    Rng rng(seed);
    Image img = make_image(h, w);
    for (double& v : img.data) v = rng.uniform(lo, hi);
    return img;
}

double l1_of(const DehazeNet& model, const Image& x, const Image& y) {
    Image pred = model.forward(x);
    double s = 0.0;
    for (size_t i = 0; i < pred.data.size(); ++i) s += std::abs(pred.data[i] - y.data[i]);
    return s;
}

} // namespace

TEST_CASE("linf one-step closed form on the identity model") {
    DehazeNet model = identity_model();
    Image x = test_image(8, 8, 3);
    Image y = x;
    for (double& v : y.data) v -= 0.1; // prediction sits 0.1 above target everywhere

    LinfBudget b;
    b.epsilon = 0.05;
    b.steps = 1;
    b.step_size = 0.05;
    Tensor warm(x.shape); // zero start
    AttackResult r = linf_attack(model, x, y, b, &warm);

    const double n = static_cast<double>(x.data.size());
    // Start at sum |x - y| = 0.1 n; the signed step moves every channel up by
    // exactly step_size, away from the target, with no clipping anywhere.
    CHECK(r.trace.size() == 2);
    CHECK(r.trace[0] == doctest::Approx(0.1 * n).epsilon(1e-12));
    CHECK(r.objective_value == doctest::Approx(0.15 * n).epsilon(1e-12));
    CHECK(r.perturbation.linf_norm() == doctest::Approx(0.05).epsilon(1e-15));
    for (size_t i = 0; i < x.data.size(); ++i) {
        CHECK(r.perturbation.delta.data[i] == doctest::Approx(0.05).epsilon(1e-15));
        CHECK(r.adversarial_input.data[i] == doctest::Approx(x.data[i] + 0.05).epsilon(1e-15));
    }
}

TEST_CASE("linf steps saturate at the epsilon ball") {
    DehazeNet model = identity_model();
    Image x = test_image(8, 8, 4);
    Image y = x;
    for (double& v : y.data) v -= 0.1;

    LinfBudget b;
    b.epsilon = 0.03;
    b.steps = 6; // default step eps/4; four steps reach the boundary
    Tensor warm(x.shape);
    AttackResult r = linf_attack(model, x, y, b, &warm);
    CHECK(r.perturbation.linf_norm() == doctest::Approx(0.03).epsilon(1e-12));
    for (double d : r.perturbation.delta.data) CHECK(d == doctest::Approx(0.03).epsilon(1e-12));
    const double n = static_cast<double>(x.data.size());
    CHECK(r.objective_value == doctest::Approx(0.13 * n).epsilon(1e-12));
}

TEST_CASE("linf budget is respected and the result is consistent") {
    DehazeNet model = DehazeNet::build(tiny_config());
    Image x = test_image(12, 12, 5, 0.05, 0.95);
    Image y = test_image(12, 12, 6, 0.05, 0.95);
    LinfBudget b;
    b.epsilon = 4.0 / 255.0;
    b.steps = 5;
    b.seed = 9;
    AttackResult r = linf_attack(model, x, y, b);
    CHECK(r.perturbation.linf_norm() <= b.epsilon + 1e-12);
    for (size_t i = 0; i < x.data.size(); ++i) {
        CHECK(r.adversarial_input.data[i] >= 0.0);
        CHECK(r.adversarial_input.data[i] <= 1.0);
        CHECK(r.adversarial_input.data[i] ==
              doctest::Approx(std::clamp(x.data[i] + r.perturbation.delta.data[i], 0.0, 1.0))
                  .epsilon(1e-15));
    }
    // Reported objective is reproducible from the reported adversarial input.
    double replay = l1_of(model, r.adversarial_input, y);
    CHECK(r.objective_value == doctest::Approx(replay).epsilon(1e-12));
}

TEST_CASE("attacks never help: objective at least the unperturbed value") {
    for (uint64_t seed : {1ULL, 2ULL, 3ULL}) {
        DehazeNet model = DehazeNet::build(tiny_config(seed));
        Image x = test_image(10, 10, 100 + seed, 0.0, 1.0);
        Image y = test_image(10, 10, 200 + seed, 0.0, 1.0);
        double clean = l1_of(model, x, y);

        LinfBudget lb;
        lb.epsilon = 2.0 / 255.0;
        lb.steps = 3;
        lb.seed = seed;
        AttackResult lr = linf_attack(model, x, y, lb);
        CHECK(lr.objective_value >= clean);

        L0Budget pb;
        pb.pixels = 1;
        pb.pop_size = 8;
        pb.iterations = 4;
        pb.seed = seed;
        AttackResult pr = l0_attack(model, x, y, pb);
        CHECK(pr.objective_value >= clean);
    }
}

TEST_CASE("vanishing epsilon leaves the metrics unchanged") {
    DehazeNet model = DehazeNet::build(tiny_config());
    Image x = test_image(12, 12, 7, 0.1, 0.9);
    Image y = test_image(12, 12, 8, 0.1, 0.9);
    double before = psnr(model.forward(x), y);
    LinfBudget b;
    b.epsilon = 1e-12;
    b.steps = 2;
    AttackResult r = linf_attack(model, x, y, b);
    double after = psnr(model.forward(r.adversarial_input), y);
    CHECK(std::abs(after - before) <= 1e-6);
}

TEST_CASE("objective trace is nondecreasing and ends at the reported value") {
    DehazeNet model = DehazeNet::build(tiny_config());
    Image x = test_image(12, 12, 11, 0.0, 1.0);
    Image y = test_image(12, 12, 12, 0.0, 1.0);

    LinfBudget lb;
    lb.epsilon = 2.0 / 255.0;
    lb.steps = 6;
    AttackResult lr = linf_attack(model, x, y, lb);
    CHECK(lr.trace.size() == 7);
    for (size_t i = 1; i < lr.trace.size(); ++i) CHECK(lr.trace[i] >= lr.trace[i - 1]);
    CHECK(lr.trace.front() >= l1_of(model, x, y)); // zero candidate is the floor
    CHECK(lr.trace.back() == lr.objective_value);

    L0Budget pb;
    pb.pixels = 2;
    pb.pop_size = 8;
    pb.iterations = 5;
    AttackResult pr = l0_attack(model, x, y, pb);
    CHECK(pr.trace.size() == 6);
    for (size_t i = 1; i < pr.trace.size(); ++i) CHECK(pr.trace[i] >= pr.trace[i - 1]);
    CHECK(pr.trace.back() == pr.objective_value);
}

TEST_CASE("l0 attack touches at most the budgeted pixel count") {
    DehazeNet model = DehazeNet::build(tiny_config());
    Image x = test_image(10, 10, 13, 0.0, 1.0);
    Image y = test_image(10, 10, 14, 0.0, 1.0);
    L0Budget b;
    b.pixels = 3;
    b.pop_size = 10;
    b.iterations = 6;
    AttackResult r = l0_attack(model, x, y, b);
    CHECK(r.perturbation.nonzero_pixel_count() <= 3);
    CHECK(static_cast<int>(r.perturbation.pixels.size()) ==
          r.perturbation.nonzero_pixel_count());

    // Everything off the reported list is untouched; on-list values match.
    Image rebuilt = x;
    for (const PixelTouch& t : r.perturbation.pixels) {
        CHECK(t.row >= 0);
        CHECK(t.row < 10);
        CHECK(t.col >= 0);
        CHECK(t.col < 10);
        for (int ch = 0; ch < 3; ++ch) {
            CHECK(t.value[ch] >= 0.0);
            CHECK(t.value[ch] <= 1.0);
            image_at(rebuilt, t.row, t.col, ch) = t.value[ch];
        }
    }
    CHECK(rebuilt.data == r.adversarial_input.data);
}

TEST_CASE("l0 differential evolution reaches the exhaustive single-pixel optimum") {
    // Oracle: try every position and a 5-point value lattice per channel.
    DehazeNet model = DehazeNet::build(tiny_config(23));
    const int side = 8;
    Image x = test_image(side, side, 15, 0.1, 0.9);
    Image y = test_image(side, side, 16, 0.1, 0.9);
    InputObjective obj = l1_distance_objective(y);

    const double lattice[5] = {0.0, 0.25, 0.5, 0.75, 1.0};
    double oracle = obj.value(model.forward(x));
    for (int r = 0; r < side; ++r)
        for (int c = 0; c < side; ++c)
            for (double v0 : lattice)
                for (double v1 : lattice)
                    for (double v2 : lattice) {
                        Image adv = x;
                        image_at(adv, r, c, 0) = v0;
                        image_at(adv, r, c, 1) = v1;
                        image_at(adv, r, c, 2) = v2;
                        oracle = std::max(oracle, obj.value(model.forward(adv)));
                    }

    L0Budget b;
    b.pixels = 1;
    b.seed = 31; // default pop 40 / iters 30
    AttackResult r = l0_attack(model, x, y, b);
    CHECK(r.objective_value >= 0.95 * oracle);
}

TEST_CASE("warm-started attacks are monotone in the budget") {
    DehazeNet model = DehazeNet::build(tiny_config());
    Image x = test_image(12, 12, 17, 0.0, 1.0);
    Image y = test_image(12, 12, 18, 0.0, 1.0);

    double prev = -1.0;
    const Tensor* warm = nullptr;
    Tensor carried;
    for (double eps : {1.0 / 255.0, 2.0 / 255.0, 4.0 / 255.0, 8.0 / 255.0}) {
        LinfBudget b;
        b.epsilon = eps;
        b.steps = 4;
        b.seed = 5;
        AttackResult r = linf_attack(model, x, y, b, warm);
        CHECK(r.objective_value >= prev);
        prev = r.objective_value;
        carried = r.perturbation.delta;
        warm = &carried;
    }

    prev = -1.0;
    std::vector<PixelTouch> warm_px;
    const std::vector<PixelTouch>* wp = nullptr;
    for (int pixels : {1, 2, 4}) {
        L0Budget b;
        b.pixels = pixels;
        b.pop_size = 10;
        b.iterations = 6;
        b.seed = 5;
        AttackResult r = l0_attack(model, x, y, b, wp);
        CHECK(r.objective_value >= prev);
        prev = r.objective_value;
        warm_px = r.perturbation.pixels;
        wp = &warm_px;
    }
}

TEST_CASE("attacks are deterministic in the seed") {
    DehazeNet model = DehazeNet::build(tiny_config());
    Image x = test_image(10, 10, 19, 0.0, 1.0);
    Image y = test_image(10, 10, 20, 0.0, 1.0);

    LinfBudget lb;
    lb.epsilon = 3.0 / 255.0;
    lb.steps = 4;
    lb.seed = 77;
    AttackResult a = linf_attack(model, x, y, lb);
    AttackResult b = linf_attack(model, x, y, lb);
    CHECK(a.objective_value == b.objective_value);
    CHECK(a.perturbation.delta.data == b.perturbation.delta.data);
    lb.seed = 78;
    AttackResult c = linf_attack(model, x, y, lb);
    CHECK(a.perturbation.delta.data != c.perturbation.delta.data);

    L0Budget pb;
    pb.pixels = 2;
    pb.pop_size = 8;
    pb.iterations = 4;
    pb.seed = 77;
    AttackResult d = l0_attack(model, x, y, pb);
    AttackResult e = l0_attack(model, x, y, pb);
    CHECK(d.objective_value == e.objective_value);
    CHECK(d.perturbation.delta.data == e.perturbation.delta.data);
}

TEST_CASE("gaussian baseline behaviour") {
    Image x = make_image(64, 64, 0.5);
    Image same = gaussian_baseline(x, 0.0, 1);
    CHECK(same.data == x.data);

    Image a = gaussian_baseline(x, 0.01, 2);
    Image b = gaussian_baseline(x, 0.01, 2);
    CHECK(a.data == b.data);
    Image c = gaussian_baseline(x, 0.01, 3);
    CHECK(a.data != c.data);

    double peak = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        CHECK(a.data[i] >= 0.0);
        CHECK(a.data[i] <= 1.0);
        peak = std::max(peak, std::abs(a.data[i] - x.data[i]));
    }
    // At sigma = 0.01 the expected peak over ~12k draws sits near 11/255;
    // this is the arithmetic behind the "roughly 12/255" noise floor.
    CHECK(peak >= 8.0 / 255.0);
    CHECK(peak <= 16.0 / 255.0);

    CHECK_THROWS_AS(gaussian_baseline(x, -0.01, 1), std::domain_error);
}

TEST_CASE("budget and argument validation") {
    DehazeNet model = DehazeNet::build(tiny_config());
    Image x = test_image(8, 8, 21);
    Image y = test_image(8, 8, 22);
    Image bad = test_image(8, 10, 23);

    LinfBudget lb;
    lb.epsilon = 0.0;
    CHECK_THROWS_AS(linf_attack(model, x, y, lb), std::invalid_argument);
    lb.epsilon = 0.01;
    lb.steps = 0;
    CHECK_THROWS_AS(linf_attack(model, x, y, lb), std::invalid_argument);
    lb.steps = 2;
    CHECK_THROWS_AS(linf_attack(model, x, bad, lb), std::invalid_argument);
    Tensor warm_bad({4, 4, 3});
    CHECK_THROWS_AS(linf_attack(model, x, y, lb, &warm_bad), std::invalid_argument);

    L0Budget pb;
    pb.pixels = 0;
    CHECK_THROWS_AS(l0_attack(model, x, y, pb), std::invalid_argument);
    pb.pixels = 65; // 8x8 image
    CHECK_THROWS_AS(l0_attack(model, x, y, pb), std::invalid_argument);
    pb.pixels = 1;
    std::vector<PixelTouch> warm(2);
    CHECK_THROWS_AS(l0_attack(model, x, y, pb, &warm), std::invalid_argument);

    CHECK(LinfBudget{0.04, 10, 0.0}.resolved_step() == doctest::Approx(0.01));
    CHECK(LinfBudget{0.04, 10, 0.002}.resolved_step() == doctest::Approx(0.002));
}

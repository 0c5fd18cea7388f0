#include "dehazekit/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dehazekit/rng.hpp"

namespace dhz {

void LinfBudget::validate() const {
    if (epsilon <= 0.0) throw std::invalid_argument("linf budget: epsilon must be positive");
    if (steps < 1) throw std::invalid_argument("linf budget: steps must be >= 1");
    if (step_size < 0.0) throw std::invalid_argument("linf budget: step_size must be positive");
}

void L0Budget::validate() const {
    if (pixels < 1) throw std::invalid_argument("l0 budget: pixels must be >= 1");
    if (pop_size < 4) throw std::invalid_argument("l0 budget: pop_size must be >= 4");
    if (iterations < 0) throw std::invalid_argument("l0 budget: iterations must be >= 0");
    if (mutation <= 0.0 || crossover < 0.0 || crossover > 1.0)
        throw std::invalid_argument("l0 budget: bad DE parameters");
}

double Perturbation::linf_norm() const {
    double m = 0.0;
    for (double v : delta.data) m = std::max(m, std::abs(v));
    return m;
}

int Perturbation::nonzero_pixel_count() const {
    if (delta.shape.size() != 3) return 0;
    int count = 0;
    const int h = delta.dim(0), w = delta.dim(1);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            const double* p = delta.ptr() + (static_cast<int64_t>(r) * w + c) * 3;
            if (p[0] != 0.0 || p[1] != 0.0 || p[2] != 0.0) ++count;
        }
    return count;
}

namespace {

Image clipped_sum(const Image& x, const Tensor& delta) {
    Image out = x;
    for (size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = std::clamp(x.data[i] + delta.data[i], 0.0, 1.0);
    return out;
}

double eval_objective(const DehazeNet& model, const Image& x_adv, const InputObjective& obj) {
    return obj.value(model.forward(x_adv));
}

} // namespace

AttackResult linf_attack(const DehazeNet& model, const Image& x, const Image& y,
                         const LinfBudget& budget, const Tensor* warm) {
    budget.validate();
    check_same_shape(x, y, "linf_attack");
    if (warm) check_same_shape(*warm, x, "linf_attack warm start");
    const double eps = budget.epsilon;
    const double step = budget.resolved_step();
    InputObjective obj = l1_distance_objective(y);

    AttackResult best;
    best.perturbation.delta = Tensor(x.shape);      // zero candidate
    best.adversarial_input = x;
    best.objective_value = eval_objective(model, x, obj);

    auto consider = [&](const Tensor& delta) {
        Image adv = clipped_sum(x, delta);
        double v = eval_objective(model, adv, obj);
        if (v > best.objective_value) {
            best.objective_value = v;
            best.perturbation.delta = delta;
            best.adversarial_input = std::move(adv);
        }
        return v;
    };

    Tensor delta(x.shape);
    if (warm) {
        for (size_t i = 0; i < delta.data.size(); ++i)
            delta.data[i] = std::clamp(warm->data[i], -eps, eps);
    } else {
        Rng rng(derive_seed(budget.seed, 0x11f));
        for (double& v : delta.data) v = rng.uniform(-eps, eps);
    }
    consider(delta);
    best.trace.push_back(best.objective_value);

    for (int s = 0; s < budget.steps; ++s) {
        // Gradient of the objective w.r.t. delta at the current iterate.
        Image adv = clipped_sum(x, delta);
        ForwardTrace tr;
        Image pred = model.forward(adv, tr);
        Tensor dadv = model.backward(obj.grad(pred), tr, nullptr);
        for (size_t i = 0; i < delta.data.size(); ++i) {
            double pre = x.data[i] + delta.data[i];
            double g = (pre <= 0.0 || pre >= 1.0) ? 0.0 : dadv.data[i];
            double d = delta.data[i];
            if (g > 0.0) d += step;
            else if (g < 0.0) d -= step;
            delta.data[i] = std::clamp(d, -eps, eps);
        }
        consider(delta);
        best.trace.push_back(best.objective_value);
    }
    return best;
}

namespace {

// DE genome: pixels x (row, col, r, g, b), coordinates continuous.
struct Genome {
    std::vector<double> genes;
    double fitness = 0.0;
};

Image apply_genome(const Image& x, const std::vector<double>& genes, int pixels, int h, int w) {
    Image adv = x;
    for (int p = 0; p < pixels; ++p) {
        const double* t = genes.data() + static_cast<size_t>(p) * 5;
        int r = std::clamp(static_cast<int>(std::lround(t[0])), 0, h - 1);
        int c = std::clamp(static_cast<int>(std::lround(t[1])), 0, w - 1);
        for (int ch = 0; ch < 3; ++ch)
            image_at(adv, r, c, ch) = std::clamp(t[2 + ch], 0.0, 1.0);
    }
    return adv;
}

} // namespace

AttackResult l0_attack(const DehazeNet& model, const Image& x, const Image& y,
                       const L0Budget& budget, const std::vector<PixelTouch>* warm) {
    budget.validate();
    check_same_shape(x, y, "l0_attack");
    const int h = x.dim(0), w = x.dim(1);
    if (budget.pixels > h * w)
        throw std::invalid_argument("l0 budget: pixels exceeds image pixel count");
    if (warm && static_cast<int>(warm->size()) > budget.pixels)
        throw std::invalid_argument("l0_attack: warm start larger than budget");
    InputObjective obj = l1_distance_objective(y);
    const int genes = budget.pixels * 5;

    AttackResult best;
    best.perturbation.delta = Tensor(x.shape); // zero candidate always included
    best.adversarial_input = x;
    best.objective_value = eval_objective(model, x, obj);

    auto consider = [&](const Genome& g) {
        if (g.fitness > best.objective_value) {
            Image adv = apply_genome(x, g.genes, budget.pixels, h, w);
            best.objective_value = g.fitness;
            best.perturbation.delta = Tensor(x.shape);
            for (size_t i = 0; i < adv.data.size(); ++i)
                best.perturbation.delta.data[i] = adv.data[i] - x.data[i];
            best.adversarial_input = std::move(adv);
        }
    };

    Rng rng(derive_seed(budget.seed, 0x10));
    std::vector<Genome> pop(static_cast<size_t>(budget.pop_size));
    for (size_t i = 0; i < pop.size(); ++i) {
        Genome& g = pop[i];
        g.genes.resize(static_cast<size_t>(genes));
        for (int p = 0; p < budget.pixels; ++p) {
            double* t = g.genes.data() + static_cast<size_t>(p) * 5;
            t[0] = rng.uniform(0.0, h - 1.0);
            t[1] = rng.uniform(0.0, w - 1.0);
            for (int ch = 0; ch < 3; ++ch) t[2 + ch] = rng.uniform();
        }
        if (i == 0 && warm) {
            // Seed with the supplied solution, padding with zero-change
            // pixels (replacement equal to the original values).
            for (size_t p = 0; p < static_cast<size_t>(budget.pixels); ++p) {
                double* t = g.genes.data() + p * 5;
                if (p < warm->size()) {
                    const PixelTouch& src = (*warm)[p];
                    t[0] = src.row;
                    t[1] = src.col;
                    for (int ch = 0; ch < 3; ++ch) t[2 + ch] = src.value[ch];
                } else {
                    int rr = static_cast<int>(p) % h, cc = static_cast<int>(p) / h % w;
                    t[0] = rr;
                    t[1] = cc;
                    for (int ch = 0; ch < 3; ++ch) t[2 + ch] = image_at(x, rr, cc, ch);
                }
            }
        }
        g.fitness = eval_objective(model, apply_genome(x, g.genes, budget.pixels, h, w), obj);
        consider(g);
    }
    best.trace.push_back(best.objective_value);

    std::vector<double> trial(static_cast<size_t>(genes));
    for (int it = 0; it < budget.iterations; ++it) {
        for (int i = 0; i < budget.pop_size; ++i) {
            int a, b, c;
            do { a = rng.uniform_int(budget.pop_size); } while (a == i);
            do { b = rng.uniform_int(budget.pop_size); } while (b == i || b == a);
            do { c = rng.uniform_int(budget.pop_size); } while (c == i || c == a || c == b);
            int jrand = rng.uniform_int(genes);
            for (int j = 0; j < genes; ++j) {
                double v;
                if (j == jrand || rng.uniform() < budget.crossover) {
                    v = pop[static_cast<size_t>(a)].genes[static_cast<size_t>(j)] +
                        budget.mutation *
                            (pop[static_cast<size_t>(b)].genes[static_cast<size_t>(j)] -
                             pop[static_cast<size_t>(c)].genes[static_cast<size_t>(j)]);
                } else {
                    v = pop[static_cast<size_t>(i)].genes[static_cast<size_t>(j)];
                }
                // Clip each gene to its valid range.
                switch (j % 5) {
                    case 0: v = std::clamp(v, 0.0, h - 1.0); break;
                    case 1: v = std::clamp(v, 0.0, w - 1.0); break;
                    default: v = std::clamp(v, 0.0, 1.0); break;
                }
                trial[static_cast<size_t>(j)] = v;
            }
            double f = eval_objective(model, apply_genome(x, trial, budget.pixels, h, w), obj);
            if (f > pop[static_cast<size_t>(i)].fitness) {
                pop[static_cast<size_t>(i)].genes = trial;
                pop[static_cast<size_t>(i)].fitness = f;
                consider(pop[static_cast<size_t>(i)]);
            }
        }
        best.trace.push_back(best.objective_value);
    }

    // Report exactly the locations that moved, row-major, with the values
    // now present there (duplicate genome tuples collapse naturally).
    auto& px = best.perturbation.pixels;
    px.clear();
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            const double* d = best.perturbation.delta.ptr() + (static_cast<int64_t>(r) * w + c) * 3;
            if (d[0] == 0.0 && d[1] == 0.0 && d[2] == 0.0) continue;
            PixelTouch t;
            t.row = r;
            t.col = c;
            for (int ch = 0; ch < 3; ++ch) t.value[ch] = image_at(best.adversarial_input, r, c, ch);
            px.push_back(t);
        }
    return best;
}

Image gaussian_baseline(const Image& x, double sigma, uint64_t seed) {
    if (sigma < 0.0) throw std::domain_error("gaussian_baseline: sigma must be nonnegative");
    Image out = x;
    if (sigma == 0.0) return out;
    Rng rng(derive_seed(seed, 0x6a));
    for (double& v : out.data) v = std::clamp(v + rng.gaussian(0.0, sigma), 0.0, 1.0);
    return out;
}

} // namespace dhz

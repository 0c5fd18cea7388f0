#include "dehazekit/evaluate.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "dehazekit/metrics.hpp"
#include "dehazekit/parallel.hpp"
#include "dehazekit/rng.hpp"

namespace dhz {

std::string cond_kind_name(CondKind k) {
    switch (k) {
        case CondKind::Clean: return "clean";
        case CondKind::Gaussian: return "gaussian";
        case CondKind::Linf: return "linf";
        case CondKind::L0: return "l0";
    }
    throw std::logic_error("cond_kind_name: bad enum");
}

std::string EvalCondition::label() const {
    char buf[64];
    switch (kind) {
        case CondKind::Clean: return "clean";
        case CondKind::Gaussian:
            std::snprintf(buf, sizeof(buf), "gaussian(sigma=%g)", parameter);
            return buf;
        case CondKind::Linf:
            std::snprintf(buf, sizeof(buf), "linf(eps=%g)", parameter);
            return buf;
        case CondKind::L0:
            std::snprintf(buf, sizeof(buf), "l0(pixels=%d)", static_cast<int>(parameter));
            return buf;
    }
    throw std::logic_error("label: bad enum");
}

void EvalCondition::validate() const {
    switch (kind) {
        case CondKind::Clean: return;
        case CondKind::Gaussian:
            if (parameter < 0.0) throw std::invalid_argument("gaussian condition: sigma < 0");
            return;
        case CondKind::Linf:
            if (parameter <= 0.0) throw std::invalid_argument("linf condition: epsilon <= 0");
            linf.validate();
            return;
        case CondKind::L0:
            if (parameter < 1.0 || parameter != std::floor(parameter))
                throw std::invalid_argument("l0 condition: pixels must be a positive integer");
            l0.validate();
            return;
    }
}

std::vector<EvalCondition> default_grid(double sigma, const std::vector<double>& epsilons,
                                        const std::vector<int>& pixel_counts, uint64_t seed) {
    std::vector<EvalCondition> grid;
    EvalCondition clean;
    clean.kind = CondKind::Clean;
    clean.seed = seed;
    grid.push_back(clean);

    EvalCondition gauss;
    gauss.kind = CondKind::Gaussian;
    gauss.parameter = sigma;
    gauss.seed = seed;
    grid.push_back(gauss);

    for (double eps : epsilons) {
        EvalCondition c;
        c.kind = CondKind::Linf;
        c.parameter = eps;
        c.seed = seed;
        c.linf.epsilon = eps;
        grid.push_back(c);
    }
    for (int px : pixel_counts) {
        EvalCondition c;
        c.kind = CondKind::L0;
        c.parameter = px;
        c.seed = seed;
        c.l0.pixels = px;
        grid.push_back(c);
    }
    for (auto& c : grid) c.validate();
    return grid;
}

namespace {

ImageRecord eval_one(const DehazeNet& model, const Image& hazy, const Image& clean,
                     const EvalCondition& cond, int index) {
    ImageRecord rec;
    rec.image_index = index;
    try {
        Image input;
        double objective = 0.0;
        uint64_t img_seed = derive_seed(cond.seed, static_cast<uint64_t>(index));
        switch (cond.kind) {
            case CondKind::Clean: input = hazy; break;
            case CondKind::Gaussian:
                input = gaussian_baseline(hazy, cond.parameter, img_seed);
                break;
            case CondKind::Linf: {
                LinfBudget b = cond.linf;
                b.epsilon = cond.parameter;
                b.seed = img_seed;
                AttackResult r = linf_attack(model, hazy, clean, b);
                input = r.adversarial_input;
                objective = r.objective_value;
                break;
            }
            case CondKind::L0: {
                L0Budget b = cond.l0;
                b.pixels = static_cast<int>(cond.parameter);
                b.seed = img_seed;
                AttackResult r = l0_attack(model, hazy, clean, b);
                input = r.adversarial_input;
                objective = r.objective_value;
                break;
            }
        }
        Image pred = model.forward(input);
        MetricPair m = metrics(pred, clean);
        rec.psnr = m.psnr;
        rec.ssim = m.ssim;
        rec.objective = objective;
    } catch (const std::exception& e) {
        rec.status = e.what();
        rec.psnr = rec.ssim = rec.objective = 0.0;
    }
    return rec;
}

void finalize_row(EvalRow& row) {
    double sp = 0.0, ss = 0.0;
    int ok = 0;
    for (const auto& r : row.records) {
        if (r.status != "ok") continue;
        sp += r.psnr;
        ss += r.ssim;
        ++ok;
    }
    row.mean_psnr = ok ? sp / ok : 0.0;
    row.mean_ssim = ok ? ss / ok : 0.0;
}

} // namespace

EvalReport evaluate(const DehazeNet& model, const ModelLabel& label, const Dataset& data,
                    const std::vector<EvalCondition>& conditions, int max_images) {
    if (data.size() == 0) throw std::invalid_argument("evaluate: empty dataset");
    if (conditions.empty()) throw std::invalid_argument("evaluate: no conditions");
    for (const auto& c : conditions) c.validate();
    const int n = max_images > 0 ? std::min<int>(max_images, static_cast<int>(data.size()))
                                 : static_cast<int>(data.size());

    EvalReport report;
    report.rows.resize(conditions.size());
    for (size_t c = 0; c < conditions.size(); ++c) {
        EvalRow& row = report.rows[c];
        row.model_id = label.model_id;
        row.method = label.method;
        row.defense = label.defense;
        row.condition = conditions[c];
        row.records.resize(static_cast<size_t>(n));
    }

    // One task per (condition, image); the model is read-only.
    const size_t tasks = conditions.size() * static_cast<size_t>(n);
    parallel_for(tasks, [&](size_t t) {
        size_t c = t / static_cast<size_t>(n);
        int i = static_cast<int>(t % static_cast<size_t>(n));
        report.rows[c].records[static_cast<size_t>(i)] =
            eval_one(model, data.hazy[static_cast<size_t>(i)], data.clean[static_cast<size_t>(i)],
                     conditions[c], i);
    });
    for (auto& row : report.rows) finalize_row(row);
    return report;
}

EvalRow hazy_baseline_row(const Dataset& data, int max_images) {
    const int n = max_images > 0 ? std::min<int>(max_images, static_cast<int>(data.size()))
                                 : static_cast<int>(data.size());
    EvalRow row;
    row.model_id = "no-op";
    row.method = "identity";
    row.defense = "none";
    row.condition.kind = CondKind::Clean;
    row.records.resize(static_cast<size_t>(n));
    parallel_for(static_cast<size_t>(n), [&](size_t i) {
        ImageRecord rec;
        rec.image_index = static_cast<int>(i);
        MetricPair m = metrics(data.hazy[i], data.clean[i]);
        rec.psnr = m.psnr;
        rec.ssim = m.ssim;
        row.records[i] = rec;
    });
    finalize_row(row);
    return row;
}

} // namespace dhz

#include "dehazekit/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "dehazekit/metrics.hpp"
#include "dehazekit/parallel.hpp"
#include "dehazekit/rng.hpp"

namespace fs = std::filesystem;

namespace dhz {

std::string defense_name(Defense d) {
    switch (d) {
        case Defense::None: return "none";
        case Defense::AT: return "at";
        case Defense::Trades: return "trades";
    }
    throw std::logic_error("defense_name: bad enum");
}

Defense defense_from_name(const std::string& name) {
    if (name == "none") return Defense::None;
    if (name == "at") return Defense::AT;
    if (name == "trades") return Defense::Trades;
    throw std::invalid_argument("unknown defense: " + name);
}

void TrainConfig::validate() const {
    if (epochs < 0) throw std::invalid_argument("train config: epochs must be >= 0");
    if (batch_size < 1) throw std::invalid_argument("train config: batch_size must be >= 1");
    if (learning_rate <= 0.0) throw std::invalid_argument("train config: learning_rate must be positive");
    if (patch_size < 1) throw std::invalid_argument("train config: patch_size must be >= 1");
    if (samples_per_epoch < 1)
        throw std::invalid_argument("train config: samples_per_epoch must be >= 1");
    if (lambda < 0.0) throw std::invalid_argument("train config: lambda must be >= 0");
    if (defense != Defense::None) attack_budget.validate();
}

void write_train_log_csv(const TrainLog& log, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write train log: " + path);
    out << "epoch,base_loss,reg_loss,clean_psnr,adv_psnr\n";
    char line[256];
    for (const auto& e : log.epochs) {
        std::snprintf(line, sizeof(line), "%d,%.12g,%.12g,%.12g,%.12g\n", e.epoch, e.base_loss,
                      e.reg_loss, e.clean_psnr, e.adv_psnr);
        out << line;
    }
}

double base_loss(const std::vector<Image>& pred, const std::vector<Image>& target) {
    if (pred.size() != target.size())
        throw std::invalid_argument("base_loss: batch size mismatch");
    if (pred.empty()) throw std::invalid_argument("base_loss: empty batch");
    double sum = 0.0;
    int64_t count = 0;
    for (size_t i = 0; i < pred.size(); ++i) {
        check_same_shape(pred[i], target[i], "base_loss");
        for (size_t j = 0; j < pred[i].data.size(); ++j)
            sum += std::abs(pred[i].data[j] - target[i].data[j]);
        count += pred[i].numel();
    }
    return sum / static_cast<double>(count);
}

Adam::Adam(const DehazeNet& model, double lr) : lr_(lr) {
    m_ = model.make_grad_buffer();
    v_ = model.make_grad_buffer();
}

void Adam::step(DehazeNet& model, const GradBuffer& grads) {
    if (grads.size() != model.num_params())
        throw std::invalid_argument("adam: gradient buffer size mismatch");
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (size_t p = 0; p < model.num_params(); ++p) {
        Param& par = model.param(p);
        if (!par.trainable) continue;
        auto& m = m_[p];
        auto& v = v_[p];
        const auto& g = grads[p];
        for (size_t j = 0; j < par.values.size(); ++j) {
            m[j] = beta1_ * m[j] + (1.0 - beta1_) * g[j];
            v[j] = beta2_ * v[j] + (1.0 - beta2_) * g[j] * g[j];
            double mhat = m[j] / bc1;
            double vhat = v[j] / bc2;
            par.values[j] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

namespace {

// d(mean l1)/d(pred) for one image inside a batch with batch_elems total
// scalars across the batch.
Tensor l1_mean_grad(const Image& pred, const Image& target, int64_t batch_elems) {
    Tensor g(pred.shape);
    const double inv = 1.0 / static_cast<double>(batch_elems);
    for (size_t i = 0; i < g.data.size(); ++i) {
        double d = pred.data[i] - target.data[i];
        g.data[i] = d > 0.0 ? inv : (d < 0.0 ? -inv : 0.0);
    }
    return g;
}

int64_t batch_elems_of(const std::vector<Image>& x) {
    int64_t n = 0;
    for (const auto& im : x) n += im.numel();
    return n;
}

void accumulate(GradBuffer& into, const GradBuffer& from) {
    for (size_t p = 0; p < into.size(); ++p)
        for (size_t j = 0; j < into[p].size(); ++j) into[p][j] += from[p][j];
}

void check_batch(const std::vector<Image>& x, const std::vector<Image>& y) {
    if (x.empty() || x.size() != y.size())
        throw std::invalid_argument("training step: bad batch");
    for (size_t i = 0; i < x.size(); ++i) check_same_shape(x[i], y[i], "training step");
}

} // namespace

StepLosses clean_step(DehazeNet& model, Adam& opt, const std::vector<Image>& x,
                      const std::vector<Image>& y) {
    check_batch(x, y);
    const int64_t elems = batch_elems_of(x);
    const size_t n = x.size();
    std::vector<GradBuffer> grads(n);
    std::vector<double> losses(n, 0.0);
    parallel_for(n, [&](size_t i) {
        ForwardTrace tr;
        Image pred = model.forward(x[i], tr);
        double s = 0.0;
        for (size_t j = 0; j < pred.data.size(); ++j) s += std::abs(pred.data[j] - y[i].data[j]);
        losses[i] = s;
        GradBuffer g = model.make_grad_buffer();
        model.backward(l1_mean_grad(pred, y[i], elems), tr, &g);
        grads[i] = std::move(g);
    });
    GradBuffer total = model.make_grad_buffer();
    double loss = 0.0;
    for (size_t i = 0; i < n; ++i) {
        accumulate(total, grads[i]);
        loss += losses[i];
    }
    opt.step(model, total);
    StepLosses out;
    out.base = loss / static_cast<double>(elems);
    out.total = out.base;
    return out;
}

StepLosses at_step(DehazeNet& model, Adam& opt, const std::vector<Image>& x,
                   const std::vector<Image>& y, const TrainConfig& cfg, uint64_t step_seed) {
    check_batch(x, y);
    const int64_t elems = batch_elems_of(x);
    const size_t n = x.size();
    std::vector<GradBuffer> grads(n);
    std::vector<double> losses(n, 0.0);
    parallel_for(n, [&](size_t i) {
        LinfBudget b = cfg.attack_budget;
        b.seed = derive_seed(step_seed, static_cast<uint64_t>(i));
        AttackResult atk = linf_attack(model, x[i], y[i], b);
        ForwardTrace tr;
        Image pred = model.forward(atk.adversarial_input, tr);
        double s = 0.0;
        for (size_t j = 0; j < pred.data.size(); ++j) s += std::abs(pred.data[j] - y[i].data[j]);
        losses[i] = s;
        GradBuffer g = model.make_grad_buffer();
        model.backward(l1_mean_grad(pred, y[i], elems), tr, &g);
        grads[i] = std::move(g);
    });
    GradBuffer total = model.make_grad_buffer();
    double loss = 0.0;
    for (size_t i = 0; i < n; ++i) {
        accumulate(total, grads[i]);
        loss += losses[i];
    }
    opt.step(model, total);
    StepLosses out;
    out.base = loss / static_cast<double>(elems);
    out.total = out.base;
    return out;
}

StepLosses trades_step(DehazeNet& model, Adam& opt, const std::vector<Image>& x,
                       const std::vector<Image>& y, const TrainConfig& cfg, uint64_t step_seed) {
    check_batch(x, y);
    const int64_t elems = batch_elems_of(x);
    const size_t n = x.size();
    std::vector<GradBuffer> grads(n);
    std::vector<double> base_losses(n, 0.0), reg_losses(n, 0.0);
    parallel_for(n, [&](size_t i) {
        LinfBudget b = cfg.attack_budget;
        b.seed = derive_seed(step_seed, static_cast<uint64_t>(i));
        AttackResult atk = linf_attack(model, x[i], y[i], b);

        ForwardTrace tr_clean, tr_adv;
        Image pred = model.forward(x[i], tr_clean);
        Image pred_adv = model.forward(atk.adversarial_input, tr_adv);

        const double inv = 1.0 / static_cast<double>(elems);
        Tensor dpred(pred.shape), dpred_adv(pred.shape);
        double bl = 0.0, rl = 0.0;
        for (size_t j = 0; j < pred.data.size(); ++j) {
            double db = pred.data[j] - y[i].data[j];
            double dr = pred.data[j] - pred_adv.data[j];
            bl += std::abs(db);
            rl += std::abs(dr);
            double sb = db > 0.0 ? 1.0 : (db < 0.0 ? -1.0 : 0.0);
            double sr = dr > 0.0 ? 1.0 : (dr < 0.0 ? -1.0 : 0.0);
            dpred.data[j] = inv * (sb + cfg.lambda * sr);
            dpred_adv.data[j] = inv * (-cfg.lambda * sr);
        }
        base_losses[i] = bl;
        reg_losses[i] = rl;
        GradBuffer g = model.make_grad_buffer();
        model.backward(dpred, tr_clean, &g);
        if (cfg.lambda != 0.0) model.backward(dpred_adv, tr_adv, &g);
        grads[i] = std::move(g);
    });
    GradBuffer total = model.make_grad_buffer();
    double bl = 0.0, rl = 0.0;
    for (size_t i = 0; i < n; ++i) {
        accumulate(total, grads[i]);
        bl += base_losses[i];
        rl += reg_losses[i];
    }
    opt.step(model, total);
    StepLosses out;
    out.base = bl / static_cast<double>(elems);
    out.reg = rl / static_cast<double>(elems);
    out.total = out.base + cfg.lambda * out.reg;
    return out;
}

PatchSampler::PatchSampler(const Dataset& data, int patch_size, int samples_per_epoch,
                           uint64_t seed)
    : data_(&data), patch_(patch_size), count_(samples_per_epoch), seed_(seed) {
    if (data.size() == 0) throw std::invalid_argument("patch sampler: empty dataset");
    for (const auto& im : data.hazy)
        if (im.dim(0) < patch_size || im.dim(1) < patch_size)
            throw std::invalid_argument("patch sampler: patch larger than an image");
}

std::vector<PatchPair> PatchSampler::epoch(int epoch_index) const {
    Rng rng(derive_seed(seed_, 0xe90c000 + static_cast<uint64_t>(epoch_index)));
    std::vector<PatchPair> out;
    out.reserve(static_cast<size_t>(count_));
    for (int s = 0; s < count_; ++s) {
        PatchPair p;
        p.image_index = rng.uniform_int(static_cast<int>(data_->size()));
        const Image& hazy = data_->hazy[static_cast<size_t>(p.image_index)];
        const Image& clean = data_->clean[static_cast<size_t>(p.image_index)];
        p.row = rng.uniform_int(hazy.dim(0) - patch_ + 1);
        p.col = rng.uniform_int(hazy.dim(1) - patch_ + 1);
        p.hazy = make_image(patch_, patch_);
        p.clean = make_image(patch_, patch_);
        for (int r = 0; r < patch_; ++r)
            for (int c = 0; c < patch_; ++c)
                for (int ch = 0; ch < 3; ++ch) {
                    image_at(p.hazy, r, c, ch) = image_at(hazy, p.row + r, p.col + c, ch);
                    image_at(p.clean, r, c, ch) = image_at(clean, p.row + r, p.col + c, ch);
                }
        out.push_back(std::move(p));
    }
    return out;
}

namespace {

struct ValStats {
    double clean_psnr = 0.0;
    double adv_psnr = 0.0;
};

ValStats validate_model(const DehazeNet& model, const Dataset& data, const TrainConfig& cfg) {
    const size_t k = std::min<size_t>(static_cast<size_t>(std::max(cfg.val_images, 1)), data.size());
    std::vector<double> clean_v(k, 0.0), adv_v(k, 0.0);
    parallel_for(k, [&](size_t i) {
        const Image& hazy = data.hazy[i];
        const Image& clean = data.clean[i];
        clean_v[i] = psnr(model.forward(hazy), clean);
        LinfBudget b = cfg.attack_budget;
        b.steps = cfg.val_attack_steps;
        b.seed = derive_seed(cfg.seed, 0xa11d + static_cast<uint64_t>(i));
        AttackResult atk = linf_attack(model, hazy, clean, b);
        adv_v[i] = psnr(model.forward(atk.adversarial_input), clean);
    });
    ValStats v;
    for (size_t i = 0; i < k; ++i) {
        v.clean_psnr += clean_v[i];
        v.adv_psnr += adv_v[i];
    }
    v.clean_psnr /= static_cast<double>(k);
    v.adv_psnr /= static_cast<double>(k);
    return v;
}

} // namespace

FinetuneResult finetune(const DehazeNet& base, const AdapterSpec& spec, const Dataset& data,
                        const TrainConfig& cfg, const std::string& checkpoint_dir,
                        const std::string& base_checkpoint) {
    cfg.validate();
    spec.validate();
    if (cfg.defense != Defense::Trades && cfg.lambda != 0.5)
        std::fprintf(stderr, "note: lambda is ignored unless defense=trades\n");

    FinetuneResult result{base, TrainLog{}};
    DehazeNet& model = result.model;
    apply_adapter(model, spec);

    std::string base_path = base_checkpoint;
    if (!checkpoint_dir.empty()) {
        fs::create_directories(checkpoint_dir);
        if (spec.method != AdapterKind::None && base_path.empty()) {
            base_path = (fs::path(checkpoint_dir) / "base.json").string();
            save_checkpoint(base, base_path);
        }
    }
    auto save_epoch = [&](const std::string& name, int epoch, const ValStats& v) {
        if (checkpoint_dir.empty()) return;
        std::map<std::string, std::string> meta{
            {"epoch", std::to_string(epoch)},
            {"defense", defense_name(cfg.defense)},
            {"clean_psnr", std::to_string(v.clean_psnr)},
            {"adv_psnr", std::to_string(v.adv_psnr)},
        };
        std::string path = (fs::path(checkpoint_dir) / name).string();
        if (spec.method == AdapterKind::None) save_checkpoint(model, path, meta);
        else save_adapter_checkpoint(model, path, base_path, meta);
    };

    Adam opt(model, cfg.learning_rate);
    PatchSampler sampler(data, cfg.patch_size, cfg.samples_per_epoch, cfg.seed);
    double best_adv = -1.0;

    for (int e = 0; e < cfg.epochs; ++e) {
        std::vector<PatchPair> patches = sampler.epoch(e);
        double sum_base = 0.0, sum_reg = 0.0;
        int batches = 0;
        for (size_t start = 0; start < patches.size(); start += static_cast<size_t>(cfg.batch_size)) {
            size_t stop = std::min(patches.size(), start + static_cast<size_t>(cfg.batch_size));
            std::vector<Image> bx, by;
            for (size_t i = start; i < stop; ++i) {
                bx.push_back(patches[i].hazy);
                by.push_back(patches[i].clean);
            }
            uint64_t step_seed =
                derive_seed(cfg.seed, (static_cast<uint64_t>(e) << 24) + static_cast<uint64_t>(batches) + 1);
            StepLosses losses;
            switch (cfg.defense) {
                case Defense::None: losses = clean_step(model, opt, bx, by); break;
                case Defense::AT: losses = at_step(model, opt, bx, by, cfg, step_seed); break;
                case Defense::Trades: losses = trades_step(model, opt, bx, by, cfg, step_seed); break;
            }
            sum_base += losses.base;
            sum_reg += losses.reg;
            ++batches;
        }
        ValStats v = validate_model(model, data, cfg);
        EpochStats stats;
        stats.epoch = e;
        stats.base_loss = batches ? sum_base / batches : 0.0;
        stats.reg_loss = batches ? sum_reg / batches : 0.0;
        stats.clean_psnr = v.clean_psnr;
        stats.adv_psnr = v.adv_psnr;
        result.log.epochs.push_back(stats);

        char name[64];
        std::snprintf(name, sizeof(name), "epoch_%03d.json", e);
        save_epoch(name, e, v);
        if (v.adv_psnr > best_adv) {
            best_adv = v.adv_psnr;
            save_epoch("best.json", e, v);
        }
    }
    if (!checkpoint_dir.empty())
        write_train_log_csv(result.log, (fs::path(checkpoint_dir) / "train_log.csv").string());
    return result;
}

} // namespace dhz

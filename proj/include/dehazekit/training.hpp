#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dehazekit/adapters.hpp"
#include "dehazekit/attacks.hpp"
#include "dehazekit/net.hpp"
#include "dehazekit/synth.hpp"

namespace dhz {

enum class Defense { None, AT, Trades };

std::string defense_name(Defense d);
Defense defense_from_name(const std::string& name);

struct TrainConfig {
    int epochs = 15;
    int batch_size = 8;
    double learning_rate = 1e-5;
    int patch_size = 64;
    int samples_per_epoch = 500;
    Defense defense = Defense::None;
    double lambda = 0.5;                          // TRADES regularization weight
    LinfBudget attack_budget{1.0 / 255.0, 5, 0.0, 0}; // training-time inner attack
    uint64_t seed = 0;
    int val_images = 4;  // fixed validation subset size for the log
    int val_attack_steps = 5;

    void validate() const;
};

struct EpochStats {
    int epoch = 0;
    double base_loss = 0.0;
    double reg_loss = 0.0;
    double clean_psnr = 0.0;
    double adv_psnr = 0.0;
};

struct TrainLog {
    std::vector<EpochStats> epochs;
};

void write_train_log_csv(const TrainLog& log, const std::string& path);

// Mean absolute error over every element of the batch.
double base_loss(const std::vector<Image>& pred, const std::vector<Image>& target);

// Adam over the model's trainable parameters; state lives here.
class Adam {
public:
    Adam(const DehazeNet& model, double lr);
    void step(DehazeNet& model, const GradBuffer& grads);

private:
    double lr_, beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
    int64_t t_ = 0;
    GradBuffer m_, v_;
};

struct StepLosses {
    double base = 0.0;
    double reg = 0.0;
    double total = 0.0;
};

// One optimizer step on clean inputs (defense = none).
StepLosses clean_step(DehazeNet& model, Adam& opt, const std::vector<Image>& x,
                      const std::vector<Image>& y);

// Eq.-4 step: inputs replaced by their per-iteration adversarial versions.
StepLosses at_step(DehazeNet& model, Adam& opt, const std::vector<Image>& x,
                   const std::vector<Image>& y, const TrainConfig& cfg, uint64_t step_seed);

// Eq.-5 step: total = l1(T(x), y) + lambda * l1(T(x), T(x+z)), z fixed.
StepLosses trades_step(DehazeNet& model, Adam& opt, const std::vector<Image>& x,
                       const std::vector<Image>& y, const TrainConfig& cfg, uint64_t step_seed);

struct PatchPair {
    int image_index = 0;
    int row = 0, col = 0;
    Image hazy, clean;
};

// Seeded co-located crops; the sequence depends only on (seed, epoch).
class PatchSampler {
public:
    PatchSampler(const Dataset& data, int patch_size, int samples_per_epoch, uint64_t seed);
    std::vector<PatchPair> epoch(int epoch_index) const;

private:
    const Dataset* data_;
    int patch_, count_;
    uint64_t seed_;
};

struct FinetuneResult {
    DehazeNet model;
    TrainLog log;
};

// Applies the adapter (method=none trains every parameter), then runs
// cfg.epochs of the configured defense over seeded patch batches. When
// checkpoint_dir is nonempty, per-epoch and best-adversarial checkpoints are
// written there; adapter runs reference base_checkpoint (which is written
// first if no path is supplied).
FinetuneResult finetune(const DehazeNet& base, const AdapterSpec& spec, const Dataset& data,
                        const TrainConfig& cfg, const std::string& checkpoint_dir = "",
                        const std::string& base_checkpoint = "");

} // namespace dhz

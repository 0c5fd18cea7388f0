#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dehazekit/attacks.hpp"
#include "dehazekit/net.hpp"
#include "dehazekit/synth.hpp"

namespace dhz {

enum class CondKind { Clean, Gaussian, Linf, L0 };

std::string cond_kind_name(CondKind k);

struct EvalCondition {
    CondKind kind = CondKind::Clean;
    double parameter = 0.0; // sigma, epsilon, or pixel count; ignored for clean
    uint64_t seed = 0;
    LinfBudget linf;        // search hyperparameters for linf conditions
    L0Budget l0;            // and for l0 conditions

    std::string label() const;
    void validate() const;
};

// The Table-2-style default grid: clean, gaussian sigma, linf over epsilons,
// l0 over pixel counts.
std::vector<EvalCondition> default_grid(double sigma, const std::vector<double>& epsilons,
                                        const std::vector<int>& pixel_counts, uint64_t seed);

struct ImageRecord {
    int image_index = 0;
    std::string status = "ok"; // error text when a per-image evaluation failed
    double psnr = 0.0;
    double ssim = 0.0;
    double objective = 0.0;    // attack objective (0 for clean/gaussian)
};

struct EvalRow {
    std::string model_id;
    std::string method;  // adapter kind
    std::string defense;
    EvalCondition condition;
    double mean_psnr = 0.0;
    double mean_ssim = 0.0;
    std::vector<ImageRecord> records;
};

struct EvalReport {
    std::vector<EvalRow> rows;
    std::map<std::string, std::string> metadata;
};

struct ModelLabel {
    std::string model_id = "base";
    std::string method = "none";
    std::string defense = "none";
};

// Grid evaluation: for every (condition, image), build the possibly attacked
// hazy input, run the model, and score PSNR/SSIM against the clean ground
// truth. Per-image failures are recorded in the row, not thrown.
// max_images = 0 evaluates the whole dataset.
EvalReport evaluate(const DehazeNet& model, const ModelLabel& label, const Dataset& data,
                    const std::vector<EvalCondition>& conditions, int max_images = 0);

// Table-3-style no-op baseline: scores the hazy input itself against the
// clean ground truth (the "drop below the original PSNR" comparison point).
EvalRow hazy_baseline_row(const Dataset& data, int max_images = 0);

} // namespace dhz

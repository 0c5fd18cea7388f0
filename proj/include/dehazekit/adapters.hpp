#pragma once

#include <string>

#include "dehazekit/net.hpp"

namespace dhz {

// Parameter-efficient fine-tuning strategies. Each apply_* call rewires the
// trainable set of a freshly built (or loaded base) model in place; a model
// carries at most one strategy.

struct AdapterSpec {
    AdapterKind method = AdapterKind::LL;
    int kernel_size = 3;          // LINEAD only; must be odd
    bool sb_per_channel = false;  // SB: one scale per channel instead of one scalar

    void validate() const;
};

struct TuneStats {
    int64_t total_params = 0;
    int64_t tuned_params = 0;
    double tuned_percent = 0.0;
};

// Train the reconstruction head only; everything else frozen.
void apply_ll(DehazeNet& model);

// Trainable scale at each block boundary (init 1.0) plus all bias-group
// parameters; everything else frozen.
void apply_sb(DehazeNet& model, bool per_channel = false);

// Identity-initialized channel-preserving convolution at each block
// boundary; only those convolutions train.
void apply_linead(DehazeNet& model, int kernel_size = 3);

// Dispatch on spec.method. AdapterKind::None leaves the model untouched.
void apply_adapter(DehazeNet& model, const AdapterSpec& spec);

TuneStats tune_stats(const DehazeNet& model);

} // namespace dhz

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "dehazekit/image.hpp"

namespace dhz {

// A small image-to-image dehazing transformer: strided-conv patch embedding,
// pre-norm windowed multi-head self-attention blocks with MLPs, a linear
// reconstruction head back to pixel space, and a global input residual with
// the output clamped to [0,1]. Forward and reverse passes are explicit;
// gradients are checked against finite differences in the tests.

struct NetConfig {
    int embed_dim = 24;
    int num_blocks = 4;
    int num_heads = 2;
    int patch_size = 4;
    int window_size = 8; // on the token grid; shrunk to the largest grid divisor that fits
    uint64_t seed = 0;

    void validate() const;
};

enum class ParamGroup { Backbone, FinalLayer, Bias, AdapterScale, AdapterLinear };

std::string param_group_name(ParamGroup g);

struct Param {
    std::string name;
    std::vector<int> shape;
    std::vector<double> values;
    bool trainable = true;
    ParamGroup group = ParamGroup::Backbone;

    int64_t size() const { return static_cast<int64_t>(values.size()); }
};

struct RegistryEntry {
    std::string name;
    std::vector<int> shape;
    bool trainable;
    ParamGroup group;
    int64_t size;
};

struct BlockBoundary {
    int index;
    int channel_count;
};

enum class AdapterKind { None, LL, SB, Linead };

std::string adapter_kind_name(AdapterKind k);
AdapterKind adapter_kind_from_name(const std::string& name);

struct LayerNormTrace {
    std::vector<double> norm; // normalized activations, per token x channel
    std::vector<double> rstd; // 1/sqrt(var+eps), per token
};

struct BlockTrace {
    Tensor ln1_in;   // residual stream entering the block [Nt, C]
    LayerNormTrace ln1;
    Tensor attn_in;  // ln1 output
    Tensor qkv;      // [Nt, 3C]
    std::vector<double> probs; // softmax maps, window x head x N x N
    Tensor ctx;      // attention context before output projection [Nt, C]
    Tensor ln2_in;   // stream after attention residual [Nt, C]
    LayerNormTrace ln2;
    Tensor mlp_in;   // ln2 output
    Tensor mlp_h1;   // pre-GELU [Nt, hidden]
    Tensor mlp_act;  // post-GELU
    Tensor boundary_in; // tokens entering the adapter slot [Nt, C]
};

struct ForwardTrace {
    Tensor input;
    int grid_h = 0, grid_w = 0, win = 0;
    std::vector<BlockTrace> blocks;
    Tensor head_in;   // final tokens [Nt, C]
    Tensor pre_clamp; // input + reconstruction, before the output clamp
    Tensor output;
};

// Scalar objective over a prediction, with its gradient. Used by
// input_gradient and by the attacks.
struct InputObjective {
    std::function<double(const Tensor& pred)> value;
    std::function<Tensor(const Tensor& pred)> grad;
};

// objective(pred) = sum |pred - target| (the q=1 attack objective).
InputObjective l1_distance_objective(const Image& target);

using GradBuffer = std::vector<std::vector<double>>;

class DehazeNet {
public:
    static DehazeNet build(const NetConfig& cfg);

    const NetConfig& config() const { return cfg_; }
    AdapterKind adapter() const { return adapter_; }
    int adapter_kernel() const { return adapter_kernel_; }

    std::vector<BlockBoundary> boundaries() const;
    std::vector<RegistryEntry> registry() const;

    size_t num_params() const { return params_.size(); }
    Param& param(size_t i) { return params_[i]; }
    const Param& param(size_t i) const { return params_[i]; }
    int find_param(const std::string& name) const;

    int64_t total_scalars() const;
    int64_t trainable_scalars() const;

    // Forward pass. Spatial dims must be divisible by patch_size.
    // Output is clamped to [0,1].
    Image forward(const Image& x) const;
    Image forward(const Image& x, ForwardTrace& trace) const;

    // Reverse pass from d(objective)/d(prediction). Returns the input
    // gradient; accumulates parameter gradients into param_grads when given.
    // The model itself is untouched, so concurrent calls are safe.
    Tensor backward(const Tensor& dpred, const ForwardTrace& trace,
                    GradBuffer* param_grads) const;

    Tensor input_gradient(const Image& x, const InputObjective& objective) const;

    GradBuffer make_grad_buffer() const;

    // Adapter structure (parameter insertion only; freezing policy lives in
    // adapters.cpp). One scalar / one conv per block boundary.
    void attach_sb_scales(bool per_channel = false);
    void attach_linead_convs(int kernel_size);
    void set_adapter_kind(AdapterKind k) { adapter_ = k; }

private:
    DehazeNet() = default;

    struct BlockParams {
        int n1g, n1b, qkv_w, qkv_b, proj_w, proj_b;
        int n2g, n2b, fc1_w, fc1_b, fc2_w, fc2_b;
        int ad_scale = -1;
        int ad_conv_w = -1, ad_conv_b = -1;
    };

    int add_param(const std::string& name, std::vector<int> shape, ParamGroup group);
    void forward_impl(const Image& x, ForwardTrace* trace, Image& out) const;

    NetConfig cfg_;
    std::vector<Param> params_;
    int pe_w_ = -1, pe_b_ = -1, head_w_ = -1, head_b_ = -1;
    std::vector<BlockParams> blocks_;
    AdapterKind adapter_ = AdapterKind::None;
    int adapter_kernel_ = 0;
};

// Checkpoints. A full checkpoint is self-contained; an adapter checkpoint
// references its base file (relative to its own location) and stores only
// the adapter spec plus the values of parameters trained on top.
void save_checkpoint(const DehazeNet& model, const std::string& path,
                     const std::map<std::string, std::string>& meta = {});
void save_adapter_checkpoint(const DehazeNet& model, const std::string& path,
                             const std::string& base_checkpoint,
                             const std::map<std::string, std::string>& meta = {});
DehazeNet load_checkpoint(const std::string& path);
std::map<std::string, std::string> checkpoint_meta(const std::string& path);

// FNV-1a checksum over a parameter subset; used for freeze-integrity checks.
uint64_t param_checksum(const DehazeNet& model, bool frozen_only);

} // namespace dhz

#include "dehazekit/adapters.hpp"

#include <stdexcept>

namespace dhz {

void AdapterSpec::validate() const {
    if (method == AdapterKind::Linead && (kernel_size < 1 || kernel_size % 2 == 0))
        throw std::invalid_argument("adapter spec: kernel_size must be a positive odd integer");
}

namespace {

void require_fresh(const DehazeNet& model) {
    if (model.adapter() != AdapterKind::None)
        throw std::logic_error("model already carries an adapter strategy");
}

void freeze_except(DehazeNet& model, bool keep_scale, bool keep_bias, bool keep_linear,
                   bool keep_final) {
    for (size_t i = 0; i < model.num_params(); ++i) {
        Param& p = model.param(i);
        switch (p.group) {
            case ParamGroup::Backbone: p.trainable = false; break;
            case ParamGroup::FinalLayer: p.trainable = keep_final; break;
            case ParamGroup::Bias: p.trainable = keep_bias; break;
            case ParamGroup::AdapterScale: p.trainable = keep_scale; break;
            case ParamGroup::AdapterLinear: p.trainable = keep_linear; break;
        }
    }
}

} // namespace

void apply_ll(DehazeNet& model) {
    require_fresh(model);
    bool has_final = false;
    for (size_t i = 0; i < model.num_params(); ++i)
        if (model.param(i).group == ParamGroup::FinalLayer) has_final = true;
    if (!has_final) throw std::logic_error("apply_ll: model lacks a final-layer group");
    freeze_except(model, false, false, false, true);
    model.set_adapter_kind(AdapterKind::LL);
}

void apply_sb(DehazeNet& model, bool per_channel) {
    require_fresh(model);
    model.attach_sb_scales(per_channel);
    freeze_except(model, true, true, false, false);
    model.set_adapter_kind(AdapterKind::SB);
}

void apply_linead(DehazeNet& model, int kernel_size) {
    require_fresh(model);
    model.attach_linead_convs(kernel_size);
    freeze_except(model, false, false, true, false);
    model.set_adapter_kind(AdapterKind::Linead);
}

void apply_adapter(DehazeNet& model, const AdapterSpec& spec) {
    spec.validate();
    switch (spec.method) {
        case AdapterKind::None: return;
        case AdapterKind::LL: apply_ll(model); return;
        case AdapterKind::SB: apply_sb(model, spec.sb_per_channel); return;
        case AdapterKind::Linead: apply_linead(model, spec.kernel_size); return;
    }
}

TuneStats tune_stats(const DehazeNet& model) {
    TuneStats s;
    for (size_t i = 0; i < model.num_params(); ++i) {
        const Param& p = model.param(i);
        s.total_params += p.size();
        if (p.trainable) s.tuned_params += p.size();
    }
    s.tuned_percent =
        s.total_params == 0 ? 0.0 : 100.0 * static_cast<double>(s.tuned_params) /
                                        static_cast<double>(s.total_params);
    return s;
}

} // namespace dhz

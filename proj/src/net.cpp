#include "dehazekit/net.hpp"

#include <json.hpp>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "dehazekit/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace dhz {

namespace {

constexpr double kLnEps = 1e-5;
constexpr double kRelBiasSlope = -0.05; // fixed locality prior on attention logits

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2)); }

double gelu_grad(double x) {
    return 0.5 * (1.0 + std::erf(x * M_SQRT1_2)) +
           x * std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
}

int reflect_index(int i, int n) {
    while (i < 0 || i >= n) {
        if (i < 0) i = -i - 1;
        if (i >= n) i = 2 * n - 1 - i;
    }
    return i;
}

// out[n, :dout] = in[n, :din] * W^T + b, W stored [dout, din] row-major.
void linear_forward(const double* in, const double* w, const double* b, double* out, int n,
                    int din, int dout) {
    for (int i = 0; i < n; ++i) {
        const double* xi = in + static_cast<int64_t>(i) * din;
        double* oi = out + static_cast<int64_t>(i) * dout;
        for (int j = 0; j < dout; ++j) {
            const double* wj = w + static_cast<int64_t>(j) * din;
            double acc = b ? b[j] : 0.0;
            for (int c = 0; c < din; ++c) acc += xi[c] * wj[c];
            oi[j] = acc;
        }
    }
}

// Backward of linear_forward. Any of dw/db/din_grad may be null.
void linear_backward(const double* in, const double* w, const double* dout, int n, int din,
                     int dout_dim, double* dw, double* db, double* din_grad) {
    for (int i = 0; i < n; ++i) {
        const double* xi = in + static_cast<int64_t>(i) * din;
        const double* gi = dout + static_cast<int64_t>(i) * dout_dim;
        for (int j = 0; j < dout_dim; ++j) {
            double g = gi[j];
            if (g == 0.0) continue;
            if (db) db[j] += g;
            if (dw) {
                double* dwj = dw + static_cast<int64_t>(j) * din;
                for (int c = 0; c < din; ++c) dwj[c] += g * xi[c];
            }
            if (din_grad) {
                const double* wj = w + static_cast<int64_t>(j) * din;
                double* di = din_grad + static_cast<int64_t>(i) * din;
                for (int c = 0; c < din; ++c) di[c] += g * wj[c];
            }
        }
    }
}

void layernorm_forward(const double* in, const double* gamma, const double* beta, double* out,
                       int n, int c, LayerNormTrace* tr) {
    if (tr) {
        tr->norm.assign(static_cast<size_t>(n) * c, 0.0);
        tr->rstd.assign(static_cast<size_t>(n), 0.0);
    }
    for (int i = 0; i < n; ++i) {
        const double* xi = in + static_cast<int64_t>(i) * c;
        double mean = 0.0;
        for (int j = 0; j < c; ++j) mean += xi[j];
        mean /= c;
        double var = 0.0;
        for (int j = 0; j < c; ++j) {
            double d = xi[j] - mean;
            var += d * d;
        }
        var /= c;
        double rstd = 1.0 / std::sqrt(var + kLnEps);
        double* oi = out + static_cast<int64_t>(i) * c;
        for (int j = 0; j < c; ++j) {
            double nj = (xi[j] - mean) * rstd;
            if (tr) tr->norm[static_cast<size_t>(i) * c + j] = nj;
            oi[j] = gamma[j] * nj + beta[j];
        }
        if (tr) tr->rstd[static_cast<size_t>(i)] = rstd;
    }
}

void layernorm_backward(const LayerNormTrace& tr, const double* gamma, const double* dout, int n,
                        int c, double* dgamma, double* dbeta, double* din) {
    for (int i = 0; i < n; ++i) {
        const double* gi = dout + static_cast<int64_t>(i) * c;
        const double* ni = tr.norm.data() + static_cast<int64_t>(i) * c;
        double rstd = tr.rstd[static_cast<size_t>(i)];
        double sum_dn = 0.0, sum_dn_n = 0.0;
        for (int j = 0; j < c; ++j) {
            double dn = gi[j] * gamma[j];
            sum_dn += dn;
            sum_dn_n += dn * ni[j];
            if (dbeta) dbeta[j] += gi[j];
            if (dgamma) dgamma[j] += gi[j] * ni[j];
        }
        double mean_dn = sum_dn / c;
        double mean_dn_n = sum_dn_n / c;
        double* di = din + static_cast<int64_t>(i) * c;
        for (int j = 0; j < c; ++j) {
            double dn = gi[j] * gamma[j];
            di[j] += rstd * (dn - mean_dn - ni[j] * mean_dn_n);
        }
    }
}

} // namespace

void NetConfig::validate() const {
    if (embed_dim < 1 || num_blocks < 1 || num_heads < 1 || patch_size < 1 || window_size < 1)
        throw std::invalid_argument("net config: all sizes must be positive");
    if (embed_dim % num_heads != 0)
        throw std::invalid_argument("net config: embed_dim must be divisible by num_heads");
}

std::string param_group_name(ParamGroup g) {
    switch (g) {
        case ParamGroup::Backbone: return "backbone";
        case ParamGroup::FinalLayer: return "final-layer";
        case ParamGroup::Bias: return "bias";
        case ParamGroup::AdapterScale: return "adapter-scale";
        case ParamGroup::AdapterLinear: return "adapter-linear";
    }
    throw std::logic_error("param_group_name: bad enum");
}

namespace {
ParamGroup param_group_from_name(const std::string& s) {
    if (s == "backbone") return ParamGroup::Backbone;
    if (s == "final-layer") return ParamGroup::FinalLayer;
    if (s == "bias") return ParamGroup::Bias;
    if (s == "adapter-scale") return ParamGroup::AdapterScale;
    if (s == "adapter-linear") return ParamGroup::AdapterLinear;
    throw std::invalid_argument("unknown parameter group: " + s);
}
} // namespace

std::string adapter_kind_name(AdapterKind k) {
    switch (k) {
        case AdapterKind::None: return "none";
        case AdapterKind::LL: return "ll";
        case AdapterKind::SB: return "sb";
        case AdapterKind::Linead: return "linead";
    }
    throw std::logic_error("adapter_kind_name: bad enum");
}

AdapterKind adapter_kind_from_name(const std::string& name) {
    if (name == "none") return AdapterKind::None;
    if (name == "ll") return AdapterKind::LL;
    if (name == "sb") return AdapterKind::SB;
    if (name == "linead") return AdapterKind::Linead;
    throw std::invalid_argument("unknown adapter kind: " + name);
}

InputObjective l1_distance_objective(const Image& target) {
    Image y = target;
    InputObjective obj;
    obj.value = [y](const Tensor& pred) {
        check_same_shape(pred, y, "l1 objective");
        double s = 0.0;
        for (size_t i = 0; i < pred.data.size(); ++i) s += std::abs(pred.data[i] - y.data[i]);
        return s;
    };
    obj.grad = [y](const Tensor& pred) {
        check_same_shape(pred, y, "l1 objective");
        Tensor g(pred.shape);
        for (size_t i = 0; i < pred.data.size(); ++i) {
            double d = pred.data[i] - y.data[i];
            g.data[i] = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
        }
        return g;
    };
    return obj;
}

int DehazeNet::add_param(const std::string& name, std::vector<int> shape, ParamGroup group) {
    Param p;
    p.name = name;
    p.shape = std::move(shape);
    p.values.assign(static_cast<size_t>(Tensor::numel_of(p.shape)), 0.0);
    p.group = group;
    p.trainable = true;
    params_.push_back(std::move(p));
    return static_cast<int>(params_.size() - 1);
}

DehazeNet DehazeNet::build(const NetConfig& cfg) {
    cfg.validate();
    DehazeNet net;
    net.cfg_ = cfg;
    const int c = cfg.embed_dim;
    const int hidden = 2 * c;
    const int ps = cfg.patch_size;
    const int patch_in = 3 * ps * ps;

    net.pe_w_ = net.add_param("patch_embed.weight", {c, patch_in}, ParamGroup::Backbone);
    net.pe_b_ = net.add_param("patch_embed.bias", {c}, ParamGroup::Bias);
    for (int b = 0; b < cfg.num_blocks; ++b) {
        std::string pre = "blocks." + std::to_string(b) + ".";
        BlockParams bp;
        bp.n1g = net.add_param(pre + "norm1.gamma", {c}, ParamGroup::Backbone);
        bp.n1b = net.add_param(pre + "norm1.beta", {c}, ParamGroup::Bias);
        bp.qkv_w = net.add_param(pre + "attn.qkv.weight", {3 * c, c}, ParamGroup::Backbone);
        bp.qkv_b = net.add_param(pre + "attn.qkv.bias", {3 * c}, ParamGroup::Bias);
        bp.proj_w = net.add_param(pre + "attn.proj.weight", {c, c}, ParamGroup::Backbone);
        bp.proj_b = net.add_param(pre + "attn.proj.bias", {c}, ParamGroup::Bias);
        bp.n2g = net.add_param(pre + "norm2.gamma", {c}, ParamGroup::Backbone);
        bp.n2b = net.add_param(pre + "norm2.beta", {c}, ParamGroup::Bias);
        bp.fc1_w = net.add_param(pre + "mlp.fc1.weight", {hidden, c}, ParamGroup::Backbone);
        bp.fc1_b = net.add_param(pre + "mlp.fc1.bias", {hidden}, ParamGroup::Bias);
        bp.fc2_w = net.add_param(pre + "mlp.fc2.weight", {c, hidden}, ParamGroup::Backbone);
        bp.fc2_b = net.add_param(pre + "mlp.fc2.bias", {c}, ParamGroup::Bias);
        net.blocks_.push_back(bp);
    }
    // The reconstruction head is the network's final layer; its bias counts
    // as final-layer, not bias-group, so LL owns the whole head.
    net.head_w_ = net.add_param("head.weight", {patch_in, c}, ParamGroup::FinalLayer);
    net.head_b_ = net.add_param("head.bias", {patch_in}, ParamGroup::FinalLayer);

    Rng rng(cfg.seed);
    for (auto& p : net.params_) {
        bool is_gamma = p.name.find("gamma") != std::string::npos;
        bool is_bias_like = p.name.find("bias") != std::string::npos ||
                            p.name.find("beta") != std::string::npos;
        if (is_gamma) {
            std::fill(p.values.begin(), p.values.end(), 1.0);
        } else if (is_bias_like) {
            std::fill(p.values.begin(), p.values.end(), 0.0);
        } else {
            for (double& v : p.values) v = rng.gaussian(0.0, 0.02);
        }
    }
    return net;
}

std::vector<BlockBoundary> DehazeNet::boundaries() const {
    std::vector<BlockBoundary> out;
    for (int b = 0; b < cfg_.num_blocks; ++b) out.push_back({b, cfg_.embed_dim});
    return out;
}

std::vector<RegistryEntry> DehazeNet::registry() const {
    std::vector<RegistryEntry> out;
    out.reserve(params_.size());
    for (const auto& p : params_)
        out.push_back({p.name, p.shape, p.trainable, p.group, p.size()});
    return out;
}

int DehazeNet::find_param(const std::string& name) const {
    for (size_t i = 0; i < params_.size(); ++i)
        if (params_[i].name == name) return static_cast<int>(i);
    return -1;
}

int64_t DehazeNet::total_scalars() const {
    int64_t n = 0;
    for (const auto& p : params_) n += p.size();
    return n;
}

int64_t DehazeNet::trainable_scalars() const {
    int64_t n = 0;
    for (const auto& p : params_)
        if (p.trainable) n += p.size();
    return n;
}

GradBuffer DehazeNet::make_grad_buffer() const {
    GradBuffer g(params_.size());
    for (size_t i = 0; i < params_.size(); ++i) g[i].assign(params_[i].values.size(), 0.0);
    return g;
}

void DehazeNet::attach_sb_scales(bool per_channel) {
    if (adapter_kernel_ != 0 || find_param("adapters.0.scale") >= 0)
        throw std::logic_error("adapters already attached");
    std::vector<int> shape = per_channel ? std::vector<int>{cfg_.embed_dim}
                                         : std::vector<int>{1};
    for (int b = 0; b < cfg_.num_blocks; ++b) {
        int idx = add_param("adapters." + std::to_string(b) + ".scale", shape,
                            ParamGroup::AdapterScale);
        auto& v = params_[static_cast<size_t>(idx)].values;
        std::fill(v.begin(), v.end(), 1.0); // exact identity at init
        blocks_[static_cast<size_t>(b)].ad_scale = idx;
    }
}

void DehazeNet::attach_linead_convs(int kernel_size) {
    if (kernel_size < 1 || kernel_size % 2 == 0)
        throw std::invalid_argument("linead: kernel_size must be a positive odd integer");
    if (adapter_kernel_ != 0 || find_param("adapters.0.conv.weight") >= 0)
        throw std::logic_error("adapters already attached");
    const int c = cfg_.embed_dim;
    const int k = kernel_size;
    for (int b = 0; b < cfg_.num_blocks; ++b) {
        std::string pre = "adapters." + std::to_string(b) + ".conv.";
        int wi = add_param(pre + "weight", {c, c, k, k}, ParamGroup::AdapterLinear);
        int bi = add_param(pre + "bias", {c}, ParamGroup::AdapterLinear);
        // Dirac identity: center tap of the diagonal channel is 1.
        auto& w = params_[static_cast<size_t>(wi)].values;
        for (int co = 0; co < c; ++co)
            w[((static_cast<int64_t>(co) * c + co) * k + k / 2) * k + k / 2] = 1.0;
        blocks_[static_cast<size_t>(b)].ad_conv_w = wi;
        blocks_[static_cast<size_t>(b)].ad_conv_b = bi;
    }
    adapter_kernel_ = kernel_size;
}

void DehazeNet::forward_impl(const Image& x, ForwardTrace* trace, Image& out) const {
    if (!is_image_shape(x)) throw std::invalid_argument("forward: expected HxWx3 image");
    const int h = x.dim(0), w = x.dim(1);
    const int ps = cfg_.patch_size;
    if (h % ps != 0 || w % ps != 0)
        throw std::invalid_argument("forward: spatial dims must be divisible by patch_size");
    const int gh = h / ps, gw = w / ps;
    // Effective window: largest divisor of both grid dims that fits the
    // configured size, so any grid tiles exactly (worst case 1x1 windows).
    int ww = std::min(cfg_.window_size, std::min(gh, gw));
    while (gh % ww != 0 || gw % ww != 0) --ww;

    const int c = cfg_.embed_dim;
    const int hidden = 2 * c;
    const int nt = gh * gw;
    const int heads = cfg_.num_heads;
    const int dh = c / heads;
    const int n = ww * ww;             // tokens per window
    const int nwin = (gh / ww) * (gw / ww);
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    if (trace) {
        trace->input = x;
        trace->grid_h = gh;
        trace->grid_w = gw;
        trace->win = ww;
        trace->blocks.assign(static_cast<size_t>(cfg_.num_blocks), BlockTrace{});
    }

    // Patch embedding.
    Tensor tokens({nt, c});
    {
        const auto& we = params_[static_cast<size_t>(pe_w_)].values;
        const auto& be = params_[static_cast<size_t>(pe_b_)].values;
        const int patch_in = 3 * ps * ps;
        std::vector<double> patch(static_cast<size_t>(patch_in));
        for (int gr = 0; gr < gh; ++gr)
            for (int gc = 0; gc < gw; ++gc) {
                for (int pr = 0; pr < ps; ++pr)
                    for (int pc = 0; pc < ps; ++pc)
                        for (int ch = 0; ch < 3; ++ch)
                            patch[static_cast<size_t>((pr * ps + pc) * 3 + ch)] =
                                image_at(x, gr * ps + pr, gc * ps + pc, ch);
                double* tok = tokens.ptr() + static_cast<int64_t>(gr * gw + gc) * c;
                for (int j = 0; j < c; ++j) {
                    const double* wj = we.data() + static_cast<int64_t>(j) * patch_in;
                    double acc = be[static_cast<size_t>(j)];
                    for (int i = 0; i < patch_in; ++i) acc += wj[i] * patch[static_cast<size_t>(i)];
                    tok[j] = acc;
                }
            }
    }

    for (int b = 0; b < cfg_.num_blocks; ++b) {
        const auto& bp = blocks_[static_cast<size_t>(b)];
        BlockTrace* bt = trace ? &trace->blocks[static_cast<size_t>(b)] : nullptr;
        LayerNormTrace ln_tmp;

        if (bt) bt->ln1_in = tokens;
        Tensor normed({nt, c});
        layernorm_forward(tokens.ptr(), params_[static_cast<size_t>(bp.n1g)].values.data(),
                          params_[static_cast<size_t>(bp.n1b)].values.data(), normed.ptr(), nt, c,
                          bt ? &bt->ln1 : &ln_tmp);
        if (bt) bt->attn_in = normed;

        // Windowed multi-head self-attention.
        Tensor qkv({nt, 3 * c});
        linear_forward(normed.ptr(), params_[static_cast<size_t>(bp.qkv_w)].values.data(),
                       params_[static_cast<size_t>(bp.qkv_b)].values.data(), qkv.ptr(), nt, c,
                       3 * c);
        if (bt) bt->qkv = qkv;

        Tensor ctx({nt, c});
        std::vector<double> probs_store;
        if (bt) probs_store.assign(static_cast<size_t>(nwin) * heads * n * n, 0.0);
        std::vector<double> logits(static_cast<size_t>(n) * n);
        std::vector<int> gtok(static_cast<size_t>(n));
        const int wins_per_row = gw / ww;
        for (int wi = 0; wi < nwin; ++wi) {
            const int wr0 = (wi / wins_per_row) * ww;
            const int wc0 = (wi % wins_per_row) * ww;
            for (int l = 0; l < n; ++l)
                gtok[static_cast<size_t>(l)] = (wr0 + l / ww) * gw + (wc0 + l % ww);
            for (int hd = 0; hd < heads; ++hd) {
                const int qo = hd * dh, ko = c + hd * dh, vo = 2 * c + hd * dh;
                for (int l1 = 0; l1 < n; ++l1) {
                    const double* q = qkv.ptr() + static_cast<int64_t>(gtok[static_cast<size_t>(l1)]) * 3 * c + qo;
                    const int r1 = l1 / ww, c1 = l1 % ww;
                    double maxv = -1e300;
                    for (int l2 = 0; l2 < n; ++l2) {
                        const double* k = qkv.ptr() + static_cast<int64_t>(gtok[static_cast<size_t>(l2)]) * 3 * c + ko;
                        double acc = 0.0;
                        for (int d = 0; d < dh; ++d) acc += q[d] * k[d];
                        const int r2 = l2 / ww, c2 = l2 % ww;
                        acc = acc * scale +
                              kRelBiasSlope * (std::abs(r1 - r2) + std::abs(c1 - c2));
                        logits[static_cast<size_t>(l1) * n + l2] = acc;
                        maxv = std::max(maxv, acc);
                    }
                    double sum = 0.0;
                    for (int l2 = 0; l2 < n; ++l2) {
                        double e = std::exp(logits[static_cast<size_t>(l1) * n + l2] - maxv);
                        logits[static_cast<size_t>(l1) * n + l2] = e;
                        sum += e;
                    }
                    for (int l2 = 0; l2 < n; ++l2) logits[static_cast<size_t>(l1) * n + l2] /= sum;
                    if (bt) {
                        double* dst = probs_store.data() +
                                      ((static_cast<size_t>(wi) * heads + hd) * n + l1) * n;
                        std::memcpy(dst, logits.data() + static_cast<size_t>(l1) * n,
                                    sizeof(double) * static_cast<size_t>(n));
                    }
                    double* o = ctx.ptr() + static_cast<int64_t>(gtok[static_cast<size_t>(l1)]) * c + qo;
                    for (int d = 0; d < dh; ++d) o[d] = 0.0;
                    for (int l2 = 0; l2 < n; ++l2) {
                        double p = logits[static_cast<size_t>(l1) * n + l2];
                        const double* v = qkv.ptr() + static_cast<int64_t>(gtok[static_cast<size_t>(l2)]) * 3 * c + vo;
                        for (int d = 0; d < dh; ++d) o[d] += p * v[d];
                    }
                }
            }
        }
        if (bt) {
            bt->ctx = ctx;
            bt->probs = std::move(probs_store);
        }

        Tensor attn_out({nt, c});
        linear_forward(ctx.ptr(), params_[static_cast<size_t>(bp.proj_w)].values.data(),
                       params_[static_cast<size_t>(bp.proj_b)].values.data(), attn_out.ptr(), nt,
                       c, c);
        for (int64_t i = 0; i < tokens.numel(); ++i) tokens[i] += attn_out[i];

        if (bt) bt->ln2_in = tokens;
        layernorm_forward(tokens.ptr(), params_[static_cast<size_t>(bp.n2g)].values.data(),
                          params_[static_cast<size_t>(bp.n2b)].values.data(), normed.ptr(), nt, c,
                          bt ? &bt->ln2 : &ln_tmp);
        if (bt) bt->mlp_in = normed;

        Tensor h1({nt, hidden});
        linear_forward(normed.ptr(), params_[static_cast<size_t>(bp.fc1_w)].values.data(),
                       params_[static_cast<size_t>(bp.fc1_b)].values.data(), h1.ptr(), nt, c,
                       hidden);
        if (bt) bt->mlp_h1 = h1;
        Tensor act({nt, hidden});
        for (int64_t i = 0; i < h1.numel(); ++i) act[i] = gelu(h1[i]);
        if (bt) bt->mlp_act = act;
        Tensor mlp_out({nt, c});
        linear_forward(act.ptr(), params_[static_cast<size_t>(bp.fc2_w)].values.data(),
                       params_[static_cast<size_t>(bp.fc2_b)].values.data(), mlp_out.ptr(), nt,
                       hidden, c);
        for (int64_t i = 0; i < tokens.numel(); ++i) tokens[i] += mlp_out[i];

        // Adapter slot at the block boundary.
        if (bt) bt->boundary_in = tokens;
        if (bp.ad_scale >= 0) {
            const auto& s = params_[static_cast<size_t>(bp.ad_scale)].values;
            if (s.size() == 1) {
                for (double& v : tokens.data) v *= s[0];
            } else {
                for (int i = 0; i < nt; ++i)
                    for (int j = 0; j < c; ++j) tokens[static_cast<int64_t>(i) * c + j] *= s[static_cast<size_t>(j)];
            }
        } else if (bp.ad_conv_w >= 0) {
            const int k = adapter_kernel_;
            const int k2 = k / 2;
            const auto& cw = params_[static_cast<size_t>(bp.ad_conv_w)].values;
            const auto& cb = params_[static_cast<size_t>(bp.ad_conv_b)].values;
            Tensor conv({nt, c});
            for (int gr = 0; gr < gh; ++gr)
                for (int gc = 0; gc < gw; ++gc) {
                    double* o = conv.ptr() + static_cast<int64_t>(gr * gw + gc) * c;
                    for (int co = 0; co < c; ++co) o[co] = cb[static_cast<size_t>(co)];
                    for (int dr = 0; dr < k; ++dr) {
                        int sr = reflect_index(gr + dr - k2, gh);
                        for (int dc = 0; dc < k; ++dc) {
                            int sc = reflect_index(gc + dc - k2, gw);
                            const double* src = tokens.ptr() + static_cast<int64_t>(sr * gw + sc) * c;
                            for (int co = 0; co < c; ++co) {
                                const double* wrow =
                                    cw.data() + ((static_cast<int64_t>(co) * c) * k + dr) * k + dc;
                                double acc = 0.0;
                                for (int ci = 0; ci < c; ++ci)
                                    acc += src[ci] * wrow[static_cast<int64_t>(ci) * k * k];
                                o[co] += acc;
                            }
                        }
                    }
                }
            tokens = std::move(conv);
        }
    }

    if (trace) trace->head_in = tokens;

    // Reconstruction head + global residual + clamp.
    const int patch_out = 3 * ps * ps;
    Tensor head({nt, patch_out});
    linear_forward(tokens.ptr(), params_[static_cast<size_t>(head_w_)].values.data(),
                   params_[static_cast<size_t>(head_b_)].values.data(), head.ptr(), nt, c,
                   patch_out);

    out = make_image(h, w);
    Tensor pre = x;
    for (int gr = 0; gr < gh; ++gr)
        for (int gc = 0; gc < gw; ++gc) {
            const double* hp = head.ptr() + static_cast<int64_t>(gr * gw + gc) * patch_out;
            for (int pr = 0; pr < ps; ++pr)
                for (int pc = 0; pc < ps; ++pc)
                    for (int ch = 0; ch < 3; ++ch)
                        image_at(pre, gr * ps + pr, gc * ps + pc, ch) +=
                            hp[(pr * ps + pc) * 3 + ch];
        }
    if (trace) trace->pre_clamp = pre;
    for (size_t i = 0; i < pre.data.size(); ++i) out.data[i] = std::clamp(pre.data[i], 0.0, 1.0);
    if (trace) trace->output = out;
}

Image DehazeNet::forward(const Image& x) const {
    Image out;
    forward_impl(x, nullptr, out);
    return out;
}

Image DehazeNet::forward(const Image& x, ForwardTrace& trace) const {
    Image out;
    forward_impl(x, &trace, out);
    return out;
}

Tensor DehazeNet::backward(const Tensor& dpred, const ForwardTrace& trace,
                           GradBuffer* param_grads) const {
    check_same_shape(dpred, trace.output, "backward");
    if (param_grads && param_grads->size() != params_.size())
        throw std::invalid_argument("backward: grad buffer size mismatch");

    const int h = trace.input.dim(0), w = trace.input.dim(1);
    const int ps = cfg_.patch_size;
    const int gh = trace.grid_h, gw = trace.grid_w, ww = trace.win;
    const int c = cfg_.embed_dim;
    const int hidden = 2 * c;
    const int nt = gh * gw;
    const int heads = cfg_.num_heads;
    const int dh = c / heads;
    const int n = ww * ww;
    const int nwin = (gh / ww) * (gw / ww);
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    const int patch_out = 3 * ps * ps;

    auto grad_of = [&](int idx) -> double* {
        return param_grads ? (*param_grads)[static_cast<size_t>(idx)].data() : nullptr;
    };

    // Clamp: zero gradient where the output saturated.
    Tensor dpre = dpred;
    for (size_t i = 0; i < dpre.data.size(); ++i) {
        double p = trace.pre_clamp.data[i];
        if (p <= 0.0 || p >= 1.0) dpre.data[i] = 0.0;
    }

    Tensor dx = dpre; // global residual path

    // Head backward: pixel grads -> per-token head-output grads.
    Tensor dhead({nt, patch_out});
    for (int gr = 0; gr < gh; ++gr)
        for (int gc = 0; gc < gw; ++gc) {
            double* dst = dhead.ptr() + static_cast<int64_t>(gr * gw + gc) * patch_out;
            for (int pr = 0; pr < ps; ++pr)
                for (int pc = 0; pc < ps; ++pc)
                    for (int ch = 0; ch < 3; ++ch)
                        dst[(pr * ps + pc) * 3 + ch] =
                            image_at(dpre, gr * ps + pr, gc * ps + pc, ch);
        }
    Tensor dtokens({nt, c});
    linear_backward(trace.head_in.ptr(), params_[static_cast<size_t>(head_w_)].values.data(),
                    dhead.ptr(), nt, c, patch_out, grad_of(head_w_), grad_of(head_b_),
                    dtokens.ptr());

    std::vector<double> dlogits(static_cast<size_t>(n) * n);
    std::vector<int> gtok(static_cast<size_t>(n));
    const int wins_per_row = gw / ww;

    for (int b = cfg_.num_blocks - 1; b >= 0; --b) {
        const auto& bp = blocks_[static_cast<size_t>(b)];
        const auto& bt = trace.blocks[static_cast<size_t>(b)];

        // Adapter backward.
        if (bp.ad_scale >= 0) {
            const auto& s = params_[static_cast<size_t>(bp.ad_scale)].values;
            if (s.size() == 1) {
                if (param_grads) {
                    double acc = 0.0;
                    for (int64_t i = 0; i < dtokens.numel(); ++i)
                        acc += dtokens[i] * bt.boundary_in[i];
                    (*param_grads)[static_cast<size_t>(bp.ad_scale)][0] += acc;
                }
                for (double& v : dtokens.data) v *= s[0];
            } else {
                double* ds = grad_of(bp.ad_scale);
                for (int i = 0; i < nt; ++i)
                    for (int j = 0; j < c; ++j) {
                        int64_t idx = static_cast<int64_t>(i) * c + j;
                        if (ds) ds[j] += dtokens[idx] * bt.boundary_in[idx];
                        dtokens[idx] *= s[static_cast<size_t>(j)];
                    }
            }
        } else if (bp.ad_conv_w >= 0) {
            const int k = adapter_kernel_;
            const int k2 = k / 2;
            const auto& cw = params_[static_cast<size_t>(bp.ad_conv_w)].values;
            double* dcw = grad_of(bp.ad_conv_w);
            double* dcb = grad_of(bp.ad_conv_b);
            Tensor din({nt, c});
            for (int gr = 0; gr < gh; ++gr)
                for (int gc = 0; gc < gw; ++gc) {
                    const double* go = dtokens.ptr() + static_cast<int64_t>(gr * gw + gc) * c;
                    if (dcb)
                        for (int co = 0; co < c; ++co) dcb[co] += go[co];
                    for (int dr = 0; dr < k; ++dr) {
                        int sr = reflect_index(gr + dr - k2, gh);
                        for (int dc = 0; dc < k; ++dc) {
                            int sc = reflect_index(gc + dc - k2, gw);
                            const double* src =
                                bt.boundary_in.ptr() + static_cast<int64_t>(sr * gw + sc) * c;
                            double* dsrc = din.ptr() + static_cast<int64_t>(sr * gw + sc) * c;
                            for (int co = 0; co < c; ++co) {
                                double g = go[co];
                                if (g == 0.0) continue;
                                const int64_t wbase = ((static_cast<int64_t>(co) * c) * k + dr) * k + dc;
                                for (int ci = 0; ci < c; ++ci) {
                                    int64_t widx = wbase + static_cast<int64_t>(ci) * k * k;
                                    if (dcw) dcw[widx] += g * src[ci];
                                    dsrc[ci] += g * cw[static_cast<size_t>(widx)];
                                }
                            }
                        }
                    }
                }
            dtokens = std::move(din);
        }

        // MLP residual branch.
        Tensor dact({nt, hidden});
        linear_backward(bt.mlp_act.ptr(), params_[static_cast<size_t>(bp.fc2_w)].values.data(),
                        dtokens.ptr(), nt, hidden, c, grad_of(bp.fc2_w), grad_of(bp.fc2_b),
                        dact.ptr());
        for (int64_t i = 0; i < dact.numel(); ++i) dact[i] *= gelu_grad(bt.mlp_h1[i]);
        Tensor dmlp_in({nt, c});
        linear_backward(bt.mlp_in.ptr(), params_[static_cast<size_t>(bp.fc1_w)].values.data(),
                        dact.ptr(), nt, c, hidden, grad_of(bp.fc1_w), grad_of(bp.fc1_b),
                        dmlp_in.ptr());
        layernorm_backward(bt.ln2, params_[static_cast<size_t>(bp.n2g)].values.data(),
                           dmlp_in.ptr(), nt, c, grad_of(bp.n2g), grad_of(bp.n2b), dtokens.ptr());

        // Attention residual branch.
        Tensor dctx({nt, c});
        linear_backward(bt.ctx.ptr(), params_[static_cast<size_t>(bp.proj_w)].values.data(),
                        dtokens.ptr(), nt, c, c, grad_of(bp.proj_w), grad_of(bp.proj_b),
                        dctx.ptr());

        Tensor dqkv({nt, 3 * c});
        for (int wi = 0; wi < nwin; ++wi) {
            const int wr0 = (wi / wins_per_row) * ww;
            const int wc0 = (wi % wins_per_row) * ww;
            for (int l = 0; l < n; ++l)
                gtok[static_cast<size_t>(l)] = (wr0 + l / ww) * gw + (wc0 + l % ww);
            for (int hd = 0; hd < heads; ++hd) {
                const int qo = hd * dh, ko = c + hd * dh, vo = 2 * c + hd * dh;
                const double* probs =
                    bt.probs.data() + (static_cast<size_t>(wi) * heads + hd) * n * n;
                // dP and dV from dctx.
                for (int l1 = 0; l1 < n; ++l1) {
                    const double* dc1 = dctx.ptr() + static_cast<int64_t>(gtok[static_cast<size_t>(l1)]) * c + qo;
                    double rowdot = 0.0;
                    for (int l2 = 0; l2 < n; ++l2) {
                        const double* vv = bt.qkv.ptr() + static_cast<int64_t>(gtok[static_cast<size_t>(l2)]) * 3 * c + vo;
                        double dp = 0.0;
                        for (int d = 0; d < dh; ++d) dp += dc1[d] * vv[d];
                        dlogits[static_cast<size_t>(l1) * n + l2] = dp;
                        rowdot += dp * probs[static_cast<size_t>(l1) * n + l2];
                    }
                    for (int l2 = 0; l2 < n; ++l2) {
                        double p = probs[static_cast<size_t>(l1) * n + l2];
                        dlogits[static_cast<size_t>(l1) * n + l2] =
                            p * (dlogits[static_cast<size_t>(l1) * n + l2] - rowdot);
                        // dV accumulation.
                        double* dv = dqkv.ptr() + static_cast<int64_t>(gtok[static_cast<size_t>(l2)]) * 3 * c + vo;
                        for (int d = 0; d < dh; ++d) dv[d] += p * dc1[d];
                    }
                }
                // dQ, dK from dlogits.
                for (int l1 = 0; l1 < n; ++l1) {
                    double* dq = dqkv.ptr() + static_cast<int64_t>(gtok[static_cast<size_t>(l1)]) * 3 * c + qo;
                    const double* q = bt.qkv.ptr() + static_cast<int64_t>(gtok[static_cast<size_t>(l1)]) * 3 * c + qo;
                    for (int l2 = 0; l2 < n; ++l2) {
                        double dl = dlogits[static_cast<size_t>(l1) * n + l2] * scale;
                        if (dl == 0.0) continue;
                        const double* kk = bt.qkv.ptr() + static_cast<int64_t>(gtok[static_cast<size_t>(l2)]) * 3 * c + ko;
                        double* dk = dqkv.ptr() + static_cast<int64_t>(gtok[static_cast<size_t>(l2)]) * 3 * c + ko;
                        for (int d = 0; d < dh; ++d) {
                            dq[d] += dl * kk[d];
                            dk[d] += dl * q[d];
                        }
                    }
                }
            }
        }
        Tensor dattn_in({nt, c});
        linear_backward(bt.attn_in.ptr(), params_[static_cast<size_t>(bp.qkv_w)].values.data(),
                        dqkv.ptr(), nt, c, 3 * c, grad_of(bp.qkv_w), grad_of(bp.qkv_b),
                        dattn_in.ptr());
        layernorm_backward(bt.ln1, params_[static_cast<size_t>(bp.n1g)].values.data(),
                           dattn_in.ptr(), nt, c, grad_of(bp.n1g), grad_of(bp.n1b),
                           dtokens.ptr());
    }

    // Patch embedding backward.
    {
        const auto& we = params_[static_cast<size_t>(pe_w_)].values;
        double* dwe = grad_of(pe_w_);
        double* dbe = grad_of(pe_b_);
        const int patch_in = 3 * ps * ps;
        for (int gr = 0; gr < gh; ++gr)
            for (int gc = 0; gc < gw; ++gc) {
                const double* dt = dtokens.ptr() + static_cast<int64_t>(gr * gw + gc) * c;
                for (int j = 0; j < c; ++j) {
                    double g = dt[j];
                    if (g == 0.0) continue;
                    if (dbe) dbe[j] += g;
                    for (int pr = 0; pr < ps; ++pr)
                        for (int pc = 0; pc < ps; ++pc)
                            for (int ch = 0; ch < 3; ++ch) {
                                int idx = (pr * ps + pc) * 3 + ch;
                                if (dwe)
                                    dwe[static_cast<int64_t>(j) * patch_in + idx] +=
                                        g * image_at(trace.input, gr * ps + pr, gc * ps + pc, ch);
                                image_at(dx, gr * ps + pr, gc * ps + pc, ch) +=
                                    g * we[static_cast<size_t>(j) * patch_in + idx];
                            }
                }
            }
    }

    (void)h;
    (void)w;
    return dx;
}

Tensor DehazeNet::input_gradient(const Image& x, const InputObjective& objective) const {
    if (!objective.value || !objective.grad)
        throw std::invalid_argument("input_gradient: objective must provide value and grad");
    ForwardTrace trace;
    Image pred = forward(x, trace);
    Tensor g = objective.grad(pred);
    if (!g.same_shape(pred))
        throw std::invalid_argument(
            "input_gradient: objective gradient shape does not match prediction (objective must "
            "be scalar-valued over the prediction)");
    return backward(g, trace, nullptr);
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

json config_to_json(const NetConfig& c) {
    return json{{"embed_dim", c.embed_dim},   {"num_blocks", c.num_blocks},
                {"num_heads", c.num_heads},   {"patch_size", c.patch_size},
                {"window_size", c.window_size}, {"seed", c.seed}};
}

NetConfig config_from_json(const json& j) {
    NetConfig c;
    c.embed_dim = j.at("embed_dim").get<int>();
    c.num_blocks = j.at("num_blocks").get<int>();
    c.num_heads = j.at("num_heads").get<int>();
    c.patch_size = j.at("patch_size").get<int>();
    c.window_size = j.at("window_size").get<int>();
    c.seed = j.at("seed").get<uint64_t>();
    return c;
}

json param_to_json(const Param& p) {
    json e;
    e["name"] = p.name;
    e["group"] = param_group_name(p.group);
    e["shape"] = p.shape;
    e["trainable"] = p.trainable;
    e["data"] = p.values;
    return e;
}

json adapter_to_json(const DehazeNet& m) {
    json a;
    a["method"] = adapter_kind_name(m.adapter());
    if (m.adapter() == AdapterKind::Linead) a["kernel_size"] = m.adapter_kernel();
    if (m.adapter() == AdapterKind::SB) {
        int idx = m.find_param("adapters.0.scale");
        a["per_channel"] = idx >= 0 && m.param(static_cast<size_t>(idx)).size() > 1;
    }
    return a;
}

void write_json_file(const json& j, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    out << j.dump(1) << "\n";
}

json read_json_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    return json::parse(in);
}

void apply_adapter_structure(DehazeNet& model, const json& a) {
    AdapterKind kind = adapter_kind_from_name(a.at("method").get<std::string>());
    if (kind == AdapterKind::SB) model.attach_sb_scales(a.value("per_channel", false));
    if (kind == AdapterKind::Linead) model.attach_linead_convs(a.at("kernel_size").get<int>());
    model.set_adapter_kind(kind);
}

constexpr const char* kCkptFormat = "dehazekit-checkpoint-v1";

} // namespace

uint64_t param_checksum(const DehazeNet& model, bool frozen_only) {
    uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](const void* data, size_t len) {
        const unsigned char* p = static_cast<const unsigned char*>(data);
        for (size_t i = 0; i < len; ++i) {
            h ^= p[i];
            h *= 0x100000001b3ULL;
        }
    };
    for (size_t i = 0; i < model.num_params(); ++i) {
        const Param& p = model.param(i);
        if (frozen_only && p.trainable) continue;
        mix(p.name.data(), p.name.size());
        mix(p.values.data(), p.values.size() * sizeof(double));
    }
    return h;
}

void save_checkpoint(const DehazeNet& model, const std::string& path,
                     const std::map<std::string, std::string>& meta) {
    json j;
    j["format"] = kCkptFormat;
    j["kind"] = "full";
    j["config"] = config_to_json(model.config());
    j["adapter"] = adapter_to_json(model);
    json params = json::array();
    for (size_t i = 0; i < model.num_params(); ++i) params.push_back(param_to_json(model.param(i)));
    j["params"] = params;
    j["meta"] = meta;
    write_json_file(j, path);
}

void save_adapter_checkpoint(const DehazeNet& model, const std::string& path,
                             const std::string& base_checkpoint,
                             const std::map<std::string, std::string>& meta) {
    if (model.adapter() == AdapterKind::None)
        throw std::logic_error("save_adapter_checkpoint: model has no adapter applied");
    fs::path base_abs = fs::absolute(base_checkpoint);
    fs::path here = fs::absolute(path).parent_path();
    std::error_code ec;
    fs::path rel = fs::relative(base_abs, here, ec);
    json j;
    j["format"] = kCkptFormat;
    j["kind"] = "adapter";
    j["base"] = (ec || rel.empty()) ? base_abs.string() : rel.string();
    j["config"] = config_to_json(model.config());
    j["adapter"] = adapter_to_json(model);
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(param_checksum(model, true)));
    j["frozen_checksum"] = buf;
    json params = json::array();
    for (size_t i = 0; i < model.num_params(); ++i)
        if (model.param(i).trainable) params.push_back(param_to_json(model.param(i)));
    j["params"] = params;
    j["meta"] = meta;
    write_json_file(j, path);
}

namespace {

void apply_param_values(DehazeNet& model, const json& params, bool require_all) {
    size_t applied = 0;
    for (const auto& e : params) {
        std::string name = e.at("name").get<std::string>();
        int idx = model.find_param(name);
        if (idx < 0) throw std::runtime_error("checkpoint: unknown parameter " + name);
        Param& p = model.param(static_cast<size_t>(idx));
        std::vector<int> shape = e.at("shape").get<std::vector<int>>();
        if (shape != p.shape)
            throw std::runtime_error("checkpoint: shape mismatch for parameter " + name);
        std::vector<double> data = e.at("data").get<std::vector<double>>();
        if (data.size() != p.values.size())
            throw std::runtime_error("checkpoint: data size mismatch for parameter " + name);
        p.values = std::move(data);
        p.group = param_group_from_name(e.at("group").get<std::string>());
        p.trainable = e.at("trainable").get<bool>();
        ++applied;
    }
    if (require_all && applied != model.num_params())
        throw std::runtime_error("checkpoint: parameter list incomplete");
}

} // namespace

DehazeNet load_checkpoint(const std::string& path) {
    json j = read_json_file(path);
    if (!j.contains("format") || j["format"] != kCkptFormat)
        throw std::runtime_error("checkpoint: unknown format tag in " + path);
    std::string kind = j.at("kind").get<std::string>();
    if (kind == "full") {
        DehazeNet model = DehazeNet::build(config_from_json(j.at("config")));
        apply_adapter_structure(model, j.at("adapter"));
        apply_param_values(model, j.at("params"), true);
        return model;
    }
    if (kind == "adapter") {
        fs::path base = j.at("base").get<std::string>();
        if (base.is_relative()) base = fs::path(path).parent_path() / base;
        DehazeNet model = load_checkpoint(base.string());
        if (model.adapter() != AdapterKind::None)
            throw std::runtime_error("checkpoint: base checkpoint already carries an adapter");
        if (config_to_json(model.config()) != j.at("config"))
            throw std::runtime_error("checkpoint: adapter/base config mismatch");
        apply_adapter_structure(model, j.at("adapter"));
        // Only stored parameters are trainable in the restored model.
        for (size_t i = 0; i < model.num_params(); ++i) model.param(i).trainable = false;
        apply_param_values(model, j.at("params"), false);
        char buf[20];
        std::snprintf(buf, sizeof(buf), "%016llx",
                      static_cast<unsigned long long>(param_checksum(model, true)));
        if (j.contains("frozen_checksum") && j["frozen_checksum"] != buf)
            throw std::runtime_error("checkpoint: frozen parameters do not match the base file");
        return model;
    }
    throw std::runtime_error("checkpoint: unknown kind " + kind);
}

std::map<std::string, std::string> checkpoint_meta(const std::string& path) {
    json j = read_json_file(path);
    std::map<std::string, std::string> meta;
    if (j.contains("meta"))
        for (auto it = j["meta"].begin(); it != j["meta"].end(); ++it)
            meta[it.key()] = it.value().get<std::string>();
    return meta;
}

} // namespace dhz

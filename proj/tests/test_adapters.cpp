#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dehazekit/adapters.hpp"
#include "dehazekit/net.hpp"
#include "dehazekit/rng.hpp"
#include "dehazekit/training.hpp"

using namespace dhz;

namespace {

NetConfig tiny_config() {
    NetConfig cfg;
    cfg.embed_dim = 4;
    cfg.num_blocks = 1;
    cfg.num_heads = 2;
    cfg.patch_size = 2;
    cfg.window_size = 2;
    cfg.seed = 17;
    return cfg;
}

Image test_image(int h, int w, uint64_t seed) {
    Rng rng(seed);
    Image img = make_image(h, w);
    for (double& v : img.data) v = rng.uniform(0.05, 0.95);
    return img;
}

double max_abs_diff(const Image& a, const Image& b) {
    double m = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
    return m;
}

// One optimizer step with all-ones gradients; moves every trainable scalar.
void shove(DehazeNet& model) {
    Adam opt(model, 1e-2);
    GradBuffer g = model.make_grad_buffer();
    for (auto& slot : g)
        for (double& v : slot) v = 1.0;
    opt.step(model, g);
}

} // namespace

TEST_CASE("sb adapter is exactly the identity at init") {
    Image x = test_image(16, 16, 3);
    for (bool per_channel : {false, true}) {
        DehazeNet base = DehazeNet::build(tiny_config());
        Image before = base.forward(x);
        apply_sb(base, per_channel);
        Image after = base.forward(x);
        CHECK(max_abs_diff(before, after) == 0.0);
    }
}

TEST_CASE("linead adapter is the identity at init") {
    Image x = test_image(16, 16, 4);
    for (int k : {1, 3, 5}) {
        DehazeNet base = DehazeNet::build(tiny_config());
        Image before = base.forward(x);
        apply_linead(base, k);
        Image after = base.forward(x);
        CHECK(max_abs_diff(before, after) <= 1e-12);
    }
}

TEST_CASE("ll adapter does not touch the forward pass") {
    DehazeNet model = DehazeNet::build(tiny_config());
    Image x = test_image(16, 16, 5);
    Image before = model.forward(x);
    apply_ll(model);
    CHECK(max_abs_diff(before, model.forward(x)) == 0.0);
}

TEST_CASE("tune_stats hand counts for the tiny model") {
    // patch_embed 48+4, block 172 (norms 16, qkv 60, proj 20, mlp 76), head 60.
    DehazeNet base = DehazeNet::build(tiny_config());
    TuneStats all = tune_stats(base);
    CHECK(all.total_params == 284);
    CHECK(all.tuned_params == 284); // everything trainable before an adapter

    DehazeNet ll = DehazeNet::build(tiny_config());
    apply_ll(ll);
    TuneStats s = tune_stats(ll);
    CHECK(s.total_params == 284);
    CHECK(s.tuned_params == 60); // head.weight 48 + head.bias 12
    CHECK(s.tuned_percent == doctest::Approx(100.0 * 60.0 / 284.0));

    DehazeNet sb = DehazeNet::build(tiny_config());
    apply_sb(sb, false);
    s = tune_stats(sb);
    CHECK(s.total_params == 285); // one scalar scale attached
    // biases: patch 4 + norm betas 8 + qkv 12 + proj 4 + fc1 8 + fc2 4 = 40, + scale
    CHECK(s.tuned_params == 41);

    DehazeNet sbc = DehazeNet::build(tiny_config());
    apply_sb(sbc, true);
    s = tune_stats(sbc);
    CHECK(s.total_params == 288); // per-channel: 4 scales
    CHECK(s.tuned_params == 44);

    DehazeNet lin = DehazeNet::build(tiny_config());
    apply_linead(lin, 3);
    s = tune_stats(lin);
    CHECK(s.total_params == 284 + 148); // C*C*k*k + C = 4*4*9 + 4 per block
    CHECK(s.tuned_params == 148);
}

TEST_CASE("tune_stats on the default desk-scale model") {
    DehazeNet base = DehazeNet::build(NetConfig{});
    CHECK(tune_stats(base).total_params == 21864);

    DehazeNet ll = DehazeNet::build(NetConfig{});
    apply_ll(ll);
    CHECK(tune_stats(ll).tuned_params == 1200); // 48x24 head + 48 bias

    DehazeNet sb = DehazeNet::build(NetConfig{});
    apply_sb(sb);
    // biases: patch 24 + 4 blocks x (2x24 norms + 72 qkv + 24 proj + 48 fc1 + 24 fc2)
    CHECK(tune_stats(sb).tuned_params == 888 + 4);

    DehazeNet lin = DehazeNet::build(NetConfig{});
    apply_linead(lin, 3);
    CHECK(tune_stats(lin).tuned_params == 4 * (24 * 24 * 9 + 24));
    // tuned share stays parameter-efficient even for the heaviest strategy
    CHECK(tune_stats(lin).tuned_percent < 50.0);
    CHECK(tune_stats(ll).tuned_percent < 6.0);
    CHECK(tune_stats(sb).tuned_percent < 5.0);
}

TEST_CASE("adapters freeze everything outside their group") {
    auto frozen_intact = [](AdapterKind kind) {
        DehazeNet model = DehazeNet::build(tiny_config());
        AdapterSpec spec;
        spec.method = kind;
        apply_adapter(model, spec);
        std::vector<std::vector<double>> before;
        for (size_t i = 0; i < model.num_params(); ++i) before.push_back(model.param(i).values);
        shove(model);
        for (size_t i = 0; i < model.num_params(); ++i) {
            const Param& p = model.param(i);
            if (p.trainable) {
                CHECK(p.values != before[i]); // every tuned tensor actually moved
            } else {
                CHECK(p.values == before[i]); // frozen tensors bitwise intact
            }
        }
    };
    frozen_intact(AdapterKind::LL);
    frozen_intact(AdapterKind::SB);
    frozen_intact(AdapterKind::Linead);
}

TEST_CASE("adapter groups are mutually exclusive") {
    DehazeNet model = DehazeNet::build(tiny_config());
    apply_sb(model);
    for (size_t i = 0; i < model.num_params(); ++i) {
        const Param& p = model.param(i);
        bool should_train = p.group == ParamGroup::Bias || p.group == ParamGroup::AdapterScale;
        CHECK(p.trainable == should_train);
    }
    CHECK(model.adapter() == AdapterKind::SB);

    DehazeNet ll = DehazeNet::build(tiny_config());
    apply_ll(ll);
    for (size_t i = 0; i < ll.num_params(); ++i)
        CHECK(ll.param(i).trainable == (ll.param(i).group == ParamGroup::FinalLayer));
}

TEST_CASE("a second adapter strategy is rejected") {
    DehazeNet model = DehazeNet::build(tiny_config());
    apply_ll(model);
    CHECK_THROWS_AS(apply_sb(model), std::logic_error);
    CHECK_THROWS_AS(apply_linead(model, 3), std::logic_error);
    CHECK_THROWS_AS(apply_ll(model), std::logic_error);
    AdapterSpec spec; // apply_adapter path too
    spec.method = AdapterKind::SB;
    CHECK_THROWS_AS(apply_adapter(model, spec), std::logic_error);
}

TEST_CASE("adapter spec validation") {
    AdapterSpec spec;
    spec.method = AdapterKind::Linead;
    spec.kernel_size = 4;
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
    spec.kernel_size = -1;
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
    spec.kernel_size = 3;
    CHECK_NOTHROW(spec.validate());
    spec.method = AdapterKind::LL;
    spec.kernel_size = 4; // kernel only matters for linead
    CHECK_NOTHROW(spec.validate());
}

TEST_CASE("apply_adapter none is a no-op") {
    DehazeNet model = DehazeNet::build(tiny_config());
    AdapterSpec spec;
    spec.method = AdapterKind::None;
    apply_adapter(model, spec);
    CHECK(model.adapter() == AdapterKind::None);
    CHECK(tune_stats(model).tuned_params == 284);
}

TEST_CASE("linead training changes the forward pass") {
    // Sanity: the adapter has actual capacity, not just identity plumbing.
    DehazeNet model = DehazeNet::build(tiny_config());
    apply_linead(model, 3);
    Image x = test_image(16, 16, 9);
    Image before = model.forward(x);
    shove(model);
    CHECK(max_abs_diff(before, model.forward(x)) > 1e-6);
}

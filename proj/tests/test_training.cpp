#include <cmath>
#include <random>

#include "doctest.h"
#include "test_util.hpp"
#include "ttm/synth.hpp"
#include "ttm/training.hpp"

using namespace ttm;
using ttm_test::random_tensor;

namespace {

ModelConfig smoke_mc() {
    ModelConfig mc;
    mc.sl = 16;
    mc.fl = 4;
    mc.pl = 4;
    mc.levels = 2;
    mc.blocks_per_level = 1;
    mc.hf = 8;
    mc.dropout = real(0);
    mc.prefix_enabled = true;
    return mc;
}

TrainConfig quick_tc(int epochs, std::uint64_t seed) {
    TrainConfig tc;
    tc.epochs = epochs;
    tc.batch_size = 32;
    tc.seed = seed;
    tc.window_stride = 2;
    return tc;
}

bool stores_identical(const ParameterStore& a, const ParameterStore& b) {
    if (a.params().size() != b.params().size()) return false;
    for (const auto& [name, t] : a.params()) {
        if (!b.has(name)) return false;
        if (t.data() != b.get(name).data()) return false;
    }
    return true;
}

} // namespace

TEST_CASE("mse_loss hand cases and loop oracle") {
    std::mt19937_64 rng(1);
    auto y = random_tensor({2, 3, 4}, rng);
    CHECK(mse_loss(y, y).data()[0] == real(0));

    auto shifted = y.detached();
    for (auto& v : shifted.data()) v += real(1);
    CHECK(mse_loss(shifted, y).data()[0] == doctest::Approx(1.0).epsilon(1e-12));

    auto z = random_tensor({2, 3, 4}, rng);
    double acc = 0;
    for (std::size_t i = 0; i < y.data().size(); ++i) {
        const double d = y.data()[i] - z.data()[i];
        acc += d * d;
    }
    CHECK(mse_loss(y, z).data()[0] ==
          doctest::Approx(acc / static_cast<double>(y.data().size())).epsilon(1e-12));

    CHECK_THROWS_AS(mse_loss(y, random_tensor({2, 3, 5}, rng)), ShapeError);
}

TEST_CASE("adam_step matches the hand formula on a scalar parameter") {
    ParameterStore store;
    store.add("p", Tensor({1}, {real(1.0)}, true), true);
    store.get("p").grad()[0] = real(0.3);
    AdamState state;
    TrainConfig tc;
    tc.lr = real(1e-3);
    adam_step(store, state, tc);

    const double g = 0.3;
    const double m = (1 - 0.9) * g;
    const double v = (1 - 0.999) * g * g;
    const double mhat = m / (1 - 0.9);
    const double vhat = v / (1 - 0.999);
    const double expect = 1.0 - 1e-3 * mhat / (std::sqrt(vhat) + 1e-8);
    CHECK(store.get("p").data()[0] == doctest::Approx(expect).epsilon(1e-12));
    CHECK(state.t == 1);
}

TEST_CASE("adam_step skips frozen tensors entirely") {
    ParameterStore store;
    store.add("train", Tensor({2}, {1, 2}, true), true);
    store.add("frozen", Tensor({2}, {3, 4}, true), false);
    store.get("train").grad() = {real(0.5), real(-0.5)};
    store.get("frozen").grad() = {real(9), real(9)};
    AdamState state;
    TrainConfig tc;
    for (int i = 0; i < 3; ++i) adam_step(store, state, tc);
    CHECK(store.get("frozen").data() == std::vector<real>{3, 4});
    CHECK(state.m.count("frozen") == 0); // no moment buffers allocated
    CHECK(state.m.count("train") == 1);
    CHECK(store.get("train").data() != std::vector<real>{1, 2});
}

TEST_CASE("adam_step with no gradient leaves parameters unchanged") {
    ParameterStore store;
    store.add("p", Tensor({2}, {1, 2}, true), true);
    AdamState state;
    TrainConfig tc;
    adam_step(store, state, tc);
    CHECK(store.get("p").data() == std::vector<real>{1, 2});
}

TEST_CASE("pretrain with zero epochs returns the initialization") {
    auto ds = synth::sine_fixture(1, 300);
    split_temporal(ds, 0.8, 0.1, 0.1);
    auto mc = smoke_mc();
    auto res = pretrain({ds}, mc, quick_tc(0, 42));
    auto init = build_parameters(mc, pretrain_head_config(HeadConfig{}), 42);
    init.fingerprint = config_fingerprint(mc);
    CHECK(stores_identical(res.store, init));
}

TEST_CASE("pretrain is deterministic for a fixed seed") {
    auto ds = synth::sine_fixture(2, 300);
    split_temporal(ds, 0.8, 0.1, 0.1);
    auto mc = smoke_mc();
    auto a = pretrain({ds}, mc, quick_tc(2, 7));
    auto b = pretrain({ds}, mc, quick_tc(2, 7));
    CHECK(stores_identical(a.store, b.store));
    auto c = pretrain({ds}, mc, quick_tc(2, 8));
    CHECK(!stores_identical(a.store, c.store));
}

TEST_CASE("pretrain reduces training loss on a clean sinusoid") {
    auto ds = synth::sine_fixture(3, 400);
    split_temporal(ds, 0.8, 0.1, 0.1);
    auto mc = smoke_mc();
    auto res = pretrain({ds}, mc, quick_tc(12, 5));
    double first = -1, last = -1;
    for (const auto& e : res.log)
        if (e.split == "train") {
            if (first < 0) first = e.mse;
            last = e.mse;
        }
    CHECK(last < first);
}

TEST_CASE("pretrain with RPT updates the prefix rows it sees") {
    auto fast = synth::sine_fixture(4, 260);
    fast.seconds_per_step = 60;
    fast.resolution_id = ResolutionRegistry::builtin().id_for_seconds(60);
    split_temporal(fast, 0.8, 0.1, 0.1);
    auto slow = synth::sine_fixture(5, 260, 16.0, 1.0);
    slow.seconds_per_step = 3600;
    slow.resolution_id = ResolutionRegistry::builtin().id_for_seconds(3600);
    split_temporal(slow, 0.8, 0.1, 0.1);
    REQUIRE(fast.resolution_id != slow.resolution_id);

    auto mc = smoke_mc();
    auto res = pretrain({fast, slow}, mc, quick_tc(1, 9));
    auto init = build_parameters(mc, pretrain_head_config(HeadConfig{}), 9);
    const auto& before = init.get("backbone.prefix.table").data();
    const auto& after = res.store.get("backbone.prefix.table").data();
    auto row_changed = [&](int id) {
        for (int h = 0; h < mc.hf; ++h)
            if (before[static_cast<std::size_t>(id * mc.hf + h)] !=
                after[static_cast<std::size_t>(id * mc.hf + h)])
                return true;
        return false;
    };
    CHECK(row_changed(fast.resolution_id));
    CHECK(row_changed(slow.resolution_id));
    CHECK(!row_changed(0)); // the unknown row never appeared in a batch
}

TEST_CASE("finetune zero-shot returns the store unchanged") {
    auto ds = synth::lag_coupled_fixture(6, 300);
    split_temporal(ds, 0.7, 0.1, 0.2);
    auto mc = smoke_mc();
    auto pre = pretrain({ds}, mc, quick_tc(1, 3));

    HeadConfig hc;
    hc.num_channels = 2;
    hc.target_channels = {0, 1};
    hc.head_dropout = real(0);
    TrainConfig tc = quick_tc(4, 11);
    tc.mode = TrainMode::finetune;
    tc.few_shot_fraction = 0.0;
    auto zero = finetune(pre.store, ds, mc, hc, tc);
    CHECK(stores_identical(zero.store, pre.store));
}

TEST_CASE("finetune freezes the backbone and audits trainable changes") {
    auto ds = synth::lag_coupled_fixture(7, 300);
    split_temporal(ds, 0.7, 0.1, 0.2);
    auto mc = smoke_mc();
    auto pre = pretrain({ds}, mc, quick_tc(1, 3));

    HeadConfig hc;
    hc.num_channels = 2;
    hc.target_channels = {0, 1};
    hc.channel_mix_enabled = true;
    hc.head_dropout = real(0);
    TrainConfig tc = quick_tc(3, 12);
    tc.mode = TrainMode::finetune;
    auto res = finetune(pre.store, ds, mc, hc, tc);

    bool head_changed = false;
    for (const auto& [name, t] : res.store.params()) {
        const bool is_backbone = name.rfind("backbone.", 0) == 0;
        if (is_backbone) {
            CHECK(t.data() == pre.store.get(name).data()); // bit-identical
        } else if (pre.store.has(name) && t.data() != pre.store.get(name).data()) {
            head_changed = true;
            CHECK(res.store.trainable(name));
        }
    }
    CHECK(head_changed);
    CHECK(res.store.has("decoder.b1.chan.w1")); // channel-mix tensors created lazily
    CHECK(res.store.fingerprint == pre.store.fingerprint);
}

TEST_CASE("finetune few-shot trains only on the tail of the train pool") {
    auto ds = synth::lag_coupled_fixture(8, 600);
    split_temporal(ds, 0.7, 0.1, 0.2);
    auto mc = smoke_mc();
    auto pre = pretrain({ds}, mc, quick_tc(0, 3));

    HeadConfig hc;
    hc.num_channels = 2;
    hc.target_channels = {0, 1};
    hc.head_dropout = real(0);
    TrainConfig tc = quick_tc(1, 13);
    tc.mode = TrainMode::finetune;
    tc.window_stride = 1;
    tc.few_shot_fraction = 0.05;
    auto res = finetune(pre.store, ds, mc, hc, tc);

    auto full = make_windows(ds, Split::train, mc.sl, mc.fl, 1);
    const auto keep = static_cast<std::size_t>(std::ceil(0.05 * static_cast<double>(full.size())));
    REQUIRE(res.train_offsets.size() == keep);
    std::vector<std::int64_t> expect(full.end() - static_cast<std::ptrdiff_t>(keep), full.end());
    CHECK(res.train_offsets == expect);
}

TEST_CASE("finetune rejects a fingerprint mismatch") {
    auto ds = synth::sine_fixture(9, 200);
    split_temporal(ds, 0.7, 0.1, 0.2);
    auto mc = smoke_mc();
    auto pre = pretrain({ds}, mc, quick_tc(0, 3));

    ModelConfig other = mc;
    other.hf = 16; // different architecture
    HeadConfig hc;
    hc.num_channels = 1;
    hc.target_channels = {0};
    TrainConfig tc = quick_tc(1, 1);
    tc.mode = TrainMode::finetune;
    try {
        finetune(pre.store, ds, other, hc, tc);
        FAIL("expected a fingerprint error");
    } catch (const TtmError& e) {
        CHECK(e.code() == ErrorCode::fingerprint);
    }
}

TEST_CASE("pretrain head config disables mixing and exog") {
    HeadConfig base;
    base.channel_mix_enabled = true;
    base.exog_enabled = true;
    base.num_channels = 5;
    auto hc = pretrain_head_config(base);
    CHECK(!hc.channel_mix_enabled);
    CHECK(!hc.exog_enabled);
    CHECK(hc.num_channels == 1);
    CHECK(hc.target_channels == std::vector<int>{0});
}

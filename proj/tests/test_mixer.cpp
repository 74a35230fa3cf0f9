#include <random>

#include "doctest.h"
#include "test_util.hpp"
#include "ttm/mixer.hpp"

using namespace ttm;
using ttm_test::fd_check;
using ttm_test::random_tensor;

namespace {

void zero_params(ParameterStore& store, const std::string& prefix) {
    for (auto& [name, t] : store.params())
        if (name.rfind(prefix, 0) == 0)
            for (auto& v : t.data()) v = real(0);
}

} // namespace

TEST_CASE("mlp_mixer_sublayer with zero weights is the identity") {
    ParameterStore store;
    std::mt19937_64 rng(1);
    init_mix_unit(store, "u", 4, 8, rng, true);
    zero_params(store, "u");
    auto p = load_mix_unit(store, "u");
    auto x = random_tensor({2, 3, 4}, rng);
    FwdCtx ctx;
    auto y = mlp_mixer_sublayer(x, p, real(0), ctx);
    CHECK(y.data() == x.data());
}

TEST_CASE("mlp_mixer_sublayer dropout off equals eval mode") {
    ParameterStore store;
    std::mt19937_64 rng(2);
    init_mix_unit(store, "u", 4, 8, rng, true);
    auto p = load_mix_unit(store, "u");
    auto x = random_tensor({2, 4}, rng);
    FwdCtx train_ctx;
    train_ctx.training = true;
    FwdCtx eval_ctx;
    auto y_train = mlp_mixer_sublayer(x, p, real(0), train_ctx);
    auto y_eval = mlp_mixer_sublayer(x, p, real(0.5), eval_ctx);
    auto y_ref = mlp_mixer_sublayer(x, p, real(0), eval_ctx);
    CHECK(y_train.data() == y_ref.data());
    CHECK(y_eval.data() == y_ref.data());
}

TEST_CASE("mlp_mixer_sublayer gradients match finite differences") {
    ParameterStore store;
    std::mt19937_64 rng(3);
    init_mix_unit(store, "u", 3, 6, rng, true);
    auto p = load_mix_unit(store, "u");
    auto x = random_tensor({2, 4, 3}, rng, -1.0, 1.0, true);

    auto forward = [&]() {
        FwdCtx ctx;
        return mlp_mixer_sublayer(x, p, real(0), ctx);
    };
    auto loss_value = [&]() {
        auto y = forward();
        return static_cast<double>(sum_all(mul(y, y)).data()[0]);
    };

    store.zero_grads();
    x.zero_grad();
    {
        auto y = forward();
        backward(sum_all(mul(y, y)));
    }
    CHECK(fd_check(x, loss_value, x.grad()) < 1e-4);
    for (const char* name : {"u.w1", "u.b1", "u.w2", "u.b2", "u.ln_g", "u.ln_b"}) {
        auto& t = store.get(name);
        CHECK(fd_check(t, loss_value, t.grad(), 1e-5, 8) < 1e-4);
    }
}

TEST_CASE("gated_attention singleton axis is the identity") {
    ParameterStore store;
    std::mt19937_64 rng(4);
    init_mix_unit(store, "g", 1, 2, rng, true);
    auto p = load_mix_unit(store, "g");
    auto x = random_tensor({3, 2, 1}, rng);
    FwdCtx ctx;
    auto y = gated_attention(x, p, ctx);
    for (std::size_t i = 0; i < y.data().size(); ++i)
        CHECK(y.data()[i] == doctest::Approx(x.data()[i]).epsilon(1e-12));
}

TEST_CASE("gated_attention with zero gate params scales by 1/k") {
    ParameterStore store;
    std::mt19937_64 rng(5);
    init_mix_unit(store, "g", 5, 10, rng, true);
    zero_params(store, "g");
    auto p = load_mix_unit(store, "g");
    auto x = random_tensor({2, 5}, rng);
    FwdCtx ctx;
    auto y = gated_attention(x, p, ctx);
    for (std::size_t i = 0; i < y.data().size(); ++i)
        CHECK(y.data()[i] == doctest::Approx(x.data()[i] / 5.0).epsilon(1e-12));
}

TEST_CASE("gated_attention gradients match finite differences") {
    ParameterStore store;
    std::mt19937_64 rng(6);
    init_mix_unit(store, "g", 4, 8, rng, true);
    auto p = load_mix_unit(store, "g");
    auto x = random_tensor({2, 3, 4}, rng, -1.0, 1.0, true);
    auto loss_value = [&]() {
        FwdCtx ctx;
        auto y = gated_attention(x, p, ctx);
        return static_cast<double>(sum_all(mul(y, y)).data()[0]);
    };
    store.zero_grads();
    x.zero_grad();
    {
        FwdCtx ctx;
        auto y = gated_attention(x, p, ctx);
        backward(sum_all(mul(y, y)));
    }
    CHECK(fd_check(x, loss_value, x.grad()) < 1e-4);
    auto& gw = store.get("g.gate_w");
    CHECK(fd_check(gw, loss_value, gw.grad(), 1e-5, 8) < 1e-4);
    auto& gb = store.get("g.gate_b");
    CHECK(fd_check(gb, loss_value, gb.grad()) < 1e-4);
}

TEST_CASE("gated_attention capture records the softmax weights") {
    ParameterStore store;
    std::mt19937_64 rng(7);
    init_mix_unit(store, "g", 3, 6, rng, true);
    auto p = load_mix_unit(store, "g");
    auto x = random_tensor({2, 3}, rng);
    std::map<std::string, Tensor> cap;
    FwdCtx ctx;
    ctx.capture = &cap;
    gated_attention(x, p, ctx, "probe");
    REQUIRE(cap.count("probe") == 1);
    const auto& g = cap["probe"];
    REQUIRE(g.shape() == Shape{2, 3});
    for (int r = 0; r < 2; ++r) {
        double s = 0;
        for (int i = 0; i < 3; ++i) s += g.data()[static_cast<std::size_t>(r * 3 + i)];
        CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("tsmixer_block keeps its shape and has a zero-weight closed form") {
    ParameterStore store;
    std::mt19937_64 rng(8);
    const int n = 2, hf = 2, c = 1;
    init_block_unit(store, "b", n, hf, c, false, rng, true);
    zero_params(store, "b");
    auto p = load_block_unit(store, "b", false);
    auto x = random_tensor({2, 1, 2, 2}, rng);
    FwdCtx ctx;
    auto y = tsmixer_block(x, p, false, real(0), ctx);
    CHECK(y.shape() == x.shape());
    // zero MLPs leave residuals intact; zero gates divide by the axis size:
    // patch gate 1/n then feature gate 1/hf
    for (std::size_t i = 0; i < y.data().size(); ++i)
        CHECK(y.data()[i] == doctest::Approx(x.data()[i] / (n * hf)).epsilon(1e-12));
}

TEST_CASE("tsmixer_block without channel mixing is channel independent") {
    ParameterStore store;
    std::mt19937_64 rng(9);
    init_block_unit(store, "b", 4, 6, 3, false, rng, true);
    auto p = load_block_unit(store, "b", false);
    auto x = random_tensor({2, 3, 4, 6}, rng);
    FwdCtx ctx;
    auto y = tsmixer_block(x, p, false, real(0), ctx);

    auto x2 = x.detached();
    // perturb channel 2 only
    for (int nn = 0; nn < 4; ++nn)
        for (int h = 0; h < 6; ++h)
            x2.data()[static_cast<std::size_t>(((0 * 3 + 2) * 4 + nn) * 6 + h)] += real(0.5);
    FwdCtx ctx2;
    auto y2 = tsmixer_block(x2, p, false, real(0), ctx2);
    // channels 0 and 1 bit-identical, channel 2 changed
    const std::size_t per_channel = 4 * 6;
    for (std::size_t i = 0; i < per_channel; ++i) {
        CHECK(y.data()[i] == y2.data()[i]);
        CHECK(y.data()[per_channel + i] == y2.data()[per_channel + i]);
    }
    bool changed = false;
    for (std::size_t i = 2 * per_channel; i < 3 * per_channel; ++i)
        changed = changed || (y.data()[i] != y2.data()[i]);
    CHECK(changed);
}

TEST_CASE("tsmixer_block channel-permutation equivariance without channel mixing") {
    ParameterStore store;
    std::mt19937_64 rng(10);
    init_block_unit(store, "b", 3, 4, 3, false, rng, true);
    auto p = load_block_unit(store, "b", false);
    auto x = random_tensor({2, 3, 3, 4}, rng);
    const std::vector<int> perm{2, 0, 1};

    auto permute_channels = [&](const Tensor& t) {
        auto out = t.detached();
        const std::size_t per = 3 * 4;
        for (int b = 0; b < 2; ++b)
            for (int ch = 0; ch < 3; ++ch)
                for (std::size_t i = 0; i < per; ++i)
                    out.data()[(static_cast<std::size_t>(b) * 3 + static_cast<std::size_t>(ch)) * per + i] =
                        t.data()[(static_cast<std::size_t>(b) * 3 +
                                  static_cast<std::size_t>(perm[static_cast<std::size_t>(ch)])) * per + i];
        return out;
    };

    FwdCtx c1, c2;
    auto block_then_permute = permute_channels(tsmixer_block(x, p, false, real(0), c1));
    auto permute_then_block = tsmixer_block(permute_channels(x), p, false, real(0), c2);
    CHECK(block_then_permute.data() == permute_then_block.data());
}

TEST_CASE("tsmixer_block with channel mixing couples channels") {
    ParameterStore store;
    std::mt19937_64 rng(11);
    init_block_unit(store, "b", 2, 4, 3, true, rng, true);
    auto p = load_block_unit(store, "b", true);
    auto x = random_tensor({1, 3, 2, 4}, rng);
    FwdCtx c1;
    auto y = tsmixer_block(x, p, true, real(0), c1);
    auto x2 = x.detached();
    x2.data()[static_cast<std::size_t>((2 * 2 + 0) * 4 + 0)] += real(0.5); // channel 2
    FwdCtx c2;
    auto y2 = tsmixer_block(x2, p, true, real(0), c2);
    bool ch0_changed = false;
    for (std::size_t i = 0; i < 2 * 4; ++i) ch0_changed = ch0_changed || (y.data()[i] != y2.data()[i]);
    CHECK(ch0_changed);
}

TEST_CASE("tsmixer_block gradients match finite differences") {
    ParameterStore store;
    std::mt19937_64 rng(12);
    init_block_unit(store, "b", 3, 4, 2, true, rng, true);
    auto p = load_block_unit(store, "b", true);
    auto x = random_tensor({2, 2, 3, 4}, rng, -1.0, 1.0, true);
    auto loss_value = [&]() {
        FwdCtx ctx;
        auto y = tsmixer_block(x, p, true, real(0), ctx);
        return static_cast<double>(sum_all(mul(y, y)).data()[0]);
    };
    store.zero_grads();
    x.zero_grad();
    {
        FwdCtx ctx;
        auto y = tsmixer_block(x, p, true, real(0), ctx);
        backward(sum_all(mul(y, y)));
    }
    CHECK(fd_check(x, loss_value, x.grad(), 1e-5, 12) < 1e-4);
    for (const char* name :
         {"b.patch.w1", "b.patch.gate_w", "b.feat.w2", "b.feat.ln_g", "b.chan.w1", "b.chan.gate_b"}) {
        auto& t = store.get(name);
        CHECK(fd_check(t, loss_value, t.grad(), 1e-5, 6) < 1e-4);
    }
}

TEST_CASE("dropout inside the sublayer is seed deterministic") {
    ParameterStore store;
    std::mt19937_64 rng(13);
    init_mix_unit(store, "u", 4, 8, rng, true);
    auto p = load_mix_unit(store, "u");
    auto x = random_tensor({4, 4}, rng);
    FwdCtx a, b;
    a.training = b.training = true;
    a.dropout_seed = b.dropout_seed = 99;
    auto ya = mlp_mixer_sublayer(x, p, real(0.4), a);
    auto yb = mlp_mixer_sublayer(x, p, real(0.4), b);
    CHECK(ya.data() == yb.data());
    FwdCtx c;
    c.training = true;
    c.dropout_seed = 100;
    auto yc = mlp_mixer_sublayer(x, p, real(0.4), c);
    CHECK(ya.data() != yc.data());
}

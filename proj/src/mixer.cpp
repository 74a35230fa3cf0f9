#include "ttm/mixer.hpp"

namespace ttm {

Tensor trunc_normal(Shape shape, std::mt19937_64& rng, real stddev) {
    std::normal_distribution<double> dist(0.0, 1.0);
    std::vector<real> data(static_cast<std::size_t>(shape_numel(shape)));
    for (auto& v : data) {
        double z;
        do { z = dist(rng); } while (std::abs(z) > 2.0);
        v = static_cast<real>(z) * stddev;
    }
    return Tensor(std::move(shape), std::move(data));
}

void init_mix_unit(ParameterStore& store, const std::string& prefix, int d, int expansion,
                   std::mt19937_64& rng, bool trainable) {
    const std::int64_t dd = d, e = expansion;
    store.add(prefix + ".ln_g", Tensor({dd}, real(1)), trainable);
    store.add(prefix + ".ln_b", Tensor({dd}), trainable);
    store.add(prefix + ".w1", trunc_normal({dd, e}, rng), trainable);
    store.add(prefix + ".b1", Tensor({e}), trainable);
    store.add(prefix + ".w2", trunc_normal({e, dd}, rng), trainable);
    store.add(prefix + ".b2", Tensor({dd}), trainable);
    store.add(prefix + ".gate_w", trunc_normal({dd, dd}, rng), trainable);
    store.add(prefix + ".gate_b", Tensor({dd}), trainable);
}

MixUnit load_mix_unit(const ParameterStore& store, const std::string& prefix) {
    MixUnit u;
    u.ln_gamma = store.get(prefix + ".ln_g");
    u.ln_beta = store.get(prefix + ".ln_b");
    u.w1 = store.get(prefix + ".w1");
    u.b1 = store.get(prefix + ".b1");
    u.w2 = store.get(prefix + ".w2");
    u.b2 = store.get(prefix + ".b2");
    u.gate_w = store.get(prefix + ".gate_w");
    u.gate_b = store.get(prefix + ".gate_b");
    return u;
}

Tensor mlp_mixer_sublayer(const Tensor& x, const MixUnit& p, real dropout_rate, FwdCtx& ctx) {
    auto h = layer_norm_last_dim(x, p.ln_gamma, p.ln_beta);
    h = add(matmul_last_dim(h, p.w1), p.b1);
    h = gelu(h);
    h = add(matmul_last_dim(h, p.w2), p.b2);
    h = dropout(h, dropout_rate, ctx.training, ctx.dropout_seed, ctx.next_call());
    return add(x, h);
}

Tensor gated_attention(const Tensor& x, const MixUnit& p, FwdCtx& ctx,
                       const std::string& capture_key) {
    auto g = softmax_last_dim(add(matmul_last_dim(x, p.gate_w), p.gate_b));
    if (ctx.capture && !capture_key.empty()) (*ctx.capture)[capture_key] = g;
    return mul(x, g);
}

Tensor mix_last_axis(const Tensor& x, const MixUnit& p, real dropout_rate, FwdCtx& ctx,
                     const std::string& capture_key) {
    return gated_attention(mlp_mixer_sublayer(x, p, dropout_rate, ctx), p, ctx, capture_key);
}

void init_block_unit(ParameterStore& store, const std::string& prefix, int n, int h, int c,
                     bool channel_mix, std::mt19937_64& rng, bool trainable) {
    init_mix_unit(store, prefix + ".patch", n, 2 * n, rng, trainable);
    init_mix_unit(store, prefix + ".feat", h, 2 * h, rng, trainable);
    if (channel_mix) init_mix_unit(store, prefix + ".chan", c, 2 * c, rng, trainable);
}

BlockUnit load_block_unit(const ParameterStore& store, const std::string& prefix, bool channel_mix) {
    BlockUnit b;
    b.patch = load_mix_unit(store, prefix + ".patch");
    b.feature = load_mix_unit(store, prefix + ".feat");
    if (channel_mix) b.channel = load_mix_unit(store, prefix + ".chan");
    return b;
}

Tensor tsmixer_block(const Tensor& x, const BlockUnit& p, bool channel_mix, real dropout_rate,
                     FwdCtx& ctx, const std::string& capture_prefix) {
    if (x.rank() != 4) throw ShapeError("tsmixer_block: expected [b x c x n x h]");
    // patch mixing: bring n to the last axis (swap axes 2 and 3)
    auto y = transpose_axes(x, {0, 1, 3, 2});
    y = mix_last_axis(y, p.patch, dropout_rate, ctx,
                      capture_prefix.empty() ? std::string() : capture_prefix + ".patch");
    y = transpose_axes(y, {0, 1, 3, 2});
    // feature mixing over h
    y = mix_last_axis(y, p.feature, dropout_rate, ctx,
                      capture_prefix.empty() ? std::string() : capture_prefix + ".feat");
    // channel mixing over c (swap axes 1 and 3)
    if (channel_mix) {
        if (!p.channel) throw ContractError("tsmixer_block: channel mixing enabled without params");
        y = transpose_axes(y, {0, 3, 2, 1});
        y = mix_last_axis(y, *p.channel, dropout_rate, ctx,
                          capture_prefix.empty() ? std::string() : capture_prefix + ".chan");
        y = transpose_axes(y, {0, 3, 2, 1});
    }
    return y;
}

} // namespace ttm

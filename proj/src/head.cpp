#include "ttm/head.hpp"

#include <iostream>

namespace ttm::head {

namespace {

std::string dec_block_prefix(int j) { return "decoder.b" + std::to_string(j); }

} // namespace

void init_params(ParameterStore& store, const ModelConfig& mc, const HeadConfig& hc,
                 std::mt19937_64& rng) {
    hc.validate(mc);
    const int hd = hc.resolved_hf_dec(mc);
    const int n = mc.num_patches();
    store.add("decoder.proj.w", trunc_normal({mc.hf, hd}, rng), true);
    store.add("decoder.proj.b", Tensor({hd}), true);
    for (int j = 1; j <= hc.decoder_layers; ++j)
        init_block_unit(store, dec_block_prefix(j), n, hd, hc.num_channels,
                        /*channel_mix=*/false, rng, true);
    store.add("head.w", trunc_normal({static_cast<std::int64_t>(n) * hd, mc.fl}, rng), true);
    store.add("head.b", Tensor({mc.fl}), true);
    ensure_finetune_params(store, mc, hc, rng);
}

void ensure_finetune_params(ParameterStore& store, const ModelConfig& mc, const HeadConfig& hc,
                            std::mt19937_64& rng) {
    if (hc.channel_mix_enabled) {
        for (int j = 1; j <= hc.decoder_layers; ++j) {
            const std::string prefix = dec_block_prefix(j) + ".chan";
            if (!store.has(prefix + ".ln_g"))
                init_mix_unit(store, prefix, hc.num_channels, 2 * hc.num_channels, rng, true);
        }
    }
    if (hc.exog_enabled) {
        const int c = hc.num_channels;
        const int cp = static_cast<int>(hc.target_channels.size());
        const int delta = hc.delta();
        if (!store.has("exog.lag.ln_g")) {
            init_mix_unit(store, "exog.lag", delta, 2 * delta, rng, true);
            init_mix_unit(store, "exog.chan", c, 2 * c, rng, true);
            store.add("exog.head.w", trunc_normal({static_cast<std::int64_t>(delta) * c, cp}, rng), true);
            store.add("exog.head.b", Tensor({cp}), true);
        }
    }
    (void)mc;
}

double decoder_size_ratio(const ParameterStore& store, bool warn) {
    const auto backbone = store.total_elements("backbone.");
    const auto dec = store.total_elements("decoder.");
    if (backbone == 0) return 0.0;
    const double ratio = static_cast<double>(dec) / static_cast<double>(backbone);
    if (warn && (ratio < 0.10 || ratio > 0.20))
        std::cerr << "[ttm] warning: decoder size is " << ratio * 100
                  << "% of the backbone (recommended band 10-20%"
                  << ((ratio < 0.05 || ratio > 0.25) ? ", outside the 5-25% design band" : "")
                  << ")\n";
    return ratio;
}

Tensor decoder_forward(const Tensor& x, const ModelConfig& mc, const HeadConfig& hc,
                       const ParameterStore& store, FwdCtx& ctx) {
    if (x.rank() != 4) throw ShapeError("decoder_forward: expected [b x c x n x hf]");
    auto y = add(matmul_last_dim(x, store.get("decoder.proj.w")), store.get("decoder.proj.b"));
    for (int j = 1; j <= hc.decoder_layers; ++j) {
        auto unit = load_block_unit(store, dec_block_prefix(j), hc.channel_mix_enabled);
        y = tsmixer_block(y, unit, hc.channel_mix_enabled, mc.dropout, ctx, dec_block_prefix(j));
    }
    return y;
}

Tensor forecast_head(const Tensor& decoded, const ModelConfig& mc, const HeadConfig& hc,
                     const ParameterStore& store, FwdCtx& ctx) {
    if (decoded.rank() != 4) throw ShapeError("forecast_head: expected [b x c x n x hf_dec]");
    const std::int64_t b = decoded.dim(0), c = decoded.dim(1);
    auto flat = reshape(decoded, {b, c, decoded.dim(2) * decoded.dim(3)});
    flat = dropout(flat, hc.head_dropout, ctx.training, ctx.dropout_seed, ctx.next_call());
    return add(matmul_last_dim(flat, store.get("head.w")), store.get("head.b"));
}

Tensor exogenous_mixer(const Tensor& y_norm, const Tensor& exog_norm, const HeadConfig& hc,
                       const ParameterStore& store, FwdCtx& ctx) {
    if (y_norm.rank() != 3) throw ShapeError("exogenous_mixer: expected [b x c x fl]");
    if (exog_norm.shape() != y_norm.shape())
        throw ContractError("exogenous_mixer: exogenous futures must cover all channels and steps");
    const std::int64_t b = y_norm.dim(0), c = y_norm.dim(1), fl = y_norm.dim(2);
    if (c != hc.num_channels) throw ShapeError("exogenous_mixer: channel count mismatch");
    const int l = hc.exog_context;
    const std::int64_t delta = hc.delta();

    // substitute true futures for exogenous channels
    std::vector<bool> is_exog(static_cast<std::size_t>(c), false);
    for (int e : hc.exog_channels) is_exog[static_cast<std::size_t>(e)] = true;
    std::vector<Tensor> rows;
    rows.reserve(static_cast<std::size_t>(c));
    for (std::int64_t ch = 0; ch < c; ++ch)
        rows.push_back(slice(is_exog[static_cast<std::size_t>(ch)] ? exog_norm : y_norm, 1, ch, ch + 1));
    auto ye = concat(rows, 1);               // [b x c x fl]
    ye = transpose_axes(ye, {0, 2, 1});      // [b x fl x c]

    // zero-pad the time axis by l on both sides
    if (l > 0) {
        Tensor pad({b, l, c});
        ye = concat({pad, ye, pad}, 1);      // [b x (fl+2l) x c]
    }

    // stride-1 patching -> [b x fl x delta x c]
    std::vector<Tensor> windows;
    windows.reserve(static_cast<std::size_t>(fl));
    for (std::int64_t t = 0; t < fl; ++t)
        windows.push_back(reshape(slice(ye, 1, t, t + delta), {b, 1, delta, c}));
    auto yp = concat(windows, 1);

    // lag mixing over delta, then channel mixing over c
    yp = transpose_axes(yp, {0, 1, 3, 2});   // [b x fl x c x delta]
    yp = mix_last_axis(yp, load_mix_unit(store, "exog.lag"), hc.head_dropout, ctx);
    yp = transpose_axes(yp, {0, 1, 3, 2});   // [b x fl x delta x c]
    yp = mix_last_axis(yp, load_mix_unit(store, "exog.chan"), hc.head_dropout, ctx, "exog.chan");

    // per-time-step linear head -> target channels
    auto flat = reshape(yp, {b, fl, delta * c});
    auto out = add(matmul_last_dim(flat, store.get("exog.head.w")), store.get("exog.head.b"));
    return transpose_axes(out, {0, 2, 1});   // [b x c' x fl]
}

} // namespace ttm::head

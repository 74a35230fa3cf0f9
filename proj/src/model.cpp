#include "ttm/model.hpp"

#include "ttm/checkpoint.hpp"

namespace ttm {

TtmModel::TtmModel(ModelConfig mc, HeadConfig hc, const ParameterStore* store)
    : mc_(std::move(mc)), hc_(std::move(hc)), store_(store) {
    mc_.validate();
    hc_.validate(mc_);
}

ForecastOutput TtmModel::forward(const Tensor& X_raw, const std::vector<int>& resolution_ids,
                                 const Tensor* exog_future_raw, FwdCtx& ctx) const {
    if (X_raw.rank() != 3) throw ShapeError("model forward: expected X [b x c x sl]");
    if (X_raw.dim(1) != hc_.num_channels)
        throw ShapeError("model forward: input has " + std::to_string(X_raw.dim(1)) +
                         " channels, head config declares " + std::to_string(hc_.num_channels));
    if (X_raw.dim(2) != mc_.sl)
        throw ShapeError("model forward: context length mismatch");

    ForecastOutput out;
    auto [xbar, stats] = normalize(X_raw);
    out.stats = stats;

    auto xp = patch(xbar, mc_.pl);
    auto enc = backbone::forward(xp, resolution_ids, mc_, *store_, ctx);
    if (mc_.prefix_enabled) enc = slice(enc, 2, 1, enc.dim(2)); // drop the prefix row
    out.backbone_out = enc;

    auto decoded = head::decoder_forward(enc, mc_, hc_, *store_, ctx);
    auto y_norm_all = head::forecast_head(decoded, mc_, hc_, *store_, ctx); // [b x c x fl]

    if (hc_.exog_enabled) {
        if (!exog_future_raw)
            throw ContractError("model forward: exogenous mixer enabled but no true futures given");
        auto exog_norm = normalize_with(*exog_future_raw, stats);
        out.y_norm = head::exogenous_mixer(y_norm_all, exog_norm, hc_, *store_, ctx);
        out.out_channels = hc_.target_channels;
    } else if ([&] {
                   if (static_cast<int>(hc_.target_channels.size()) != hc_.num_channels) return false;
                   for (int i = 0; i < hc_.num_channels; ++i)
                       if (hc_.target_channels[static_cast<std::size_t>(i)] != i) return false;
                   return true;
               }()) {
        out.y_norm = y_norm_all;
        out.out_channels = hc_.target_channels;
    } else {
        std::vector<Tensor> rows;
        for (int t : hc_.target_channels) rows.push_back(slice(y_norm_all, 1, t, t + 1));
        out.y_norm = concat(rows, 1);
        out.out_channels = hc_.target_channels;
    }
    out.y = denormalize(out.y_norm, stats, out.out_channels);
    return out;
}

ParameterStore build_parameters(const ModelConfig& mc, const HeadConfig& hc, std::uint64_t seed) {
    mc.validate();
    hc.validate(mc);
    std::mt19937_64 rng(seed);
    ParameterStore store;
    backbone::init_params(store, mc, rng);
    head::init_params(store, mc, hc, rng);
    store.fingerprint = config_fingerprint(mc);
    return store;
}

std::string config_fingerprint(const ModelConfig& mc) {
    const std::string js = model_config_to_json(mc);
    return sha256_hex(js.data(), js.size());
}

} // namespace ttm

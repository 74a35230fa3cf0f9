#pragma once

#include <random>
#include <vector>

#include "ttm/backbone.hpp"
#include "ttm/config.hpp"
#include "ttm/head.hpp"
#include "ttm/preprocessing.hpp"

namespace ttm {

struct ForecastOutput {
    Tensor y;            // [b x c' x fl] in the original scale
    Tensor y_norm;       // same selection in normalized space
    Tensor backbone_out; // [b x c x n x hf], prefix row already dropped
    NormStats stats;
    std::vector<int> out_channels; // source channel index per output row
};

// The composed pipeline: normalize -> patch -> backbone -> decoder -> head
// -> (exogenous mixer) -> denormalize.
class TtmModel {
public:
    TtmModel(ModelConfig mc, HeadConfig hc, const ParameterStore* store);

    const ModelConfig& model_config() const { return mc_; }
    const HeadConfig& head_config() const { return hc_; }
    const ParameterStore& store() const { return *store_; }

    // X_raw [b x c x sl]; exog_future_raw [b x c x fl] mandatory when the
    // exogenous mixer is enabled (true futures in the original scale).
    ForecastOutput forward(const Tensor& X_raw, const std::vector<int>& resolution_ids,
                           const Tensor* exog_future_raw, FwdCtx& ctx) const;

private:
    ModelConfig mc_;
    HeadConfig hc_;
    const ParameterStore* store_;
};

// Fresh parameter store for a model (backbone + decoder + head, plus
// channel-mix/exog tensors when enabled), fingerprint populated.
ParameterStore build_parameters(const ModelConfig& mc, const HeadConfig& hc, std::uint64_t seed);

// SHA-256 hex of the canonical ModelConfig JSON.
std::string config_fingerprint(const ModelConfig& mc);

} // namespace ttm

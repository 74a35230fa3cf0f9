#pragma once

#include <random>
#include <vector>

#include "ttm/config.hpp"
#include "ttm/mixer.hpp"
#include "ttm/tensor.hpp"

namespace ttm::head {

// Decoder + forecast head parameters under "decoder.*" / "head.*".
// Channel-mix and exogenous-mixer tensors are created lazily at fine-tune
// time (see ensure_finetune_params): they are absent during pre-training.
void init_params(ParameterStore& store, const ModelConfig& mc, const HeadConfig& hc,
                 std::mt19937_64& rng);

// Adds "decoder.*.chan" and "exog.*" tensors when the head config enables
// them and they are not present yet. No-op otherwise.
void ensure_finetune_params(ParameterStore& store, const ModelConfig& mc, const HeadConfig& hc,
                            std::mt19937_64& rng);

// Ratio of decoder parameters to backbone parameters. Warns on stderr when
// outside the recommended [0.10, 0.20] band (louder outside [0.05, 0.25]).
// Desk-scale configurations routinely sit outside the band, so this never
// throws.
double decoder_size_ratio(const ParameterStore& store, bool warn = true);

// [b x c x n x hf] -> [b x c x n x hf_dec]: linear projection then
// decoder_layers tsmixer blocks (no adaptive patching).
Tensor decoder_forward(const Tensor& x, const ModelConfig& mc, const HeadConfig& hc,
                       const ParameterStore& store, FwdCtx& ctx);

// [b x c x n x hf_dec] -> flatten per channel -> dropout -> linear -> [b x c x fl]
Tensor forecast_head(const Tensor& decoded, const ModelConfig& mc, const HeadConfig& hc,
                     const ParameterStore& store, FwdCtx& ctx);

// Exogenous fusion on normalized forecasts. y_norm [b x c x fl] are the head
// forecasts; exog_norm [b x c x fl] carries the true futures (only the
// exogenous channel rows are read). Returns target-channel forecasts
// [b x c' x fl] in normalized space.
Tensor exogenous_mixer(const Tensor& y_norm, const Tensor& exog_norm, const HeadConfig& hc,
                       const ParameterStore& store, FwdCtx& ctx);

} // namespace ttm::head

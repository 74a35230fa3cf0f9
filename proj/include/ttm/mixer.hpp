#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>

#include "ttm/config.hpp"
#include "ttm/tensor.hpp"

namespace ttm {

// Per-forward state: dropout mode/seed and an optional capture sink for
// gated-attention softmax outputs (keyed by unit name).
struct FwdCtx {
    bool training = false;
    std::uint64_t dropout_seed = 0;
    std::uint64_t call_counter = 0;
    std::map<std::string, Tensor>* capture = nullptr;

    std::uint64_t next_call() { return call_counter++; }
};

// One mixing unit over a single axis of size d:
//   sublayer: y = x + Dropout(W2 * GELU(W1 * LayerNorm(x)))   W1: d->e, W2: e->d
//   gate:     y = x (*) softmax(x*Wg + bg)
struct MixUnit {
    Tensor ln_gamma, ln_beta; // [d]
    Tensor w1, b1;            // [d x e], [e]
    Tensor w2, b2;            // [e x d], [d]
    Tensor gate_w, gate_b;    // [d x d], [d]
};

// Store plumbing: tensors live in the ParameterStore under
// "<prefix>.{ln_g,ln_b,w1,b1,w2,b2,gate_w,gate_b}".
void init_mix_unit(ParameterStore& store, const std::string& prefix, int d, int expansion,
                   std::mt19937_64& rng, bool trainable);
MixUnit load_mix_unit(const ParameterStore& store, const std::string& prefix);

// Truncated normal (std 0.02, clipped at 2 std) weight init, zero biases.
Tensor trunc_normal(Shape shape, std::mt19937_64& rng, real stddev = real(0.02));

Tensor mlp_mixer_sublayer(const Tensor& x, const MixUnit& p, real dropout_rate, FwdCtx& ctx);
Tensor gated_attention(const Tensor& x, const MixUnit& p, FwdCtx& ctx,
                       const std::string& capture_key = {});

// sublayer + gate over the last axis
Tensor mix_last_axis(const Tensor& x, const MixUnit& p, real dropout_rate, FwdCtx& ctx,
                     const std::string& capture_key = {});

// The vanilla TSMixer block on [b x c x n x h]:
//   patch mixing over n, feature mixing over h, optional channel mixing over c.
struct BlockUnit {
    MixUnit patch;
    MixUnit feature;
    std::optional<MixUnit> channel;
};

void init_block_unit(ParameterStore& store, const std::string& prefix, int n, int h, int c,
                     bool channel_mix, std::mt19937_64& rng, bool trainable);
BlockUnit load_block_unit(const ParameterStore& store, const std::string& prefix, bool channel_mix);

Tensor tsmixer_block(const Tensor& x, const BlockUnit& p, bool channel_mix, real dropout_rate,
                     FwdCtx& ctx, const std::string& capture_prefix = {});

} // namespace ttm

#pragma once

#include <random>
#include <string>
#include <vector>

#include "ttm/config.hpp"
#include "ttm/mixer.hpp"
#include "ttm/tensor.hpp"

namespace ttm::backbone {

// Create all backbone parameters under "backbone.*".
void init_params(ParameterStore& store, const ModelConfig& mc, std::mt19937_64& rng);

// [b x c x n x pl] * [pl x hf] (+bias) -> [b x c x n x hf]
Tensor embed_patches(const Tensor& X_p, const Tensor& w, const Tensor& b);

// Broadcast the per-sample resolution embedding row across channels and
// prepend it as patch 0: [b x c x n x hf] -> [b x c x (n+1) x hf].
// Unknown ids must be mapped to row 0 by the caller (never errors here for
// id 0).
Tensor attach_resolution_prefix(const Tensor& X_h, const std::vector<int>& resolution_ids,
                                const Tensor& table);

// Pure reshapes: split each hidden vector into K contiguous sub-patches.
// [b x c x p x h] -> [b x c x p*K x h/K]; merge is the exact inverse.
Tensor patch_partition(const Tensor& x, int K);
Tensor patch_merge(const Tensor& x, int K);

// Full backbone: embed -> optional prefix -> L levels of M blocks with
// partition/merge (channel mixing always off). Output keeps the prefix row:
// [b x c x n' x hf] with n' = n or n+1.
Tensor forward(const Tensor& X_p, const std::vector<int>& resolution_ids, const ModelConfig& mc,
               const ParameterStore& store, FwdCtx& ctx);

} // namespace ttm::backbone

#pragma once

#include <utility>
#include <vector>

#include "ttm/tensor.hpp"

namespace ttm {

// Per-instance normalization statistics: one (mean, std) per batch row and
// channel. Population standard deviation; eps added to std, not variance.
struct NormStats {
    std::int64_t batch = 0;
    std::int64_t channels = 0;
    std::vector<real> mean; // batch*channels
    std::vector<real> stddev;
    real eps = real(1e-5);

    real scale(std::int64_t b, std::int64_t c) const { return stddev[b * channels + c] + eps; }
    real center(std::int64_t b, std::int64_t c) const { return mean[b * channels + c]; }
};

// X [b x c x sl] -> zero-mean unit-std per (b, c). Not differentiated
// through: the result is a fresh leaf (model inputs carry no gradient).
std::pair<Tensor, NormStats> normalize(const Tensor& X);

// y_norm [b x c' x fl] -> y_norm * (std+eps) + mean, using the stats rows of
// the listed source channels (channels[i] picks the stats for output row i).
// Differentiable in y_norm; the stats act as constants.
Tensor denormalize(const Tensor& y_norm, const NormStats& stats, const std::vector<int>& channels);

// Normalize future values with *context* stats (used for exogenous futures).
Tensor normalize_with(const Tensor& Y, const NormStats& stats);

// Non-overlapping patching: [b x c x sl] -> [b x c x n x pl], n = sl/pl.
Tensor patch(const Tensor& X, int pl);
Tensor unpatch(const Tensor& Xp); // exact inverse

} // namespace ttm

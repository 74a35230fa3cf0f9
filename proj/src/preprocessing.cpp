#include "ttm/preprocessing.hpp"

#include <cmath>

#include "ttm/errors.hpp"

namespace ttm {

std::pair<Tensor, NormStats> normalize(const Tensor& X) {
    if (X.rank() != 3) throw ShapeError("normalize: expected [b x c x sl], got " + shape_str(X.shape()));
    const std::int64_t b = X.dim(0), c = X.dim(1), sl = X.dim(2);
    if (sl < 2) throw ContractError("normalize: sl must be >= 2");
    NormStats stats;
    stats.batch = b;
    stats.channels = c;
    stats.mean.resize(static_cast<std::size_t>(b * c));
    stats.stddev.resize(static_cast<std::size_t>(b * c));
    std::vector<real> out(X.data().size());
    const real* xd = X.data().data();
    for (std::int64_t i = 0; i < b * c; ++i) {
        const real* row = xd + i * sl;
        real mean = real(0);
        for (std::int64_t t = 0; t < sl; ++t) mean += row[t];
        mean /= real(sl);
        real var = real(0);
        for (std::int64_t t = 0; t < sl; ++t) { const real d = row[t] - mean; var += d * d; }
        var /= real(sl);
        const real sd = std::sqrt(var);
        stats.mean[static_cast<std::size_t>(i)] = mean;
        stats.stddev[static_cast<std::size_t>(i)] = sd;
        const real inv = real(1) / (sd + stats.eps);
        for (std::int64_t t = 0; t < sl; ++t) out[static_cast<std::size_t>(i * sl + t)] = (row[t] - mean) * inv;
    }
    return {Tensor({b, c, sl}, std::move(out)), stats};
}

Tensor denormalize(const Tensor& y_norm, const NormStats& stats, const std::vector<int>& channels) {
    if (y_norm.rank() != 3) throw ShapeError("denormalize: expected [b x c' x fl]");
    const std::int64_t b = y_norm.dim(0), co = y_norm.dim(1), fl = y_norm.dim(2);
    if (b != stats.batch) throw ShapeError("denormalize: batch mismatch with stats");
    if (static_cast<std::int64_t>(channels.size()) != co)
        throw ShapeError("denormalize: channel map size mismatch");
    for (int ch : channels)
        if (ch < 0 || ch >= stats.channels) throw ShapeError("denormalize: stats channel out of range");

    std::vector<real> scale(static_cast<std::size_t>(b * co * fl));
    std::vector<real> center(scale.size());
    for (std::int64_t i = 0; i < b; ++i)
        for (std::int64_t j = 0; j < co; ++j) {
            const real s = stats.scale(i, channels[static_cast<std::size_t>(j)]);
            const real m = stats.center(i, channels[static_cast<std::size_t>(j)]);
            for (std::int64_t t = 0; t < fl; ++t) {
                scale[static_cast<std::size_t>((i * co + j) * fl + t)] = s;
                center[static_cast<std::size_t>((i * co + j) * fl + t)] = m;
            }
        }
    Tensor s({b, co, fl}, std::move(scale));
    Tensor m({b, co, fl}, std::move(center));
    return add(mul(y_norm, s), m);
}

Tensor normalize_with(const Tensor& Y, const NormStats& stats) {
    if (Y.rank() != 3) throw ShapeError("normalize_with: expected [b x c x fl]");
    const std::int64_t b = Y.dim(0), c = Y.dim(1), fl = Y.dim(2);
    if (b != stats.batch || c != stats.channels)
        throw ShapeError("normalize_with: stats shape mismatch");
    std::vector<real> out(Y.data().size());
    const real* yd = Y.data().data();
    for (std::int64_t i = 0; i < b * c; ++i) {
        const real inv = real(1) / (stats.stddev[static_cast<std::size_t>(i)] + stats.eps);
        const real m = stats.mean[static_cast<std::size_t>(i)];
        for (std::int64_t t = 0; t < fl; ++t)
            out[static_cast<std::size_t>(i * fl + t)] = (yd[i * fl + t] - m) * inv;
    }
    return Tensor({b, c, fl}, std::move(out));
}

Tensor patch(const Tensor& X, int pl) {
    if (X.rank() != 3) throw ShapeError("patch: expected [b x c x sl]");
    const std::int64_t sl = X.dim(2);
    if (pl < 1 || sl % pl != 0)
        throw ShapeError("patch: sl=" + std::to_string(sl) + " not divisible by pl=" + std::to_string(pl));
    return reshape(X, {X.dim(0), X.dim(1), sl / pl, pl});
}

Tensor unpatch(const Tensor& Xp) {
    if (Xp.rank() != 4) throw ShapeError("unpatch: expected [b x c x n x pl]");
    return reshape(Xp, {Xp.dim(0), Xp.dim(1), Xp.dim(2) * Xp.dim(3)});
}

} // namespace ttm

#include "ttm/backbone.hpp"

namespace ttm::backbone {

namespace {

std::string level_block_prefix(int level, int block) {
    return "backbone.l" + std::to_string(level) + ".b" + std::to_string(block);
}

} // namespace

void init_params(ParameterStore& store, const ModelConfig& mc, std::mt19937_64& rng) {
    mc.validate();
    store.add("backbone.embed.w", trunc_normal({mc.pl, mc.hf}, rng), true);
    store.add("backbone.embed.b", Tensor({mc.hf}), true);
    if (mc.prefix_enabled)
        store.add("backbone.prefix.table", trunc_normal({mc.num_resolutions, mc.hf}, rng), true);
    const int n_prime = mc.num_patches() + (mc.prefix_enabled ? 1 : 0);
    for (int i = 1; i <= mc.levels; ++i) {
        const int K = mc.partition_factor(i);
        const int patches = n_prime * K;
        const int width = mc.hf / K;
        for (int j = 1; j <= mc.blocks_per_level; ++j)
            init_block_unit(store, level_block_prefix(i, j), patches, width, /*c=*/1,
                            /*channel_mix=*/false, rng, true);
    }
}

Tensor embed_patches(const Tensor& X_p, const Tensor& w, const Tensor& b) {
    return add(matmul_last_dim(X_p, w), b);
}

Tensor attach_resolution_prefix(const Tensor& X_h, const std::vector<int>& resolution_ids,
                                const Tensor& table) {
    if (X_h.rank() != 4) throw ShapeError("attach_resolution_prefix: expected [b x c x n x hf]");
    const std::int64_t batch = X_h.dim(0), c = X_h.dim(1), hf = X_h.dim(3);
    if (static_cast<std::int64_t>(resolution_ids.size()) != batch)
        throw ShapeError("attach_resolution_prefix: one resolution id per batch row required");
    if (table.dim(1) != hf)
        throw ShapeError("attach_resolution_prefix: table width must equal hf");
    auto rows = embedding_lookup(table, resolution_ids); // [b x hf]
    auto prefix = reshape(rows, {batch, 1, 1, hf});
    if (c > 1) {
        std::vector<Tensor> copies(static_cast<std::size_t>(c), prefix);
        prefix = concat(copies, 1); // [b x c x 1 x hf]
    }
    return concat({prefix, X_h}, 2);
}

Tensor patch_partition(const Tensor& x, int K) {
    if (x.rank() != 4) throw ShapeError("patch_partition: expected [b x c x p x h]");
    if (K < 1) throw ShapeError("patch_partition: K must be >= 1");
    const std::int64_t h = x.dim(3);
    if (h % K != 0)
        throw ShapeError("patch_partition: hidden width " + std::to_string(h) +
                         " not divisible by K=" + std::to_string(K));
    return reshape(x, {x.dim(0), x.dim(1), x.dim(2) * K, h / K});
}

Tensor patch_merge(const Tensor& x, int K) {
    if (x.rank() != 4) throw ShapeError("patch_merge: expected [b x c x p x h]");
    if (K < 1 || x.dim(2) % K != 0)
        throw ShapeError("patch_merge: patch count not divisible by K=" + std::to_string(K));
    return reshape(x, {x.dim(0), x.dim(1), x.dim(2) / K, x.dim(3) * K});
}

Tensor forward(const Tensor& X_p, const std::vector<int>& resolution_ids, const ModelConfig& mc,
               const ParameterStore& store, FwdCtx& ctx) {
    mc.validate();
    auto x = embed_patches(X_p, store.get("backbone.embed.w"), store.get("backbone.embed.b"));
    if (mc.prefix_enabled) {
        std::vector<int> ids = resolution_ids;
        for (auto& id : ids)
            if (id < 0 || id >= mc.num_resolutions) id = 0; // unknown -> reserved row
        x = attach_resolution_prefix(x, ids, store.get("backbone.prefix.table"));
    }
    for (int i = 1; i <= mc.levels; ++i) {
        const int K = mc.partition_factor(i);
        x = patch_partition(x, K);
        for (int j = 1; j <= mc.blocks_per_level; ++j) {
            auto unit = load_block_unit(store, level_block_prefix(i, j), false);
            x = tsmixer_block(x, unit, /*channel_mix=*/false, mc.dropout, ctx);
        }
        x = patch_merge(x, K);
    }
    return x;
}

} // namespace ttm::backbone

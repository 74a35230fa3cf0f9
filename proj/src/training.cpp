#include "ttm/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <memory>
#include <random>

#include "json.hpp"

namespace ttm {

Tensor mse_loss(const Tensor& pred, const Tensor& target) {
    if (pred.shape() != target.shape())
        throw ShapeError("mse_loss: shapes differ: " + shape_str(pred.shape()) + " vs " +
                         shape_str(target.shape()));
    auto diff = sub(pred, target);
    return mul_scalar(sum_all(mul(diff, diff)), real(1) / static_cast<real>(pred.size()));
}

void adam_step(ParameterStore& store, AdamState& state, const TrainConfig& tc) {
    state.t += 1;
    const double bc1 = 1.0 - std::pow(static_cast<double>(tc.beta1), static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(static_cast<double>(tc.beta2), static_cast<double>(state.t));
    for (auto& [name, p] : store.params()) {
        if (!store.trainable(name)) continue;
        if (!p.has_grad()) continue;
        auto& m = state.m[name];
        auto& v = state.v[name];
        if (m.size() != p.data().size()) m.assign(p.data().size(), real(0));
        if (v.size() != p.data().size()) v.assign(p.data().size(), real(0));
        auto& data = p.data();
        const auto& g = p.grad();
        for (std::size_t i = 0; i < data.size(); ++i) {
            m[i] = tc.beta1 * m[i] + (real(1) - tc.beta1) * g[i];
            v[i] = tc.beta2 * v[i] + (real(1) - tc.beta2) * g[i] * g[i];
            const real mhat = m[i] / static_cast<real>(bc1);
            const real vhat = v[i] / static_cast<real>(bc2);
            data[i] -= tc.lr * mhat / (std::sqrt(vhat) + tc.adam_eps);
        }
    }
}

HeadConfig pretrain_head_config(const HeadConfig& base) {
    HeadConfig hc = base;
    hc.channel_mix_enabled = false; // disabled during pre-training
    hc.exog_enabled = false;
    hc.num_channels = 1;
    hc.target_channels = {0};
    hc.exog_channels = {};
    return hc;
}

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    std::uint64_t x = seed ^ (a * 0x9E3779B97F4A7C15ULL) ^ (b * 0xD1B54A32D192ED03ULL);
    x ^= x >> 33;
    x *= 0xFF51AFD7ED558CCDULL;
    x ^= x >> 33;
    return x;
}

struct WindowPool {
    std::vector<WindowSpec> specs;
};

// Loss restricted to the model's target channels.
double batch_loss_and_backward(const TtmModel& model, const WindowBatch& batch, bool do_backward,
                               FwdCtx& ctx) {
    const auto& hc = model.head_config();
    const Tensor* exog = hc.exog_enabled ? &batch.Y : nullptr;
    auto out = model.forward(batch.X, batch.resolution_ids, exog, ctx);
    Tensor target;
    {
        bool identity = out.out_channels.size() == static_cast<std::size_t>(batch.Y.dim(1));
        for (std::size_t i = 0; identity && i < out.out_channels.size(); ++i)
            identity = out.out_channels[i] == static_cast<int>(i);
        if (identity) {
            target = batch.Y;
        } else {
            std::vector<Tensor> rows;
            for (int t : out.out_channels) rows.push_back(slice(batch.Y, 1, t, t + 1));
            target = concat(rows, 1);
        }
    }
    auto loss = mse_loss(out.y, target.detached());
    if (do_backward) backward(loss);
    return static_cast<double>(loss.data()[0]);
}

double evaluate_pool(const TtmModel& model, const std::vector<WindowSpec>& specs, int batch_size,
                     int sl, int fl) {
    if (specs.empty()) return std::numeric_limits<double>::quiet_NaN();
    double acc = 0.0;
    std::int64_t total = 0;
    for (std::size_t i = 0; i < specs.size(); i += static_cast<std::size_t>(batch_size)) {
        std::vector<WindowSpec> chunk(specs.begin() + static_cast<std::ptrdiff_t>(i),
                                      specs.begin() + static_cast<std::ptrdiff_t>(
                                          std::min(specs.size(), i + static_cast<std::size_t>(batch_size))));
        auto batch = materialize(chunk, sl, fl);
        FwdCtx ctx; // eval mode
        const double l = batch_loss_and_backward(model, batch, false, ctx);
        acc += l * static_cast<double>(chunk.size());
        total += static_cast<std::int64_t>(chunk.size());
    }
    return acc / static_cast<double>(total);
}

TrainResult train_loop(ParameterStore store, const ModelConfig& mc, const HeadConfig& hc,
                       const TrainConfig& tc, const std::vector<WindowSpec>& train_pool,
                       const std::vector<WindowSpec>& val_pool) {
    TrainResult res;
    res.model_config = mc;
    res.head_config = hc;
    if (train_pool.empty()) throw ContractError("training: empty window pool");
    for (const auto& s : train_pool) res.train_offsets.push_back(s.offset);

    TtmModel model(mc, hc, &store);
    AdamState opt;
    double best_val = std::numeric_limits<double>::infinity();
    ParameterStore best = store.clone();
    bool have_val = !val_pool.empty();

    std::vector<WindowSpec> pool = train_pool;
    const auto t_start = std::chrono::steady_clock::now();
    for (int epoch = 1; epoch <= tc.epochs; ++epoch) {
        std::mt19937_64 rng(mix_seed(tc.seed, static_cast<std::uint64_t>(epoch), 0));
        std::shuffle(pool.begin(), pool.end(), rng);
        double acc = 0.0;
        std::int64_t total = 0;
        int step = 0;
        for (std::size_t i = 0; i < pool.size(); i += static_cast<std::size_t>(tc.batch_size), ++step) {
            std::vector<WindowSpec> chunk(pool.begin() + static_cast<std::ptrdiff_t>(i),
                                          pool.begin() + static_cast<std::ptrdiff_t>(
                                              std::min(pool.size(), i + static_cast<std::size_t>(tc.batch_size))));
            auto batch = materialize(chunk, mc.sl, mc.fl);
            FwdCtx ctx;
            ctx.training = true;
            ctx.dropout_seed = mix_seed(tc.seed, static_cast<std::uint64_t>(epoch),
                                        static_cast<std::uint64_t>(step) + 1);
            store.zero_grads();
            const double l = batch_loss_and_backward(model, batch, true, ctx);
            adam_step(store, opt, tc);
            acc += l * static_cast<double>(chunk.size());
            total += static_cast<std::int64_t>(chunk.size());
        }
        const double wall =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
        res.log.push_back({epoch, "train", acc / static_cast<double>(total), wall});
        if (have_val) {
            const double vmse = evaluate_pool(model, val_pool, tc.batch_size, mc.sl, mc.fl);
            res.log.push_back({epoch, "validation", vmse, wall});
            if (vmse < best_val) {
                best_val = vmse;
                best = store.clone();
            }
        }
    }
    res.store = (have_val && tc.epochs > 0) ? std::move(best) : std::move(store);
    res.opt = std::move(opt);
    return res;
}

} // namespace

TrainResult pretrain(const std::vector<TimeSeriesDataset>& datasets, const ModelConfig& mc,
                     const TrainConfig& tc) {
    mc.validate();
    tc.validate();
    HeadConfig hc = pretrain_head_config(HeadConfig{});

    // channel-independent: every channel becomes its own univariate series
    auto uni = std::make_shared<std::vector<TimeSeriesDataset>>();
    for (const auto& ds : datasets)
        for (auto& u : to_univariate(ds)) uni->push_back(std::move(u));

    std::vector<WindowSpec> train_pool, val_pool;
    for (const auto& u : *uni) {
        for (auto o : make_windows(u, Split::train, mc.sl, mc.fl, tc.window_stride))
            train_pool.push_back({&u, o});
        for (auto o : make_windows(u, Split::validation, mc.sl, mc.fl, tc.window_stride, true))
            val_pool.push_back({&u, o});
    }

    auto store = build_parameters(mc, hc, tc.seed);
    head::decoder_size_ratio(store);
    auto res = train_loop(std::move(store), mc, hc, tc, train_pool, val_pool);
    res.store.fingerprint = config_fingerprint(mc);
    return res;
}

TrainResult finetune(const ParameterStore& pretrained, const TimeSeriesDataset& dataset,
                     const ModelConfig& mc, const HeadConfig& hc, const TrainConfig& tc) {
    mc.validate();
    hc.validate(mc);
    tc.validate();
    if (pretrained.fingerprint != config_fingerprint(mc))
        throw TtmError(ErrorCode::fingerprint,
                       "finetune: checkpoint fingerprint does not match the model config");

    auto store = pretrained.clone();
    if (tc.few_shot_fraction == 0.0) { // zero-shot: no training at all
        TrainResult res;
        res.store = std::move(store);
        res.model_config = mc;
        res.head_config = hc;
        return res;
    }

    std::mt19937_64 rng(mix_seed(tc.seed, 0x5eed, 0xf17e));
    head::ensure_finetune_params(store, mc, hc, rng);
    for (const auto& [name, p] : store.params())
        store.set_trainable(name, name.rfind("backbone.", 0) != 0);

    std::vector<WindowSpec> train_pool, val_pool;
    for (auto o : make_windows(dataset, Split::train, mc.sl, mc.fl, tc.window_stride, false,
                               tc.few_shot_fraction))
        train_pool.push_back({&dataset, o});
    for (auto o : make_windows(dataset, Split::validation, mc.sl, mc.fl, tc.window_stride, true))
        val_pool.push_back({&dataset, o});

    auto res = train_loop(std::move(store), mc, hc, tc, train_pool, val_pool);
    res.store.fingerprint = pretrained.fingerprint;
    return res;
}

void write_train_log(const std::vector<EpochLog>& log, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("train log: cannot write " + path);
    for (const auto& e : log) {
        nlohmann::json j;
        j["epoch"] = e.epoch;
        j["split"] = e.split;
        j["mse"] = e.mse;
        j["wall_seconds"] = e.wall_seconds;
        out << j.dump() << "\n";
    }
}

} // namespace ttm

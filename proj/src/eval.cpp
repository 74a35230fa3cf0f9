#include "ttm/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <thread>

#include "json.hpp"

namespace ttm {

std::string EvalReport::to_json() const {
    nlohmann::json j;
    j["dataset"] = dataset;
    j["sl"] = sl;
    j["fl"] = fl;
    j["protocol"] = protocol;
    j["mse"] = mse;
    j["per_channel_mse"] = per_channel_mse;
    j["num_windows"] = num_windows;
    if (!f_imp.empty()) j["f_imp"] = f_imp;
    return j.dump(2);
}

// ---------------------------------------------------------------------------
// forecasters
// ---------------------------------------------------------------------------

namespace {

class DirectForecaster : public Forecaster {
public:
    explicit DirectForecaster(const TtmModel& model) : model_(&model) {}
    int target_fl() const override { return model_->model_config().fl; }
    Tensor forecast(const Tensor& X_raw, const std::vector<int>& ids,
                    const Tensor* exog) const override {
        FwdCtx ctx; // dropout off
        return model_->forward(X_raw, ids, exog, ctx).y;
    }

protected:
    const TtmModel* model_;
};

class PrunedForecaster : public DirectForecaster {
public:
    PrunedForecaster(const TtmModel& model, int target) : DirectForecaster(model), target_(target) {
        if (target_ > model.model_config().fl || target_ < 1)
            throw ContractError("fla_prune: target FL must be in [1, native FL]");
    }
    int target_fl() const override { return target_; }
    Tensor forecast(const Tensor& X_raw, const std::vector<int>& ids,
                    const Tensor* exog) const override {
        auto full = DirectForecaster::forecast(X_raw, ids, exog);
        return target_ == model_->model_config().fl ? full : slice(full, 2, 0, target_);
    }

private:
    int target_;
};

class RecursiveForecaster : public Forecaster {
public:
    RecursiveForecaster(const TtmModel& model, int target) : model_(&model), target_(target) {
        if (target_ < model.model_config().fl)
            throw ContractError("fla_recursive: target FL must be >= native FL");
        if (model.head_config().exog_enabled)
            throw ContractError("fla_recursive: not supported with the exogenous mixer");
        if (model.head_config().target_channels.size() !=
            static_cast<std::size_t>(model.head_config().num_channels))
            throw ContractError("fla_recursive: every channel must be a target to roll forward");
    }
    int target_fl() const override { return target_; }
    Tensor forecast(const Tensor& X_raw, const std::vector<int>& ids,
                    const Tensor* exog) const override {
        if (exog) throw ContractError("fla_recursive: exogenous futures unsupported");
        const auto& mc = model_->model_config();
        const int native = mc.fl;
        Tensor context = X_raw.detached();
        std::vector<Tensor> chunks;
        int produced = 0;
        invocations_ = 0;
        while (produced < target_) {
            FwdCtx ctx;
            // predictions feed back denormalized; each invocation re-normalizes
            // the extended context with fresh stats
            auto y = model_->forward(context, ids, nullptr, ctx).y.detached();
            ++invocations_;
            chunks.push_back(y);
            produced += native;
            if (produced < target_) {
                auto extended = concat({context, y}, 2);
                context = slice(extended, 2, extended.dim(2) - mc.sl, extended.dim(2)).detached();
            }
        }
        auto all = chunks.size() == 1 ? chunks[0] : concat(chunks, 2);
        return all.dim(2) == target_ ? all : slice(all, 2, 0, target_);
    }
    mutable std::int64_t invocations_ = 0;

private:
    const TtmModel* model_;
    int target_;
};

} // namespace

std::unique_ptr<Forecaster> make_direct(const TtmModel& model) {
    return std::make_unique<DirectForecaster>(model);
}

std::unique_ptr<Forecaster> make_pruned(const TtmModel& model, int target) {
    return std::make_unique<PrunedForecaster>(model, target);
}

std::unique_ptr<Forecaster> make_recursive(const TtmModel& model, int target) {
    return std::make_unique<RecursiveForecaster>(model, target);
}

std::int64_t recursive_invocations(const Forecaster& f) {
    if (const auto* r = dynamic_cast<const RecursiveForecaster*>(&f)) return r->invocations_;
    return -1;
}

// ---------------------------------------------------------------------------
// evaluation
// ---------------------------------------------------------------------------

EvalReport evaluate(const Forecaster& fc, const TtmModel& model, const TimeSeriesDataset& ds,
                    Protocol protocol, int workers, std::vector<WindowForecast>* dump,
                    const std::map<std::string, double>* baselines) {
    const auto& mc = model.model_config();
    const auto& hc = model.head_config();
    const int tfl = fc.target_fl();
    auto offsets = make_windows(ds, Split::test, mc.sl, tfl, 1, /*allow_context_overlap=*/true);
    if (offsets.empty()) throw ContractError("evaluate: test split holds no window");
    if (protocol == Protocol::last_window) offsets = {offsets.back()};

    const auto& targets = hc.target_channels;
    const std::int64_t cp = static_cast<std::int64_t>(targets.size());
    const std::size_t nwin = offsets.size();
    std::vector<WindowForecast> results(nwin);

    auto run_range = [&](std::size_t lo, std::size_t hi) {
        for (std::size_t w = lo; w < hi; ++w) {
            WindowSpec spec{&ds, offsets[w]};
            auto batch = materialize({spec}, mc.sl, tfl);
            const Tensor* exog = hc.exog_enabled ? &batch.Y : nullptr;
            auto pred = fc.forecast(batch.X, batch.resolution_ids, exog);
            WindowForecast& wf = results[w];
            wf.offset = offsets[w];
            wf.prediction = pred.data();
            wf.truth.resize(static_cast<std::size_t>(cp * tfl));
            for (std::int64_t j = 0; j < cp; ++j)
                for (int t = 0; t < tfl; ++t)
                    wf.truth[static_cast<std::size_t>(j * tfl + t)] =
                        batch.Y.data()[static_cast<std::size_t>(targets[static_cast<std::size_t>(j)] * tfl + t)];
        }
    };
    if (workers <= 1 || nwin < 2) {
        run_range(0, nwin);
    } else {
        const std::size_t nthreads = std::min<std::size_t>(static_cast<std::size_t>(workers), nwin);
        std::vector<std::thread> threads;
        for (std::size_t k = 0; k < nthreads; ++k) {
            const std::size_t lo = k * nwin / nthreads;
            const std::size_t hi = (k + 1) * nwin / nthreads;
            threads.emplace_back(run_range, lo, hi);
        }
        for (auto& t : threads) t.join();
    }

    EvalReport rep;
    rep.dataset = ds.name;
    rep.sl = mc.sl;
    rep.fl = tfl;
    rep.protocol = protocol == Protocol::sliding ? "sliding" : "last_window";
    rep.num_windows = static_cast<std::int64_t>(nwin);
    rep.per_channel_mse.assign(static_cast<std::size_t>(cp), 0.0);
    double acc = 0.0;
    for (const auto& wf : results)
        for (std::int64_t j = 0; j < cp; ++j)
            for (int t = 0; t < tfl; ++t) {
                const double d = static_cast<double>(wf.prediction[static_cast<std::size_t>(j * tfl + t)]) -
                                 static_cast<double>(wf.truth[static_cast<std::size_t>(j * tfl + t)]);
                rep.per_channel_mse[static_cast<std::size_t>(j)] += d * d;
                acc += d * d;
            }
    for (auto& v : rep.per_channel_mse) v /= static_cast<double>(nwin) * tfl;
    rep.mse = acc / (static_cast<double>(nwin) * static_cast<double>(cp) * tfl);
    if (baselines)
        for (const auto& [name, base] : *baselines)
            if (base != 0.0) rep.f_imp[name] = (base - rep.mse) / base;
    if (dump) *dump = std::move(results);
    return rep;
}

// ---------------------------------------------------------------------------
// PCA (power iteration with deflation)
// ---------------------------------------------------------------------------

void pca_top_components(const std::vector<std::vector<real>>& rows, int k,
                        std::vector<std::vector<double>>& components,
                        std::vector<double>& eigenvalues, double tol) {
    if (rows.empty()) throw ContractError("pca: no rows");
    const std::size_t n = rows.size();
    const std::size_t d = rows[0].size();
    std::vector<double> mean(d, 0.0);
    for (const auto& r : rows)
        for (std::size_t i = 0; i < d; ++i) mean[i] += static_cast<double>(r[i]);
    for (auto& m : mean) m /= static_cast<double>(n);
    std::vector<double> cov(d * d, 0.0);
    for (const auto& r : rows)
        for (std::size_t i = 0; i < d; ++i) {
            const double ci = static_cast<double>(r[i]) - mean[i];
            for (std::size_t j = 0; j < d; ++j)
                cov[i * d + j] += ci * (static_cast<double>(r[j]) - mean[j]);
        }
    for (auto& c : cov) c /= static_cast<double>(n);

    components.assign(static_cast<std::size_t>(k), std::vector<double>(d, 0.0));
    eigenvalues.assign(static_cast<std::size_t>(k), 0.0);
    std::mt19937_64 rng(12345);
    std::normal_distribution<double> dist(0.0, 1.0);
    for (int comp = 0; comp < k; ++comp) {
        std::vector<double> v(d);
        for (auto& x : v) x = dist(rng);
        double lambda = 0.0;
        for (int iter = 0; iter < 100000; ++iter) {
            std::vector<double> w(d, 0.0);
            for (std::size_t i = 0; i < d; ++i) {
                double acc = 0.0;
                for (std::size_t j = 0; j < d; ++j) acc += cov[i * d + j] * v[j];
                w[i] = acc;
            }
            double norm = 0.0;
            for (double x : w) norm += x * x;
            norm = std::sqrt(norm);
            if (norm < 1e-300) break; // exactly null space; any direction works
            double new_lambda = 0.0;
            for (std::size_t i = 0; i < d; ++i) new_lambda += v[i] * w[i];
            for (auto& x : w) x /= norm;
            double diff = 0.0;
            for (std::size_t i = 0; i < d; ++i)
                diff = std::max(diff, std::abs(std::abs(w[i]) - std::abs(v[i])));
            v = std::move(w);
            if (std::abs(new_lambda - lambda) < tol && diff < tol) { lambda = new_lambda; break; }
            lambda = new_lambda;
        }
        components[static_cast<std::size_t>(comp)] = v;
        eigenvalues[static_cast<std::size_t>(comp)] = lambda;
        // deflate
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j) cov[i * d + j] -= lambda * v[i] * v[j];
    }
}

// ---------------------------------------------------------------------------
// explainability exports
// ---------------------------------------------------------------------------

EmbeddingExport export_embeddings(const TtmModel& model, const TimeSeriesDataset& ds, Split split,
                                  int stride) {
    const auto& mc = model.model_config();
    auto offsets = make_windows(ds, split, mc.sl, mc.fl, stride);
    if (offsets.empty()) throw ContractError("export_embeddings: split holds no window");
    EmbeddingExport out;
    for (auto o : offsets) {
        auto batch = materialize({{&ds, o}}, mc.sl, mc.fl);
        FwdCtx ctx;
        const Tensor* exog = model.head_config().exog_enabled ? &batch.Y : nullptr;
        auto fwd = model.forward(batch.X, batch.resolution_ids, exog, ctx);
        out.rows.push_back(fwd.backbone_out.data());
    }
    std::vector<std::vector<double>> comps;
    std::vector<double> eig;
    pca_top_components(out.rows, 2, comps, eig);
    out.component_variance = {eig[0], eig[1]};
    // total variance = trace of the covariance
    {
        const std::size_t n = out.rows.size(), d = out.rows[0].size();
        std::vector<double> mean(d, 0.0);
        for (const auto& r : out.rows)
            for (std::size_t i = 0; i < d; ++i) mean[i] += static_cast<double>(r[i]);
        for (auto& m : mean) m /= static_cast<double>(n);
        double tr = 0.0;
        for (const auto& r : out.rows)
            for (std::size_t i = 0; i < d; ++i) {
                const double c = static_cast<double>(r[i]) - mean[i];
                tr += c * c;
            }
        out.total_variance = tr / static_cast<double>(n);
        for (const auto& r : out.rows) {
            std::array<double, 2> p{0.0, 0.0};
            for (int k = 0; k < 2; ++k)
                for (std::size_t i = 0; i < d; ++i)
                    p[static_cast<std::size_t>(k)] +=
                        (static_cast<double>(r[i]) - mean[i]) * comps[static_cast<std::size_t>(k)][i];
            out.projection.push_back(p);
        }
    }
    return out;
}

void write_embeddings_csv(const EmbeddingExport& e, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("embeddings: cannot write " + path);
    out.precision(17);
    out << "window";
    for (std::size_t i = 0; i < e.rows[0].size(); ++i) out << ",e" << i;
    out << ",pc1,pc2\n";
    for (std::size_t w = 0; w < e.rows.size(); ++w) {
        out << w;
        for (auto v : e.rows[w]) out << "," << v;
        out << "," << e.projection[w][0] << "," << e.projection[w][1] << "\n";
    }
}

std::vector<double> channel_attention_map(const TtmModel& model, const TimeSeriesDataset& ds,
                                          Split split, int stride) {
    const auto& hc = model.head_config();
    if (!hc.channel_mix_enabled)
        throw ContractError("channel_attention_map: decoder channel mixing must be enabled");
    const auto& mc = model.model_config();
    auto offsets = make_windows(ds, split, mc.sl, mc.fl, stride);
    if (offsets.empty()) throw ContractError("channel_attention_map: split holds no window");
    const std::size_t c = static_cast<std::size_t>(hc.num_channels);
    std::vector<double> acc(c, 0.0);
    double count = 0.0;
    for (auto o : offsets) {
        auto batch = materialize({{&ds, o}}, mc.sl, mc.fl);
        std::map<std::string, Tensor> capture;
        FwdCtx ctx;
        ctx.capture = &capture;
        const Tensor* exog = hc.exog_enabled ? &batch.Y : nullptr;
        (void)model.forward(batch.X, batch.resolution_ids, exog, ctx);
        for (int j = 1; j <= hc.decoder_layers; ++j) {
            auto it = capture.find("decoder.b" + std::to_string(j) + ".chan");
            if (it == capture.end()) continue;
            const auto& g = it->second; // [... x c], rows sum to 1
            const std::int64_t rows = g.size() / static_cast<std::int64_t>(c);
            for (std::int64_t r = 0; r < rows; ++r)
                for (std::size_t i = 0; i < c; ++i)
                    acc[i] += static_cast<double>(g.data()[static_cast<std::size_t>(r) * c + i]);
            count += static_cast<double>(rows);
        }
    }
    for (auto& v : acc) v /= count;
    return acc;
}

void write_attention_csv(const std::vector<double>& weights, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("attention: cannot write " + path);
    out.precision(17);
    out << "channel,mean_attention\n";
    for (std::size_t i = 0; i < weights.size(); ++i) out << i << "," << weights[i] << "\n";
}

} // namespace ttm

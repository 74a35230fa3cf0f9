#pragma once

#include <array>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "ttm/data.hpp"
#include "ttm/model.hpp"

namespace ttm {

enum class Protocol { sliding, last_window };

struct EvalReport {
    std::string dataset;
    int sl = 0;
    int fl = 0;
    std::string protocol;
    double mse = 0.0;
    std::vector<double> per_channel_mse;
    std::int64_t num_windows = 0;
    std::map<std::string, double> f_imp; // baseline name -> (baseline-ours)/baseline
    std::string to_json() const;
};

// Per-window forecast dump (original scale), for report recomputation.
struct WindowForecast {
    std::int64_t offset = 0;
    std::vector<real> prediction; // c' x fl
    std::vector<real> truth;
};

// Forecast-length adaptation. A forecaster wraps a trained model and maps a
// raw context [b x c x sl] to forecasts [b x c' x target_fl].
class Forecaster {
public:
    virtual ~Forecaster() = default;
    virtual int target_fl() const = 0;
    virtual Tensor forecast(const Tensor& X_raw, const std::vector<int>& resolution_ids,
                            const Tensor* exog_future_raw) const = 0;
};

// Uses the model's native forecast length.
std::unique_ptr<Forecaster> make_direct(const TtmModel& model);
// target < native: forecasts are the first `target` steps (head slice).
std::unique_ptr<Forecaster> make_pruned(const TtmModel& model, int target);
// target > native: recursive rollout, ceil(target/native) invocations.
// Not supported together with the exogenous mixer.
std::unique_ptr<Forecaster> make_recursive(const TtmModel& model, int target);

// Invocation count of the most recent forecast() on a recursive forecaster
// (test/debug hook).
std::int64_t recursive_invocations(const Forecaster& f);

// Sliding (stride-1) or last-window evaluation over the test split. MSE is
// computed on denormalized target channels. Window evaluation parallelizes
// across `workers` threads with deterministic assembly.
EvalReport evaluate(const Forecaster& fc, const TtmModel& model, const TimeSeriesDataset& ds,
                    Protocol protocol, int workers = 1,
                    std::vector<WindowForecast>* dump = nullptr,
                    const std::map<std::string, double>* baselines = nullptr);

// ---------------------------------------------------------------------------
// explainability exports
// ---------------------------------------------------------------------------

struct EmbeddingExport {
    std::vector<std::vector<real>> rows;        // [num_windows x (c*n*hf)]
    std::vector<std::array<double, 2>> projection; // top-2 PCA scores per row
    std::array<double, 2> component_variance{};    // eigenvalues
    double total_variance = 0.0;
};

EmbeddingExport export_embeddings(const TtmModel& model, const TimeSeriesDataset& ds, Split split,
                                  int stride = 1);
void write_embeddings_csv(const EmbeddingExport& e, const std::string& path);

// Mean decoder channel-attention weights: softmax gate outputs averaged over
// features, patches and samples, then over gates. Length c, sums to 1.
std::vector<double> channel_attention_map(const TtmModel& model, const TimeSeriesDataset& ds,
                                          Split split, int stride = 1);
void write_attention_csv(const std::vector<double>& weights, const std::string& path);

// Power-iteration PCA helper (top-k components of the covariance of rows),
// tolerance 1e-8. Exposed for oracle tests.
void pca_top_components(const std::vector<std::vector<real>>& rows, int k,
                        std::vector<std::vector<double>>& components,
                        std::vector<double>& eigenvalues, double tol = 1e-8);

} // namespace ttm

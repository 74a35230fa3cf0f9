#pragma once

#include <string>
#include <vector>

#include "ttm/checkpoint.hpp"
#include "ttm/config.hpp"
#include "ttm/data.hpp"
#include "ttm/model.hpp"

namespace ttm {

// Mean squared error over every element (batch, channels, horizon).
Tensor mse_loss(const Tensor& pred, const Tensor& target);

// One Adam update from the accumulated grads. Frozen tensors are skipped
// entirely (no moment buffers allocated). Grads are not cleared here.
void adam_step(ParameterStore& store, AdamState& state, const TrainConfig& tc);

struct EpochLog {
    int epoch = 0;
    std::string split; // "train" | "validation"
    double mse = 0.0;
    double wall_seconds = 0.0;
};

struct TrainResult {
    ParameterStore store;
    ModelConfig model_config;
    HeadConfig head_config;
    std::vector<EpochLog> log;
    std::vector<std::int64_t> train_offsets; // window-offset audit trail
    AdamState opt;
};

// Channel-independent pre-training over every dataset's univariate series.
// Decoder channel mixing and the exogenous mixer stay disabled. Best
// validation checkpoint is retained (last epoch when no validation windows).
TrainResult pretrain(const std::vector<TimeSeriesDataset>& datasets, const ModelConfig& mc,
                     const TrainConfig& tc);

// Head-only fine-tuning: backbone frozen, decoder/head/exog trainable.
// few_shot_fraction 0 is zero-shot (returns the store unchanged).
TrainResult finetune(const ParameterStore& pretrained, const TimeSeriesDataset& dataset,
                     const ModelConfig& mc, const HeadConfig& hc, const TrainConfig& tc);

// Head config used during pre-training (univariate, no mixing, no exog).
HeadConfig pretrain_head_config(const HeadConfig& base);

void write_train_log(const std::vector<EpochLog>& log, const std::string& path);

} // namespace ttm

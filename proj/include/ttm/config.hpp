#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ttm/errors.hpp"
#include "ttm/tensor.hpp"

namespace ttm {

// ---------------------------------------------------------------------------
// Architectural hyperparameters
// ---------------------------------------------------------------------------

struct ModelConfig {
    int sl = 64;              // context length
    int fl = 16;              // forecast length
    int pl = 8;               // patch length (stride == pl, non-overlapping)
    int levels = 3;           // L
    int blocks_per_level = 2; // M
    int hf = 16;              // patch hidden dimension, must be divisible by 2^(L-1)
    real dropout = real(0.2);
    bool prefix_enabled = true;   // resolution prefix tuning
    int num_resolutions = 16;     // embedding table rows, row 0 = unknown

    int num_patches() const { return sl / pl; }
    int partition_factor(int level /*1-based*/) const { return 1 << (levels - level); }
    void validate() const;
};

struct HeadConfig {
    int decoder_layers = 2;
    int hf_dec = 0; // 0 -> hf/2
    bool channel_mix_enabled = false;
    real head_dropout = real(0.2);
    bool exog_enabled = false;
    int exog_context = 1; // l; window half-width, delta = 2l+1
    int num_channels = 1;
    std::vector<int> target_channels{0};
    std::vector<int> exog_channels{};

    int delta() const { return 2 * exog_context + 1; }
    int resolved_hf_dec(const ModelConfig& mc) const;
    void validate(const ModelConfig& mc) const;
};

enum class TrainMode { pretrain, finetune };

struct TrainConfig {
    int epochs = 20;
    int batch_size = 64;
    real lr = real(1e-3);
    real beta1 = real(0.9);
    real beta2 = real(0.999);
    real adam_eps = real(1e-8);
    std::uint64_t seed = 0;
    TrainMode mode = TrainMode::pretrain;
    double few_shot_fraction = 1.0; // 0 => zero-shot (no training)
    int window_stride = 1;

    void validate() const;
};

// ---------------------------------------------------------------------------
// Resolution registry: id <-> (label, seconds-per-step). Row 0 is the
// reserved "unknown" resolution. Shipped as a versioned text file but a
// compiled-in copy keeps the library usable standalone.
// ---------------------------------------------------------------------------

struct ResolutionInfo {
    int id = 0;
    std::string label = "unknown";
    std::int64_t seconds = 0;
};

class ResolutionRegistry {
public:
    static const ResolutionRegistry& builtin();
    static ResolutionRegistry from_file(const std::string& path);
    void to_file(const std::string& path) const;

    int id_for_seconds(std::int64_t seconds) const;     // 0 when unregistered
    int id_for_label(const std::string& label) const;   // 0 when unregistered
    const ResolutionInfo& info(int id) const;           // throws on bad id
    std::string label_for_seconds(std::int64_t seconds) const; // "<N>s" fallback
    std::int64_t seconds_for_label(const std::string& label) const; // 0 if unknown
    int size() const { return static_cast<int>(entries_.size()); }
    const std::vector<ResolutionInfo>& entries() const { return entries_; }

private:
    std::vector<ResolutionInfo> entries_;
};

// ---------------------------------------------------------------------------
// ParameterStore: named parameter tensors with per-tensor trainable flags.
// ---------------------------------------------------------------------------

class ParameterStore {
public:
    void add(const std::string& name, Tensor t, bool trainable);
    bool has(const std::string& name) const { return params_.count(name) != 0; }
    Tensor& get(const std::string& name);
    const Tensor& get(const std::string& name) const;
    bool trainable(const std::string& name) const;
    void set_trainable(const std::string& name, bool v);

    std::map<std::string, Tensor>& params() { return params_; }
    const std::map<std::string, Tensor>& params() const { return params_; }

    ParameterStore clone() const; // deep copy of tensor data
    void zero_grads();
    std::int64_t total_elements(const std::string& prefix = "") const;

    std::string fingerprint; // SHA-256 of the canonical ModelConfig JSON

private:
    std::map<std::string, Tensor> params_;
    std::map<std::string, bool> trainable_;
};

// Canonical JSON forms (sorted keys, stable float formatting via nlohmann).
std::string model_config_to_json(const ModelConfig& mc);
std::string head_config_to_json(const HeadConfig& hc);
ModelConfig model_config_from_json(const std::string& js);
HeadConfig head_config_from_json(const std::string& js);

} // namespace ttm

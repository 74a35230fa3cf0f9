#include "ttm/config.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace ttm {

void ModelConfig::validate() const {
    if (sl < 2 || fl < 1 || pl < 1 || levels < 1 || blocks_per_level < 1 || hf < 1)
        throw ConfigError("model config: sl/fl/pl/levels/blocks/hf must be positive (sl >= 2)");
    if (sl % pl != 0)
        throw ConfigError("model config: sl=" + std::to_string(sl) + " not divisible by pl=" +
                          std::to_string(pl));
    const int k1 = 1 << (levels - 1);
    if (hf % k1 != 0)
        throw ConfigError("model config: hf=" + std::to_string(hf) +
                          " must be divisible by 2^(L-1)=" + std::to_string(k1));
    if (levels > 1 && (hf / k1) % 2 != 0)
        throw ConfigError("model config: hf=" + std::to_string(hf) +
                          " leaves an odd patch width at the finest level; hf must be divisible by "
                          "2^L=" + std::to_string(k1 * 2));
    if (dropout < real(0) || dropout >= real(1))
        throw ConfigError("model config: dropout must be in [0,1)");
    if (num_resolutions < 1) throw ConfigError("model config: num_resolutions must be >= 1");
}

int HeadConfig::resolved_hf_dec(const ModelConfig& mc) const {
    if (hf_dec > 0) return hf_dec;
    return std::max(2, mc.hf / 2);
}

void HeadConfig::validate(const ModelConfig& mc) const {
    if (decoder_layers < 1) throw ConfigError("head config: decoder_layers must be >= 1");
    if (exog_context < 0) throw ConfigError("head config: exog_context must be >= 0");
    if (num_channels < 1) throw ConfigError("head config: num_channels must be >= 1");
    if (target_channels.empty()) throw ConfigError("head config: at least one target channel");
    for (int t : target_channels)
        if (t < 0 || t >= num_channels) throw ConfigError("head config: target channel out of range");
    for (int e : exog_channels) {
        if (e < 0 || e >= num_channels) throw ConfigError("head config: exog channel out of range");
        for (int t : target_channels)
            if (t == e) throw ConfigError("head config: channel " + std::to_string(e) +
                                          " is both target and exogenous");
    }
    if (exog_enabled && exog_channels.empty())
        throw ConfigError("head config: exog enabled but no exogenous channels declared");
    (void)mc;
}

void TrainConfig::validate() const {
    if (epochs < 0 || batch_size < 1) throw ConfigError("train config: bad epochs/batch_size");
    if (few_shot_fraction < 0.0 || few_shot_fraction > 1.0)
        throw ConfigError("train config: few_shot_fraction must be in [0,1]");
    if (window_stride < 1) throw ConfigError("train config: window_stride must be >= 1");
}

// ---------------------------------------------------------------------------
// ResolutionRegistry
// ---------------------------------------------------------------------------

const ResolutionRegistry& ResolutionRegistry::builtin() {
    static const ResolutionRegistry reg = [] {
        ResolutionRegistry r;
        r.entries_ = {
            {0, "unknown", 0}, {1, "1s", 1},     {2, "4s", 4},     {3, "1min", 60},
            {4, "10min", 600}, {5, "15min", 900}, {6, "30min", 1800}, {7, "1h", 3600},
            {8, "2h", 7200},   {9, "6h", 21600},  {10, "12h", 43200}, {11, "1d", 86400},
            {12, "1w", 604800},
        };
        return r;
    }();
    return reg;
}

ResolutionRegistry ResolutionRegistry::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("resolution registry: cannot open " + path);
    ResolutionRegistry r;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream is(line);
        ResolutionInfo e;
        if (!(is >> e.id >> e.label >> e.seconds))
            throw DataError("resolution registry: malformed line: " + line);
        r.entries_.push_back(e);
    }
    if (r.entries_.empty() || r.entries_[0].id != 0)
        throw DataError("resolution registry: entry 0 must be the reserved unknown id");
    return r;
}

void ResolutionRegistry::to_file(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("resolution registry: cannot write " + path);
    out << "# id label seconds-per-step (v1)\n";
    for (const auto& e : entries_) out << e.id << " " << e.label << " " << e.seconds << "\n";
}

int ResolutionRegistry::id_for_seconds(std::int64_t seconds) const {
    for (const auto& e : entries_)
        if (e.id != 0 && e.seconds == seconds) return e.id;
    return 0;
}

int ResolutionRegistry::id_for_label(const std::string& label) const {
    for (const auto& e : entries_)
        if (e.label == label) return e.id;
    return 0;
}

const ResolutionInfo& ResolutionRegistry::info(int id) const {
    for (const auto& e : entries_)
        if (e.id == id) return e;
    throw ConfigError("resolution registry: unknown id " + std::to_string(id));
}

std::string ResolutionRegistry::label_for_seconds(std::int64_t seconds) const {
    int id = id_for_seconds(seconds);
    if (id != 0) return info(id).label;
    return std::to_string(seconds) + "s";
}

std::int64_t ResolutionRegistry::seconds_for_label(const std::string& label) const {
    for (const auto& e : entries_)
        if (e.label == label) return e.seconds;
    return 0;
}

// ---------------------------------------------------------------------------
// ParameterStore
// ---------------------------------------------------------------------------

void ParameterStore::add(const std::string& name, Tensor t, bool trainable) {
    if (params_.count(name)) throw ContractError("parameter already exists: " + name);
    t.set_requires_grad(trainable);
    params_.emplace(name, std::move(t));
    trainable_[name] = trainable;
}

Tensor& ParameterStore::get(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw ContractError("missing parameter: " + name);
    return it->second;
}

const Tensor& ParameterStore::get(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw ContractError("missing parameter: " + name);
    return it->second;
}

bool ParameterStore::trainable(const std::string& name) const {
    auto it = trainable_.find(name);
    if (it == trainable_.end()) throw ContractError("missing parameter: " + name);
    return it->second;
}

void ParameterStore::set_trainable(const std::string& name, bool v) {
    auto it = params_.find(name);
    if (it == params_.end()) throw ContractError("missing parameter: " + name);
    trainable_[name] = v;
    it->second.set_requires_grad(v);
}

ParameterStore ParameterStore::clone() const {
    ParameterStore out;
    out.fingerprint = fingerprint;
    for (const auto& [name, t] : params_) {
        Tensor copy(t.shape(), t.data());
        out.add(name, std::move(copy), trainable_.at(name));
    }
    return out;
}

void ParameterStore::zero_grads() {
    for (auto& [name, t] : params_) t.zero_grad();
}

std::int64_t ParameterStore::total_elements(const std::string& prefix) const {
    std::int64_t n = 0;
    for (const auto& [name, t] : params_)
        if (name.rfind(prefix, 0) == 0) n += t.size();
    return n;
}

// ---------------------------------------------------------------------------
// canonical JSON
// ---------------------------------------------------------------------------

std::string model_config_to_json(const ModelConfig& mc) {
    nlohmann::json j;
    j["sl"] = mc.sl;
    j["fl"] = mc.fl;
    j["pl"] = mc.pl;
    j["levels"] = mc.levels;
    j["blocks_per_level"] = mc.blocks_per_level;
    j["hf"] = mc.hf;
    j["dropout"] = static_cast<double>(mc.dropout);
    j["prefix_enabled"] = mc.prefix_enabled;
    j["num_resolutions"] = mc.num_resolutions;
    return j.dump();
}

ModelConfig model_config_from_json(const std::string& js) {
    auto j = nlohmann::json::parse(js);
    ModelConfig mc;
    mc.sl = j.at("sl");
    mc.fl = j.at("fl");
    mc.pl = j.at("pl");
    mc.levels = j.at("levels");
    mc.blocks_per_level = j.at("blocks_per_level");
    mc.hf = j.at("hf");
    mc.dropout = static_cast<real>(j.at("dropout").get<double>());
    mc.prefix_enabled = j.at("prefix_enabled");
    mc.num_resolutions = j.at("num_resolutions");
    return mc;
}

std::string head_config_to_json(const HeadConfig& hc) {
    nlohmann::json j;
    j["decoder_layers"] = hc.decoder_layers;
    j["hf_dec"] = hc.hf_dec;
    j["channel_mix_enabled"] = hc.channel_mix_enabled;
    j["head_dropout"] = static_cast<double>(hc.head_dropout);
    j["exog_enabled"] = hc.exog_enabled;
    j["exog_context"] = hc.exog_context;
    j["num_channels"] = hc.num_channels;
    j["target_channels"] = hc.target_channels;
    j["exog_channels"] = hc.exog_channels;
    return j.dump();
}

HeadConfig head_config_from_json(const std::string& js) {
    auto j = nlohmann::json::parse(js);
    HeadConfig hc;
    hc.decoder_layers = j.at("decoder_layers");
    hc.hf_dec = j.at("hf_dec");
    hc.channel_mix_enabled = j.at("channel_mix_enabled");
    hc.head_dropout = static_cast<real>(j.at("head_dropout").get<double>());
    hc.exog_enabled = j.at("exog_enabled");
    hc.exog_context = j.at("exog_context");
    hc.num_channels = j.at("num_channels");
    hc.target_channels = j.at("target_channels").get<std::vector<int>>();
    hc.exog_channels = j.at("exog_channels").get<std::vector<int>>();
    return hc;
}

} // namespace ttm

#include "ttm/ttm_c.h"

#include <chrono>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>

#include "json.hpp"
#include "ttm/checkpoint.hpp"
#include "ttm/data.hpp"
#include "ttm/eval.hpp"
#include "ttm/model.hpp"
#include "ttm/synth.hpp"
#include "ttm/training.hpp"

#ifndef TTM_GIT_DESCRIBE
#define TTM_GIT_DESCRIBE "0.1.0"
#endif

using nlohmann::json;

namespace {

thread_local std::string g_last_error;

ttm_status fail(ttm_status code, const std::string& msg) {
    g_last_error = msg;
    return code;
}

ttm_status code_of(const ttm::TtmError& e) {
    switch (e.code()) {
        case ttm::ErrorCode::ok: return TTM_OK;
        case ttm::ErrorCode::shape: return TTM_ERR_SHAPE;
        case ttm::ErrorCode::contract: return TTM_ERR_CONTRACT;
        case ttm::ErrorCode::config: return TTM_ERR_CONFIG;
        case ttm::ErrorCode::data: return TTM_ERR_DATA;
        case ttm::ErrorCode::io: return TTM_ERR_IO;
        case ttm::ErrorCode::crc: return TTM_ERR_CRC;
        case ttm::ErrorCode::version: return TTM_ERR_VERSION;
        case ttm::ErrorCode::fingerprint: return TTM_ERR_FINGERPRINT;
    }
    return TTM_ERR_INTERNAL;
}

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

// ---------------------------------------------------------------------------
// option helpers
// ---------------------------------------------------------------------------

std::string req_str(const json& j, const char* key) {
    if (!j.contains(key) || !j[key].is_string())
        throw ttm::ConfigError(std::string("options: missing string key '") + key + "'");
    return j[key].get<std::string>();
}

std::string opt_str(const json& j, const char* key, const std::string& def) {
    return j.contains(key) ? j[key].get<std::string>() : def;
}

double opt_num(const json& j, const char* key, double def) {
    return j.contains(key) ? j[key].get<double>() : def;
}

int opt_int(const json& j, const char* key, int def) {
    return j.contains(key) ? j[key].get<int>() : def;
}

bool opt_bool(const json& j, const char* key, bool def) {
    return j.contains(key) ? j[key].get<bool>() : def;
}

std::string sanitize_filename(const std::string& name) {
    std::string out;
    for (char c : name)
        out += (std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-' || c == '_')
                   ? c
                   : '_';
    return out.empty() ? std::string("dataset") : out;
}

std::string dirname_of(const std::string& path) {
    auto pos = path.find_last_of('/');
    return pos == std::string::npos ? std::string(".") : path.substr(0, pos);
}

// ---------------------------------------------------------------------------
// dataset assembly
// ---------------------------------------------------------------------------

ttm::Split split_from_string(const std::string& s) {
    if (s == "train") return ttm::Split::train;
    if (s == "validation") return ttm::Split::validation;
    if (s == "test") return ttm::Split::test;
    throw ttm::ConfigError("options: unknown split '" + s + "'");
}

ttm::TimeSeriesDataset load_single_csv(const json& opts) {
    ttm::CsvSchema schema;
    if (opts.contains("roles"))
        for (auto it = opts["roles"].begin(); it != opts["roles"].end(); ++it)
            schema.roles[it.key()] = it.value().get<std::string>();
    schema.default_role = opt_str(opts, "default_role", "target");
    schema.resolution_label = opt_str(opts, "resolution", "");
    auto ds = ttm::load_csv(req_str(opts, "csv"), schema);
    double ft = 0.7, fv = 0.1, fe = 0.2;
    if (opts.contains("split")) {
        const auto& s = opts["split"];
        if (!s.is_array() || s.size() != 3)
            throw ttm::ConfigError("options: 'split' must be [train,val,test] fractions");
        ft = s[0].get<double>();
        fv = s[1].get<double>();
        fe = s[2].get<double>();
    }
    ttm::split_temporal(ds, ft, fv, fe);
    return ds;
}

std::vector<ttm::TimeSeriesDataset> load_corpus(const std::string& corpus_path) {
    std::ifstream in(corpus_path);
    if (!in) throw ttm::IoError("corpus: cannot read " + corpus_path);
    json j = json::parse(in);
    const std::string dir = dirname_of(corpus_path);
    std::vector<ttm::TimeSeriesDataset> out;
    for (const auto& e : j.at("datasets")) {
        ttm::CsvSchema schema;
        auto ds = ttm::load_csv(dir + "/" + e.at("file").get<std::string>(), schema);
        ds.name = e.at("name").get<std::string>();
        ds.resolution_id = e.at("resolution_id").get<int>();
        ds.seconds_per_step = e.at("seconds_per_step").get<std::int64_t>();
        const auto& roles = e.at("roles");
        if (roles.size() != static_cast<std::size_t>(ds.channels()))
            throw ttm::DataError("corpus: role count mismatch for " + ds.name);
        for (std::size_t c = 0; c < roles.size(); ++c)
            ds.roles[c] = ttm::channel_role_from_string(roles[c].get<std::string>());
        const auto& s = e.at("split");
        ds.splits.train_begin = s[0].get<std::int64_t>();
        ds.splits.train_end = s[1].get<std::int64_t>();
        ds.splits.val_end = s[2].get<std::int64_t>();
        ds.splits.test_end = s[3].get<std::int64_t>();
        ds.splits.populated = true;
        ds.validate();
        out.push_back(std::move(ds));
    }
    return out;
}

// Commands taking one dataset accept either {"csv": ...} or
// {"corpus": ..., "name": ...} (name defaults to the first entry).
ttm::TimeSeriesDataset load_dataset(const json& opts) {
    if (opts.contains("csv")) return load_single_csv(opts);
    if (!opts.contains("corpus"))
        throw ttm::ConfigError("options: need either 'csv' or 'corpus'");
    auto all = load_corpus(req_str(opts, "corpus"));
    if (all.empty()) throw ttm::DataError("corpus: empty");
    if (!opts.contains("name")) return std::move(all.front());
    const std::string name = opts["name"].get<std::string>();
    for (auto& ds : all)
        if (ds.name == name) return std::move(ds);
    throw ttm::DataError("corpus: no dataset named '" + name + "'");
}

// ---------------------------------------------------------------------------
// configs from options
// ---------------------------------------------------------------------------

ttm::ModelConfig model_config_from_opts(const json& opts) {
    ttm::ModelConfig mc;
    mc.sl = opt_int(opts, "sl", mc.sl);
    mc.fl = opt_int(opts, "fl", mc.fl);
    mc.pl = opt_int(opts, "pl", mc.pl);
    mc.levels = opt_int(opts, "levels", mc.levels);
    mc.blocks_per_level = opt_int(opts, "blocks", mc.blocks_per_level);
    mc.hf = opt_int(opts, "hf", mc.hf);
    mc.dropout = static_cast<ttm::real>(opt_num(opts, "dropout", static_cast<double>(mc.dropout)));
    mc.prefix_enabled = opt_bool(opts, "prefix", mc.prefix_enabled);
    mc.num_resolutions = opt_int(opts, "num_resolutions", mc.num_resolutions);
    mc.validate();
    return mc;
}

ttm::TrainConfig train_config_from_opts(const json& opts, ttm::TrainMode mode) {
    ttm::TrainConfig tc;
    tc.mode = mode;
    tc.epochs = opt_int(opts, "epochs", tc.epochs);
    tc.batch_size = opt_int(opts, "batch_size", tc.batch_size);
    tc.lr = static_cast<ttm::real>(opt_num(opts, "lr", static_cast<double>(tc.lr)));
    tc.seed = static_cast<std::uint64_t>(opt_num(opts, "seed", 0));
    tc.window_stride = opt_int(opts, "stride", tc.window_stride);
    tc.few_shot_fraction = opt_num(opts, "few_shot", 1.0);
    tc.validate();
    return tc;
}

// ---------------------------------------------------------------------------
// run manifests
// ---------------------------------------------------------------------------

struct RunScope {
    std::string command;
    json options;
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;

    void write_manifest(const std::string& path, std::uint64_t seed) const {
        json m;
        m["command"] = command;
        m["options"] = options;
        m["seed"] = seed;
        json hashes = json::object();
        for (const auto& p : inputs) hashes[p] = ttm::sha256_file_hex(p);
        m["input_hashes"] = hashes;
        m["outputs"] = outputs;
        m["wall_seconds"] =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        m["version"] = TTM_GIT_DESCRIBE;
        std::ofstream out(path);
        if (!out) throw ttm::IoError("manifest: cannot write " + path);
        out << m.dump(2) << "\n";
    }
};

// ---------------------------------------------------------------------------
// commands
// ---------------------------------------------------------------------------

json cmd_synth(const json& opts, RunScope& run) {
    const std::string out_path = req_str(opts, "out");
    const std::string fixture = opt_str(opts, "fixture", "sine");
    const auto seed = static_cast<std::uint64_t>(opt_num(opts, "seed", 0));
    const auto length = static_cast<std::int64_t>(opt_num(opts, "length", 2048));
    ttm::TimeSeriesDataset ds;
    if (fixture == "sine") {
        ds = ttm::synth::sine_fixture(seed, length, opt_num(opts, "period", 32.0),
                                      opt_num(opts, "phase", 0.0), opt_num(opts, "noise", 0.0));
    } else if (fixture == "lag_coupled") {
        ds = ttm::synth::lag_coupled_fixture(seed, length, opt_int(opts, "lag", 16));
    } else if (fixture == "spec") {
        ttm::synth::SynthSpec spec;
        const auto& sj = opts.at("spec");
        spec.name = opt_str(sj, "name", spec.name);
        spec.length = static_cast<std::int64_t>(opt_num(sj, "length", static_cast<double>(length)));
        spec.seconds_per_step =
            static_cast<std::int64_t>(opt_num(sj, "seconds_per_step", 3600.0));
        spec.seed = seed;
        for (const auto& cj : sj.at("channels")) {
            ttm::synth::ChannelSpec ch;
            if (cj.contains("components"))
                for (const auto& comp : cj["components"])
                    ch.components.push_back({opt_num(comp, "amplitude", 1.0),
                                             opt_num(comp, "period", 32.0),
                                             opt_num(comp, "phase", 0.0)});
            ch.trend_per_step = opt_num(cj, "trend", 0.0);
            ch.noise_std = opt_num(cj, "noise", 0.0);
            ch.offset = opt_num(cj, "offset", 0.0);
            ch.lag_of_channel = opt_int(cj, "lag_of_channel", -1);
            ch.lag_steps = opt_int(cj, "lag_steps", 0);
            ch.role = opt_str(cj, "role", "target");
            spec.channels.push_back(std::move(ch));
        }
        ds = ttm::synth::generate(spec);
    } else {
        throw ttm::ConfigError("synth: unknown fixture '" + fixture + "'");
    }
    ttm::write_csv(ds, out_path);
    run.outputs.push_back(out_path);
    json res;
    res["out"] = out_path;
    res["channels"] = ds.channels();
    res["length"] = ds.length();
    run.write_manifest(out_path + ".manifest.json", seed);
    return res;
}

json cmd_prepare(const json& opts, RunScope& run) {
    const std::string manifest = req_str(opts, "manifest");
    const std::string out_dir = req_str(opts, "out_dir");
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw ttm::IoError("prepare: cannot create " + out_dir + ": " + ec.message());
    run.inputs.push_back(manifest);
    auto datasets = ttm::load_datasets(manifest);
    json corpus;
    corpus["datasets"] = json::array();
    for (const auto& ds : datasets) {
        const std::string file = sanitize_filename(ds.name) + ".csv";
        ttm::write_csv(ds, out_dir + "/" + file);
        run.outputs.push_back(out_dir + "/" + file);
        json e;
        e["file"] = file;
        e["name"] = ds.name;
        e["resolution_id"] = ds.resolution_id;
        e["seconds_per_step"] = ds.seconds_per_step;
        json roles = json::array();
        for (auto r : ds.roles) roles.push_back(ttm::channel_role_to_string(r));
        e["roles"] = roles;
        e["split"] = {ds.splits.train_begin, ds.splits.train_end, ds.splits.val_end,
                      ds.splits.test_end};
        corpus["datasets"].push_back(e);
    }
    const std::string corpus_path = out_dir + "/corpus.json";
    {
        std::ofstream out(corpus_path);
        if (!out) throw ttm::IoError("prepare: cannot write " + corpus_path);
        out << corpus.dump(2) << "\n";
    }
    run.outputs.push_back(corpus_path);
    run.write_manifest(out_dir + "/run_manifest.json", 0);
    json res;
    res["corpus"] = corpus_path;
    res["num_datasets"] = datasets.size();
    return res;
}

json cmd_pretrain(const json& opts, RunScope& run) {
    const std::string out_path = req_str(opts, "out");
    std::vector<ttm::TimeSeriesDataset> datasets;
    if (opts.contains("corpus")) {
        run.inputs.push_back(req_str(opts, "corpus"));
        datasets = load_corpus(req_str(opts, "corpus"));
    } else {
        run.inputs.push_back(req_str(opts, "csv"));
        datasets.push_back(load_single_csv(opts));
    }
    auto mc = model_config_from_opts(opts);
    auto tc = train_config_from_opts(opts, ttm::TrainMode::pretrain);
    auto res = ttm::pretrain(datasets, mc, tc);
    ttm::save_checkpoint(res.store, res.model_config, res.head_config, out_path, &res.opt);
    run.outputs.push_back(out_path);
    if (opts.contains("log")) {
        ttm::write_train_log(res.log, opts["log"].get<std::string>());
        run.outputs.push_back(opts["log"].get<std::string>());
    }
    json out;
    out["checkpoint"] = out_path;
    if (!res.log.empty()) {
        for (auto it = res.log.rbegin(); it != res.log.rend(); ++it)
            if (it->split == "train") {
                out["final_train_mse"] = it->mse;
                break;
            }
    }
    run.write_manifest(out_path + ".manifest.json", tc.seed);
    return out;
}

json cmd_finetune(const json& opts, RunScope& run) {
    const std::string ckpt_path = req_str(opts, "checkpoint");
    const std::string out_path = req_str(opts, "out");
    run.inputs.push_back(ckpt_path);
    auto loaded = ttm::load_checkpoint(ckpt_path);
    auto ds = load_dataset(opts);
    if (opts.contains("csv")) run.inputs.push_back(req_str(opts, "csv"));

    ttm::HeadConfig hc = loaded.head_config;
    hc.num_channels = static_cast<int>(ds.channels());
    hc.target_channels = ds.channels_with_role(ttm::ChannelRole::target);
    hc.exog_channels = ds.channels_with_role(ttm::ChannelRole::exogenous);
    hc.channel_mix_enabled = opt_bool(opts, "channel_mix", false);
    hc.exog_enabled = opt_bool(opts, "exog", false);
    hc.exog_context = opt_int(opts, "exog_context", hc.exog_context);
    hc.head_dropout =
        static_cast<ttm::real>(opt_num(opts, "head_dropout", static_cast<double>(hc.head_dropout)));
    hc.validate(loaded.model_config);

    auto tc = train_config_from_opts(opts, ttm::TrainMode::finetune);
    auto res = ttm::finetune(loaded.store, ds, loaded.model_config, hc, tc);
    ttm::save_checkpoint(res.store, loaded.model_config, hc, out_path,
                         res.opt.t > 0 ? &res.opt : nullptr);
    run.outputs.push_back(out_path);
    if (opts.contains("log")) {
        ttm::write_train_log(res.log, opts["log"].get<std::string>());
        run.outputs.push_back(opts["log"].get<std::string>());
    }
    json out;
    out["checkpoint"] = out_path;
    out["zero_shot"] = (tc.few_shot_fraction == 0.0);
    run.write_manifest(out_path + ".manifest.json", tc.seed);
    return out;
}

std::unique_ptr<ttm::Forecaster> forecaster_from_opts(const json& opts, const ttm::TtmModel& model) {
    const std::string fla = opt_str(opts, "fla", "direct");
    const int native = model.model_config().fl;
    const int fl = opt_int(opts, "fl", native);
    if (fla == "direct") {
        if (fl != native)
            throw ttm::ConfigError("fla direct: requested fl differs from the model's");
        return ttm::make_direct(model);
    }
    if (fla == "prune") return ttm::make_pruned(model, fl);
    if (fla == "recursive") return ttm::make_recursive(model, fl);
    throw ttm::ConfigError("unknown fla mode '" + fla + "'");
}

json cmd_forecast(const json& opts, RunScope& run) {
    const std::string ckpt_path = req_str(opts, "checkpoint");
    const std::string out_path = req_str(opts, "out");
    run.inputs.push_back(ckpt_path);
    auto loaded = ttm::load_checkpoint(ckpt_path);
    auto ds = load_dataset(opts);
    if (opts.contains("csv")) run.inputs.push_back(req_str(opts, "csv"));

    const auto& mc = loaded.model_config;
    const auto& hc = loaded.head_config;
    if (ds.channels() != hc.num_channels)
        throw ttm::ContractError("forecast: dataset has " + std::to_string(ds.channels()) +
                                 " channels, checkpoint expects " +
                                 std::to_string(hc.num_channels));
    if (ds.length() < mc.sl) throw ttm::ContractError("forecast: series shorter than the context");
    if (hc.exog_enabled)
        throw ttm::ContractError("forecast: checkpoints with the exogenous mixer need true "
                                 "futures; use eval instead");

    ttm::TtmModel model(mc, hc, &loaded.store);
    auto fc = forecaster_from_opts(opts, model);

    const std::int64_t T = ds.length();
    std::vector<ttm::real> flat;
    for (std::int64_t c = 0; c < ds.channels(); ++c)
        flat.insert(flat.end(), ds.values[static_cast<std::size_t>(c)].end() - mc.sl,
                    ds.values[static_cast<std::size_t>(c)].end());
    ttm::Tensor X({1, ds.channels(), mc.sl}, std::move(flat));
    auto y = fc->forecast(X, {ds.resolution_id}, nullptr);

    const int tfl = fc->target_fl();
    const auto& targets = hc.target_channels;
    std::ofstream out(out_path);
    if (!out) throw ttm::IoError("forecast: cannot write " + out_path);
    out.precision(17);
    out << "timestamp,channel,step,value\n";
    for (std::size_t j = 0; j < targets.size(); ++j)
        for (int s = 0; s < tfl; ++s) {
            const std::int64_t ts = ds.start_epoch + (T + s) * ds.seconds_per_step;
            out << ts << "," << targets[j] << "," << (s + 1) << ","
                << y.data()[j * static_cast<std::size_t>(tfl) + static_cast<std::size_t>(s)]
                << "\n";
        }
    out.close();
    run.outputs.push_back(out_path);
    run.write_manifest(out_path + ".manifest.json", 0);
    json res;
    res["out"] = out_path;
    res["fl"] = tfl;
    return res;
}

json cmd_eval(const json& opts, RunScope& run) {
    const std::string ckpt_path = req_str(opts, "checkpoint");
    const std::string out_path = req_str(opts, "out");
    run.inputs.push_back(ckpt_path);
    auto loaded = ttm::load_checkpoint(ckpt_path);
    auto ds = load_dataset(opts);
    if (opts.contains("csv")) run.inputs.push_back(req_str(opts, "csv"));
    ttm::TtmModel model(loaded.model_config, loaded.head_config, &loaded.store);
    auto fc = forecaster_from_opts(opts, model);
    const std::string proto_s = opt_str(opts, "protocol", "sliding");
    const auto proto = proto_s == "last_window" || proto_s == "last"
                           ? ttm::Protocol::last_window
                           : ttm::Protocol::sliding;
    const int workers = opt_int(opts, "workers", 1);

    std::map<std::string, double> baselines;
    if (opts.contains("baselines")) {
        const std::string bp = opts["baselines"].get<std::string>();
        run.inputs.push_back(bp);
        std::ifstream in(bp);
        if (!in) throw ttm::IoError("eval: cannot read baselines " + bp);
        json bj = json::parse(in);
        for (auto it = bj.begin(); it != bj.end(); ++it) baselines[it.key()] = it.value().get<double>();
    }

    std::vector<ttm::WindowForecast> dump;
    auto rep = ttm::evaluate(*fc, model, ds, proto, workers, &dump,
                             baselines.empty() ? nullptr : &baselines);
    {
        std::ofstream out(out_path);
        if (!out) throw ttm::IoError("eval: cannot write " + out_path);
        out << rep.to_json() << "\n";
    }
    run.outputs.push_back(out_path);
    if (opts.contains("dump")) {
        const std::string dp = opts["dump"].get<std::string>();
        std::ofstream out(dp);
        if (!out) throw ttm::IoError("eval: cannot write " + dp);
        out.precision(17);
        out << "offset,channel,step,prediction,truth\n";
        const auto& targets = model.head_config().target_channels;
        for (const auto& wf : dump)
            for (std::size_t j = 0; j < targets.size(); ++j)
                for (int s = 0; s < rep.fl; ++s) {
                    const std::size_t i = j * static_cast<std::size_t>(rep.fl) +
                                          static_cast<std::size_t>(s);
                    out << wf.offset << "," << targets[j] << "," << (s + 1) << ","
                        << wf.prediction[i] << "," << wf.truth[i] << "\n";
                }
        run.outputs.push_back(dp);
    }
    run.write_manifest(out_path + ".manifest.json", 0);
    return json::parse(rep.to_json());
}

json cmd_inspect(const json& opts, RunScope& run) {
    const std::string ckpt_path = req_str(opts, "checkpoint");
    const std::string out_path = req_str(opts, "out");
    run.inputs.push_back(ckpt_path);
    auto loaded = ttm::load_checkpoint(ckpt_path);
    auto ds = load_dataset(opts);
    if (opts.contains("csv")) run.inputs.push_back(req_str(opts, "csv"));
    ttm::TtmModel model(loaded.model_config, loaded.head_config, &loaded.store);
    const auto split = split_from_string(opt_str(opts, "split", "test"));
    const int stride = opt_int(opts, "stride", 1);
    const std::string mode = opt_str(opts, "mode", "embeddings");
    json res;
    if (mode == "embeddings") {
        auto e = ttm::export_embeddings(model, ds, split, stride);
        ttm::write_embeddings_csv(e, out_path);
        res["rows"] = e.rows.size();
        res["component_variance"] = {e.component_variance[0], e.component_variance[1]};
        res["total_variance"] = e.total_variance;
    } else if (mode == "attention") {
        auto w = ttm::channel_attention_map(model, ds, split, stride);
        ttm::write_attention_csv(w, out_path);
        res["weights"] = w;
    } else {
        throw ttm::ConfigError("inspect: unknown mode '" + mode + "'");
    }
    run.outputs.push_back(out_path);
    run.write_manifest(out_path + ".manifest.json", 0);
    res["out"] = out_path;
    return res;
}

} // namespace

// ---------------------------------------------------------------------------
// C surface
// ---------------------------------------------------------------------------

extern "C" {

const char* ttm_version(void) { return TTM_GIT_DESCRIBE; }

const char* ttm_last_error(void) { return g_last_error.c_str(); }

void ttm_string_free(char* s) { std::free(s); }

ttm_status ttm_run(const char* command, const char* options_json, char** result_json) {
    if (!command) return fail(TTM_ERR_CONFIG, "ttm_run: command is NULL");
    try {
        json opts = options_json && *options_json ? json::parse(options_json) : json::object();
        RunScope run;
        run.command = command;
        run.options = opts;
        const std::string cmd = command;
        json res;
        if (cmd == "synth") res = cmd_synth(opts, run);
        else if (cmd == "prepare") res = cmd_prepare(opts, run);
        else if (cmd == "pretrain") res = cmd_pretrain(opts, run);
        else if (cmd == "finetune") res = cmd_finetune(opts, run);
        else if (cmd == "forecast") res = cmd_forecast(opts, run);
        else if (cmd == "eval") res = cmd_eval(opts, run);
        else if (cmd == "inspect") res = cmd_inspect(opts, run);
        else return fail(TTM_ERR_CONFIG, "ttm_run: unknown command '" + cmd + "'");
        if (result_json) *result_json = dup_string(res.dump(2));
        return TTM_OK;
    } catch (const ttm::TtmError& e) {
        return fail(static_cast<ttm_status>(code_of(e)), e.what());
    } catch (const std::exception& e) {
        return fail(TTM_ERR_INTERNAL, e.what());
    }
}

ttm_status ttm_hash_file(const char* path, char* out_hex) {
    if (!path || !out_hex) return fail(TTM_ERR_CONFIG, "ttm_hash_file: NULL argument");
    try {
        auto h = ttm::sha256_file_hex(path);
        std::memcpy(out_hex, h.c_str(), h.size() + 1);
        return TTM_OK;
    } catch (const ttm::TtmError& e) {
        return fail(static_cast<ttm_status>(code_of(e)), e.what());
    } catch (const std::exception& e) {
        return fail(TTM_ERR_INTERNAL, e.what());
    }
}

struct ttm_model {
    ttm::LoadResult loaded;
    std::unique_ptr<ttm::TtmModel> model;
};

ttm_status ttm_model_open(const char* checkpoint_path, ttm_model** out) {
    if (!checkpoint_path || !out) return fail(TTM_ERR_CONFIG, "ttm_model_open: NULL argument");
    try {
        auto m = std::make_unique<ttm_model>();
        m->loaded = ttm::load_checkpoint(checkpoint_path);
        m->model = std::make_unique<ttm::TtmModel>(m->loaded.model_config, m->loaded.head_config,
                                                   &m->loaded.store);
        *out = m.release();
        return TTM_OK;
    } catch (const ttm::TtmError& e) {
        return fail(static_cast<ttm_status>(code_of(e)), e.what());
    } catch (const std::exception& e) {
        return fail(TTM_ERR_INTERNAL, e.what());
    }
}

void ttm_model_close(ttm_model* m) { delete m; }

ttm_status ttm_model_info(const ttm_model* m, char** out) {
    if (!m || !out) return fail(TTM_ERR_CONFIG, "ttm_model_info: NULL argument");
    try {
        json j;
        j["model_config"] = json::parse(ttm::model_config_to_json(m->loaded.model_config));
        j["head_config"] = json::parse(ttm::head_config_to_json(m->loaded.head_config));
        j["fingerprint"] = m->loaded.store.fingerprint;
        j["warnings"] = m->loaded.warnings;
        j["num_parameters"] = m->loaded.store.total_elements();
        *out = dup_string(j.dump(2));
        return TTM_OK;
    } catch (const std::exception& e) {
        return fail(TTM_ERR_INTERNAL, e.what());
    }
}

ttm_status ttm_model_forecast(const ttm_model* m, const double* X, int32_t channels, int32_t sl,
                              int32_t resolution_id, double* out, int64_t out_capacity) {
    if (!m || !X || !out) return fail(TTM_ERR_CONFIG, "ttm_model_forecast: NULL argument");
    try {
        const auto& mc = m->loaded.model_config;
        const auto& hc = m->loaded.head_config;
        if (channels != hc.num_channels || sl != mc.sl)
            throw ttm::ShapeError("ttm_model_forecast: expected [" +
                                  std::to_string(hc.num_channels) + " x " + std::to_string(mc.sl) +
                                  "], got [" + std::to_string(channels) + " x " +
                                  std::to_string(sl) + "]");
        if (hc.exog_enabled)
            throw ttm::ContractError("ttm_model_forecast: exogenous checkpoints unsupported here");
        const std::int64_t need =
            static_cast<std::int64_t>(hc.target_channels.size()) * mc.fl;
        if (out_capacity < need)
            throw ttm::ContractError("ttm_model_forecast: out buffer too small");
        std::vector<ttm::real> flat(static_cast<std::size_t>(channels) *
                                    static_cast<std::size_t>(sl));
        for (std::size_t i = 0; i < flat.size(); ++i) flat[i] = static_cast<ttm::real>(X[i]);
        ttm::Tensor Xt({1, channels, sl}, std::move(flat));
        ttm::FwdCtx ctx;
        auto y = m->model->forward(Xt, {resolution_id}, nullptr, ctx).y;
        for (std::int64_t i = 0; i < need; ++i)
            out[i] = static_cast<double>(y.data()[static_cast<std::size_t>(i)]);
        return TTM_OK;
    } catch (const ttm::TtmError& e) {
        return fail(static_cast<ttm_status>(code_of(e)), e.what());
    } catch (const std::exception& e) {
        return fail(TTM_ERR_INTERNAL, e.what());
    }
}

} // extern "C"

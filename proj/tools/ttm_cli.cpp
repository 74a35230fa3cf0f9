// ttm command line: thin flag layer over the ttm_core C API.
//
//   ttm <command> [--config file.toml] [--set key=value ...] [flags]
//
// Precedence: TOML config < --set overrides < dedicated flags < TTM_SEED env.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "ttm/ttm_c.h"

using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// flat TOML subset: comments, [section] headers (flattened to dotted key
// prefixes), key = string | bool | number | [array]
// ---------------------------------------------------------------------------

std::string strip(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

json parse_toml_scalar(const std::string& raw) {
    std::string v = strip(raw);
    if (v.empty()) throw std::runtime_error("empty value");
    if (v.front() == '"') {
        if (v.size() < 2 || v.back() != '"') throw std::runtime_error("unterminated string");
        return v.substr(1, v.size() - 2);
    }
    if (v == "true") return true;
    if (v == "false") return false;
    if (v.front() == '[') {
        if (v.back() != ']') throw std::runtime_error("unterminated array");
        json arr = json::array();
        std::string inner = v.substr(1, v.size() - 2);
        std::string item;
        int depth = 0;
        bool in_str = false;
        for (char c : inner) {
            if (c == '"') in_str = !in_str;
            if (!in_str && c == '[') depth++;
            if (!in_str && c == ']') depth--;
            if (!in_str && depth == 0 && c == ',') {
                if (!strip(item).empty()) arr.push_back(parse_toml_scalar(item));
                item.clear();
            } else {
                item += c;
            }
        }
        if (!strip(item).empty()) arr.push_back(parse_toml_scalar(item));
        return arr;
    }
    try {
        std::size_t used = 0;
        if (v.find_first_of(".eE") == std::string::npos) {
            long long n = std::stoll(v, &used);
            if (used == v.size()) return n;
        }
        double d = std::stod(v, &used);
        if (used == v.size()) return d;
    } catch (...) {
    }
    throw std::runtime_error("cannot parse value '" + v + "'");
}

void set_dotted(json& obj, const std::string& key, json value) {
    json* cur = &obj;
    std::string rest = key;
    for (auto pos = rest.find('.'); pos != std::string::npos; pos = rest.find('.')) {
        cur = &(*cur)[rest.substr(0, pos)];
        rest = rest.substr(pos + 1);
    }
    (*cur)[rest] = std::move(value);
}

std::string strip_comment(const std::string& line) {
    bool in_str = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') in_str = !in_str;
        if (line[i] == '#' && !in_str) return line.substr(0, i);
    }
    return line;
}

json load_flat_toml(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read config " + path);
    json out = json::object();
    std::string line, prefix;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string s = strip(strip_comment(line));
        if (s.empty()) continue;
        if (s.front() == '[') {
            if (s.back() != ']') throw std::runtime_error("config line " + std::to_string(lineno) +
                                                          ": bad section header");
            prefix = strip(s.substr(1, s.size() - 2));
            if (!prefix.empty()) prefix += ".";
            continue;
        }
        auto eq = s.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config line " + std::to_string(lineno) + ": expected key = value");
        std::string key = strip(s.substr(0, eq));
        if (key.empty()) throw std::runtime_error("config line " + std::to_string(lineno) + ": empty key");
        try {
            set_dotted(out, prefix + key, parse_toml_scalar(s.substr(eq + 1)));
        } catch (const std::exception& e) {
            throw std::runtime_error("config line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// per-command option assembly
// ---------------------------------------------------------------------------

struct CmdState {
    std::string config_path;
    std::vector<std::string> sets;
    json flags = json::object(); // dedicated flags, filled by callbacks
};

void add_common(CLI::App* app, CmdState& st) {
    app->add_option("--config", st.config_path, "Flat TOML config file");
    app->add_option("--set", st.sets, "Override config keys (key=value, TOML scalar syntax)")
        ->take_all();
}

json resolve_options(const CmdState& st) {
    json opts = json::object();
    if (!st.config_path.empty()) opts = load_flat_toml(st.config_path);
    for (const auto& kv : st.sets) {
        auto eq = kv.find('=');
        if (eq == std::string::npos) throw std::runtime_error("--set expects key=value, got '" + kv + "'");
        set_dotted(opts, strip(kv.substr(0, eq)), parse_toml_scalar(kv.substr(eq + 1)));
    }
    for (auto it = st.flags.begin(); it != st.flags.end(); ++it) opts[it.key()] = it.value();
    if (const char* env = std::getenv("TTM_SEED")) opts["seed"] = std::stoull(env);
    return opts;
}

int run_command(const std::string& cmd, const CmdState& st) {
    json opts;
    try {
        opts = resolve_options(st);
    } catch (const std::exception& e) {
        std::cerr << "error code=" << TTM_ERR_CONFIG << " command=" << cmd << " msg=\"" << e.what()
                  << "\"\n";
        return TTM_ERR_CONFIG;
    }
    char* result = nullptr;
    ttm_status rc = ttm_run(cmd.c_str(), opts.dump().c_str(), &result);
    if (rc != TTM_OK) {
        std::string msg = ttm_last_error();
        for (auto& c : msg)
            if (c == '\n' || c == '"') c = ' ';
        std::cerr << "error code=" << rc << " command=" << cmd << " msg=\"" << msg << "\"\n";
        return rc;
    }
    if (result) {
        std::cout << result << "\n";
        ttm_string_free(result);
    }
    return 0;
}

// helpers wiring CLI11 flags into the json bag
void opt_str(CLI::App* app, CmdState& st, const std::string& flag, const char* key,
             const std::string& help) {
    app->add_option_function<std::string>(
        flag, [&st, key](const std::string& v) { st.flags[key] = v; }, help);
}

void opt_int(CLI::App* app, CmdState& st, const std::string& flag, const char* key,
             const std::string& help) {
    app->add_option_function<long long>(
        flag, [&st, key](long long v) { st.flags[key] = v; }, help);
}

void opt_dbl(CLI::App* app, CmdState& st, const std::string& flag, const char* key,
             const std::string& help) {
    app->add_option_function<double>(
        flag, [&st, key](double v) { st.flags[key] = v; }, help);
}

void opt_flag(CLI::App* app, CmdState& st, const std::string& flag, const char* key,
              const std::string& help) {
    app->add_flag_function(
        flag, [&st, key](std::int64_t n) { st.flags[key] = n > 0; }, help);
}

void add_dataset_opts(CLI::App* app, CmdState& st) {
    opt_str(app, st, "--csv", "csv", "Input series CSV");
    opt_str(app, st, "--corpus", "corpus", "Prepared corpus JSON (from `ttm prepare`)");
    opt_str(app, st, "--name", "name", "Dataset name inside the corpus");
    opt_str(app, st, "--default-role", "default_role", "Role for unlisted channels");
    opt_str(app, st, "--resolution", "resolution", "Resolution label override");
    app->add_option_function<std::vector<double>>(
        "--split",
        [&st](const std::vector<double>& v) { st.flags["split"] = v; },
        "Train/val/test fractions (3 values)")
        ->expected(3);
    app->add_option_function<std::vector<std::string>>(
        "--role",
        [&st](const std::vector<std::string>& v) {
            json roles = st.flags.value("roles", json::object());
            for (const auto& kv : v) {
                auto eq = kv.find('=');
                if (eq == std::string::npos)
                    throw CLI::ValidationError("--role expects column=role");
                roles[kv.substr(0, eq)] = kv.substr(eq + 1);
            }
            st.flags["roles"] = roles;
        },
        "Channel role override (column=target|exogenous|conditional), repeatable")
        ->take_all();
}

void add_train_opts(CLI::App* app, CmdState& st) {
    opt_int(app, st, "--epochs", "epochs", "Training epochs");
    opt_int(app, st, "--batch-size", "batch_size", "Batch size");
    opt_dbl(app, st, "--lr", "lr", "Adam learning rate");
    opt_int(app, st, "--seed", "seed", "RNG seed");
    opt_int(app, st, "--stride", "stride", "Training window stride");
    opt_str(app, st, "--log", "log", "Training log path (JSONL)");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"ttm: patched mixer models for time-series forecasting"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(ttm_version()));

    CmdState synth_st, prep_st, pre_st, ft_st, fc_st, ev_st, insp_st;

    auto* synth = app.add_subcommand("synth", "Generate a synthetic fixture CSV");
    add_common(synth, synth_st);
    opt_str(synth, synth_st, "--out", "out", "Output CSV path");
    opt_str(synth, synth_st, "--fixture", "fixture", "sine | lag_coupled | spec");
    opt_int(synth, synth_st, "--seed", "seed", "Generator seed");
    opt_int(synth, synth_st, "--length", "length", "Series length");
    opt_dbl(synth, synth_st, "--period", "period", "Sine period (samples)");
    opt_dbl(synth, synth_st, "--phase", "phase", "Sine phase (radians)");
    opt_dbl(synth, synth_st, "--noise", "noise", "Gaussian noise std");
    opt_int(synth, synth_st, "--lag", "lag", "Lag steps (lag_coupled)");

    auto* prep = app.add_subcommand("prepare", "Apply DRS and splits, write a corpus");
    add_common(prep, prep_st);
    opt_str(prep, prep_st, "--manifest", "manifest", "Dataset manifest JSON");
    opt_str(prep, prep_st, "--out-dir", "out_dir", "Output directory");

    auto* pre = app.add_subcommand("pretrain", "Channel-independent pre-training");
    add_common(pre, pre_st);
    add_dataset_opts(pre, pre_st);
    add_train_opts(pre, pre_st);
    opt_str(pre, pre_st, "--out", "out", "Output checkpoint path");
    opt_int(pre, pre_st, "--sl", "sl", "Context length");
    opt_int(pre, pre_st, "--fl", "fl", "Forecast length");
    opt_int(pre, pre_st, "--pl", "pl", "Patch length");
    opt_int(pre, pre_st, "--levels", "levels", "Backbone levels");
    opt_int(pre, pre_st, "--blocks", "blocks", "Mixer blocks per level");
    opt_int(pre, pre_st, "--hf", "hf", "Hidden feature width");
    opt_dbl(pre, pre_st, "--dropout", "dropout", "Dropout rate");
    opt_flag(pre, pre_st, "--prefix,!--no-prefix", "prefix", "Resolution prefix tuning");
    opt_int(pre, pre_st, "--num-resolutions", "num_resolutions", "Prefix table rows");

    auto* ft = app.add_subcommand("finetune", "Head-only fine-tuning (backbone frozen)");
    add_common(ft, ft_st);
    add_dataset_opts(ft, ft_st);
    add_train_opts(ft, ft_st);
    opt_str(ft, ft_st, "--checkpoint", "checkpoint", "Pre-trained checkpoint");
    opt_str(ft, ft_st, "--out", "out", "Output checkpoint path");
    opt_dbl(ft, ft_st, "--few-shot", "few_shot", "Fraction of train windows (0 = zero-shot)");
    opt_flag(ft, ft_st, "--channel-mix,!--no-channel-mix", "channel_mix",
             "Decoder channel mixing");
    opt_flag(ft, ft_st, "--exog,!--no-exog", "exog", "Exogenous mixer");
    opt_int(ft, ft_st, "--exog-context", "exog_context", "Exogenous lag half-width l");
    opt_dbl(ft, ft_st, "--head-dropout", "head_dropout", "Head dropout rate");

    auto* fc = app.add_subcommand("forecast", "Forecast beyond the end of a series");
    add_common(fc, fc_st);
    add_dataset_opts(fc, fc_st);
    opt_str(fc, fc_st, "--checkpoint", "checkpoint", "Checkpoint path");
    opt_str(fc, fc_st, "--out", "out", "Forecast CSV path");
    opt_str(fc, fc_st, "--fla", "fla", "direct | prune | recursive");
    opt_int(fc, fc_st, "--fl", "fl", "Requested forecast length");

    auto* ev = app.add_subcommand("eval", "Rolling evaluation on the test split");
    add_common(ev, ev_st);
    add_dataset_opts(ev, ev_st);
    opt_str(ev, ev_st, "--checkpoint", "checkpoint", "Checkpoint path");
    opt_str(ev, ev_st, "--out", "out", "Report JSON path");
    opt_str(ev, ev_st, "--dump", "dump", "Per-window forecast dump CSV");
    opt_str(ev, ev_st, "--protocol", "protocol", "sliding | last_window");
    opt_str(ev, ev_st, "--fla", "fla", "direct | prune | recursive");
    opt_int(ev, ev_st, "--fl", "fl", "Requested forecast length");
    opt_int(ev, ev_st, "--workers", "workers", "Worker threads (default: hardware cores)");
    opt_str(ev, ev_st, "--baselines", "baselines", "Baseline MSE JSON for f-imp");

    auto* insp = app.add_subcommand("inspect", "Export embeddings or attention maps");
    add_common(insp, insp_st);
    add_dataset_opts(insp, insp_st);
    opt_str(insp, insp_st, "--checkpoint", "checkpoint", "Checkpoint path");
    opt_str(insp, insp_st, "--out", "out", "Output CSV path");
    opt_str(insp, insp_st, "--mode", "mode", "embeddings | attention");
    opt_str(insp, insp_st, "--eval-split", "split", "train | validation | test");
    opt_int(insp, insp_st, "--stride", "stride", "Window stride");

    CLI11_PARSE(app, argc, argv);

    if (ev->parsed() && !ev_st.flags.contains("workers")) {
        const unsigned hw = std::thread::hardware_concurrency();
        ev_st.flags["workers"] = hw ? static_cast<int>(hw) : 1;
    }

    if (synth->parsed()) return run_command("synth", synth_st);
    if (prep->parsed()) return run_command("prepare", prep_st);
    if (pre->parsed()) return run_command("pretrain", pre_st);
    if (ft->parsed()) return run_command("finetune", ft_st);
    if (fc->parsed()) return run_command("forecast", fc_st);
    if (ev->parsed()) return run_command("eval", ev_st);
    if (insp->parsed()) return run_command("inspect", insp_st);
    return 0;
}

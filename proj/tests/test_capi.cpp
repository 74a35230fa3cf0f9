#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include "doctest.h"
#include "json.hpp"
#include "ttm/ttm_c.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path work_dir() {
    auto dir = fs::temp_directory_path() / "ttm_capi_tests";
    fs::create_directories(dir);
    return dir;
}

// run a command and hand back the parsed result JSON
json run_ok(const char* command, const json& opts) {
    char* out = nullptr;
    const auto rc = ttm_run(command, opts.dump().c_str(), &out);
    if (rc != TTM_OK) FAIL(command << " failed: " << ttm_last_error());
    REQUIRE(out != nullptr);
    auto res = json::parse(out);
    ttm_string_free(out);
    return res;
}

ttm_status run_err(const char* command, const json& opts) {
    return ttm_run(command, opts.dump().c_str(), nullptr);
}

} // namespace

TEST_CASE("version and error strings are always available") {
    REQUIRE(ttm_version() != nullptr);
    CHECK(std::strlen(ttm_version()) > 0);
    CHECK(ttm_last_error() != nullptr);
}

TEST_CASE("bad commands and options report config errors") {
    CHECK(ttm_run(nullptr, "{}", nullptr) == TTM_ERR_CONFIG);
    CHECK(ttm_run("no_such_command", "{}", nullptr) == TTM_ERR_CONFIG);
    CHECK(std::string(ttm_last_error()).find("unknown command") != std::string::npos);
    CHECK(ttm_run("synth", "this is not json", nullptr) != TTM_OK);
    // missing required option
    CHECK(run_err("synth", json::object()) == TTM_ERR_CONFIG);
}

TEST_CASE("full pipeline through the C surface") {
    const auto dir = work_dir();
    const auto csv = (dir / "sine.csv").string();
    const auto ckpt = (dir / "model.ttmf").string();

    auto synth = run_ok("synth", {{"out", csv},
                                  {"fixture", "sine"},
                                  {"seed", 3},
                                  {"length", 400},
                                  {"noise", 0.0}});
    CHECK(synth["channels"] == 1);
    CHECK(synth["length"] == 400);
    CHECK(fs::exists(csv));
    CHECK(fs::exists(csv + ".manifest.json"));

    auto pre = run_ok("pretrain", {{"csv", csv},
                                   {"out", ckpt},
                                   {"sl", 16},
                                   {"fl", 4},
                                   {"pl", 4},
                                   {"levels", 2},
                                   {"blocks", 1},
                                   {"hf", 8},
                                   {"epochs", 2},
                                   {"stride", 4},
                                   {"seed", 7}});
    CHECK(pre["checkpoint"] == ckpt);
    CHECK(pre.contains("final_train_mse"));
    CHECK(fs::exists(ckpt));
    CHECK(fs::exists(ckpt + ".manifest.json"));
    {
        // the run manifest records the input hash
        std::ifstream in(ckpt + ".manifest.json");
        json m = json::parse(in);
        CHECK(m["command"] == "pretrain");
        CHECK(m["input_hashes"].contains(csv));
        char hex[65];
        REQUIRE(ttm_hash_file(csv.c_str(), hex) == TTM_OK);
        CHECK(m["input_hashes"][csv] == std::string(hex));
    }

    const auto report = (dir / "report.json").string();
    auto rep = run_ok("eval", {{"csv", csv},
                               {"checkpoint", ckpt},
                               {"out", report},
                               {"protocol", "last_window"}});
    CHECK(rep["num_windows"] == 1);
    CHECK(rep["mse"].is_number());
    CHECK(fs::exists(report));

    const auto fcsv = (dir / "forecast.csv").string();
    auto fres = run_ok("forecast", {{"csv", csv}, {"checkpoint", ckpt}, {"out", fcsv}});
    CHECK(fres["fl"] == 4);
    {
        std::ifstream in(fcsv);
        std::string header;
        std::getline(in, header);
        CHECK(header == "timestamp,channel,step,value");
        int lines = 0;
        for (std::string line; std::getline(in, line);) ++lines;
        CHECK(lines == 4); // one target channel x fl rows
    }

    const auto emb = (dir / "embeddings.csv").string();
    auto ires = run_ok("inspect", {{"csv", csv},
                                   {"checkpoint", ckpt},
                                   {"out", emb},
                                   {"mode", "embeddings"},
                                   {"stride", 8}});
    CHECK(ires["rows"].get<int>() > 0);
    CHECK(fs::exists(emb));
}

TEST_CASE("pipeline errors map onto the status enum") {
    const auto dir = work_dir();
    const auto missing = (dir / "does_not_exist.csv").string();
    CHECK(run_err("pretrain", {{"csv", missing}, {"out", (dir / "x.ttmf").string()}}) ==
          TTM_ERR_IO);
    CHECK(run_err("eval", {{"csv", missing},
                           {"checkpoint", (dir / "missing.ttmf").string()},
                           {"out", (dir / "r.json").string()}}) == TTM_ERR_IO);

    // invalid architecture: hf not divisible at the requested depth
    const auto csv = (dir / "cfg_sine.csv").string();
    run_ok("synth", {{"out", csv}, {"length", 200}});
    CHECK(run_err("pretrain", {{"csv", csv},
                               {"out", (dir / "bad.ttmf").string()},
                               {"sl", 32},
                               {"fl", 4},
                               {"pl", 4},
                               {"levels", 3},
                               {"hf", 12},
                               {"epochs", 0}}) == TTM_ERR_CONFIG);
    CHECK(std::string(ttm_last_error()).find("hf") != std::string::npos);
}

TEST_CASE("hash helper and model handle") {
    const auto dir = work_dir();
    const auto small = (dir / "hash_probe.txt").string();
    {
        std::ofstream out(small);
        out << "abc";
    }
    char hex[65];
    REQUIRE(ttm_hash_file(small.c_str(), hex) == TTM_OK);
    CHECK(std::string(hex) ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(ttm_hash_file((dir / "nope.bin").string().c_str(), hex) == TTM_ERR_IO);

    // build a small checkpoint for the handle tests
    const auto csv = (dir / "handle_sine.csv").string();
    const auto ckpt = (dir / "handle.ttmf").string();
    run_ok("synth", {{"out", csv}, {"length", 300}});
    run_ok("pretrain", {{"csv", csv},
                        {"out", ckpt},
                        {"sl", 16},
                        {"fl", 4},
                        {"pl", 4},
                        {"levels", 2},
                        {"hf", 8},
                        {"epochs", 1},
                        {"stride", 4}});

    ttm_model* m = nullptr;
    CHECK(ttm_model_open((dir / "absent.ttmf").string().c_str(), &m) == TTM_ERR_IO);
    REQUIRE(ttm_model_open(ckpt.c_str(), &m) == TTM_OK);
    REQUIRE(m != nullptr);

    char* info = nullptr;
    REQUIRE(ttm_model_info(m, &info) == TTM_OK);
    auto j = json::parse(info);
    ttm_string_free(info);
    CHECK(j["model_config"]["sl"] == 16);
    CHECK(j["model_config"]["fl"] == 4);
    CHECK(j["fingerprint"].get<std::string>().size() == 64);
    CHECK(j["num_parameters"].get<std::int64_t>() > 0);

    double X[16];
    for (int i = 0; i < 16; ++i) X[i] = std::sin(0.2 * i);
    double out[4] = {0, 0, 0, 0};
    REQUIRE(ttm_model_forecast(m, X, 1, 16, 0, out, 4) == TTM_OK);
    for (double v : out) CHECK(std::isfinite(v));

    CHECK(ttm_model_forecast(m, X, 2, 8, 0, out, 4) == TTM_ERR_SHAPE);
    CHECK(ttm_model_forecast(m, X, 1, 16, 0, out, 2) == TTM_ERR_CONTRACT);
    CHECK(std::string(ttm_last_error()).find("buffer") != std::string::npos);
    ttm_model_close(m);
    ttm_model_close(nullptr); // safe no-op
}

#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "test_util.hpp"
#include "ttm/checkpoint.hpp"
#include "ttm/model.hpp"

using namespace ttm;
namespace fs = std::filesystem;

namespace {

fs::path temp_path(const std::string& name) {
    auto dir = fs::temp_directory_path() / "ttm_ckpt_tests";
    fs::create_directories(dir);
    return dir / name;
}

std::string read_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_bytes(const fs::path& p, const std::string& bytes) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

ModelConfig ckpt_mc() {
    ModelConfig mc;
    mc.sl = 16;
    mc.fl = 4;
    mc.pl = 4;
    mc.levels = 2;
    mc.blocks_per_level = 1;
    mc.hf = 8;
    mc.dropout = real(0.1);
    mc.prefix_enabled = true;
    return mc;
}

HeadConfig ckpt_hc() {
    HeadConfig hc;
    hc.num_channels = 2;
    hc.target_channels = {0, 1};
    hc.channel_mix_enabled = true;
    hc.head_dropout = real(0);
    return hc;
}

} // namespace

TEST_CASE("checkpoint round trip preserves every tensor, flag and config field") {
    auto mc = ckpt_mc();
    auto hc = ckpt_hc();
    auto store = build_parameters(mc, hc, 21);
    store.set_trainable("backbone.embed.w", false);
    const auto path = temp_path("round_trip.ttmf");
    save_checkpoint(store, mc, hc, path.string());

    auto res = load_checkpoint(path.string());
    CHECK(res.warnings.empty());
    CHECK(!res.has_opt);
    CHECK(res.store.fingerprint == store.fingerprint);
    CHECK(res.store.params().size() == store.params().size());
    for (const auto& [name, t] : store.params()) {
        REQUIRE(res.store.has(name));
        const auto& r = res.store.get(name);
        CHECK(r.shape() == t.shape());
        CHECK(r.data() == t.data()); // bit-identical values
        CHECK(res.store.trainable(name) == store.trainable(name));
    }

    // the header alone reconstructs the architecture
    CHECK(res.model_config.sl == mc.sl);
    CHECK(res.model_config.fl == mc.fl);
    CHECK(res.model_config.pl == mc.pl);
    CHECK(res.model_config.levels == mc.levels);
    CHECK(res.model_config.hf == mc.hf);
    CHECK(res.model_config.prefix_enabled == mc.prefix_enabled);
    CHECK(res.head_config.num_channels == hc.num_channels);
    CHECK(res.head_config.target_channels == hc.target_channels);
    CHECK(res.head_config.channel_mix_enabled == hc.channel_mix_enabled);
}

TEST_CASE("save-load-save produces byte-identical files") {
    auto mc = ckpt_mc();
    auto hc = ckpt_hc();
    auto store = build_parameters(mc, hc, 22);
    const auto p1 = temp_path("stable_a.ttmf");
    const auto p2 = temp_path("stable_b.ttmf");
    save_checkpoint(store, mc, hc, p1.string());
    auto res = load_checkpoint(p1.string());
    save_checkpoint(res.store, res.model_config, res.head_config, p2.string());
    CHECK(read_bytes(p1) == read_bytes(p2));
}

TEST_CASE("file structure starts with the magic and version") {
    auto mc = ckpt_mc();
    auto hc = ckpt_hc();
    auto store = build_parameters(mc, hc, 23);
    const auto path = temp_path("magic.ttmf");
    save_checkpoint(store, mc, hc, path.string());
    auto bytes = read_bytes(path);
    REQUIRE(bytes.size() > 16);
    CHECK(bytes.substr(0, 4) == "TTMF");
    CHECK(static_cast<unsigned char>(bytes[4]) == kCheckpointVersion);
    CHECK(bytes[5] == 0);
    CHECK(bytes[6] == 0); // reserved
    CHECK(bytes[7] == 0);
}

TEST_CASE("corrupted payload byte is detected by the CRC") {
    auto mc = ckpt_mc();
    auto hc = ckpt_hc();
    auto store = build_parameters(mc, hc, 24);
    const auto path = temp_path("crc_flip.ttmf");
    save_checkpoint(store, mc, hc, path.string());
    auto bytes = read_bytes(path);
    bytes[bytes.size() - 100] ^= 0x5A;
    write_bytes(path, bytes);
    try {
        load_checkpoint(path.string());
        FAIL("expected a CRC error");
    } catch (const TtmError& e) {
        CHECK(e.code() == ErrorCode::crc);
    }
}

TEST_CASE("truncated file is rejected") {
    auto mc = ckpt_mc();
    auto hc = ckpt_hc();
    auto store = build_parameters(mc, hc, 25);
    const auto path = temp_path("trunc.ttmf");
    save_checkpoint(store, mc, hc, path.string());
    auto bytes = read_bytes(path);

    // losing the tail shifts the CRC trailer onto payload bytes
    write_bytes(path, bytes.substr(0, bytes.size() - 1));
    try {
        load_checkpoint(path.string());
        FAIL("expected a CRC error");
    } catch (const TtmError& e) {
        CHECK(e.code() == ErrorCode::crc);
    }

    // losing the whole payload is caught structurally
    write_bytes(path, bytes.substr(0, 18));
    CHECK_THROWS_AS(load_checkpoint(path.string()), DataError);
}

TEST_CASE("bad magic is rejected") {
    const auto path = temp_path("not_a_ckpt.ttmf");
    write_bytes(path, "NOPE this is not a checkpoint file at all, just text padding.");
    CHECK_THROWS_AS(load_checkpoint(path.string()), DataError);
}

TEST_CASE("unsupported format version is rejected with the version code") {
    auto mc = ckpt_mc();
    auto hc = ckpt_hc();
    auto store = build_parameters(mc, hc, 26);
    const auto path = temp_path("version.ttmf");
    save_checkpoint(store, mc, hc, path.string());
    auto bytes = read_bytes(path);
    bytes[4] = 99;
    write_bytes(path, bytes);
    try {
        load_checkpoint(path.string());
        FAIL("expected a version error");
    } catch (const TtmError& e) {
        CHECK(e.code() == ErrorCode::version);
    }
}

TEST_CASE("f32 checkpoint loads with a conversion warning and bounded loss") {
    auto mc = ckpt_mc();
    auto hc = ckpt_hc();
    auto store = build_parameters(mc, hc, 27);
    const auto path = temp_path("f32.ttmf");
    save_checkpoint(store, mc, hc, path.string(), nullptr, "f32");
    auto res = load_checkpoint(path.string());
#ifndef TTM_REAL32
    REQUIRE(!res.warnings.empty());
    CHECK(res.warnings[0].find("f32") != std::string::npos);
#endif
    for (const auto& [name, t] : store.params()) {
        const auto& r = res.store.get(name);
        for (std::size_t i = 0; i < t.data().size(); ++i)
            CHECK(static_cast<double>(r.data()[i]) ==
                  doctest::Approx(static_cast<double>(t.data()[i])).epsilon(1e-6));
    }
}

TEST_CASE("optimizer state round trips") {
    auto mc = ckpt_mc();
    auto hc = ckpt_hc();
    auto store = build_parameters(mc, hc, 28);
    AdamState opt;
    opt.t = 17;
    std::mt19937_64 rng(29);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (const auto& [name, t] : store.params()) {
        std::vector<real> m(t.data().size()), v(t.data().size());
        for (auto& x : m) x = static_cast<real>(dist(rng));
        for (auto& x : v) x = static_cast<real>(std::abs(dist(rng)));
        opt.m[name] = m;
        opt.v[name] = v;
    }
    const auto path = temp_path("opt.ttmf");
    save_checkpoint(store, mc, hc, path.string(), &opt);
    auto res = load_checkpoint(path.string());
    REQUIRE(res.has_opt);
    CHECK(res.opt.t == 17);
    CHECK(res.opt.m == opt.m);
    CHECK(res.opt.v == opt.v);
}

TEST_CASE("save is atomic: no temp file remains and overwrite is clean") {
    auto mc = ckpt_mc();
    auto hc = ckpt_hc();
    auto store = build_parameters(mc, hc, 30);
    const auto path = temp_path("atomic.ttmf");
    save_checkpoint(store, mc, hc, path.string());
    CHECK(!fs::exists(path.string() + ".tmp"));
    auto first = read_bytes(path);
    save_checkpoint(store, mc, hc, path.string()); // overwrite in place
    CHECK(!fs::exists(path.string() + ".tmp"));
    CHECK(read_bytes(path) == first);
}

TEST_CASE("sha256 helpers match known vectors and each other") {
    CHECK(sha256_hex("", 0) ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    const std::string abc = "abc";
    CHECK(sha256_hex(abc.data(), abc.size()) ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    const auto path = temp_path("hash_me.bin");
    write_bytes(path, abc);
    CHECK(sha256_file_hex(path.string()) == sha256_hex(abc.data(), abc.size()));
}

TEST_CASE("loaded checkpoint drives the model identically to the original store") {
    auto mc = ckpt_mc();
    auto hc = ckpt_hc();
    auto store = build_parameters(mc, hc, 31);
    const auto path = temp_path("inference.ttmf");
    save_checkpoint(store, mc, hc, path.string());
    auto res = load_checkpoint(path.string());

    std::mt19937_64 rng(32);
    auto X = ttm_test::random_tensor({2, 2, mc.sl}, rng, -2.0, 2.0);
    TtmModel a(mc, hc, &store);
    TtmModel b(res.model_config, res.head_config, &res.store);
    FwdCtx c1, c2;
    auto ya = a.forward(X, {1, 1}, nullptr, c1);
    auto yb = b.forward(X, {1, 1}, nullptr, c2);
    CHECK(ya.y.data() == yb.y.data());
}

#pragma once

#include <map>
#include <string>
#include <vector>

#include "ttm/config.hpp"

namespace ttm {

// Adam moment buffers, serialized alongside the parameters when present.
struct AdamState {
    std::map<std::string, std::vector<real>> m;
    std::map<std::string, std::vector<real>> v;
    std::int64_t t = 0;
};

// Checkpoint file ("TTMF"):
//   magic "TTMF" | u16 format version | u16 reserved(0) | u64 header length |
//   canonical JSON header | zero pad to 8-byte alignment |
//   raw little-endian tensor payload (names sorted, offsets ascending,
//   8-byte aligned) | u32 CRC32 of the payload
// The header alone reconstructs the architecture; see README for the full
// byte-level description.
inline constexpr std::uint16_t kCheckpointVersion = 1;

struct LoadResult {
    ParameterStore store;
    ModelConfig model_config;
    HeadConfig head_config;
    AdamState opt;
    bool has_opt = false;
    std::vector<std::string> warnings;
};

void save_checkpoint(const ParameterStore& store, const ModelConfig& mc, const HeadConfig& hc,
                     const std::string& path, const AdamState* opt = nullptr,
                     const std::string& dtype = "");  // "" -> native ("f64"/"f32")

LoadResult load_checkpoint(const std::string& path);

std::string sha256_hex(const void* data, std::size_t len);
std::string sha256_file_hex(const std::string& path);

} // namespace ttm

#include "ttm/checkpoint.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>

#include <openssl/evp.h>
#include <zlib.h>

#include "json.hpp"

namespace ttm {

namespace {

constexpr char kMagic[4] = {'T', 'T', 'M', 'F'};

std::string native_dtype() {
#ifdef TTM_REAL32
    return "f32";
#else
    return "f64";
#endif
}

std::size_t dtype_size(const std::string& dtype) {
    if (dtype == "f64") return 8;
    if (dtype == "f32") return 4;
    throw DataError("checkpoint: unsupported dtype " + dtype);
}

void append_u16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xFF));
    out.push_back(static_cast<char>((v >> 8) & 0xFF));
}

void append_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void append_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void append_values(std::string& out, const std::vector<real>& vals, const std::string& dtype) {
    if (dtype == "f64") {
        for (real r : vals) {
            double d = static_cast<double>(r);
            char buf[8];
            std::memcpy(buf, &d, 8);
            out.append(buf, 8);
        }
    } else {
        for (real r : vals) {
            float f = static_cast<float>(r);
            char buf[4];
            std::memcpy(buf, &f, 4);
            out.append(buf, 4);
        }
    }
}

std::vector<real> read_values(const std::string& payload, std::uint64_t offset,
                              std::uint64_t count, const std::string& dtype) {
    std::vector<real> vals(static_cast<std::size_t>(count));
    const char* p = payload.data() + offset;
    if (dtype == "f64") {
        for (std::uint64_t i = 0; i < count; ++i) {
            double d;
            std::memcpy(&d, p + i * 8, 8);
            vals[static_cast<std::size_t>(i)] = static_cast<real>(d);
        }
    } else {
        for (std::uint64_t i = 0; i < count; ++i) {
            float f;
            std::memcpy(&f, p + i * 4, 4);
            vals[static_cast<std::size_t>(i)] = static_cast<real>(f);
        }
    }
    return vals;
}

} // namespace

std::string sha256_hex(const void* data, std::size_t len) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int mdlen = 0;
    if (EVP_Digest(data, len, md, &mdlen, EVP_sha256(), nullptr) != 1)
        throw IoError("sha256: digest failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(mdlen * 2);
    for (unsigned int i = 0; i < mdlen; ++i) {
        out.push_back(hex[md[i] >> 4]);
        out.push_back(hex[md[i] & 0xF]);
    }
    return out;
}

std::string sha256_file_hex(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("sha256: cannot open " + path);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return sha256_hex(bytes.data(), bytes.size());
}

void save_checkpoint(const ParameterStore& store, const ModelConfig& mc, const HeadConfig& hc,
                     const std::string& path, const AdamState* opt, const std::string& dtype_arg) {
    const std::string dtype = dtype_arg.empty() ? native_dtype() : dtype_arg;
    const std::size_t elem = dtype_size(dtype);

    // payload layout: parameters (sorted by name), then optimizer buffers
    std::string payload;
    nlohmann::json tensor_dir = nlohmann::json::array();
    auto emit = [&](const std::string& name, const std::vector<real>& vals, const Shape* shape,
                    const bool* trainable) {
        while (payload.size() % 8 != 0) payload.push_back('\0');
        nlohmann::json e;
        e["name"] = name;
        e["dtype"] = dtype;
        e["offset"] = payload.size();
        e["nbytes"] = vals.size() * elem;
        if (shape) e["shape"] = *shape;
        else e["shape"] = std::vector<std::int64_t>{static_cast<std::int64_t>(vals.size())};
        if (trainable) e["trainable"] = *trainable;
        tensor_dir.push_back(e);
        append_values(payload, vals, dtype);
    };
    for (const auto& [name, t] : store.params()) {
        const bool tr = store.trainable(name);
        emit(name, t.data(), &t.shape(), &tr);
    }
    nlohmann::json opt_dir = nlohmann::json::array();
    if (opt) {
        for (const auto& [name, m] : opt->m) {
            while (payload.size() % 8 != 0) payload.push_back('\0');
            nlohmann::json e;
            e["name"] = name;
            e["dtype"] = dtype;
            e["offset"] = payload.size();
            e["nbytes"] = m.size() * elem;
            opt_dir.push_back(e);
            append_values(payload, m, dtype);
            const auto& v = opt->v.at(name);
            while (payload.size() % 8 != 0) payload.push_back('\0');
            nlohmann::json e2;
            e2["name"] = name;
            e2["dtype"] = dtype;
            e2["offset"] = payload.size();
            e2["nbytes"] = v.size() * elem;
            opt_dir.push_back(e2);
            append_values(payload, v, dtype);
        }
    }

    nlohmann::json header;
    header["format_version"] = kCheckpointVersion;
    header["dtype"] = dtype;
    header["model_config"] = nlohmann::json::parse(model_config_to_json(mc));
    header["head_config"] = nlohmann::json::parse(head_config_to_json(hc));
    header["fingerprint"] = store.fingerprint;
    header["metadata"] = {
        {"gate_placement", "after_mlp"},
        {"prefix_token", "dropped_before_decoder"},
        {"norm", "layernorm_mixed_axis"},
        {"gelu", "tanh_approximation"},
    };
    {
        nlohmann::json reg = nlohmann::json::array();
        for (const auto& e : ResolutionRegistry::builtin().entries())
            reg.push_back({{"id", e.id}, {"label", e.label}, {"seconds", e.seconds}});
        header["resolution_registry"] = reg;
    }
    header["tensors"] = tensor_dir;
    if (opt) {
        header["optimizer"] = {{"kind", "adam"}, {"t", opt->t}, {"tensors", opt_dir}};
    }
    const std::string header_str = header.dump();

    std::string file;
    file.append(kMagic, 4);
    append_u16(file, kCheckpointVersion);
    append_u16(file, 0);
    append_u64(file, header_str.size());
    file += header_str;
    while (file.size() % 8 != 0) file.push_back('\0');
    file += payload;
    const auto crc = static_cast<std::uint32_t>(
        crc32(0L, reinterpret_cast<const Bytef*>(payload.data()),
              static_cast<uInt>(payload.size())));
    append_u32(file, crc);

    namespace fs = std::filesystem;
    const fs::path target(path);
    const fs::path tmp = target.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("checkpoint: cannot write " + tmp.string());
        out.write(file.data(), static_cast<std::streamsize>(file.size()));
        if (!out) throw IoError("checkpoint: short write to " + tmp.string());
    }
    fs::rename(tmp, target);
}

LoadResult load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("checkpoint: cannot open " + path);
    std::string file((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (file.size() < 16 + 4 || std::memcmp(file.data(), kMagic, 4) != 0)
        throw DataError("checkpoint: bad magic in " + path);
    const std::uint16_t version =
        static_cast<std::uint8_t>(file[4]) | (static_cast<std::uint8_t>(file[5]) << 8);
    if (version != kCheckpointVersion)
        throw TtmError(ErrorCode::version,
                       "checkpoint: unsupported format version " + std::to_string(version));
    std::uint64_t header_len = 0;
    for (int i = 0; i < 8; ++i)
        header_len |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(file[8 + i])) << (8 * i);
    std::size_t pos = 16;
    if (pos + header_len > file.size()) throw DataError("checkpoint: truncated header");
    const std::string header_str = file.substr(pos, header_len);
    pos += header_len;
    while (pos % 8 != 0) ++pos;
    if (file.size() < pos + 4) throw DataError("checkpoint: truncated payload");
    const std::string payload = file.substr(pos, file.size() - pos - 4);
    std::uint32_t stored_crc = 0;
    for (int i = 0; i < 4; ++i)
        stored_crc |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(file[file.size() - 4 + i]))
                      << (8 * i);
    const auto crc = static_cast<std::uint32_t>(
        crc32(0L, reinterpret_cast<const Bytef*>(payload.data()),
              static_cast<uInt>(payload.size())));
    if (crc != stored_crc)
        throw TtmError(ErrorCode::crc, "checkpoint: payload CRC mismatch in " + path);

    nlohmann::json header = nlohmann::json::parse(header_str);
    LoadResult res;
    res.model_config = model_config_from_json(header.at("model_config").dump());
    res.head_config = head_config_from_json(header.at("head_config").dump());
    const std::string file_dtype = header.at("dtype");
    if (file_dtype != native_dtype())
        res.warnings.push_back("checkpoint stored as " + file_dtype + " but this build uses " +
                               native_dtype() + "; values converted");
    for (const auto& e : header.at("tensors")) {
        const std::string name = e.at("name");
        Shape shape = e.at("shape").get<Shape>();
        const std::uint64_t offset = e.at("offset");
        const std::uint64_t nbytes = e.at("nbytes");
        const std::string dt = e.at("dtype");
        const std::uint64_t count = nbytes / dtype_size(dt);
        if (offset + nbytes > payload.size()) throw DataError("checkpoint: tensor out of bounds");
        if (count != static_cast<std::uint64_t>(shape_numel(shape)))
            throw DataError("checkpoint: tensor size mismatch for " + name);
        Tensor t(shape, read_values(payload, offset, count, dt));
        res.store.add(name, std::move(t), e.value("trainable", true));
    }
    res.store.fingerprint = header.at("fingerprint");
    if (header.contains("optimizer")) {
        res.has_opt = true;
        res.opt.t = header["optimizer"].at("t");
        const auto& dir = header["optimizer"].at("tensors");
        for (std::size_t i = 0; i + 1 < dir.size(); i += 2) {
            const std::string name = dir[i].at("name");
            const std::string dt = dir[i].at("dtype");
            res.opt.m[name] = read_values(payload, dir[i].at("offset"),
                                          dir[i].at("nbytes").get<std::uint64_t>() / dtype_size(dt), dt);
            res.opt.v[name] = read_values(payload, dir[i + 1].at("offset"),
                                          dir[i + 1].at("nbytes").get<std::uint64_t>() / dtype_size(dt), dt);
        }
    }
    return res;
}

} // namespace ttm

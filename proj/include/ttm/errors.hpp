#pragma once

#include <stdexcept>
#include <string>

namespace ttm {

// Stable error codes, mirrored by the C API in ttm_c.h.
enum class ErrorCode {
    ok = 0,
    shape = 1,
    contract = 2,
    config = 3,
    data = 4,
    io = 5,
    crc = 6,
    version = 7,
    fingerprint = 8,
};

class TtmError : public std::runtime_error {
public:
    TtmError(ErrorCode code, const std::string& msg)
        : std::runtime_error(msg), code_(code) {}
    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

struct ShapeError : TtmError {
    explicit ShapeError(const std::string& msg) : TtmError(ErrorCode::shape, msg) {}
};

struct ContractError : TtmError {
    explicit ContractError(const std::string& msg) : TtmError(ErrorCode::contract, msg) {}
};

struct ConfigError : TtmError {
    explicit ConfigError(const std::string& msg) : TtmError(ErrorCode::config, msg) {}
};

struct DataError : TtmError {
    explicit DataError(const std::string& msg) : TtmError(ErrorCode::data, msg) {}
};

struct IoError : TtmError {
    explicit IoError(const std::string& msg) : TtmError(ErrorCode::io, msg) {}
};

} // namespace ttm

// errors.hpp - exception types shared across the pipeline.
//
// ConfigError  -> bad configuration values (CLI exit code 2)
// ParseError   -> malformed input data, carries byte offset or line (exit code 3)

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace evpipe {

class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

class ParseError : public std::runtime_error {
public:
    enum class Where { ByteOffset, Line, None };

    ParseError(const std::string& msg, Where kind, std::uint64_t at)
        : std::runtime_error(format(msg, kind, at)), kind_(kind), at_(at) {}

    explicit ParseError(const std::string& msg)
        : std::runtime_error(msg), kind_(Where::None), at_(0) {}

    Where location_kind() const { return kind_; }
    std::uint64_t location() const { return at_; }

private:
    static std::string format(const std::string& msg, Where kind, std::uint64_t at) {
        switch (kind) {
            case Where::ByteOffset: return msg + " (byte offset " + std::to_string(at) + ")";
            case Where::Line: return msg + " (line " + std::to_string(at) + ")";
            default: return msg;
        }
    }

    Where kind_;
    std::uint64_t at_;
};

class InsufficientDataError : public std::runtime_error {
public:
    explicit InsufficientDataError(const std::string& msg) : std::runtime_error(msg) {}
};

class EstimationError : public std::runtime_error {
public:
    explicit EstimationError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace evpipe

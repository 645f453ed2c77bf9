#pragma once

#include <stdexcept>
#include <string>

namespace miracle {

// Base of every error the library throws.
class error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class dimension_error : public error {
public:
    using error::error;
};

class budget_error : public error {
public:
    using error::error;
};

class sampler_error : public error {
public:
    using error::error;
};

class numeric_error : public error {
public:
    using error::error;
};

class config_error : public error {
public:
    config_error(std::string field, const std::string& what)
        : error("config field '" + field + "': " + what), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

enum class format_errc {
    bad_magic = 1,
    unknown_version = 2,
    truncated = 3,
    corrupt = 4,
};

inline const char* to_string(format_errc c) {
    switch (c) {
    case format_errc::bad_magic: return "bad magic";
    case format_errc::unknown_version: return "unknown version";
    case format_errc::truncated: return "truncated";
    case format_errc::corrupt: return "corrupt stream";
    }
    return "unknown";
}

class format_error : public error {
public:
    format_error(format_errc code, const std::string& what)
        : error(std::string(to_string(code)) + ": " + what), code_(code) {}

    format_errc code() const noexcept { return code_; }

private:
    format_errc code_;
};

inline void require_same_dim(std::size_t a, std::size_t b, const char* what) {
    if (a != b) {
        throw dimension_error(std::string(what) + ": dimension mismatch (" + std::to_string(a) +
                              " vs " + std::to_string(b) + ")");
    }
}

}  // namespace miracle

#pragma once

#include <stdexcept>
#include <string>

namespace outskirt {

/// Failure category; each maps to a CLI exit code.
enum class ErrorKind { config, data, numeric, state };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

    /// 2 config, 3 data, 4 numeric, 1 for internal state misuse.
    int exit_code() const noexcept;

private:
    ErrorKind kind_;
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& what) : Error(ErrorKind::config, what) {}
};

struct DataError : Error {
    explicit DataError(const std::string& what) : Error(ErrorKind::data, what) {}
};

struct NumericError : Error {
    explicit NumericError(const std::string& what) : Error(ErrorKind::numeric, what) {}
};

struct StateError : Error {
    explicit StateError(const std::string& what) : Error(ErrorKind::state, what) {}
};

}  // namespace outskirt

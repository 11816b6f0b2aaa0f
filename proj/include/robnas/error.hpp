#pragma once

#include <stdexcept>
#include <string>

namespace robnas {

// Categories map one-to-one onto CLI exit codes and C API status values.
enum class ErrorKind {
    usage = 1,
    validation = 2,
    not_found = 3,
    numerical = 4,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace robnas

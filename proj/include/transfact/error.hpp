#pragma once

#include <stdexcept>
#include <string>

namespace transfact {

// Error categories map onto CLI exit codes (see cli.hpp).
enum class ErrorKind {
    Shape,
    InsufficientInput,
    Config,
    Parse,
    Version,
    Validation,
    Stratification,
    Capacity,
    Input,
    Label,
    Index,
    Numeric,
    UndefinedTest,
    Io,
};

inline const char* to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::Shape: return "shape";
    case ErrorKind::InsufficientInput: return "insufficient-input";
    case ErrorKind::Config: return "config";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Version: return "version";
    case ErrorKind::Validation: return "validation";
    case ErrorKind::Stratification: return "stratification";
    case ErrorKind::Capacity: return "capacity";
    case ErrorKind::Input: return "input";
    case ErrorKind::Label: return "label";
    case ErrorKind::Index: return "index";
    case ErrorKind::Numeric: return "numeric";
    case ErrorKind::UndefinedTest: return "undefined-test";
    case ErrorKind::Io: return "io";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + " error: " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool cond, ErrorKind kind, const std::string& what) {
    if (!cond) {
        fail(kind, what);
    }
}

} // namespace transfact

#pragma once

#include <stdexcept>
#include <string>

namespace qualmap {

// Failure categories. The CLI maps each to a process exit code.
enum class ErrorKind {
    MissingInput,    // a referenced file does not exist
    Format,          // malformed binary or text input (GRT, CoNLL-U, sidecar)
    Degenerate,      // numeric precondition violated (zero norm, non-finite, ...)
    Dimension,       // shapes do not agree
    Config,          // parameter outside its documented range
    Io,              // read/write failure on an existing path
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

class DegenerateInputError : public Error {
public:
    explicit DegenerateInputError(const std::string& what)
        : Error(ErrorKind::Degenerate, what) {}
};

class DimensionError : public Error {
public:
    explicit DimensionError(const std::string& what)
        : Error(ErrorKind::Dimension, what) {}
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what)
        : Error(ErrorKind::Config, what) {}
};

}  // namespace qualmap

#pragma once

#include <stdexcept>
#include <string>

namespace dvm {

// Error taxonomy shared by all modules. Everything derives from std::runtime_error
// so callers can catch broadly at the CLI boundary.
struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& msg) : std::runtime_error("shape error: " + msg) {}
};

struct ParamError : std::runtime_error {
    explicit ParamError(const std::string& msg) : std::runtime_error("parameter error: " + msg) {}
};

struct StateError : std::runtime_error {
    explicit StateError(const std::string& msg) : std::runtime_error("state error: " + msg) {}
};

struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error("numeric error: " + msg) {}
};

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error("config error: " + msg) {}
};

struct HomogeneityError : std::runtime_error {
    explicit HomogeneityError(const std::string& msg) : std::runtime_error("homogeneity error: " + msg) {}
};

struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error("io error: " + msg) {}
};

struct UnsupportedError : std::runtime_error {
    explicit UnsupportedError(const std::string& msg) : std::runtime_error("unsupported: " + msg) {}
};

}  // namespace dvm

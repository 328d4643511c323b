#pragma once

#include <stdexcept>
#include <string>

namespace skel {

// Shape/axis mismatch between tensors or rasters.
struct DimError : std::runtime_error {
    explicit DimError(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid argument value (bad factor, out-of-range class, ...).
struct ArgError : std::runtime_error {
    explicit ArgError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed file contents (bad magic, truncated payload, ...).
struct FormatError : std::runtime_error {
    explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid configuration (unknown key, inconsistent fields, ...).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Structural problem in a compute graph (unreachable node, ...).
struct GraphError : std::runtime_error {
    explicit GraphError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace skel

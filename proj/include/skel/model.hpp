#pragma once

#include <string>

#include "skel/arch.hpp"
#include "skel/config.hpp"

namespace skel {

/// Model file: "SKM1\n" magic, embedded resolved config text, then the named
/// parameter tensors as little-endian float64. Round-trips bit-exactly.
void save_model(const std::string& path, const Network& net, const Config& resolved_cfg);

struct Model {
    Config config;
    Network net;
};

/// Rebuilds the network from the embedded config and overwrites its
/// parameters; throws FormatError when file and architecture disagree.
Model load_model(const std::string& path);

}  // namespace skel

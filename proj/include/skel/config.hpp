#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "skel/arch.hpp"
#include "skel/gt.hpp"

namespace skel {

/// Flat key=value configuration ('#' comments). Every field has a default;
/// unknown keys are rejected. "auto" fields resolve through the arch preset.
struct Config {
    std::string arch = "hifi1";
    int groups = 5;
    std::vector<int> convs_per_group;    // empty: 2 per group
    int kernel = 3;
    std::vector<int> backbone_channels;  // empty: 8,16,32,... capped at 64
    int branch_channels = 16;
    int fan_in = -1;              // -1: from preset
    int levels = -1;              // -1: from preset
    int level0_sideoutputs = -1;  // -1 auto, 0 false, 1 true
    bool conv_bias = true;
    int in_channels = 1;
    TargetConvention quantization = TargetConvention::kInclusive;
    BetaConvention beta_convention = BetaConvention::kHed;
    double lr = 3e-5;  // stable for the summed per-pixel loss at desk scale
    double momentum = 0.9;
    int64_t lr_decay_every = 1000;
    double lr_decay_factor = 0.1;
    uint64_t seed = 1;
    double eval_tol_frac = 0.0075;
    int eval_thresholds = 99;
};

Config parse_config_text(const std::string& text);
Config load_config(const std::string& path);

/// Applies the preset and makes every "auto" field concrete; throws
/// ConfigError if the resulting architecture is invalid.
Config resolve_config(const Config& cfg);

/// Serialized resolved form; parses back to an identical configuration.
std::string serialize_config(const Config& resolved);

ArchSpec arch_from_config(const Config& cfg);

}  // namespace skel

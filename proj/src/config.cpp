#include "skel/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "skel/error.hpp"

namespace skel {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::vector<int> parse_int_list(const std::string& v, const std::string& key) {
    std::vector<int> out;
    std::istringstream ss(v);
    std::string part;
    while (std::getline(ss, part, ',')) {
        part = trim(part);
        try {
            size_t used = 0;
            out.push_back(std::stoi(part, &used));
            if (used != part.size()) throw std::invalid_argument(part);
        } catch (...) {
            throw ConfigError("config: bad integer '" + part + "' for key '" + key + "'");
        }
    }
    if (out.empty()) throw ConfigError("config: empty list for key '" + key + "'");
    return out;
}

int parse_int(const std::string& v, const std::string& key) {
    try {
        size_t used = 0;
        int r = std::stoi(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (...) {
        throw ConfigError("config: bad integer '" + v + "' for key '" + key + "'");
    }
}

double parse_double(const std::string& v, const std::string& key) {
    try {
        size_t used = 0;
        double r = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (...) {
        throw ConfigError("config: bad number '" + v + "' for key '" + key + "'");
    }
}

bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true") return true;
    if (v == "false") return false;
    throw ConfigError("config: bad boolean '" + v + "' for key '" + key + "' (use true/false)");
}

}  // namespace

Config parse_config_text(const std::string& text) {
    Config cfg;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: line " + std::to_string(lineno) + " is not key=value: '" + line + "'");
        std::string key = trim(line.substr(0, eq));
        std::string val = trim(line.substr(eq + 1));
        if (val.empty()) throw ConfigError("config: empty value for key '" + key + "'");

        if (key == "arch") {
            cfg.arch = val;
        } else if (key == "groups") {
            cfg.groups = parse_int(val, key);
        } else if (key == "convs_per_group") {
            if (val != "auto") cfg.convs_per_group = parse_int_list(val, key);
        } else if (key == "kernel") {
            cfg.kernel = parse_int(val, key);
        } else if (key == "backbone_channels") {
            if (val != "auto") cfg.backbone_channels = parse_int_list(val, key);
        } else if (key == "branch_channels") {
            cfg.branch_channels = parse_int(val, key);
        } else if (key == "fan_in") {
            cfg.fan_in = val == "auto" ? -1 : parse_int(val, key);
        } else if (key == "levels") {
            cfg.levels = val == "auto" ? -1 : parse_int(val, key);
        } else if (key == "level0_sideoutputs") {
            cfg.level0_sideoutputs = val == "auto" ? -1 : (parse_bool(val, key) ? 1 : 0);
        } else if (key == "conv_bias") {
            cfg.conv_bias = parse_bool(val, key);
        } else if (key == "in_channels") {
            cfg.in_channels = parse_int(val, key);
        } else if (key == "quantization") {
            if (val == "inclusive") {
                cfg.quantization = TargetConvention::kInclusive;
            } else if (val == "strict") {
                cfg.quantization = TargetConvention::kStrict;
            } else {
                throw ConfigError("config: quantization must be inclusive|strict, got '" + val + "'");
            }
        } else if (key == "beta_convention") {
            if (val == "hed") {
                cfg.beta_convention = BetaConvention::kHed;
            } else if (val == "paper") {
                cfg.beta_convention = BetaConvention::kPaperLiteral;
            } else {
                throw ConfigError("config: beta_convention must be hed|paper, got '" + val + "'");
            }
        } else if (key == "lr") {
            cfg.lr = parse_double(val, key);
        } else if (key == "momentum") {
            cfg.momentum = parse_double(val, key);
        } else if (key == "lr_decay_every") {
            cfg.lr_decay_every = parse_int(val, key);
        } else if (key == "lr_decay_factor") {
            cfg.lr_decay_factor = parse_double(val, key);
        } else if (key == "seed") {
            try {
                cfg.seed = std::stoull(val);
            } catch (...) {
                throw ConfigError("config: bad seed '" + val + "'");
            }
        } else if (key == "eval_tol_frac") {
            cfg.eval_tol_frac = parse_double(val, key);
        } else if (key == "eval_thresholds") {
            cfg.eval_thresholds = parse_int(val, key);
        } else {
            throw ConfigError("config: unknown key '" + key + "'");
        }
    }
    return cfg;
}

Config load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("config: cannot open '" + path + "'");
    std::ostringstream ss;
    ss << is.rdbuf();
    return parse_config_text(ss.str());
}

ArchSpec arch_from_config(const Config& cfg) {
    if (cfg.groups < 2) throw ConfigError("config: groups must be >= 2");
    ArchSpec spec;
    spec.backbone.kernel = cfg.kernel;
    std::vector<int> convs = cfg.convs_per_group;
    if (convs.empty()) convs.assign(cfg.groups, 2);
    if (static_cast<int>(convs.size()) == 1) convs.assign(cfg.groups, convs[0]);
    if (static_cast<int>(convs.size()) != cfg.groups)
        throw ConfigError("config: convs_per_group lists " + std::to_string(convs.size()) +
                          " entries for " + std::to_string(cfg.groups) + " groups");
    std::vector<int> chans = cfg.backbone_channels;
    if (chans.empty()) {
        for (int g = 0; g < cfg.groups; ++g) chans.push_back(std::min(8 << g, 64));
    }
    if (static_cast<int>(chans.size()) == 1) chans.assign(cfg.groups, chans[0]);
    if (static_cast<int>(chans.size()) != cfg.groups)
        throw ConfigError("config: backbone_channels lists " + std::to_string(chans.size()) +
                          " entries for " + std::to_string(cfg.groups) + " groups");
    for (int g = 0; g < cfg.groups; ++g) spec.backbone.groups.push_back({convs[g], chans[g]});
    spec.branch_channels = cfg.branch_channels;
    spec.conv_bias = cfg.conv_bias;
    spec.in_channels = cfg.in_channels;

    try {
        apply_preset(spec, cfg.arch);
        if (cfg.fan_in >= 0) spec.hierarchy.fan_in = cfg.fan_in;
        if (cfg.levels >= 0) spec.hierarchy.levels = cfg.levels;
        if (cfg.level0_sideoutputs >= 0)
            spec.hierarchy.level0_sideoutputs = cfg.level0_sideoutputs == 1;
        if (!spec.hierarchy.srn_topology && spec.hierarchy.fan_in == 1)
            spec.hierarchy.level0_sideoutputs = true;
        validate(spec);
    } catch (const ArgError& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return spec;
}

Config resolve_config(const Config& cfg) {
    ArchSpec spec = arch_from_config(cfg);
    Config r = cfg;
    r.convs_per_group.clear();
    r.backbone_channels.clear();
    for (const auto& g : spec.backbone.groups) {
        r.convs_per_group.push_back(g.convs);
        r.backbone_channels.push_back(g.channels);
    }
    r.fan_in = spec.hierarchy.fan_in;
    r.levels = spec.hierarchy.levels;
    r.level0_sideoutputs = spec.hierarchy.level0_sideoutputs ? 1 : 0;
    if (r.momentum < 0 || r.momentum >= 1) throw ConfigError("config: momentum must be in [0,1)");
    if (r.lr <= 0) throw ConfigError("config: lr must be positive");
    if (r.lr_decay_every < 1) throw ConfigError("config: lr_decay_every must be positive");
    if (r.lr_decay_factor <= 0 || r.lr_decay_factor > 1)
        throw ConfigError("config: lr_decay_factor must be in (0,1]");
    if (r.eval_thresholds < 1) throw ConfigError("config: eval_thresholds must be >= 1");
    if (r.eval_tol_frac <= 0) throw ConfigError("config: eval_tol_frac must be positive");
    return r;
}

std::string serialize_config(const Config& c) {
    std::ostringstream os;
    auto list = [](const std::vector<int>& v) {
        std::string s;
        for (size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
        return s;
    };
    os << "arch = " << c.arch << "\n";
    os << "groups = " << c.groups << "\n";
    os << "convs_per_group = " << (c.convs_per_group.empty() ? "auto" : list(c.convs_per_group)) << "\n";
    os << "kernel = " << c.kernel << "\n";
    os << "backbone_channels = " << (c.backbone_channels.empty() ? "auto" : list(c.backbone_channels))
       << "\n";
    os << "branch_channels = " << c.branch_channels << "\n";
    os << "fan_in = " << (c.fan_in < 0 ? "auto" : std::to_string(c.fan_in)) << "\n";
    os << "levels = " << (c.levels < 0 ? "auto" : std::to_string(c.levels)) << "\n";
    os << "level0_sideoutputs = "
       << (c.level0_sideoutputs < 0 ? "auto" : (c.level0_sideoutputs ? "true" : "false")) << "\n";
    os << "conv_bias = " << (c.conv_bias ? "true" : "false") << "\n";
    os << "in_channels = " << c.in_channels << "\n";
    os << "quantization = "
       << (c.quantization == TargetConvention::kInclusive ? "inclusive" : "strict") << "\n";
    os << "beta_convention = " << (c.beta_convention == BetaConvention::kHed ? "hed" : "paper")
       << "\n";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", c.lr);
    os << "lr = " << buf << "\n";
    std::snprintf(buf, sizeof buf, "%.17g", c.momentum);
    os << "momentum = " << buf << "\n";
    os << "lr_decay_every = " << c.lr_decay_every << "\n";
    std::snprintf(buf, sizeof buf, "%.17g", c.lr_decay_factor);
    os << "lr_decay_factor = " << buf << "\n";
    os << "seed = " << c.seed << "\n";
    std::snprintf(buf, sizeof buf, "%.17g", c.eval_tol_frac);
    os << "eval_tol_frac = " << buf << "\n";
    os << "eval_thresholds = " << c.eval_thresholds << "\n";
    return os.str();
}

}  // namespace skel

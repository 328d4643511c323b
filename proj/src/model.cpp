#include "skel/model.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "skel/error.hpp"

static_assert(std::endian::native == std::endian::little, "model format assumes little-endian");

namespace skel {

void save_model(const std::string& path, const Network& net, const Config& resolved_cfg) {
    std::string cfg_text = serialize_config(resolved_cfg);
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("model: cannot open '" + path + "' for writing");
    os << "SKM1\n";
    os << "config " << cfg_text.size() << "\n" << cfg_text;
    os << "params " << net.graph.params().size() << "\n";
    for (const auto& [name, id] : net.graph.params()) {
        const Tensor& t = net.graph.val(id);
        os << "param " << name << " " << t.shape.size();
        for (int d : t.shape) os << " " << d;
        os << "\n";
        os.write(reinterpret_cast<const char*>(t.data.data()),
                 static_cast<std::streamsize>(t.data.size() * sizeof(double)));
    }
    if (!os) throw FormatError("model: short write to '" + path + "'");
}

Model load_model(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("model: cannot open '" + path + "'");
    std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());

    size_t pos = 0;
    auto take_line = [&]() {
        size_t nl = bytes.find('\n', pos);
        if (nl == std::string::npos)
            throw FormatError("model: '" + path + "': unterminated line at byte " + std::to_string(pos));
        std::string line = bytes.substr(pos, nl - pos);
        pos = nl + 1;
        return line;
    };

    if (take_line() != "SKM1") throw FormatError("model: '" + path + "': bad magic at byte 0");

    std::string line = take_line();
    size_t cfg_len = 0;
    if (line.rfind("config ", 0) != 0 ||
        (cfg_len = std::stoull(line.substr(7))) > bytes.size() - pos)
        throw FormatError("model: '" + path + "': bad config header at byte " + std::to_string(pos));
    std::string cfg_text = bytes.substr(pos, cfg_len);
    pos += cfg_len;

    Model m;
    try {
        m.config = resolve_config(parse_config_text(cfg_text));
    } catch (const ConfigError& e) {
        throw FormatError("model: '" + path + "': embedded config invalid: " + e.what());
    }
    m.net = build_network(arch_from_config(m.config), m.config.seed);

    line = take_line();
    if (line.rfind("params ", 0) != 0)
        throw FormatError("model: '" + path + "': bad params header");
    size_t count = std::stoull(line.substr(7));
    if (count != m.net.graph.params().size())
        throw FormatError("model: '" + path + "': parameter count " + std::to_string(count) +
                          " does not match the architecture (" +
                          std::to_string(m.net.graph.params().size()) + ")");

    for (const auto& [name, id] : m.net.graph.params()) {
        std::istringstream hs(take_line());
        std::string tag, fname;
        size_t ndims = 0;
        if (!(hs >> tag >> fname >> ndims) || tag != "param")
            throw FormatError("model: '" + path + "': bad param header at byte " + std::to_string(pos));
        if (fname != name)
            throw FormatError("model: '" + path + "': parameter '" + fname +
                              "' does not match the architecture ('" + name + "')");
        Tensor& t = m.net.graph.val(id);
        if (ndims != t.shape.size())
            throw FormatError("model: '" + path + "': parameter '" + name + "' rank mismatch");
        for (size_t i = 0; i < ndims; ++i) {
            int d = 0;
            if (!(hs >> d) || d != t.shape[i])
                throw FormatError("model: '" + path + "': parameter '" + name + "' shape mismatch");
        }
        size_t nbytes = t.data.size() * sizeof(double);
        if (bytes.size() - pos < nbytes)
            throw FormatError("model: '" + path + "': truncated payload at byte " +
                              std::to_string(bytes.size()));
        std::memcpy(t.data.data(), bytes.data() + pos, nbytes);
        pos += nbytes;
    }
    if (pos != bytes.size())
        throw FormatError("model: '" + path + "': trailing bytes at offset " + std::to_string(pos));
    return m;
}

}  // namespace skel

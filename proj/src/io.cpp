#include "skel/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "skel/error.hpp"

static_assert(std::endian::native == std::endian::little, "file formats assume little-endian");

namespace skel {

namespace {

std::string read_all(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("io: cannot open '" + path + "'");
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

void write_all(const std::string& path, const std::string& bytes) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("io: cannot open '" + path + "' for writing");
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw FormatError("io: short write to '" + path + "'");
}

// PGM header token reader; skips whitespace and '#' comments.
int pgm_token(const std::string& s, size_t& pos, const std::string& path) {
    while (pos < s.size()) {
        if (std::isspace(static_cast<unsigned char>(s[pos]))) {
            ++pos;
        } else if (s[pos] == '#') {
            while (pos < s.size() && s[pos] != '\n') ++pos;
        } else {
            break;
        }
    }
    size_t start = pos;
    while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) ++pos;
    if (pos == start)
        throw FormatError("pgm: '" + path + "': expected integer at byte " + std::to_string(start));
    return std::stoi(s.substr(start, pos - start));
}

struct PgmData {
    int w, h;
    const unsigned char* pixels;
};

PgmData parse_pgm(const std::string& bytes, const std::string& path) {
    if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5')
        throw FormatError("pgm: '" + path + "': bad magic at byte 0");
    size_t pos = 2;
    int w = pgm_token(bytes, pos, path);
    int h = pgm_token(bytes, pos, path);
    int maxval = pgm_token(bytes, pos, path);
    if (w < 1 || h < 1) throw FormatError("pgm: '" + path + "': bad dimensions");
    if (maxval != 255) throw FormatError("pgm: '" + path + "': only maxval 255 is supported");
    ++pos;  // single whitespace byte after maxval
    size_t need = static_cast<size_t>(w) * h;
    if (bytes.size() < pos + need)
        throw FormatError("pgm: '" + path + "': truncated payload at byte " + std::to_string(bytes.size()) +
                          ", expected " + std::to_string(pos + need) + " bytes");
    return {w, h, reinterpret_cast<const unsigned char*>(bytes.data() + pos)};
}

}  // namespace

Raster read_pgm(const std::string& path) {
    std::string bytes = read_all(path);
    PgmData p = parse_pgm(bytes, path);
    Raster r(p.w, p.h);
    for (size_t i = 0; i < r.v.size(); ++i) r.v[i] = p.pixels[i] / 255.0;
    return r;
}

void write_pgm(const std::string& path, const Raster& r) {
    std::ostringstream os;
    os << "P5\n" << r.w << " " << r.h << "\n255\n";
    std::string out = os.str();
    out.reserve(out.size() + r.v.size());
    for (double v : r.v) {
        int b = static_cast<int>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
        out.push_back(static_cast<char>(b));
    }
    write_all(path, out);
}

Mask read_pgm_mask(const std::string& path) {
    std::string bytes = read_all(path);
    PgmData p = parse_pgm(bytes, path);
    Mask m(p.w, p.h);
    for (size_t i = 0; i < m.v.size(); ++i) m.v[i] = p.pixels[i] ? 1 : 0;
    return m;
}

void write_pgm_mask(const std::string& path, const Mask& m) {
    std::ostringstream os;
    os << "P5\n" << m.w << " " << m.h << "\n255\n";
    std::string out = os.str();
    out.reserve(out.size() + m.v.size());
    for (uint8_t v : m.v) out.push_back(static_cast<char>(v ? 255 : 0));
    write_all(path, out);
}

Raster read_skf(const std::string& path) {
    std::string bytes = read_all(path);
    static const std::string magic = "SKF1\n";
    if (bytes.size() < magic.size() || bytes.compare(0, magic.size(), magic) != 0)
        throw FormatError("skf: '" + path + "': bad magic at byte 0");
    size_t pos = magic.size();
    size_t nl = bytes.find('\n', pos);
    if (nl == std::string::npos)
        throw FormatError("skf: '" + path + "': unterminated header at byte " + std::to_string(pos));
    int w = 0, h = 0;
    {
        std::istringstream hs(bytes.substr(pos, nl - pos));
        if (!(hs >> w >> h) || w < 1 || h < 1)
            throw FormatError("skf: '" + path + "': bad dimensions at byte " + std::to_string(pos));
    }
    pos = nl + 1;
    size_t need = static_cast<size_t>(w) * h * 4;
    if (bytes.size() != pos + need)
        throw FormatError("skf: '" + path + "': truncated payload at byte " + std::to_string(bytes.size()) +
                          ", expected " + std::to_string(pos + need) + " bytes");
    Raster r(w, h);
    for (size_t i = 0; i < r.v.size(); ++i) {
        float f;
        std::memcpy(&f, bytes.data() + pos + 4 * i, 4);
        r.v[i] = static_cast<double>(f);
    }
    return r;
}

void write_skf(const std::string& path, const Raster& r) {
    for (double v : r.v) {
        if (!std::isfinite(v)) throw ArgError("skf: refusing to write non-finite value");
    }
    std::ostringstream os;
    os << "SKF1\n" << r.w << " " << r.h << "\n";
    std::string out = os.str();
    out.resize(out.size() + r.v.size() * 4);
    char* dst = out.data() + out.size() - r.v.size() * 4;
    for (size_t i = 0; i < r.v.size(); ++i) {
        float f = static_cast<float>(r.v[i]);
        std::memcpy(dst + 4 * i, &f, 4);
    }
    write_all(path, out);
}

}  // namespace skel

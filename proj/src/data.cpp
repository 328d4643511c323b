#include "skel/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "skel/error.hpp"
#include "skel/gt.hpp"
#include "skel/io.hpp"
#include "skel/rng.hpp"

namespace fs = std::filesystem;

namespace skel {

const char* shape_kind_name(ShapeKind k) {
    switch (k) {
        case ShapeKind::kBar: return "bar";
        case ShapeKind::kEllipse: return "ellipse";
        case ShapeKind::kLPoly: return "lpoly";
        case ShapeKind::kWedge: return "wedge";
    }
    return "unknown";
}

namespace {

struct Vec2 {
    double x, y;
};

double dist_point_segment(double px, double py, Vec2 a, Vec2 b) {
    double vx = b.x - a.x, vy = b.y - a.y;
    double len2 = vx * vx + vy * vy;
    double t = len2 > 0 ? ((px - a.x) * vx + (py - a.y) * vy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    double dx = px - (a.x + t * vx), dy = py - (a.y + t * vy);
    return std::hypot(dx, dy);
}

// signed "inside" margin of a capsule with linearly varying radius; > 0 inside
double wedge_margin(double px, double py, Vec2 a, Vec2 b, double ra, double rb) {
    // sample the spine densely, then refine around the best parameter
    double best = -1e30;
    double best_t = 0;
    const int steps = 64;
    for (int i = 0; i <= steps; ++i) {
        double t = static_cast<double>(i) / steps;
        double cx = a.x + t * (b.x - a.x), cy = a.y + t * (b.y - a.y);
        double m = (ra + t * (rb - ra)) - std::hypot(px - cx, py - cy);
        if (m > best) {
            best = m;
            best_t = t;
        }
    }
    double lo = std::max(0.0, best_t - 1.0 / steps), hi = std::min(1.0, best_t + 1.0 / steps);
    for (int it = 0; it < 40; ++it) {
        double t1 = lo + (hi - lo) / 3, t2 = hi - (hi - lo) / 3;
        auto m = [&](double t) {
            double cx = a.x + t * (b.x - a.x), cy = a.y + t * (b.y - a.y);
            return (ra + t * (rb - ra)) - std::hypot(px - cx, py - cy);
        };
        if (m(t1) < m(t2)) {
            lo = t1;
        } else {
            hi = t2;
        }
    }
    double t = 0.5 * (lo + hi);
    double cx = a.x + t * (b.x - a.x), cy = a.y + t * (b.y - a.y);
    return std::max(best, (ra + t * (rb - ra)) - std::hypot(px - cx, py - cy));
}

}  // namespace

Sample gen_shape(uint64_t seed, int canvas) {
    if (canvas < 32) throw ArgError("gen_shape: canvas must be >= 32, got " + std::to_string(canvas));
    Rng rng(seed);
    Sample s;
    s.seed = seed;
    s.kind = static_cast<ShapeKind>(rng.uniform_int(0, 3));
    s.mask = Mask(canvas, canvas);

    double c = canvas;
    double r_max = 0.36 * c;
    // log-uniform half-thickness so every rung of the scale ladder shows up
    double radius = std::exp(rng.uniform(std::log(2.5), std::log(r_max)));
    s.radius = radius;

    switch (s.kind) {
        case ShapeKind::kBar: {
            double margin = radius + 4;
            Vec2 a{rng.uniform(margin, c - margin), rng.uniform(margin, c - margin)};
            double ang = rng.uniform(0, 2 * M_PI);
            double len = rng.uniform(0.3 * c, 0.8 * c);
            Vec2 b{std::clamp(a.x + len * std::cos(ang), margin, c - margin),
                   std::clamp(a.y + len * std::sin(ang), margin, c - margin)};
            for (int y = 0; y < canvas; ++y) {
                for (int x = 0; x < canvas; ++x) {
                    if (dist_point_segment(x, y, a, b) <= radius) s.mask.at(x, y) = 1;
                }
            }
            break;
        }
        case ShapeKind::kEllipse: {
            double bax = std::min(radius * rng.uniform(1.5, 3.5), 0.44 * c);
            double bay = radius;
            double cx = rng.uniform(0.5 * c - (0.46 * c - bax), 0.5 * c + (0.46 * c - bax));
            double cy = rng.uniform(0.5 * c - (0.46 * c - bay), 0.5 * c + (0.46 * c - bay));
            double ang = rng.uniform(0, M_PI);
            double ca = std::cos(ang), sa = std::sin(ang);
            double lim = std::max(bax, bay) + 2;
            cx = std::clamp(cx, lim, c - lim);
            cy = std::clamp(cy, lim, c - lim);
            for (int y = 0; y < canvas; ++y) {
                for (int x = 0; x < canvas; ++x) {
                    double rx = (x - cx) * ca + (y - cy) * sa;
                    double ry = -(x - cx) * sa + (y - cy) * ca;
                    if (rx * rx / (bax * bax) + ry * ry / (bay * bay) <= 1.0) s.mask.at(x, y) = 1;
                }
            }
            break;
        }
        case ShapeKind::kLPoly: {
            // two overlapping axis-aligned rectangles sharing a corner
            double t1 = 2 * radius, t2 = 2 * radius * rng.uniform(0.6, 1.0);
            double x0 = rng.uniform(4, 0.4 * c), y0 = rng.uniform(4, 0.4 * c);
            double lx = rng.uniform(0.4 * c, c - 5 - x0);
            double ly = rng.uniform(0.4 * c, c - 5 - y0);
            t1 = std::min(t1, ly);
            t2 = std::min(t2, lx);
            for (int y = 0; y < canvas; ++y) {
                for (int x = 0; x < canvas; ++x) {
                    bool horiz = x >= x0 && x <= x0 + lx && y >= y0 && y <= y0 + t1;
                    bool vert = x >= x0 && x <= x0 + t2 && y >= y0 && y <= y0 + ly;
                    if (horiz || vert) s.mask.at(x, y) = 1;
                }
            }
            break;
        }
        case ShapeKind::kWedge: {
            double ra = radius, rb = std::max(1.5, radius * rng.uniform(0.25, 0.6));
            double margin = ra + 4;
            Vec2 a{rng.uniform(margin, c - margin), rng.uniform(margin, c - margin)};
            double ang = rng.uniform(0, 2 * M_PI);
            double len = rng.uniform(0.35 * c, 0.75 * c);
            Vec2 b{std::clamp(a.x + len * std::cos(ang), margin, c - margin),
                   std::clamp(a.y + len * std::sin(ang), margin, c - margin)};
            for (int y = 0; y < canvas; ++y) {
                for (int x = 0; x < canvas; ++x) {
                    if (wedge_margin(x, y, a, b, ra, rb) >= 0) s.mask.at(x, y) = 1;
                }
            }
            break;
        }
    }

    s.scale_map = scale_map_from_mask(s.mask);
    s.max_scale = *std::max_element(s.scale_map.v.begin(), s.scale_map.v.end());

    s.image = Raster(canvas, canvas);
    double fg = rng.uniform(0.62, 0.78), bg = rng.uniform(0.22, 0.38);
    double noise = 0.05;
    for (int y = 0; y < canvas; ++y) {
        for (int x = 0; x < canvas; ++x) {
            double base = s.mask.at(x, y) ? fg : bg;
            s.image.at(x, y) = std::clamp(base + rng.normal(0.0, noise), 0.0, 1.0);
        }
    }
    return s;
}

Sample augment(const Sample& in, uint64_t seed) {
    Rng rng(seed);
    static const double kFactors[3] = {0.8, 1.0, 1.2};
    double factor = kFactors[rng.uniform_int(0, 2)];
    bool flip = rng.uniform_int(0, 1) == 1;
    int quarter = rng.uniform_int(0, 3);
    return augment_with(in, factor, flip, quarter);
}

Sample augment_with(const Sample& in, double factor, bool flip, int quarter) {
    Sample out = in;
    if (factor != 1.0) {
        int nw = std::max(1, static_cast<int>(std::lround(in.image.w * factor)));
        int nh = std::max(1, static_cast<int>(std::lround(in.image.h * factor)));
        out.image = resize_bilinear(in.image, nw, nh);
        out.mask = resize_nearest(in.mask, nw, nh);
        out.scale_map = resize_nearest(in.scale_map, nw, nh);
        for (auto& v : out.scale_map.v) v *= factor;  // scale is a length
        out.max_scale = in.max_scale * factor;
    }
    if (flip) {
        out.image = flip_lr(out.image);
        out.mask = flip_lr(out.mask);
        out.scale_map = flip_lr(out.scale_map);
    }
    if (quarter != 0) {
        out.image = rot90(out.image, quarter);
        out.mask = rot90(out.mask, quarter);
        out.scale_map = rot90(out.scale_map, quarter);
    }
    return out;
}

std::string image_path(const std::string& dir, const std::string& id) {
    return dir + "/images/" + id + ".pgm";
}
std::string mask_path(const std::string& dir, const std::string& id) {
    return dir + "/masks/" + id + ".pgm";
}
std::string scale_path(const std::string& dir, const std::string& id) {
    return dir + "/scales/" + id + ".skf";
}

std::vector<DatasetEntry> write_dataset(const std::string& dir, int count, int canvas,
                                        uint64_t master_seed) {
    if (count < 1) throw ArgError("dataset: count must be >= 1");
    fs::create_directories(dir + "/images");
    fs::create_directories(dir + "/masks");
    fs::create_directories(dir + "/scales");

    std::vector<DatasetEntry> entries;
    std::ofstream man(dir + "/manifest.tsv");
    if (!man) throw FormatError("dataset: cannot write manifest in '" + dir + "'");
    man << "id\tseed\tkind\tmax_scale\n";
    for (int i = 0; i < count; ++i) {
        uint64_t seed = master_seed + static_cast<uint64_t>(i);
        Sample s = gen_shape(seed, canvas);
        char idbuf[16];
        std::snprintf(idbuf, sizeof idbuf, "%06d", i);
        std::string id = idbuf;
        write_pgm(image_path(dir, id), s.image);
        write_pgm_mask(mask_path(dir, id), s.mask);
        write_skf(scale_path(dir, id), s.scale_map);
        char row[128];
        std::snprintf(row, sizeof row, "%s\t%llu\t%s\t%.6f\n", id.c_str(),
                      static_cast<unsigned long long>(seed), shape_kind_name(s.kind), s.max_scale);
        man << row;
        entries.push_back({id, seed, shape_kind_name(s.kind), s.max_scale});
    }
    return entries;
}

std::vector<DatasetEntry> read_manifest(const std::string& dir) {
    std::ifstream is(dir + "/manifest.tsv");
    if (!is) throw FormatError("dataset: cannot open manifest in '" + dir + "'");
    std::string line;
    if (!std::getline(is, line) || line.rfind("id\t", 0) != 0)
        throw FormatError("dataset: malformed manifest header in '" + dir + "'");
    std::vector<DatasetEntry> entries;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        DatasetEntry e;
        std::string seed_s, scale_s;
        if (!std::getline(ls, e.id, '\t') || !std::getline(ls, seed_s, '\t') ||
            !std::getline(ls, e.kind, '\t') || !std::getline(ls, scale_s))
            throw FormatError("dataset: malformed manifest row '" + line + "'");
        e.seed = std::stoull(seed_s);
        e.max_scale = std::stod(scale_s);
        entries.push_back(e);
    }
    return entries;
}

}  // namespace skel

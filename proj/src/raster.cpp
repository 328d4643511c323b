#include "skel/raster.hpp"

#include <algorithm>
#include <cmath>

#include "skel/error.hpp"

namespace skel {

double sample_bilinear(const Raster& r, double x, double y) {
    x = std::clamp(x, 0.0, static_cast<double>(r.w - 1));
    y = std::clamp(y, 0.0, static_cast<double>(r.h - 1));
    int x0 = static_cast<int>(std::floor(x));
    int y0 = static_cast<int>(std::floor(y));
    int x1 = std::min(x0 + 1, r.w - 1);
    int y1 = std::min(y0 + 1, r.h - 1);
    double fx = x - x0, fy = y - y0;
    return (1 - fy) * ((1 - fx) * r.at(x0, y0) + fx * r.at(x1, y0)) +
           fy * ((1 - fx) * r.at(x0, y1) + fx * r.at(x1, y1));
}

Raster resize_bilinear(const Raster& r, int nw, int nh) {
    if (nw < 1 || nh < 1) throw ArgError("resize: target must be positive");
    Raster out(nw, nh);
    double sx = static_cast<double>(r.w) / nw;
    double sy = static_cast<double>(r.h) / nh;
    for (int y = 0; y < nh; ++y) {
        for (int x = 0; x < nw; ++x) {
            out.at(x, y) = sample_bilinear(r, (x + 0.5) * sx - 0.5, (y + 0.5) * sy - 0.5);
        }
    }
    return out;
}

namespace {
inline int nearest_src(int o, int n_out, int n_in) {
    int s = static_cast<int>((o + 0.5) * n_in / n_out);
    return std::min(s, n_in - 1);
}
}  // namespace

Raster resize_nearest(const Raster& r, int nw, int nh) {
    if (nw < 1 || nh < 1) throw ArgError("resize: target must be positive");
    Raster out(nw, nh);
    for (int y = 0; y < nh; ++y) {
        int sy = nearest_src(y, nh, r.h);
        for (int x = 0; x < nw; ++x) out.at(x, y) = r.at(nearest_src(x, nw, r.w), sy);
    }
    return out;
}

Mask resize_nearest(const Mask& m, int nw, int nh) {
    if (nw < 1 || nh < 1) throw ArgError("resize: target must be positive");
    Mask out(nw, nh);
    for (int y = 0; y < nh; ++y) {
        int sy = nearest_src(y, nh, m.h);
        for (int x = 0; x < nw; ++x) out.at(x, y) = m.at(nearest_src(x, nw, m.w), sy);
    }
    return out;
}

Raster flip_lr(const Raster& r) {
    Raster out(r.w, r.h);
    for (int y = 0; y < r.h; ++y) {
        for (int x = 0; x < r.w; ++x) out.at(x, y) = r.at(r.w - 1 - x, y);
    }
    return out;
}

Mask flip_lr(const Mask& m) {
    Mask out(m.w, m.h);
    for (int y = 0; y < m.h; ++y) {
        for (int x = 0; x < m.w; ++x) out.at(x, y) = m.at(m.w - 1 - x, y);
    }
    return out;
}

namespace {
template <typename T>
T rot90_impl(const T& src, int quarter_turns) {
    int q = ((quarter_turns % 4) + 4) % 4;
    if (q == 0) return src;
    T out;
    if (q == 2) {
        out = T(src.w, src.h);
        for (int y = 0; y < src.h; ++y) {
            for (int x = 0; x < src.w; ++x) out.at(x, y) = src.at(src.w - 1 - x, src.h - 1 - y);
        }
    } else {
        out = T(src.h, src.w);
        for (int y = 0; y < out.h; ++y) {
            for (int x = 0; x < out.w; ++x) {
                if (q == 1) {
                    out.at(x, y) = src.at(src.w - 1 - y, x);  // ccw
                } else {
                    out.at(x, y) = src.at(y, src.h - 1 - x);  // cw
                }
            }
        }
    }
    return out;
}
}  // namespace

Raster rot90(const Raster& r, int quarter_turns) { return rot90_impl(r, quarter_turns); }
Mask rot90(const Mask& m, int quarter_turns) { return rot90_impl(m, quarter_turns); }

}  // namespace skel

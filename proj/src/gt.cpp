#include "skel/gt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "skel/error.hpp"

namespace skel {

namespace {

constexpr double kInf = 1e20;

// 1-d squared distance transform (lower envelope of parabolas).
void dt1d(const std::vector<double>& f, std::vector<double>& d, int n, std::vector<int>& v,
          std::vector<double>& z) {
    int k = 0;
    v[0] = 0;
    z[0] = -kInf;
    z[1] = kInf;
    for (int q = 1; q < n; ++q) {
        double s = ((f[q] + static_cast<double>(q) * q) -
                    (f[v[k]] + static_cast<double>(v[k]) * v[k])) /
                   (2.0 * q - 2.0 * v[k]);
        while (s <= z[k]) {
            --k;
            s = ((f[q] + static_cast<double>(q) * q) -
                 (f[v[k]] + static_cast<double>(v[k]) * v[k])) /
                (2.0 * q - 2.0 * v[k]);
        }
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = kInf;
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
        while (z[k + 1] < q) ++k;
        double dq = q - v[k];
        d[q] = dq * dq + f[v[k]];
    }
}

}  // namespace

Raster distance_transform(const Mask& mask) {
    int w = mask.w, h = mask.h;
    Raster sq(w, h);
    for (size_t i = 0; i < mask.v.size(); ++i) sq.v[i] = mask.v[i] ? kInf : 0.0;

    int n = std::max(w, h);
    std::vector<double> f(n), d(n), z(n + 1);
    std::vector<int> v(n);
    for (int x = 0; x < w; ++x) {  // columns
        for (int y = 0; y < h; ++y) f[y] = sq.at(x, y);
        dt1d(f, d, h, v, z);
        for (int y = 0; y < h; ++y) sq.at(x, y) = d[y];
    }
    for (int y = 0; y < h; ++y) {  // rows
        for (int x = 0; x < w; ++x) f[x] = sq.at(x, y);
        dt1d(f, d, w, v, z);
        for (int x = 0; x < w; ++x) sq.at(x, y) = d[x];
    }
    for (auto& val : sq.v) val = val >= kInf ? 0.0 : std::sqrt(val);
    return sq;
}

Mask thin(const Mask& mask) {
    Mask s = mask;
    int w = s.w, h = s.h;
    auto P = [&](int x, int y) -> int {
        if (x < 0 || y < 0 || x >= w || y >= h) return 0;
        return s.at(x, y) ? 1 : 0;
    };
    std::vector<size_t> kill;
    bool changed = true;
    while (changed) {
        changed = false;
        for (int pass = 0; pass < 2; ++pass) {
            kill.clear();
            for (int y = 0; y < h; ++y) {
                for (int x = 0; x < w; ++x) {
                    if (!s.at(x, y)) continue;
                    int p2 = P(x, y - 1), p3 = P(x + 1, y - 1), p4 = P(x + 1, y);
                    int p5 = P(x + 1, y + 1), p6 = P(x, y + 1), p7 = P(x - 1, y + 1);
                    int p8 = P(x - 1, y), p9 = P(x - 1, y - 1);
                    int b = p2 + p3 + p4 + p5 + p6 + p7 + p8 + p9;
                    if (b < 2 || b > 6) continue;
                    int seq[9] = {p2, p3, p4, p5, p6, p7, p8, p9, p2};
                    int a = 0;
                    for (int i = 0; i < 8; ++i) {
                        if (seq[i] == 0 && seq[i + 1] == 1) ++a;
                    }
                    if (a != 1) continue;
                    if (pass == 0) {
                        if (p2 * p4 * p6 != 0 || p4 * p6 * p8 != 0) continue;
                    } else {
                        if (p2 * p4 * p8 != 0 || p2 * p6 * p8 != 0) continue;
                    }
                    kill.push_back(static_cast<size_t>(y) * w + x);
                }
            }
            if (!kill.empty()) changed = true;
            for (size_t i : kill) s.v[i] = 0;
        }
    }
    return s;
}

Raster scale_map_from_mask(const Mask& mask) {
    Raster out(mask.w, mask.h);
    bool any_fg = false, any_bg = false;
    for (uint8_t p : mask.v) {
        (p ? any_fg : any_bg) = true;
    }
    if (!any_fg || !any_bg) return out;
    Raster dist = distance_transform(mask);
    Mask skeleton = thin(mask);
    for (size_t i = 0; i < out.v.size(); ++i) {
        if (skeleton.v[i]) out.v[i] = dist.v[i];
    }
    return out;
}

QuantizedMap quantize(const Raster& scale, const std::vector<int>& ladder) {
    if (ladder.empty()) throw ArgError("quantize: empty ladder");
    for (size_t m = 0; m < ladder.size(); ++m) {
        if (ladder[m] <= 0 || (m > 0 && ladder[m] <= ladder[m - 1]))
            throw ArgError("quantize: ladder must be strictly increasing and positive");
    }
    QuantizedMap out(scale.w, scale.h);
    int M = static_cast<int>(ladder.size());
    for (size_t i = 0; i < scale.v.size(); ++i) {
        double s = scale.v[i];
        if (s <= 0.0 || s > ladder[M - 1]) continue;
        int m = 1;
        while (s > ladder[m - 1]) ++m;
        out.q[i] = m;
    }
    return out;
}

QuantizedMap so_target(const QuantizedMap& q, int m, TargetConvention conv) {
    if (m < 1) throw ArgError("so_target: class index must be >= 1");
    QuantizedMap out(q.w, q.h);
    for (size_t i = 0; i < q.q.size(); ++i) {
        int c = q.q[i];
        bool keep = conv == TargetConvention::kInclusive ? c <= m : c < m;
        out.q[i] = keep ? c : 0;
    }
    return out;
}

Raster to_raster(const QuantizedMap& q) {
    Raster out(q.w, q.h);
    for (size_t i = 0; i < q.q.size(); ++i) out.v[i] = static_cast<double>(q.q[i]);
    return out;
}

QuantizedMap quantized_from_raster(const Raster& r) {
    QuantizedMap out(r.w, r.h);
    for (size_t i = 0; i < r.v.size(); ++i) {
        double v = r.v[i];
        if (v < 0 || v != std::floor(v))
            throw ArgError("quantized map: non-integer class value " + std::to_string(v));
        out.q[i] = static_cast<int>(v);
    }
    return out;
}

}  // namespace skel

#pragma once

#include <cstdint>
#include <vector>

namespace skel {

/// Single-channel image, row-major doubles.
struct Raster {
    int w = 0, h = 0;
    std::vector<double> v;

    Raster() = default;
    Raster(int width, int height, double fill = 0.0)
        : w(width), h(height), v(static_cast<size_t>(width) * height, fill) {}

    double& at(int x, int y) { return v[static_cast<size_t>(y) * w + x]; }
    double at(int x, int y) const { return v[static_cast<size_t>(y) * w + x]; }
};

/// Binary raster; values are 0 or 1.
struct Mask {
    int w = 0, h = 0;
    std::vector<uint8_t> v;

    Mask() = default;
    Mask(int width, int height, uint8_t fill = 0)
        : w(width), h(height), v(static_cast<size_t>(width) * height, fill) {}

    uint8_t& at(int x, int y) { return v[static_cast<size_t>(y) * w + x]; }
    uint8_t at(int x, int y) const { return v[static_cast<size_t>(y) * w + x]; }
};

/// Bilinear sample with clamp-to-border, pixel centers at integer coords.
double sample_bilinear(const Raster& r, double x, double y);

Raster resize_bilinear(const Raster& r, int nw, int nh);
Raster resize_nearest(const Raster& r, int nw, int nh);
Mask resize_nearest(const Mask& m, int nw, int nh);

Raster flip_lr(const Raster& r);
Mask flip_lr(const Mask& m);

/// Rotate counter-clockwise by quarter turns (exact pixel permutation).
Raster rot90(const Raster& r, int quarter_turns);
Mask rot90(const Mask& m, int quarter_turns);

}  // namespace skel

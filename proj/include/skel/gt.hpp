#pragma once

#include <vector>

#include "skel/raster.hpp"

namespace skel {

/// Per-pixel integer quantized scale class in [0, M].
struct QuantizedMap {
    int w = 0, h = 0;
    std::vector<int> q;

    QuantizedMap() = default;
    QuantizedMap(int width, int height)
        : w(width), h(height), q(static_cast<size_t>(width) * height, 0) {}

    int& at(int x, int y) { return q[static_cast<size_t>(y) * w + x]; }
    int at(int x, int y) const { return q[static_cast<size_t>(y) * w + x]; }
};

enum class TargetConvention {
    kInclusive,  // keep q <= m (default)
    kStrict,     // keep q < m
};

/// Exact Euclidean distance from each foreground pixel to the nearest
/// background pixel (two-pass separable transform); 0 on background.
Raster distance_transform(const Mask& mask);

/// Iterative morphological thinning (Zhang-Suen), connectivity preserving.
Mask thin(const Mask& mask);

/// Skeleton scale map: thinning skeleton of the mask, valued with the exact
/// distance transform; 0 off the skeleton. A mask without any background
/// pixel has no boundary and yields an all-zero map.
Raster scale_map_from_mask(const Mask& mask);

/// q = m where ladder[m-1] < s <= ladder[m]; 0 for background or s beyond
/// the deepest rung.
QuantizedMap quantize(const Raster& scale, const std::vector<int>& ladder);

/// Supervision target of a head recognising classes 1..m: larger classes are
/// zeroed (inclusive keeps q == m, strict drops it).
QuantizedMap so_target(const QuantizedMap& q, int m, TargetConvention conv);

// Raster bridges, e.g. for SKF round trips (small class ids are exact in float32).
Raster to_raster(const QuantizedMap& q);
QuantizedMap quantized_from_raster(const Raster& r);

}  // namespace skel

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "skel/raster.hpp"

namespace skel {

enum class ShapeKind { kBar, kEllipse, kLPoly, kWedge };

const char* shape_kind_name(ShapeKind k);

struct Sample {
    Raster image;      // grayscale in [0,1]
    Mask mask;         // exact foreground
    Raster scale_map;  // skeleton pixels valued with their scale
    uint64_t seed = 0;
    ShapeKind kind = ShapeKind::kBar;
    double radius = 0.0;  // sampled half-thickness
    double max_scale = 0.0;
};

/// One random textured shape on a square canvas with its mask and skeleton
/// scale map. Deterministic in (seed, canvas).
Sample gen_shape(uint64_t seed, int canvas);

/// One choice from each family: resize (0.8, 1, 1.2), left-right flip,
/// rotation (0, 90, 180, 270). Scale values rescale with the resize factor
/// since scale is a length.
Sample augment(const Sample& s, uint64_t seed);

/// Deterministic augmentation with explicit choices; factor must be one of
/// the three resize steps, quarter counts 90-degree turns.
Sample augment_with(const Sample& s, double factor, bool flip, int quarter);

struct DatasetEntry {
    std::string id;
    uint64_t seed = 0;
    std::string kind;
    double max_scale = 0.0;
};

/// Writes <dir>/{images,masks,scales}/<id>.{pgm,pgm,skf} and manifest.tsv.
/// Sample k gets seed master_seed + k; even seeds are the training split.
std::vector<DatasetEntry> write_dataset(const std::string& dir, int count, int canvas,
                                        uint64_t master_seed);

std::vector<DatasetEntry> read_manifest(const std::string& dir);

inline bool is_train_seed(uint64_t seed) { return seed % 2 == 0; }

std::string image_path(const std::string& dir, const std::string& id);
std::string mask_path(const std::string& dir, const std::string& id);
std::string scale_path(const std::string& dir, const std::string& id);

}  // namespace skel

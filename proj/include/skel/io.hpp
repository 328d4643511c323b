#pragma once

#include <string>

#include "skel/raster.hpp"

namespace skel {

// Binary PGM (P5), maxval 255. Raster values are mapped from/to [0,1].
Raster read_pgm(const std::string& path);
void write_pgm(const std::string& path, const Raster& r);

// Masks: any nonzero PGM byte reads as 1; writes use 0/255.
Mask read_pgm_mask(const std::string& path);
void write_pgm_mask(const std::string& path, const Mask& m);

// SKF raster: "SKF1\n", ASCII "W H\n", then W*H little-endian float32
// row-major. Payload round-trips bit-exactly.
Raster read_skf(const std::string& path);
void write_skf(const std::string& path, const Raster& r);

}  // namespace skel

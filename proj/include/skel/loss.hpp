#pragma once

#include "skel/arch.hpp"
#include "skel/gt.hpp"
#include "skel/graph.hpp"
#include "skel/raster.hpp"
#include "skel/tensor.hpp"

namespace skel {

/// Balancing factor: fraction of non-background pixels in the target map.
double beta(const Tensor& target);
double beta(const QuantizedMap& target);

/// Appends per-side-output targets and balanced losses, the fused loss
/// against the full quantized map, and their unweighted total.
void attach_losses(Network& net, BetaConvention conv);

/// Skeleton response of a fused class distribution: 1 - p(background).
Raster response_map(const Tensor& fused_probs);

/// Copies a quantized map into a {1,1,H,W} target tensor.
void set_target(Tensor& t, const QuantizedMap& q);

}  // namespace skel

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "skel/raster.hpp"

namespace skel {

struct MatchCounts {
    int64_t tp = 0, fp = 0, fn = 0;
};

struct EvalReport {
    std::vector<double> thresholds;
    std::vector<double> precision, recall, f;
    std::vector<uint8_t> degenerate;  // tp+fp == 0 at this threshold
    double ods_threshold = 0.0;
    double ods_f = 0.0;
};

struct EvalOptions {
    double tol_abs = -1.0;      // matching tolerance in pixels; <= 0: use tol_frac
    double tol_frac = 0.0075;   // fraction of the image diagonal
    int threshold_count = 99;   // uniform over (0,1)
};

/// Non-maximal suppression: orientation from Sobel gradients of a
/// Gaussian-smoothed (sigma=1) copy, each pixel compared against its two
/// bilinear neighbours one pixel along the gradient; survivors keep their
/// value, everything else drops to 0.
Raster nms_thin(const Raster& response);

/// Greedy one-to-one matching in descending response order; a prediction
/// takes the nearest unmatched ground-truth pixel within `tol`.
MatchCounts match_maps(const Raster& pred, const Mask& gt, double tol);

std::vector<double> uniform_thresholds(int count);

/// Dataset-level PR sweep: counts are aggregated over all images per
/// threshold, the optimal-threshold F is reported as ODS.
EvalReport pr_curve(const std::vector<Raster>& thinned_responses, const std::vector<Mask>& gts,
                    const std::vector<double>& thresholds, const EvalOptions& opt);

double f_measure(double precision, double recall);
double match_tolerance(int w, int h, const EvalOptions& opt);

void write_report(const std::string& path, const EvalReport& report);
/// PR-curve plot as a small grayscale raster (recall on x, precision on y).
Raster render_pr_curve(const EvalReport& report, int size = 256);

}  // namespace skel

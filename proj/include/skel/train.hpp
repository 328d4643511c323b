#pragma once

#include <string>
#include <vector>

#include "skel/arch.hpp"
#include "skel/config.hpp"
#include "skel/raster.hpp"

namespace skel {

struct TrainOptions {
    int iters = 1000;
    std::string log_path;   // TSV loss log; empty: not written
    std::string model_out;  // model file; empty: not written
};

struct TrainResult {
    double initial_loss = 0.0;  // total loss at iteration 1
    double final_loss = 0.0;    // total loss at the last iteration
    std::vector<double> total_losses;
    std::vector<double> fused_losses;
    std::string log_text;  // full TSV text, schema: iter lr loss_total loss_fused loss_so_1..M
};

/// SGD over augmented even-seed samples of the dataset, batch size 1.
TrainResult train_model(const std::string& data_dir, const Config& cfg, const TrainOptions& opt);

/// Copies a grayscale image into the network input (values centered at 0).
void set_input_image(Network& net, const Raster& image);

/// Forward pass up to the fused distribution; returns 1 - p(background).
Raster predict_response(Network& net, const Raster& image);

/// Averages responses predicted at scales 0.5, 1 and 1.5.
Raster predict_multiscale(Network& net, const Raster& image);

}  // namespace skel

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "skel/graph.hpp"

namespace skel {

/// SGD with momentum and a stepped learning-rate decay:
///   v <- mu*v + g,  w <- w - lr*v
/// and lr <- lr*decay_factor after every decay_every steps.
struct SgdState {
    double learning_rate = 1e-3;
    double momentum = 0.9;
    int64_t iteration = 0;
    int64_t lr_decay_every = 1000;
    double lr_decay_factor = 0.1;
    std::map<std::string, std::vector<double>> velocity;

    /// One update over every parameter of the graph. Grads must be populated.
    void step(Graph& g);
};

}  // namespace skel

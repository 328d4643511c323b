#include "skel/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "skel/data.hpp"
#include "skel/error.hpp"
#include "skel/gt.hpp"
#include "skel/io.hpp"
#include "skel/loss.hpp"
#include "skel/model.hpp"
#include "skel/optim.hpp"
#include "skel/rng.hpp"

namespace skel {

void set_input_image(Network& net, const Raster& image) {
    Tensor& in = net.graph.val(net.input);
    int C = net.spec.in_channels;
    in.reshape({1, C, image.h, image.w});
    for (int c = 0; c < C; ++c) {
        for (int y = 0; y < image.h; ++y) {
            for (int x = 0; x < image.w; ++x) in.at(0, c, y, x) = image.at(x, y) - 0.5;
        }
    }
}

Raster predict_response(Network& net, const Raster& image) {
    set_input_image(net, image);
    net.graph.forward_to(net.fused_prob);
    return response_map(net.graph.val(net.fused_prob));
}

Raster predict_multiscale(Network& net, const Raster& image) {
    static const double kScales[3] = {0.5, 1.0, 1.5};
    Raster acc(image.w, image.h);
    int min_side = 1 << (static_cast<int>(net.spec.backbone.groups.size()) - 1);
    for (double s : kScales) {
        int nw = std::max(min_side, static_cast<int>(std::lround(image.w * s)));
        int nh = std::max(min_side, static_cast<int>(std::lround(image.h * s)));
        Raster r = predict_response(net, s == 1.0 ? image : resize_bilinear(image, nw, nh));
        if (r.w != image.w || r.h != image.h) r = resize_bilinear(r, image.w, image.h);
        for (size_t i = 0; i < acc.v.size(); ++i) acc.v[i] += r.v[i];
    }
    for (auto& v : acc.v) v /= 3.0;
    return acc;
}

TrainResult train_model(const std::string& data_dir, const Config& cfg_in, const TrainOptions& opt) {
    if (opt.iters < 1) throw ArgError("train: iteration count must be >= 1");
    Config cfg = resolve_config(cfg_in);
    Network net = build_network(arch_from_config(cfg), cfg.seed);
    attach_losses(net, cfg.beta_convention);

    // training split: even-seed samples, cached in memory
    auto entries = read_manifest(data_dir);
    std::vector<Sample> samples;
    for (const auto& e : entries) {
        if (!is_train_seed(e.seed)) continue;
        Sample s;
        s.image = read_pgm(image_path(data_dir, e.id));
        s.mask = read_pgm_mask(mask_path(data_dir, e.id));
        s.scale_map = read_skf(scale_path(data_dir, e.id));
        s.seed = e.seed;
        samples.push_back(std::move(s));
    }
    if (samples.empty()) throw ConfigError("train: no training samples (even seeds) in '" + data_dir + "'");

    SgdState sgd;
    sgd.learning_rate = cfg.lr;
    sgd.momentum = cfg.momentum;
    sgd.lr_decay_every = cfg.lr_decay_every;
    sgd.lr_decay_factor = cfg.lr_decay_factor;

    Rng order(Rng::mix(cfg.seed, 0x5eedu));
    int M = static_cast<int>(net.side_outputs.size());

    std::ostringstream log;
    log << "iter\tlr\tloss_total\tloss_fused";
    for (int m = 1; m <= M; ++m) log << "\tloss_so_" << m;
    log << "\n";

    TrainResult res;
    char buf[64];
    for (int it = 1; it <= opt.iters; ++it) {
        const Sample& base = samples[order.uniform_int(0, static_cast<int>(samples.size()) - 1)];
        Sample aug = augment(base, Rng::mix(cfg.seed, 0xa000000u + it));

        QuantizedMap q = quantize(aug.scale_map, net.ladder);
        for (int m = 0; m < M; ++m) {
            QuantizedMap g = so_target(q, net.side_outputs[m].class_count, cfg.quantization);
            set_target(net.graph.val(net.so_targets[m]), g);
        }
        set_target(net.graph.val(net.q_target), q);
        set_input_image(net, aug.image);

        net.graph.forward();
        double lr_used = sgd.learning_rate;
        double total = net.graph.val(net.total_loss).data[0];
        double fused = net.graph.val(net.fused_loss).data[0];
        net.graph.backward(net.total_loss);
        sgd.step(net.graph);

        res.total_losses.push_back(total);
        res.fused_losses.push_back(fused);
        log << it << "\t";
        std::snprintf(buf, sizeof buf, "%.17g", lr_used);
        log << buf << "\t";
        std::snprintf(buf, sizeof buf, "%.17g", total);
        log << buf << "\t";
        std::snprintf(buf, sizeof buf, "%.17g", fused);
        log << buf;
        for (int m = 0; m < M; ++m) {
            std::snprintf(buf, sizeof buf, "%.17g", net.graph.val(net.so_losses[m]).data[0]);
            log << "\t" << buf;
        }
        log << "\n";
    }
    res.initial_loss = res.total_losses.front();
    res.final_loss = res.total_losses.back();
    res.log_text = log.str();

    if (!opt.log_path.empty()) {
        std::ofstream os(opt.log_path);
        if (!os) throw FormatError("train: cannot open log '" + opt.log_path + "' for writing");
        os << res.log_text;
    }
    if (!opt.model_out.empty()) save_model(opt.model_out, net, cfg);
    return res;
}

}  // namespace skel

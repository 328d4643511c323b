#include "skel/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>

#include "skel/config.hpp"
#include "skel/data.hpp"
#include "skel/error.hpp"
#include "skel/eval.hpp"
#include "skel/io.hpp"
#include "skel/model.hpp"
#include "skel/train.hpp"

namespace fs = std::filesystem;

namespace skel {

namespace {

int run_guarded(const std::function<void()>& body) {
    try {
        body();
        return kExitOk;
    } catch (const ConfigError& e) {
        std::cerr << "E_CONFIG: " << e.what() << "\n";
        return kExitConfig;
    } catch (const FormatError& e) {
        std::cerr << "E_FORMAT: " << e.what() << "\n";
        return kExitFormat;
    } catch (const ArgError& e) {
        std::cerr << "E_USAGE: " << e.what() << "\n";
        return kExitUsage;
    } catch (const DimError& e) {
        std::cerr << "E_FORMAT: " << e.what() << "\n";
        return kExitFormat;
    } catch (const std::exception& e) {
        std::cerr << "E_INTERNAL: " << e.what() << "\n";
        return kExitInternal;
    }
}

uint64_t env_seed_or(uint64_t fallback) {
    const char* env = std::getenv("SKEL_SEED");
    if (!env || !*env) return fallback;
    try {
        return std::stoull(env);
    } catch (...) {
        throw ConfigError(std::string("config: bad SKEL_SEED value '") + env + "'");
    }
}

}  // namespace

int cmd_gen(const GenArgs& a) {
    return run_guarded([&] {
        if (a.out.empty()) throw ArgError("gen: --out is required");
        if (a.count < 1) throw ArgError("gen: --count must be >= 1");
        if (a.size < 32) throw ArgError("gen: --size must be >= 32, got " + std::to_string(a.size));
        uint64_t seed = env_seed_or(a.seed);
        auto entries = write_dataset(a.out, a.count, a.size, seed);
        int train = 0;
        for (const auto& e : entries) train += is_train_seed(e.seed) ? 1 : 0;
        std::cout << "generated " << entries.size() << " samples in " << a.out << " (" << train
                  << " train / " << entries.size() - train << " val by seed parity)\n";
    });
}

int cmd_train(const TrainArgs& a) {
    return run_guarded([&] {
        if (a.data.empty()) throw ArgError("train: --data is required");
        if (a.iters < 1) throw ArgError("train: --iters must be >= 1");
        Config cfg;
        if (!a.config_path.empty()) cfg = load_config(a.config_path);
        if (!a.arch.empty()) cfg.arch = a.arch;
        if (a.seed >= 0) cfg.seed = static_cast<uint64_t>(a.seed);
        cfg.seed = env_seed_or(cfg.seed);
        cfg = resolve_config(cfg);  // config errors surface before training

        TrainOptions opt;
        opt.iters = a.iters;
        opt.model_out = a.out;
        opt.log_path = a.log.empty() ? a.out + ".log.tsv" : a.log;
        TrainResult r = train_model(a.data, cfg, opt);
        std::printf("trained %d iterations: loss %.6g -> %.6g (model %s, log %s)\n", a.iters,
                    r.initial_loss, r.final_loss, a.out.c_str(), opt.log_path.c_str());
    });
}

namespace {

void predict_one(Model& m, const std::string& image_path_, const std::string& out_skf,
                 const std::string& out_pgm, bool multiscale) {
    Raster img = read_pgm(image_path_);
    Raster resp = multiscale ? predict_multiscale(m.net, img) : predict_response(m.net, img);
    write_skf(out_skf, resp);
    if (!out_pgm.empty()) write_pgm(out_pgm, resp);
}

}  // namespace

int cmd_predict(const PredictArgs& a) {
    return run_guarded([&] {
        if (a.model.empty()) throw ArgError("predict: --model is required");
        bool single = !a.image.empty();
        bool batch = !a.images_dir.empty();
        if (single == batch)
            throw ArgError("predict: exactly one of --image or --images is required");
        Model m = load_model(a.model);
        if (single) {
            if (a.out.empty()) throw ArgError("predict: --out is required with --image");
            predict_one(m, a.image, a.out, a.pgm, a.multiscale);
        } else {
            if (a.out_dir.empty()) throw ArgError("predict: --out-dir is required with --images");
            fs::create_directories(a.out_dir);
            std::vector<std::string> stems;
            for (const auto& entry : fs::directory_iterator(a.images_dir)) {
                if (entry.path().extension() == ".pgm") stems.push_back(entry.path().stem().string());
            }
            std::sort(stems.begin(), stems.end());
            if (stems.empty()) throw ArgError("predict: no .pgm images in '" + a.images_dir + "'");
            for (const auto& stem : stems) {
                predict_one(m, a.images_dir + "/" + stem + ".pgm", a.out_dir + "/" + stem + ".skf",
                            "", a.multiscale);
            }
            std::cout << "predicted " << stems.size() << " images into " << a.out_dir << "\n";
        }
    });
}

int cmd_eval(const EvalArgs& a) {
    return run_guarded([&] {
        if (a.pred_dir.empty() || a.gt_dir.empty())
            throw ArgError("eval: --pred and --gt are required");
        std::vector<std::string> stems;
        for (const auto& entry : fs::directory_iterator(a.pred_dir)) {
            if (entry.path().extension() == ".skf") stems.push_back(entry.path().stem().string());
        }
        std::sort(stems.begin(), stems.end());
        if (stems.empty()) throw ArgError("eval: no .skf predictions in '" + a.pred_dir + "'");

        std::vector<Raster> thinned;
        std::vector<Mask> gts;
        for (const auto& stem : stems) {
            std::string gt_file = a.gt_dir + "/" + stem + ".skf";
            if (!fs::exists(gt_file))
                throw FormatError("eval: no ground truth for id '" + stem + "' in '" + a.gt_dir + "'");
            Raster pred = read_skf(a.pred_dir + "/" + stem + ".skf");
            Raster gt_scale = read_skf(gt_file);
            Mask gt(gt_scale.w, gt_scale.h);
            for (size_t i = 0; i < gt.v.size(); ++i) gt.v[i] = gt_scale.v[i] > 0 ? 1 : 0;
            thinned.push_back(nms_thin(pred));
            gts.push_back(std::move(gt));
        }
        EvalOptions opt;
        opt.tol_abs = a.tol;
        opt.threshold_count = a.thresholds;
        EvalReport rep = pr_curve(thinned, gts, uniform_thresholds(a.thresholds), opt);
        fs::create_directories(a.out_dir);
        write_report(a.out_dir + "/report.tsv", rep);
        write_pgm(a.out_dir + "/pr.pgm", render_pr_curve(rep));
        std::printf("ods_f %.6f at threshold %.6f over %zu images (%s/report.tsv)\n", rep.ods_f,
                    rep.ods_threshold, stems.size(), a.out_dir.c_str());
    });
}

int cmd_rf(const RfArgs& a) {
    return run_guarded([&] {
        Config cfg;
        if (!a.config_path.empty()) cfg = load_config(a.config_path);
        if (!a.arch.empty()) cfg.arch = a.arch;
        cfg = resolve_config(cfg);
        Network net = build_network(arch_from_config(cfg), cfg.seed);
        std::printf("side_output\tlevel\tnode\tdeepest_group\treceptive_field\tclasses\toutput_stride\n");
        for (size_t m = 0; m < net.side_outputs.size(); ++m) {
            const auto& so = net.side_outputs[m];
            std::printf("so_%zu\t%d\t%d\t%d\t%d\t%d\t%d\n", m + 1, so.level, so.index + 1,
                        so.deepest_group, so.receptive_field, so.class_count, so.output_stride);
        }
        std::printf("ladder");
        for (int r : net.ladder) std::printf("\t%d", r);
        std::printf("\n");
    });
}

}  // namespace skel

// skeldet: synthetic-data object skeleton detection.
// Commands: gen, train, predict, eval, rf.

#include <iostream>

#include <CLI11.hpp>

#include "skel/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"object skeleton detection with scale-associated side-outputs"};
    app.require_subcommand(1);

    skel::GenArgs gen;
    auto* cgen = app.add_subcommand("gen", "generate a synthetic dataset");
    cgen->add_option("--out", gen.out, "output dataset directory")->required();
    cgen->add_option("--count", gen.count, "number of samples");
    cgen->add_option("--size", gen.size, "canvas size in pixels");
    cgen->add_option("--seed", gen.seed, "master seed");

    skel::TrainArgs train;
    auto* ctrain = app.add_subcommand("train", "train a model on a dataset");
    ctrain->add_option("--data", train.data, "dataset directory")->required();
    ctrain->add_option("--config", train.config_path, "configuration file");
    ctrain->add_option("--arch", train.arch, "architecture preset override");
    ctrain->add_option("--iters", train.iters, "SGD iterations");
    ctrain->add_option("--out", train.out, "output model file");
    ctrain->add_option("--log", train.log, "loss log TSV (default <out>.log.tsv)");
    ctrain->add_option("--seed", train.seed, "seed override");

    skel::PredictArgs pred;
    auto* cpred = app.add_subcommand("predict", "write skeleton response maps");
    cpred->add_option("--model", pred.model, "model file")->required();
    cpred->add_option("--image", pred.image, "single input image (PGM)");
    cpred->add_option("--out", pred.out, "single output response (SKF)");
    cpred->add_option("--pgm", pred.pgm, "optional PGM preview");
    cpred->add_option("--images", pred.images_dir, "directory of input images");
    cpred->add_option("--out-dir", pred.out_dir, "directory for batch responses");
    cpred->add_flag("--multiscale", pred.multiscale, "average over scales 0.5, 1, 1.5");

    skel::EvalArgs ev;
    auto* ceval = app.add_subcommand("eval", "score predictions against ground truth");
    ceval->add_option("--pred", ev.pred_dir, "directory of response SKFs")->required();
    ceval->add_option("--gt", ev.gt_dir, "directory of ground-truth scale SKFs")->required();
    ceval->add_option("--out", ev.out_dir, "output directory for report.tsv and pr.pgm");
    ceval->add_option("--tol", ev.tol, "matching tolerance in pixels (default 0.0075*diagonal)");
    ceval->add_option("--thresholds", ev.thresholds, "number of uniform thresholds");

    skel::RfArgs rf;
    auto* crf = app.add_subcommand("rf", "print side-output receptive fields and the scale ladder");
    crf->add_option("--config", rf.config_path, "configuration file");
    crf->add_option("--arch", rf.arch, "architecture preset");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "E_USAGE: " << e.what() << "\n";
        return skel::kExitUsage;
    }

    if (cgen->parsed()) return skel::cmd_gen(gen);
    if (ctrain->parsed()) return skel::cmd_train(train);
    if (cpred->parsed()) return skel::cmd_predict(pred);
    if (ceval->parsed()) return skel::cmd_eval(ev);
    if (crf->parsed()) return skel::cmd_rf(rf);
    std::cerr << "E_USAGE: no command given\n";
    return skel::kExitUsage;
}

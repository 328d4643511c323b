#pragma once

#include <cstdint>
#include <string>

namespace skel {

// Exit codes: 0 ok, 1 internal, 2 usage, 3 format, 4 config.
constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitUsage = 2;
constexpr int kExitFormat = 3;
constexpr int kExitConfig = 4;

struct GenArgs {
    std::string out;
    int count = 100;
    int size = 96;
    uint64_t seed = 1;
};

struct TrainArgs {
    std::string data;
    std::string config_path;  // optional
    std::string arch;         // optional preset override
    int iters = 1000;
    std::string out = "model.skm";
    std::string log;    // default: <out>.log.tsv
    int64_t seed = -1;  // optional override (< 0: unset)
};

struct PredictArgs {
    std::string model;
    std::string image;       // single-image mode
    std::string out;         // single-image output (.skf)
    std::string pgm;         // optional preview
    std::string images_dir;  // batch mode
    std::string out_dir;
    bool multiscale = false;
};

struct EvalArgs {
    std::string pred_dir;
    std::string gt_dir;
    std::string out_dir = ".";
    double tol = -1.0;  // absolute pixels; <= 0: 0.0075 * diagonal
    int thresholds = 99;
};

struct RfArgs {
    std::string config_path;
    std::string arch;
};

// Each command prints a single "E_<KIND>: reason" line to stderr on failure
// and returns the matching exit code.
int cmd_gen(const GenArgs& a);
int cmd_train(const TrainArgs& a);
int cmd_predict(const PredictArgs& a);
int cmd_eval(const EvalArgs& a);
int cmd_rf(const RfArgs& a);

}  // namespace skel

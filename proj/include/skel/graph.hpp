#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "skel/tensor.hpp"

namespace skel {

enum class Op {
    kInput,
    kParam,
    kConv2d,        // in: x, w[, b]
    kMaxPool2,      // stride-2 2x2 max, replicate-pads odd dims
    kUpsample,      // fixed bilinear transposed conv, weight-normalized
    kSum,           // element-wise sum of equal-shape inputs
    kMul,           // element-wise product of two equal-shape inputs
    kRelu,
    kSoftmax,       // over the channel axis, per pixel
    kReduceSum,     // sum of all elements, scalar out
    kFuse,          // per-class weighted sum of side-output distributions
    kBalancedLoss,  // in: probs, target; scalar out
    kSumScalars,
};

enum class BetaConvention {
    kHed,           // positives weighted (1-beta), background beta
    kPaperLiteral,  // positives weighted beta, background (1-beta)
};

struct NodeAttrs {
    int stride = 1;
    int pad = 0;
    int factor = 1;              // upsample
    int match_node = -1;         // upsample: crop output to this node's H,W
    BetaConvention beta = BetaConvention::kHed;
    std::vector<int> class_counts;  // fuse: classes recognised per input
};

struct Node {
    Op op;
    std::vector<int> in;
    NodeAttrs attrs;
};

/// Reverse-mode autodiff over a topologically ordered op tape. Node ids are
/// indices; each node owns exactly one output tensor. Shapes are re-inferred
/// on every forward pass, so one graph serves any input resolution.
///
/// Single-threaded by contract: a Graph may be moved between threads but
/// never shared mutably. Identical seed and config give bit-identical runs.
class Graph {
 public:
    int add_input(const std::vector<int>& shape);
    int add_param(const std::string& name, Tensor init);

    int conv2d(int x, int w, int b, int stride = 1, int pad = 0);  // b < 0: no bias
    int maxpool2(int x);
    int upsample_bilinear(int x, int factor, int match_node = -1);
    int eltwise_sum(const std::vector<int>& xs);
    int eltwise_mul(int a, int b);
    int relu(int x);
    int softmax_channels(int x);
    int reduce_sum(int x);
    int fuse_classes(const std::vector<int>& so_probs, const std::vector<int>& class_counts,
                     int weights);
    int balanced_softmax_loss(int probs, int target, BetaConvention conv);
    int sum_scalars(const std::vector<int>& xs);

    void forward();               // evaluates every node in order
    void forward_to(int node);    // evaluates nodes 0..node
    /// Populates grad of every tensor on a requires-grad path to the loss.
    /// Grads are zeroed first; within one call shared nodes accumulate (+=).
    void backward(int loss_node);
    void zero_grad();

    Tensor& val(int id) { return vals_[id]; }
    const Tensor& val(int id) const { return vals_[id]; }
    const Node& node(int id) const { return nodes_[id]; }
    int node_count() const { return static_cast<int>(nodes_.size()); }

    const std::vector<std::pair<std::string, int>>& params() const { return params_; }
    int param_node(const std::string& name) const;  // -1 if absent

    /// Hash of the node/edge list and parameter names+shapes (not values).
    uint64_t structural_hash() const;

    /// Post-op NaN/Inf checking; defaults on in debug builds only.
    bool finite_checks =
#ifdef NDEBUG
        false;
#else
        true;
#endif

 private:
    int add_node(Op op, std::vector<int> in, NodeAttrs attrs = {});
    void eval_node(int id);
    void backprop_node(int id);
    const std::vector<double>& upsample_norm(int id, int ch_h, int ch_w, int th, int tw);

    std::vector<Node> nodes_;
    std::vector<Tensor> vals_;
    std::vector<char> needs_grad_;
    std::vector<std::vector<int32_t>> pool_argmax_;
    struct UpCache {
        int h = -1, w = -1, th = -1, tw = -1;
        std::vector<double> norm;
    };
    std::vector<UpCache> up_cache_;
    std::vector<std::pair<std::string, int>> params_;
};

/// 1-d bilinear kernel used by kUpsample: size 2f - (f mod 2).
std::vector<double> bilinear_kernel_1d(int factor);

}  // namespace skel

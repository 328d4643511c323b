#include "skel/loss.hpp"

#include "skel/error.hpp"

namespace skel {

double beta(const Tensor& target) {
    if (target.numel() == 0) throw ArgError("beta: empty target");
    int64_t pos = 0;
    for (double v : target.data) {
        if (v != 0.0) ++pos;
    }
    return static_cast<double>(pos) / static_cast<double>(target.numel());
}

double beta(const QuantizedMap& target) {
    if (target.q.empty()) throw ArgError("beta: empty target");
    int64_t pos = 0;
    for (int v : target.q) {
        if (v != 0) ++pos;
    }
    return static_cast<double>(pos) / static_cast<double>(target.q.size());
}

void attach_losses(Network& net, BetaConvention conv) {
    if (net.has_losses) throw GraphError("attach_losses: losses already attached");
    Graph& g = net.graph;
    std::vector<int> terms;
    for (const auto& so : net.side_outputs) {
        int t = g.add_input({1, 1, 32, 32});
        int l = g.balanced_softmax_loss(so.fullres_node, t, conv);
        net.so_targets.push_back(t);
        net.so_losses.push_back(l);
        terms.push_back(l);
    }
    net.q_target = g.add_input({1, 1, 32, 32});
    net.fused_loss = g.balanced_softmax_loss(net.fused_prob, net.q_target, conv);
    terms.push_back(net.fused_loss);
    net.total_loss = g.sum_scalars(terms);
    net.has_losses = true;
}

Raster response_map(const Tensor& p) {
    if (p.shape.size() != 4 || p.shape[0] != 1)
        throw DimError("response_map: expected {1,C,H,W} distribution, got " + p.shape_str());
    int H = p.shape[2], W = p.shape[3];
    Raster out(W, H);
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) out.at(x, y) = 1.0 - p.at(0, 0, y, x);
    }
    return out;
}

void set_target(Tensor& t, const QuantizedMap& q) {
    t.reshape({1, 1, q.h, q.w});
    for (size_t i = 0; i < q.q.size(); ++i) t.data[i] = static_cast<double>(q.q[i]);
}

}  // namespace skel

#include "skel/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "skel/error.hpp"

namespace skel {

namespace {

int ceil_div(int a, int b) {
    // b > 0; works for negative a
    int q = a / b, r = a % b;
    return q + (r > 0 ? 1 : 0);
}

int floor_div(int a, int b) {
    int q = a / b, r = a % b;
    return q - (r < 0 ? 1 : 0);
}

void require_4d(const Tensor& t, const char* what) {
    if (t.shape.size() != 4) throw DimError(std::string(what) + ": expected 4-d tensor, got shape " + t.shape_str());
}

constexpr double kLogFloor = 1e-300;

}  // namespace

std::vector<double> bilinear_kernel_1d(int factor) {
    int k = 2 * factor - (factor % 2);
    double c = (2.0 * factor - 1 - (factor % 2)) / (2.0 * factor);
    std::vector<double> w(k);
    for (int i = 0; i < k; ++i) w[i] = 1.0 - std::abs(static_cast<double>(i) / factor - c);
    return w;
}

int Graph::add_node(Op op, std::vector<int> in, NodeAttrs attrs) {
    for (int i : in) {
        if (i < 0 || i >= node_count()) throw GraphError("graph: input id out of range");
    }
    nodes_.push_back(Node{op, std::move(in), std::move(attrs)});
    vals_.emplace_back();
    needs_grad_.push_back(0);
    pool_argmax_.emplace_back();
    up_cache_.emplace_back();
    return node_count() - 1;
}

int Graph::add_input(const std::vector<int>& shape) {
    int id = add_node(Op::kInput, {});
    vals_[id] = Tensor(shape);
    return id;
}

int Graph::add_param(const std::string& name, Tensor init) {
    for (const auto& [n, _] : params_) {
        if (n == name) throw GraphError("graph: duplicate parameter name '" + name + "'");
    }
    int id = add_node(Op::kParam, {});
    init.requires_grad = true;
    vals_[id] = std::move(init);
    params_.emplace_back(name, id);
    return id;
}

int Graph::param_node(const std::string& name) const {
    for (const auto& [n, id] : params_) {
        if (n == name) return id;
    }
    return -1;
}

int Graph::conv2d(int x, int w, int b, int stride, int pad) {
    if (stride < 1) throw ArgError("conv2d: stride must be >= 1");
    if (pad < 0) throw ArgError("conv2d: pad must be >= 0");
    NodeAttrs a;
    a.stride = stride;
    a.pad = pad;
    std::vector<int> in{x, w};
    if (b >= 0) in.push_back(b);
    return add_node(Op::kConv2d, std::move(in), a);
}

int Graph::maxpool2(int x) { return add_node(Op::kMaxPool2, {x}); }

int Graph::upsample_bilinear(int x, int factor, int match_node) {
    if (factor < 2) throw ArgError("upsample: factor must be >= 2");
    if ((factor & (factor - 1)) != 0) throw ArgError("upsample: factor must be a power of two");
    NodeAttrs a;
    a.factor = factor;
    a.match_node = match_node;
    return add_node(Op::kUpsample, {x}, a);
}

int Graph::eltwise_sum(const std::vector<int>& xs) {
    if (xs.empty()) throw ArgError("eltwise_sum: needs at least one input");
    return add_node(Op::kSum, xs);
}

int Graph::eltwise_mul(int a, int b) { return add_node(Op::kMul, {a, b}); }

int Graph::relu(int x) { return add_node(Op::kRelu, {x}); }

int Graph::softmax_channels(int x) { return add_node(Op::kSoftmax, {x}); }

int Graph::reduce_sum(int x) { return add_node(Op::kReduceSum, {x}); }

int Graph::fuse_classes(const std::vector<int>& so_probs, const std::vector<int>& class_counts,
                        int weights) {
    if (so_probs.empty()) throw ArgError("fuse: needs at least one side-output");
    if (so_probs.size() != class_counts.size())
        throw ArgError("fuse: class_counts size must match side-output count");
    NodeAttrs a;
    a.class_counts = class_counts;
    std::vector<int> in = so_probs;
    in.push_back(weights);
    return add_node(Op::kFuse, std::move(in), a);
}

int Graph::balanced_softmax_loss(int probs, int target, BetaConvention conv) {
    NodeAttrs a;
    a.beta = conv;
    return add_node(Op::kBalancedLoss, {probs, target}, a);
}

int Graph::sum_scalars(const std::vector<int>& xs) {
    if (xs.empty()) throw ArgError("sum_scalars: needs at least one input");
    return add_node(Op::kSumScalars, xs);
}

void Graph::forward() { forward_to(node_count() - 1); }

void Graph::forward_to(int last) {
    if (last < 0 || last >= node_count()) throw GraphError("forward_to: node id out of range");
    for (int id = 0; id <= last; ++id) {
        eval_node(id);
        if (finite_checks && nodes_[id].op != Op::kInput && nodes_[id].op != Op::kParam) {
            if (!vals_[id].all_finite())
                throw GraphError("forward: non-finite value at node " + std::to_string(id));
        }
    }
}

void Graph::zero_grad() {
    for (auto& t : vals_) t.zero_grad();
}

const std::vector<double>& Graph::upsample_norm(int id, int h, int w, int th, int tw) {
    UpCache& c = up_cache_[id];
    if (c.h == h && c.w == w && c.th == th && c.tw == tw) return c.norm;
    int f = nodes_[id].attrs.factor;
    auto k1 = bilinear_kernel_1d(f);
    int k = static_cast<int>(k1.size());
    int pad = f / 2;  // factors are even powers of two here
    c.norm.assign(static_cast<size_t>(th) * tw, 0.0);
    for (int iy = 0; iy < h; ++iy) {
        for (int ky = 0; ky < k; ++ky) {
            int oy = f * iy - pad + ky;
            if (oy < 0 || oy >= th) continue;
            for (int ix = 0; ix < w; ++ix) {
                for (int kx = 0; kx < k; ++kx) {
                    int ox = f * ix - pad + kx;
                    if (ox < 0 || ox >= tw) continue;
                    c.norm[static_cast<size_t>(oy) * tw + ox] += k1[ky] * k1[kx];
                }
            }
        }
    }
    c.h = h;
    c.w = w;
    c.th = th;
    c.tw = tw;
    return c.norm;
}

void Graph::eval_node(int id) {
    Node& nd = nodes_[id];
    Tensor& out = vals_[id];
    switch (nd.op) {
        case Op::kInput:
        case Op::kParam:
            needs_grad_[id] = vals_[id].requires_grad ? 1 : 0;
            return;
        default:
            break;
    }

    char ng = 0;
    for (int i : nd.in) ng |= needs_grad_[i];
    needs_grad_[id] = ng;

    switch (nd.op) {
        case Op::kConv2d: {
            const Tensor& x = vals_[nd.in[0]];
            const Tensor& w = vals_[nd.in[1]];
            require_4d(x, "conv2d input");
            if (w.shape.size() != 4) throw DimError("conv2d: kernel must be OIKK, got " + w.shape_str());
            int N = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3];
            int O = w.shape[0], I = w.shape[1], K = w.shape[2];
            if (w.shape[3] != K) throw DimError("conv2d: kernel spatial axes differ: " + w.shape_str());
            if (K % 2 == 0) throw ArgError("conv2d: kernel extent must be odd, got " + std::to_string(K));
            if (C != I)
                throw DimError("conv2d: input channel axis C=" + std::to_string(C) +
                               " does not match kernel input axis I=" + std::to_string(I));
            int s = nd.attrs.stride, p = nd.attrs.pad;
            int Ho = (H + 2 * p - K) / s + 1;
            int Wo = (W + 2 * p - K) / s + 1;
            if (Ho <= 0 || Wo <= 0)
                throw DimError("conv2d: output spatial axis would be empty for input " + x.shape_str());
            const Tensor* bias = nd.in.size() > 2 ? &vals_[nd.in[2]] : nullptr;
            if (bias && (bias->shape.size() != 1 || bias->shape[0] != O))
                throw DimError("conv2d: bias axis must be O=" + std::to_string(O) + ", got " +
                               bias->shape_str());
            out.reshape({N, O, Ho, Wo});
            for (int n = 0; n < N; ++n) {
                for (int o = 0; o < O; ++o) {
                    double* obase = &out.data[out.idx4(n, o, 0, 0)];
                    double b = bias ? bias->data[o] : 0.0;
                    for (int i = 0; i < Ho * Wo; ++i) obase[i] = b;
                    for (int ci = 0; ci < C; ++ci) {
                        for (int ky = 0; ky < K; ++ky) {
                            for (int kx = 0; kx < K; ++kx) {
                                double wv = w.at(o, ci, ky, kx);
                                if (wv == 0.0) continue;
                                int ylo = std::max(0, ceil_div(p - ky, s));
                                int yhi = std::min(Ho - 1, floor_div(H - 1 + p - ky, s));
                                int xlo = std::max(0, ceil_div(p - kx, s));
                                int xhi = std::min(Wo - 1, floor_div(W - 1 + p - kx, s));
                                for (int yo = ylo; yo <= yhi; ++yo) {
                                    const double* xrow = &x.data[x.idx4(n, ci, yo * s - p + ky, 0)];
                                    double* orow = obase + static_cast<int64_t>(yo) * Wo;
                                    int xi = xlo * s - p + kx;
                                    for (int xo = xlo; xo <= xhi; ++xo, xi += s) {
                                        orow[xo] += wv * xrow[xi];
                                    }
                                }
                            }
                        }
                    }
                }
            }
            break;
        }
        case Op::kMaxPool2: {
            const Tensor& x = vals_[nd.in[0]];
            require_4d(x, "maxpool2 input");
            int N = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3];
            if (H < 1 || W < 1) throw DimError("maxpool2: empty spatial axis in " + x.shape_str());
            int Ho = (H + 1) / 2, Wo = (W + 1) / 2;
            out.reshape({N, C, Ho, Wo});
            auto& amax = pool_argmax_[id];
            amax.assign(out.data.size(), 0);
            int64_t oi = 0;
            for (int n = 0; n < N; ++n) {
                for (int c = 0; c < C; ++c) {
                    for (int yo = 0; yo < Ho; ++yo) {
                        for (int xo = 0; xo < Wo; ++xo, ++oi) {
                            double best = -std::numeric_limits<double>::infinity();
                            int32_t arg = 0;
                            for (int dy = 0; dy < 2; ++dy) {
                                int yi = std::min(2 * yo + dy, H - 1);  // replicate-pad odd edge
                                for (int dx = 0; dx < 2; ++dx) {
                                    int xi = std::min(2 * xo + dx, W - 1);
                                    double v = x.at(n, c, yi, xi);
                                    if (v > best) {  // first-found wins ties
                                        best = v;
                                        arg = static_cast<int32_t>(x.idx4(n, c, yi, xi));
                                    }
                                }
                            }
                            out.data[oi] = best;
                            amax[oi] = arg;
                        }
                    }
                }
            }
            break;
        }
        case Op::kUpsample: {
            const Tensor& x = vals_[nd.in[0]];
            require_4d(x, "upsample input");
            int N = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3];
            int f = nd.attrs.factor;
            int th = f * H, tw = f * W;
            if (nd.attrs.match_node >= 0) {
                const Tensor& m = vals_[nd.attrs.match_node];
                require_4d(m, "upsample match node");
                th = m.shape[2];
                tw = m.shape[3];
                if (th > f * H || tw > f * W)
                    throw DimError("upsample: target " + m.shape_str() + " exceeds factor*" + x.shape_str());
            }
            auto k1 = bilinear_kernel_1d(f);
            int k = static_cast<int>(k1.size());
            int pad = f / 2;
            const auto& norm = upsample_norm(id, H, W, th, tw);
            out.reshape({N, C, th, tw});
            for (int n = 0; n < N; ++n) {
                for (int c = 0; c < C; ++c) {
                    double* ob = &out.data[out.idx4(n, c, 0, 0)];
                    const double* xb = &x.data[x.idx4(n, c, 0, 0)];
                    for (int iy = 0; iy < H; ++iy) {
                        for (int ky = 0; ky < k; ++ky) {
                            int oy = f * iy - pad + ky;
                            if (oy < 0 || oy >= th) continue;
                            for (int ix = 0; ix < W; ++ix) {
                                double v = xb[static_cast<int64_t>(iy) * W + ix];
                                if (v == 0.0) continue;
                                for (int kx = 0; kx < k; ++kx) {
                                    int ox = f * ix - pad + kx;
                                    if (ox < 0 || ox >= tw) continue;
                                    ob[static_cast<int64_t>(oy) * tw + ox] += v * k1[ky] * k1[kx];
                                }
                            }
                        }
                    }
                    for (int64_t i = 0; i < static_cast<int64_t>(th) * tw; ++i) ob[i] /= norm[i];
                }
            }
            break;
        }
        case Op::kSum: {
            const Tensor& first = vals_[nd.in[0]];
            for (size_t i = 1; i < nd.in.size(); ++i) {
                const Tensor& t = vals_[nd.in[i]];
                if (!t.same_shape(first))
                    throw DimError("eltwise_sum: shape " + first.shape_str() + " vs " + t.shape_str() +
                                   " at input " + std::to_string(i));
            }
            out.reshape(first.shape);
            for (int i : nd.in) {
                const Tensor& t = vals_[i];
                for (size_t j = 0; j < out.data.size(); ++j) out.data[j] += t.data[j];
            }
            break;
        }
        case Op::kMul: {
            const Tensor& a = vals_[nd.in[0]];
            const Tensor& b = vals_[nd.in[1]];
            if (!a.same_shape(b))
                throw DimError("eltwise_mul: shape " + a.shape_str() + " vs " + b.shape_str());
            out.reshape(a.shape);
            for (size_t j = 0; j < out.data.size(); ++j) out.data[j] = a.data[j] * b.data[j];
            break;
        }
        case Op::kRelu: {
            const Tensor& x = vals_[nd.in[0]];
            out.reshape(x.shape);
            for (size_t j = 0; j < out.data.size(); ++j) out.data[j] = x.data[j] > 0 ? x.data[j] : 0.0;
            break;
        }
        case Op::kReduceSum: {
            const Tensor& x = vals_[nd.in[0]];
            out.reshape({1});
            double s = 0;
            for (double v : x.data) s += v;
            out.data[0] = s;
            break;
        }
        case Op::kSoftmax: {
            const Tensor& x = vals_[nd.in[0]];
            require_4d(x, "softmax input");
            int N = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3];
            if (C < 2) throw DimError("softmax: channel axis must have >= 2 entries, got " + std::to_string(C));
            out.reshape(x.shape);
            int64_t plane = static_cast<int64_t>(H) * W;
            for (int n = 0; n < N; ++n) {
                const double* xb = &x.data[x.idx4(n, 0, 0, 0)];
                double* ob = &out.data[out.idx4(n, 0, 0, 0)];
                for (int64_t j = 0; j < plane; ++j) {
                    double mx = xb[j];
                    for (int c = 1; c < C; ++c) mx = std::max(mx, xb[c * plane + j]);
                    double sum = 0;
                    for (int c = 0; c < C; ++c) {
                        double e = std::exp(xb[c * plane + j] - mx);
                        ob[c * plane + j] = e;
                        sum += e;
                    }
                    for (int c = 0; c < C; ++c) ob[c * plane + j] /= sum;
                }
            }
            break;
        }
        case Op::kFuse: {
            int m_count = static_cast<int>(nd.in.size()) - 1;
            const Tensor& w = vals_[nd.in[m_count]];
            const Tensor& p0 = vals_[nd.in[0]];
            require_4d(p0, "fuse input");
            int N = p0.shape[0], H = p0.shape[2], W = p0.shape[3];
            int kmax = 0;
            for (int c : nd.attrs.class_counts) kmax = std::max(kmax, c);
            if (w.shape.size() != 2 || w.shape[0] != m_count || w.shape[1] != kmax + 1)
                throw DimError("fuse: weights must be [" + std::to_string(m_count) + "," +
                               std::to_string(kmax + 1) + "], got " + w.shape_str());
            out.reshape({N, kmax + 1, H, W});
            int64_t plane = static_cast<int64_t>(H) * W;
            for (int m = 0; m < m_count; ++m) {
                const Tensor& p = vals_[nd.in[m]];
                int km = nd.attrs.class_counts[m];
                if (p.shape[1] != km + 1)
                    throw DimError("fuse: side-output " + std::to_string(m) + " channel axis " +
                                   p.shape_str() + " does not match class count " + std::to_string(km));
                if (p.shape[2] != H || p.shape[3] != W)
                    throw DimError("fuse: side-output " + std::to_string(m) + " spatial axes " +
                                   p.shape_str() + " differ from " + p0.shape_str());
                for (int k = 0; k <= km; ++k) {
                    double wv = w.data[static_cast<size_t>(m) * (kmax + 1) + k];
                    const double* pb = &p.data[p.idx4(0, k, 0, 0)];
                    double* ob = &out.data[out.idx4(0, k, 0, 0)];
                    for (int64_t j = 0; j < plane; ++j) ob[j] += wv * pb[j];
                }
            }
            break;
        }
        case Op::kBalancedLoss: {
            const Tensor& p = vals_[nd.in[0]];
            const Tensor& t = vals_[nd.in[1]];
            require_4d(p, "loss probs");
            require_4d(t, "loss target");
            int C = p.shape[1], H = p.shape[2], W = p.shape[3];
            if (t.shape[2] != H || t.shape[3] != W)
                throw DimError("loss: target spatial axes " + t.shape_str() + " differ from probs " +
                               p.shape_str());
            int64_t plane = static_cast<int64_t>(H) * W;
            int64_t pos = 0;
            for (int64_t j = 0; j < plane; ++j) {
                if (t.data[j] != 0.0) ++pos;
            }
            double beta = static_cast<double>(pos) / static_cast<double>(plane);
            double pos_w, bg_w;
            if (nd.attrs.beta == BetaConvention::kPaperLiteral) {
                pos_w = beta;
                bg_w = 1.0 - beta;
            } else {
                pos_w = 1.0 - beta;
                bg_w = beta;
            }
            double loss = 0;
            for (int64_t j = 0; j < plane; ++j) {
                int cls = static_cast<int>(t.data[j]);
                if (cls < 0 || cls >= C)
                    throw ArgError("loss: target class " + std::to_string(cls) + " exceeds channel axis C=" +
                                   std::to_string(C));
                double pj = std::max(p.data[cls * plane + j], kLogFloor);
                loss -= (cls != 0 ? pos_w : bg_w) * std::log(pj);
            }
            out.reshape({1});
            out.data[0] = loss;
            break;
        }
        case Op::kSumScalars: {
            out.reshape({1});
            double s = 0;
            for (int i : nd.in) {
                const Tensor& t = vals_[i];
                if (t.numel() != 1) throw DimError("sum_scalars: input is not scalar: " + t.shape_str());
                s += t.data[0];
            }
            out.data[0] = s;
            break;
        }
        default:
            throw GraphError("eval: unhandled op");
    }
}

void Graph::backward(int loss_node) {
    if (loss_node < 0 || loss_node >= node_count()) throw GraphError("backward: node id out of range");
    if (vals_[loss_node].numel() != 1)
        throw ArgError("backward: loss node must be scalar, got shape " + vals_[loss_node].shape_str());
    zero_grad();
    vals_[loss_node].ensure_grad();
    vals_[loss_node].grad[0] = 1.0;
    for (int id = loss_node; id >= 0; --id) {
        if (!needs_grad_[id]) continue;
        if (vals_[id].grad.empty()) continue;  // not on a path to the loss
        backprop_node(id);
    }
}

void Graph::backprop_node(int id) {
    Node& nd = nodes_[id];
    Tensor& out = vals_[id];
    auto grad_of = [&](int i) -> Tensor& {
        vals_[i].ensure_grad();
        return vals_[i];
    };
    switch (nd.op) {
        case Op::kInput:
        case Op::kParam:
            return;
        case Op::kConv2d: {
            Tensor& x = vals_[nd.in[0]];
            Tensor& w = vals_[nd.in[1]];
            int N = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3];
            int O = w.shape[0], K = w.shape[2];
            int s = nd.attrs.stride, p = nd.attrs.pad;
            int Ho = out.shape[2], Wo = out.shape[3];
            bool dx = needs_grad_[nd.in[0]];
            bool dw = needs_grad_[nd.in[1]];
            if (dx) x.ensure_grad();
            if (dw) w.ensure_grad();
            for (int n = 0; n < N; ++n) {
                for (int o = 0; o < O; ++o) {
                    const double* gb = &out.grad[out.idx4(n, o, 0, 0)];
                    for (int ci = 0; ci < C; ++ci) {
                        for (int ky = 0; ky < K; ++ky) {
                            for (int kx = 0; kx < K; ++kx) {
                                int ylo = std::max(0, ceil_div(p - ky, s));
                                int yhi = std::min(Ho - 1, floor_div(H - 1 + p - ky, s));
                                int xlo = std::max(0, ceil_div(p - kx, s));
                                int xhi = std::min(Wo - 1, floor_div(W - 1 + p - kx, s));
                                double wv = w.at(o, ci, ky, kx);
                                double wacc = 0;
                                for (int yo = ylo; yo <= yhi; ++yo) {
                                    int yi = yo * s - p + ky;
                                    const double* grow = gb + static_cast<int64_t>(yo) * Wo;
                                    const double* xrow = &x.data[x.idx4(n, ci, yi, 0)];
                                    double* xgrow = dx ? &x.grad[x.idx4(n, ci, yi, 0)] : nullptr;
                                    int xi = xlo * s - p + kx;
                                    for (int xo = xlo; xo <= xhi; ++xo, xi += s) {
                                        double g = grow[xo];
                                        if (dw) wacc += g * xrow[xi];
                                        if (dx) xgrow[xi] += g * wv;
                                    }
                                }
                                if (dw) w.grad[w.idx4(o, ci, ky, kx)] += wacc;
                            }
                        }
                    }
                }
            }
            if (nd.in.size() > 2 && needs_grad_[nd.in[2]]) {
                Tensor& b = grad_of(nd.in[2]);
                for (int n = 0; n < N; ++n) {
                    for (int o = 0; o < O; ++o) {
                        const double* gb = &out.grad[out.idx4(n, o, 0, 0)];
                        double acc = 0;
                        for (int64_t j = 0; j < static_cast<int64_t>(Ho) * Wo; ++j) acc += gb[j];
                        b.grad[o] += acc;
                    }
                }
            }
            break;
        }
        case Op::kMaxPool2: {
            if (!needs_grad_[nd.in[0]]) break;
            Tensor& x = grad_of(nd.in[0]);
            const auto& amax = pool_argmax_[id];
            for (size_t j = 0; j < out.grad.size(); ++j) x.grad[amax[j]] += out.grad[j];
            break;
        }
        case Op::kUpsample: {
            if (!needs_grad_[nd.in[0]]) break;
            Tensor& x = grad_of(nd.in[0]);
            int N = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3];
            int f = nd.attrs.factor;
            int th = out.shape[2], tw = out.shape[3];
            auto k1 = bilinear_kernel_1d(f);
            int k = static_cast<int>(k1.size());
            int pad = f / 2;
            const auto& norm = up_cache_[id].norm;
            for (int n = 0; n < N; ++n) {
                for (int c = 0; c < C; ++c) {
                    const double* gb = &out.grad[out.idx4(n, c, 0, 0)];
                    double* xg = &x.grad[x.idx4(n, c, 0, 0)];
                    for (int iy = 0; iy < H; ++iy) {
                        for (int ix = 0; ix < W; ++ix) {
                            double acc = 0;
                            for (int ky = 0; ky < k; ++ky) {
                                int oy = f * iy - pad + ky;
                                if (oy < 0 || oy >= th) continue;
                                for (int kx = 0; kx < k; ++kx) {
                                    int ox = f * ix - pad + kx;
                                    if (ox < 0 || ox >= tw) continue;
                                    int64_t oj = static_cast<int64_t>(oy) * tw + ox;
                                    acc += gb[oj] / norm[oj] * k1[ky] * k1[kx];
                                }
                            }
                            xg[static_cast<int64_t>(iy) * W + ix] += acc;
                        }
                    }
                }
            }
            break;
        }
        case Op::kSum: {
            for (int i : nd.in) {
                if (!needs_grad_[i]) continue;
                Tensor& x = grad_of(i);
                for (size_t j = 0; j < out.grad.size(); ++j) x.grad[j] += out.grad[j];
            }
            break;
        }
        case Op::kMul: {
            const Tensor& a = vals_[nd.in[0]];
            const Tensor& b = vals_[nd.in[1]];
            if (needs_grad_[nd.in[0]]) {
                Tensor& x = grad_of(nd.in[0]);
                for (size_t j = 0; j < out.grad.size(); ++j) x.grad[j] += out.grad[j] * b.data[j];
            }
            if (needs_grad_[nd.in[1]]) {
                Tensor& x = grad_of(nd.in[1]);
                for (size_t j = 0; j < out.grad.size(); ++j) x.grad[j] += out.grad[j] * a.data[j];
            }
            break;
        }
        case Op::kRelu: {
            if (!needs_grad_[nd.in[0]]) break;
            Tensor& x = grad_of(nd.in[0]);
            for (size_t j = 0; j < out.grad.size(); ++j) {
                if (x.data[j] > 0) x.grad[j] += out.grad[j];
            }
            break;
        }
        case Op::kReduceSum: {
            if (!needs_grad_[nd.in[0]]) break;
            Tensor& x = grad_of(nd.in[0]);
            for (size_t j = 0; j < x.grad.size(); ++j) x.grad[j] += out.grad[0];
            break;
        }
        case Op::kSoftmax: {
            if (!needs_grad_[nd.in[0]]) break;
            Tensor& x = grad_of(nd.in[0]);
            int N = out.shape[0], C = out.shape[1], H = out.shape[2], W = out.shape[3];
            int64_t plane = static_cast<int64_t>(H) * W;
            for (int n = 0; n < N; ++n) {
                const double* pb = &out.data[out.idx4(n, 0, 0, 0)];
                const double* gb = &out.grad[out.idx4(n, 0, 0, 0)];
                double* xg = &x.grad[x.idx4(n, 0, 0, 0)];
                for (int64_t j = 0; j < plane; ++j) {
                    double dot = 0;
                    for (int c = 0; c < C; ++c) dot += gb[c * plane + j] * pb[c * plane + j];
                    for (int c = 0; c < C; ++c)
                        xg[c * plane + j] += pb[c * plane + j] * (gb[c * plane + j] - dot);
                }
            }
            break;
        }
        case Op::kFuse: {
            int m_count = static_cast<int>(nd.in.size()) - 1;
            Tensor& w = vals_[nd.in[m_count]];
            int kmax = out.shape[1] - 1;
            int64_t plane = static_cast<int64_t>(out.shape[2]) * out.shape[3];
            bool dwp = needs_grad_[nd.in[m_count]];
            if (dwp) w.ensure_grad();
            for (int m = 0; m < m_count; ++m) {
                Tensor& p = vals_[nd.in[m]];
                bool dp = needs_grad_[nd.in[m]];
                if (dp) p.ensure_grad();
                int km = nd.attrs.class_counts[m];
                for (int k = 0; k <= km; ++k) {
                    size_t wi = static_cast<size_t>(m) * (kmax + 1) + k;
                    double wv = w.data[wi];
                    const double* gb = &out.grad[out.idx4(0, k, 0, 0)];
                    const double* pb = &p.data[p.idx4(0, k, 0, 0)];
                    double* pg = dp ? &p.grad[p.idx4(0, k, 0, 0)] : nullptr;
                    double wacc = 0;
                    for (int64_t j = 0; j < plane; ++j) {
                        if (dwp) wacc += gb[j] * pb[j];
                        if (dp) pg[j] += gb[j] * wv;
                    }
                    if (dwp) w.grad[wi] += wacc;
                }
            }
            break;
        }
        case Op::kBalancedLoss: {
            if (!needs_grad_[nd.in[0]]) break;
            Tensor& p = grad_of(nd.in[0]);
            const Tensor& t = vals_[nd.in[1]];
            int H = p.shape[2], W = p.shape[3];
            int64_t plane = static_cast<int64_t>(H) * W;
            int64_t pos = 0;
            for (int64_t j = 0; j < plane; ++j) {
                if (t.data[j] != 0.0) ++pos;
            }
            double beta = static_cast<double>(pos) / static_cast<double>(plane);
            double pos_w, bg_w;
            if (nd.attrs.beta == BetaConvention::kPaperLiteral) {
                pos_w = beta;
                bg_w = 1.0 - beta;
            } else {
                pos_w = 1.0 - beta;
                bg_w = beta;
            }
            double g = out.grad[0];
            for (int64_t j = 0; j < plane; ++j) {
                int cls = static_cast<int>(t.data[j]);
                double pj = std::max(p.data[cls * plane + j], kLogFloor);
                p.grad[cls * plane + j] -= g * (cls != 0 ? pos_w : bg_w) / pj;
            }
            break;
        }
        case Op::kSumScalars: {
            for (int i : nd.in) {
                if (!needs_grad_[i]) continue;
                Tensor& x = grad_of(i);
                x.grad[0] += out.grad[0];
            }
            break;
        }
        default:
            throw GraphError("backward: unhandled op");
    }
}

uint64_t Graph::structural_hash() const {
    uint64_t h = 1469598103934665603ULL;
    auto mix = [&h](uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            h ^= (v >> (8 * i)) & 0xff;
            h *= 1099511628211ULL;
        }
    };
    mix(nodes_.size());
    for (const Node& nd : nodes_) {
        mix(static_cast<uint64_t>(nd.op));
        mix(nd.in.size());
        for (int i : nd.in) mix(static_cast<uint64_t>(i));
        mix(static_cast<uint64_t>(nd.attrs.stride));
        mix(static_cast<uint64_t>(nd.attrs.pad));
        mix(static_cast<uint64_t>(nd.attrs.factor));
        mix(static_cast<uint64_t>(nd.attrs.match_node + 1));
        mix(static_cast<uint64_t>(nd.attrs.beta));
        for (int c : nd.attrs.class_counts) mix(static_cast<uint64_t>(c));
    }
    mix(params_.size());
    for (const auto& [name, idp] : params_) {
        for (char c : name) mix(static_cast<uint64_t>(static_cast<unsigned char>(c)));
        mix(static_cast<uint64_t>(idp));
        for (int d : vals_[idp].shape) mix(static_cast<uint64_t>(d));
    }
    return h;
}

}  // namespace skel

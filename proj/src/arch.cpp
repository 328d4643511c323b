#include "skel/arch.hpp"

#include <algorithm>
#include <cmath>

#include "skel/error.hpp"

namespace skel {

namespace {

Tensor kaiming_kernel(Rng& rng, int out_ch, int in_ch, int k) {
    Tensor w({out_ch, in_ch, k, k});
    double sd = std::sqrt(2.0 / (static_cast<double>(in_ch) * k * k));
    for (auto& v : w.data) v = rng.normal(0.0, sd);
    return w;
}

// 1x1 conv with fresh parameters; linear (no relu), used for branches,
// adapters and side-output heads.
int conv1x1(Network& net, Rng& rng, int x, int in_ch, int out_ch, const std::string& base) {
    Graph& g = net.graph;
    int w = g.add_param(base + ".w", kaiming_kernel(rng, out_ch, in_ch, 1));
    int b = net.spec.conv_bias ? g.add_param(base + ".b", Tensor({out_ch})) : -1;
    return g.conv2d(x, w, b, 1, 0);
}

}  // namespace

void validate(const ArchSpec& spec) {
    int B = static_cast<int>(spec.backbone.groups.size());
    if (B < 2) throw ArgError("backbone: needs at least 2 groups, got " + std::to_string(B));
    if (spec.backbone.kernel < 1 || spec.backbone.kernel % 2 == 0)
        throw ArgError("backbone: kernel extent must be odd, got " + std::to_string(spec.backbone.kernel));
    for (const auto& grp : spec.backbone.groups) {
        if (grp.convs < 1) throw ArgError("backbone: each group needs at least one conv layer");
        if (grp.channels < 1) throw ArgError("backbone: group channels must be positive");
    }
    if (spec.branch_channels < 1) throw ArgError("arch: branch channels must be positive");
    if (spec.in_channels < 1) throw ArgError("arch: input channels must be positive");

    const auto& h = spec.hierarchy;
    if (h.srn_topology) return;  // fan_in/levels unused by the residual chain
    if (h.fan_in < 1) throw ArgError("hierarchy: fan-in must be >= 1");
    if (h.fan_in > B)
        throw ArgError("hierarchy: fan-in " + std::to_string(h.fan_in) + " exceeds group count " +
                       std::to_string(B));
    if (h.levels < 0) throw ArgError("hierarchy: levels must be >= 0");
    if (h.fan_in == 1) {
        if (h.levels != 0) throw ArgError("hierarchy: fan-in 1 requires levels = 0");
        if (!h.level0_sideoutputs)
            throw ArgError("hierarchy: fan-in 1 requires level-0 side-outputs");
    } else {
        int size = B;
        for (int l = 1; l <= h.levels; ++l) {
            size -= h.fan_in - 1;
            if (size < 1)
                throw ArgError("hierarchy: level " + std::to_string(l) + " would have " +
                               std::to_string(size) + " nodes (B=" + std::to_string(B) +
                               ", K=" + std::to_string(h.fan_in) + ")");
        }
        if (h.levels == 0 && !h.level0_sideoutputs)
            throw ArgError("hierarchy: no side-outputs (levels = 0 and level-0 heads disabled)");
    }
}

void build_backbone(Network& net, Rng& rng) {
    const auto& bb = net.spec.backbone;
    Graph& g = net.graph;
    net.input = g.add_input({1, net.spec.in_channels, 32, 32});
    int cur = net.input;
    int in_ch = net.spec.in_channels;
    int k = bb.kernel, pad = (k - 1) / 2;
    for (size_t gi = 0; gi < bb.groups.size(); ++gi) {
        if (gi > 0) cur = g.maxpool2(cur);
        net.group_layers.emplace_back();
        for (int ci = 0; ci < bb.groups[gi].convs; ++ci) {
            int ch = bb.groups[gi].channels;
            std::string base =
                "backbone.g" + std::to_string(gi + 1) + ".c" + std::to_string(ci + 1);
            int w = g.add_param(base + ".w", kaiming_kernel(rng, ch, in_ch, k));
            int b = net.spec.conv_bias ? g.add_param(base + ".b", Tensor({ch})) : -1;
            cur = g.relu(g.conv2d(cur, w, b, 1, pad));
            net.group_layers.back().push_back(cur);
            in_ch = ch;
        }
    }
}

void branch_level0(Network& net, Rng& rng) {
    Graph& g = net.graph;
    for (size_t gi = 0; gi < net.group_layers.size(); ++gi) {
        std::vector<int> branches;
        int in_ch = net.spec.backbone.groups[gi].channels;
        for (size_t ci = 0; ci < net.group_layers[gi].size(); ++ci) {
            std::string base = "branch.g" + std::to_string(gi + 1) + ".c" + std::to_string(ci + 1);
            branches.push_back(conv1x1(net, rng, net.group_layers[gi][ci], in_ch,
                                       net.spec.branch_channels, base));
        }
        net.level0.push_back(g.eltwise_sum(branches));
    }
}

void build_hierarchy(Network& net, Rng& rng) {
    Graph& g = net.graph;
    int B = static_cast<int>(net.level0.size());
    int ch = net.spec.branch_channels;

    if (net.spec.hierarchy.srn_topology) {
        // Deep-to-shallow residual chain: node_B = adapter(f_B),
        // node_i = adapter(f_i) + up2(adapter(node_{i+1})).
        std::vector<int> nodes(B, -1);
        for (int i = B - 1; i >= 0; --i) {
            std::string base = "srn.n" + std::to_string(i + 1);
            int own = conv1x1(net, rng, net.level0[i], ch, ch, base + ".own");
            if (i == B - 1) {
                nodes[i] = g.eltwise_sum({own});
            } else {
                int res = conv1x1(net, rng, nodes[i + 1], ch, ch, base + ".res");
                int res_up = g.upsample_bilinear(res, 2, own);
                nodes[i] = g.eltwise_sum({own, res_up});
            }
        }
        net.levels.push_back(nodes);
        return;
    }

    int fan = net.spec.hierarchy.fan_in;
    if (fan < 2 || net.spec.hierarchy.levels == 0) return;
    std::vector<int> prev = net.level0;
    for (int l = 1; l <= net.spec.hierarchy.levels; ++l) {
        int count = static_cast<int>(prev.size()) - fan + 1;
        std::vector<int> cur;
        for (int i = 0; i < count; ++i) {
            std::vector<int> adapted;
            for (int j = 0; j < fan; ++j) {
                std::string base = "adapter.l" + std::to_string(l) + ".n" + std::to_string(i + 1) +
                                   ".m" + std::to_string(j + 1);
                int a = conv1x1(net, rng, prev[i + j], ch, ch, base);
                if (j > 0) {
                    // member j sits 2^j deeper than the shallowest member
                    a = g.upsample_bilinear(a, 1 << j, adapted[0]);
                }
                adapted.push_back(a);
            }
            cur.push_back(g.eltwise_sum(adapted));
        }
        net.levels.push_back(cur);
        prev = cur;
    }
}

int receptive_field(const Graph& g, int node) {
    if (node < 0 || node >= g.node_count()) throw GraphError("receptive_field: node id out of range");
    struct Info {
        bool reachable = false;
        int rf = 0;
        int64_t jump = 0;
    };
    std::vector<Info> info(node + 1);
    for (int id = 0; id <= node; ++id) {
        const Node& nd = g.node(id);
        Info& out = info[id];
        auto from = [&](int i) -> const Info& { return info[i]; };
        switch (nd.op) {
            case Op::kInput:
                out = {true, 1, 1};
                break;
            case Op::kParam:
                break;  // unreachable from the input
            case Op::kConv2d: {
                const Info& x = from(nd.in[0]);
                if (!x.reachable) break;
                int k = g.val(nd.in[1]).shape[2];
                out.reachable = true;
                out.rf = x.rf + (k - 1) * static_cast<int>(x.jump);
                out.jump = x.jump * nd.attrs.stride;
                break;
            }
            case Op::kMaxPool2: {
                const Info& x = from(nd.in[0]);
                if (!x.reachable) break;
                out.reachable = true;
                out.rf = x.rf + static_cast<int>(x.jump);
                out.jump = x.jump * 2;
                break;
            }
            case Op::kUpsample: {
                const Info& x = from(nd.in[0]);
                if (!x.reachable) break;
                if (x.jump % nd.attrs.factor != 0)
                    throw GraphError("receptive_field: upsample factor does not divide the stride");
                out.reachable = true;
                out.rf = x.rf;
                out.jump = x.jump / nd.attrs.factor;
                break;
            }
            case Op::kSum:
            case Op::kSumScalars: {
                for (int i : nd.in) {
                    const Info& x = from(i);
                    if (!x.reachable) continue;
                    out.reachable = true;
                    out.rf = std::max(out.rf, x.rf);
                    out.jump = std::max(out.jump, x.jump);
                }
                break;
            }
            case Op::kFuse: {
                for (size_t i = 0; i + 1 < nd.in.size(); ++i) {
                    const Info& x = from(nd.in[i]);
                    if (!x.reachable) continue;
                    out.reachable = true;
                    out.rf = std::max(out.rf, x.rf);
                    out.jump = std::max(out.jump, x.jump);
                }
                break;
            }
            case Op::kRelu:
            case Op::kSoftmax:
            case Op::kBalancedLoss:
                out = from(nd.in[0]);
                break;
        }
    }
    if (!info[node].reachable)
        throw GraphError("receptive_field: node " + std::to_string(node) +
                         " is not reachable from an input");
    return info[node].rf;
}

std::vector<int> quantization_ladder(const Network& net) {
    std::vector<int> rfs;
    for (int n : net.level0) rfs.push_back(receptive_field(net.graph, n));
    for (const auto& lvl : net.levels) {
        for (int n : lvl) rfs.push_back(receptive_field(net.graph, n));
    }
    std::sort(rfs.begin(), rfs.end());
    rfs.erase(std::unique(rfs.begin(), rfs.end()), rfs.end());
    return rfs;
}

void attach_side_outputs(Network& net, Rng& rng) {
    Graph& g = net.graph;
    int B = static_cast<int>(net.level0.size());
    net.ladder = quantization_ladder(net);

    struct Sup {
        int node, level, index, stride, deepest;
    };
    std::vector<Sup> sups;
    if (net.spec.hierarchy.level0_sideoutputs) {
        for (int i = 0; i < B; ++i) sups.push_back({net.level0[i], 0, i, 1 << i, i + 1});
    }
    for (size_t l = 0; l < net.levels.size(); ++l) {
        for (size_t i = 0; i < net.levels[l].size(); ++i) {
            int deepest = net.spec.hierarchy.srn_topology
                              ? B
                              : static_cast<int>(i) +
                                    static_cast<int>(l + 1) * (net.spec.hierarchy.fan_in - 1) + 1;
            sups.push_back({net.levels[l][i], static_cast<int>(l + 1), static_cast<int>(i),
                            1 << i, deepest});
        }
    }

    for (const Sup& s : sups) {
        int rf = receptive_field(g, s.node);
        auto it = std::find(net.ladder.begin(), net.ladder.end(), rf);
        if (it == net.ladder.end())
            throw GraphError("side-output receptive field missing from the quantization ladder");
        int class_count = static_cast<int>(it - net.ladder.begin()) + 1;

        std::string base = "so.l" + std::to_string(s.level) + ".n" + std::to_string(s.index + 1);
        int logits = conv1x1(net, rng, s.node, net.spec.branch_channels, class_count + 1, base);
        int prob = g.softmax_channels(logits);
        int fullres = s.stride == 1 ? prob : g.upsample_bilinear(prob, s.stride, net.input);

        SideOutput so;
        so.feature_node = s.node;
        so.logits_node = logits;
        so.prob_node = prob;
        so.fullres_node = fullres;
        so.level = s.level;
        so.index = s.index;
        so.deepest_group = s.deepest;
        so.receptive_field = rf;
        so.class_count = class_count;
        so.output_stride = s.stride;
        so.name = "l" + std::to_string(s.level) + ".n" + std::to_string(s.index + 1);
        net.side_outputs.push_back(so);
    }
}

Network build_network(const ArchSpec& spec_in, uint64_t seed) {
    ArchSpec spec = spec_in;
    if (!spec.hierarchy.srn_topology && spec.hierarchy.fan_in == 1)
        spec.hierarchy.level0_sideoutputs = true;  // degenerates to independent heads
    validate(spec);

    Network net;
    net.spec = spec;
    Rng rng(seed);
    build_backbone(net, rng);
    branch_level0(net, rng);
    build_hierarchy(net, rng);
    attach_side_outputs(net, rng);

    Graph& g = net.graph;
    int m_count = static_cast<int>(net.side_outputs.size());
    int kmax = 0;
    for (const auto& so : net.side_outputs) kmax = std::max(kmax, so.class_count);

    // Initial credibility: average the side-outputs that recognise each class.
    Tensor w({m_count, kmax + 1});
    for (int k = 0; k <= kmax; ++k) {
        int cover = 0;
        for (const auto& so : net.side_outputs) {
            if (so.class_count >= k) ++cover;
        }
        for (int m = 0; m < m_count; ++m) {
            if (net.side_outputs[m].class_count >= k)
                w.data[static_cast<size_t>(m) * (kmax + 1) + k] = 1.0 / cover;
        }
    }
    net.fuse_weights = g.add_param("fuse.w", std::move(w));

    std::vector<int> probs, counts;
    for (const auto& so : net.side_outputs) {
        probs.push_back(so.fullres_node);
        counts.push_back(so.class_count);
    }
    net.fused_prenorm = g.fuse_classes(probs, counts, net.fuse_weights);
    net.fused_prob = g.softmax_channels(net.fused_prenorm);
    return net;
}

void apply_preset(ArchSpec& spec, const std::string& name) {
    auto& h = spec.hierarchy;
    int B = static_cast<int>(spec.backbone.groups.size());
    h.srn_topology = false;
    if (name == "fsds" || name == "kfuse-1") {
        h.fan_in = 1;
        h.levels = 0;
        h.level0_sideoutputs = true;
    } else if (name == "srn") {
        h.srn_topology = true;
        h.fan_in = 1;
        h.levels = 1;
        h.level0_sideoutputs = false;
    } else if (name == "hifi1") {
        h.fan_in = 2;
        h.levels = 1;
        h.level0_sideoutputs = false;
    } else if (name == "hifi2") {
        h.fan_in = 2;
        h.levels = 2;
        h.level0_sideoutputs = false;
    } else if (name == "direct-fuse") {
        h.fan_in = B;
        h.levels = 1;
        h.level0_sideoutputs = false;
    } else if (name.rfind("kfuse-", 0) == 0) {
        int k = 0;
        try {
            k = std::stoi(name.substr(6));
        } catch (...) {
            throw ArgError("unknown architecture preset '" + name + "'");
        }
        if (k < 1 || k > B)
            throw ArgError("kfuse preset: K must be in [1," + std::to_string(B) + "], got " +
                           std::to_string(k));
        h.fan_in = k;
        h.levels = 1;
        h.level0_sideoutputs = false;
    } else {
        throw ArgError("unknown architecture preset '" + name + "'");
    }
}

}  // namespace skel

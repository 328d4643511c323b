#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "skel/graph.hpp"
#include "skel/rng.hpp"

namespace skel {

struct GroupSpec {
    int convs = 2;
    int channels = 16;
};

struct BackboneSpec {
    std::vector<GroupSpec> groups;  // B >= 2 groups, stride-2 max-pool between
    int kernel = 3;                 // odd
};

struct HierarchySpec {
    int fan_in = 2;   // K: feature levels fused per integration step
    int levels = 1;   // L: integration levels (0 = side-outputs on raw features only)
    bool level0_sideoutputs = false;
    bool srn_topology = false;  // deep-to-shallow residual chain instead of pairwise fusion
};

struct ArchSpec {
    BackboneSpec backbone;
    HierarchySpec hierarchy;
    int branch_channels = 16;
    bool conv_bias = true;
    int in_channels = 1;
};

/// Metadata of one scale-associated side-output head.
struct SideOutput {
    int feature_node = -1;   // integrated feature the head sits on
    int logits_node = -1;    // 1x1 conv output, class_count+1 channels
    int prob_node = -1;      // softmax at native resolution
    int fullres_node = -1;   // probabilities upsampled to input resolution
    int level = 0;           // 0 = raw group feature
    int index = 0;           // position within its level, shallow first
    int deepest_group = 0;   // 1-based index of the deepest backbone group feeding it
    int receptive_field = 0;
    int class_count = 0;     // quantized classes this head recognises (K^m)
    int output_stride = 1;
    std::string name;
};

struct Network {
    Graph graph;
    ArchSpec spec;
    int input = -1;
    std::vector<std::vector<int>> group_layers;  // per group: post-relu conv nodes
    std::vector<int> level0;                     // fused branch feature per group
    std::vector<std::vector<int>> levels;        // integration nodes per level (1-based: levels[0] = level 1)
    std::vector<SideOutput> side_outputs;
    int fuse_weights = -1;
    int fused_prenorm = -1;  // weighted sum before renormalization
    int fused_prob = -1;     // softmax-normalized fused distribution
    std::vector<int> ladder;  // quantization ladder: deduplicated feature receptive fields

    // training attachments (present when losses were attached)
    bool has_losses = false;
    std::vector<int> so_targets;
    std::vector<int> so_losses;
    int q_target = -1;
    int fused_loss = -1;
    int total_loss = -1;
};

void validate(const ArchSpec& spec);

// Builder stages. Each appends to net.graph; call in order (build_network does).
void build_backbone(Network& net, Rng& rng);
void branch_level0(Network& net, Rng& rng);
void build_hierarchy(Network& net, Rng& rng);
void attach_side_outputs(Network& net, Rng& rng);

/// Full prediction network: backbone, branches, hierarchy, side-outputs and
/// the weighted class fusion. Deterministic in (spec, seed).
Network build_network(const ArchSpec& spec, uint64_t seed);

/// Receptive field in input pixels via r <- r + (k-1)*j, j <- j*s along the
/// deepest path; element-wise merges take the max over their inputs.
int receptive_field(const Graph& g, int node);

/// Strictly increasing deduplicated receptive fields of all hierarchy
/// feature nodes (level 0 upward); class m covers scales in (r[m-1], r[m]].
std::vector<int> quantization_ladder(const Network& net);

/// Named presets: fsds, srn, hifi1, hifi2, direct-fuse, kfuse-<K>.
/// Adjusts hierarchy fields of `spec` in place; throws ArgError on unknown names.
void apply_preset(ArchSpec& spec, const std::string& name);

}  // namespace skel

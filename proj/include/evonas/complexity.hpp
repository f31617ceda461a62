#pragma once

#include <cstdint>
#include <vector>

#include "evonas/genotype.hpp"

namespace evonas {

// Network skeleton around the searched blocks:
//   stem 3x3 conv -> N normal -> reduction -> N normal -> reduction -> N normal
//   -> global pool -> linear classifier
// Block k (1-based, stem is depth 0) is ch_init + k * ch_inc channels wide.
struct MacroConfig {
    int ch_init = 32;
    int ch_inc = 6;
    int n_repeat = 5;
    int input_hw = 32;
    int input_channels = 3;
    int num_classes = 10;

    int num_blocks() const { return 3 * n_repeat + 2; }
};

// Throws std::invalid_argument on non-positive fields or an input size not
// divisible by 4.
void check_macro(const MacroConfig& m);

struct TensorShape {
    int channels = 1;
    int height = 1;
    int width = 1;

    friend bool operator==(const TensorShape&, const TensorShape&) = default;
};

// FLOPs are multiply-accumulates: one MAC counts as one FLOP. Params count
// learnable weights only (convolutions without bias, classifier with bias);
// batch-norm affine terms are not counted.
struct CostReport {
    std::uint64_t flops = 0;
    std::uint64_t params = 0;

    CostReport& operator+=(const CostReport& o) {
        flops += o.flops;
        params += o.params;
        return *this;
    }
    friend CostReport operator+(CostReport a, const CostReport& b) { return a += b; }
    friend bool operator==(const CostReport&, const CostReport&) = default;

    double mega_flops() const { return static_cast<double>(flops) / 1e6; }
};

// Cost of one block edge. Per-op accounting (k = kernel, Ho x Wo = output
// spatial size, Cin/Cout = in/out channels):
//   identity           0 (stride 2 is a plain subsample)
//   max/avg pool 3x3   9 * C * Ho * Wo, no params
//   squeeze_excite     global pool + two 1x1 transforms (ratio 16) + rescale
//   lbc_kxk            fixed ternary kxk conv, half the weights non-zero, then a
//                      learnable 1x1; only the 1x1 has params
//   dil_conv_kxk       depthwise kxk (dilation 2) + pointwise, once
//   sep_conv_kxk       (depthwise kxk + pointwise) twice in series
//   conv_1x7_7x1       full 1x7 conv then full 7x1 conv
// Channel-preserving ops (identity, pools, squeeze_excite) require
// out_channels == in_shape.channels. Throws std::invalid_argument on an
// unknown op, a bad stride or a channel mismatch.
CostReport op_cost(OpCode op, const TensorShape& in_shape, int out_channels, int stride);
CostReport op_cost(int op_index, const TensorShape& in_shape, int out_channels, int stride);

// Whole-network cost: stem, 1x1 input preprocessing per block, every block
// edge, and the classifier. Additions joining node branches are not counted.
CostReport network_cost(const ArchitectureGenotype& g, const MacroConfig& m);

// Op indices [0, n_ops) sorted by op_cost FLOPs at `ref_shape` (stride 1,
// channel preserving); ties keep listing order.
std::vector<int> op_complexity_order(const SearchSpaceSpec& spec, const TensorShape& ref_shape);
std::vector<int> op_complexity_order(const SearchSpaceSpec& spec);

}  // namespace evonas

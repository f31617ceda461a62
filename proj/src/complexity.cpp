#include "evonas/complexity.hpp"

#include <algorithm>
#include <numeric>

namespace evonas {

namespace {

constexpr int kSeReduction = 16;
constexpr int kPoolArea = 9;

std::uint64_t u64(std::int64_t v) { return static_cast<std::uint64_t>(v); }

int out_size(int in, int stride) { return (in + stride - 1) / stride; }

// Depthwise kxk at `stride` followed by pointwise cin -> cout, computed on
// the output grid.
CostReport depthwise_pointwise(int kernel, int cin, int cout, std::uint64_t out_area) {
    const std::uint64_t kk = u64(kernel) * u64(kernel);
    return {kk * u64(cin) * out_area + u64(cin) * u64(cout) * out_area,
            kk * u64(cin) + u64(cin) * u64(cout)};
}

}  // namespace

void check_macro(const MacroConfig& m) {
    if (m.ch_init <= 0 || m.ch_inc < 0 || m.n_repeat <= 0 || m.input_hw <= 0 ||
        m.input_channels <= 0 || m.num_classes <= 0) {
        throw std::invalid_argument("macro config fields must be positive");
    }
    if (m.input_hw % 4 != 0) {
        throw std::invalid_argument("input_hw must be divisible by 4");
    }
}

CostReport op_cost(OpCode op, const TensorShape& in, int out_channels, int stride) {
    if (stride != 1 && stride != 2) throw std::invalid_argument("stride must be 1 or 2");
    if (in.channels <= 0 || in.height <= 0 || in.width <= 0 || out_channels <= 0) {
        throw std::invalid_argument("shape dimensions must be positive");
    }
    const int cin = in.channels;
    const int cout = out_channels;
    const std::uint64_t out_area = u64(out_size(in.height, stride)) * u64(out_size(in.width, stride));

    auto require_same_channels = [&] {
        if (cin != cout) throw std::invalid_argument("operation preserves channel count");
    };

    switch (op) {
        case OpCode::identity:
            require_same_channels();
            return {};
        case OpCode::max_pool_3x3:
        case OpCode::avg_pool_3x3:
            require_same_channels();
            return {u64(kPoolArea) * u64(cin) * out_area, 0};
        case OpCode::squeeze_excite: {
            require_same_channels();
            const std::uint64_t hidden = u64(std::max(1, cin / kSeReduction));
            const std::uint64_t fc = 2 * u64(cin) * hidden;
            return {2 * u64(cin) * out_area + fc, fc};
        }
        case OpCode::lbc_3x3:
        case OpCode::lbc_5x5: {
            const int k = op == OpCode::lbc_3x3 ? 3 : 5;
            // Non-zero ternary weights: floor(0.5 * numel).
            const std::uint64_t fixed_weights = (u64(k) * u64(k) * u64(cin) * u64(cin)) / 2;
            const std::uint64_t combine = u64(cin) * u64(cout);
            return {fixed_weights * out_area + combine * out_area, combine};
        }
        case OpCode::dil_conv_3x3:
            return depthwise_pointwise(3, cin, cout, out_area);
        case OpCode::dil_conv_5x5:
            return depthwise_pointwise(5, cin, cout, out_area);
        case OpCode::sep_conv_3x3:
        case OpCode::sep_conv_5x5:
        case OpCode::sep_conv_7x7: {
            const int k = op == OpCode::sep_conv_3x3 ? 3 : op == OpCode::sep_conv_5x5 ? 5 : 7;
            return depthwise_pointwise(k, cin, cin, out_area) +
                   depthwise_pointwise(k, cin, cout, out_area);
        }
        case OpCode::conv_1x7_7x1: {
            // 1x7 strides along width only; 7x1 then strides along height.
            const std::uint64_t mid_area = u64(in.height) * u64(out_size(in.width, stride));
            const std::uint64_t w1 = 7 * u64(cin) * u64(cin);
            const std::uint64_t w2 = 7 * u64(cin) * u64(cout);
            return {w1 * mid_area + w2 * out_area, w1 + w2};
        }
    }
    throw std::invalid_argument("unknown op code");
}

CostReport op_cost(int op_index, const TensorShape& in, int out_channels, int stride) {
    if (op_index < 0 || op_index >= kNumOps) throw std::invalid_argument("unknown op code");
    return op_cost(static_cast<OpCode>(op_index), in, out_channels, stride);
}

CostReport network_cost(const ArchitectureGenotype& g, const MacroConfig& m) {
    check_macro(m);
    CostReport total;

    // Stem: 3x3 conv, stride 1.
    total += {9 * u64(m.input_channels) * u64(m.ch_init) * u64(m.input_hw) * u64(m.input_hw),
              9 * u64(m.input_channels) * u64(m.ch_init)};

    struct Feature {
        int channels;
        int hw;
    };
    Feature prev_prev{m.ch_init, m.input_hw};
    Feature prev = prev_prev;

    int depth = 0;
    for (int stage = 0; stage < 3; ++stage) {
        std::vector<BlockKind> kinds(m.n_repeat, BlockKind::normal);
        if (stage < 2) kinds.push_back(BlockKind::reduction);
        for (BlockKind kind : kinds) {
            ++depth;
            const int width = m.ch_init + depth * m.ch_inc;
            const BlockGenotype& block = g.block(kind);

            // 1x1 preprocessing of both inputs to the block width, on the
            // grid of h[i-1]; h[i-2] is strided down when it is larger.
            const std::uint64_t in_area = u64(prev.hw) * u64(prev.hw);
            total += {u64(prev.channels) * u64(width) * in_area, u64(prev.channels) * u64(width)};
            total += {u64(prev_prev.channels) * u64(width) * in_area,
                      u64(prev_prev.channels) * u64(width)};

            const bool reduce = kind == BlockKind::reduction;
            const int out_hw = reduce ? prev.hw / 2 : prev.hw;
            auto edge_cost = [&](int input, int op) {
                const bool from_block_input = input < 2;
                if (reduce && from_block_input) {
                    return op_cost(op, {width, prev.hw, prev.hw}, width, 2);
                }
                return op_cost(op, {width, out_hw, out_hw}, width, 1);
            };
            for (const NodeGene& n : block.nodes) {
                total += edge_cost(n.in1, n.op1);
                total += edge_cost(n.in2, n.op2);
            }

            prev_prev = prev;
            prev = {static_cast<int>(loose_nodes(block).size()) * width, out_hw};
        }
    }

    // Global pooling is free; linear classifier with bias.
    total += {u64(prev.channels) * u64(m.num_classes),
              u64(prev.channels) * u64(m.num_classes) + u64(m.num_classes)};
    return total;
}

std::vector<int> op_complexity_order(const SearchSpaceSpec& spec, const TensorShape& ref) {
    std::vector<int> order(spec.n_ops);
    std::iota(order.begin(), order.end(), 0);
    std::vector<std::uint64_t> flops(spec.n_ops);
    for (int i = 0; i < spec.n_ops; ++i) flops[i] = op_cost(i, ref, ref.channels, 1).flops;
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return flops[a] < flops[b]; });
    return order;
}

std::vector<int> op_complexity_order(const SearchSpaceSpec& spec) {
    return op_complexity_order(spec, TensorShape{32, 32, 32});
}

}  // namespace evonas

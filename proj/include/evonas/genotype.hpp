#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "evonas/rng.hpp"

namespace evonas {

// Candidate layer operations, in listing order. The index doubles as the
// gene value and as the tie-break when ordering operations by cost.
enum class OpCode : std::uint8_t {
    identity = 0,
    max_pool_3x3,
    avg_pool_3x3,
    squeeze_excite,
    lbc_3x3,
    lbc_5x5,
    dil_conv_3x3,
    dil_conv_5x5,
    sep_conv_3x3,
    sep_conv_5x5,
    sep_conv_7x7,
    conv_1x7_7x1,
};

inline constexpr int kNumOps = 12;

std::string_view op_name(OpCode op);
std::optional<OpCode> op_from_name(std::string_view name);

struct SearchSpaceSpec {
    int nodes = 5;
    int n_ops = kNumOps;

    // Inputs of the node at 0-based position p range over [0, p + 1]:
    // 0 is h[i-2], 1 is h[i-1], v >= 2 is the output of node v - 2.
    int input_choices(int position) const { return position + 2; }
};

// One two-branch node: (input, op) pairs whose results are summed.
struct NodeGene {
    int in1 = 0;
    int op1 = 0;
    int in2 = 0;
    int op2 = 0;

    friend bool operator==(const NodeGene&, const NodeGene&) = default;
};

enum class BlockKind : std::uint8_t { normal, reduction };

struct BlockGenotype {
    BlockKind kind = BlockKind::normal;
    std::vector<NodeGene> nodes;

    friend bool operator==(const BlockGenotype&, const BlockGenotype&) = default;
};

struct ArchitectureGenotype {
    BlockGenotype normal{BlockKind::normal, {}};
    BlockGenotype reduction{BlockKind::reduction, {}};

    const BlockGenotype& block(BlockKind kind) const {
        return kind == BlockKind::normal ? normal : reduction;
    }
    BlockGenotype& block(BlockKind kind) {
        return kind == BlockKind::normal ? normal : reduction;
    }

    // Genes flattened as normal block then reduction block, 4 per node.
    std::vector<int> flatten() const;
    static ArchitectureGenotype unflatten(const std::vector<int>& genes, int nodes);

    friend bool operator==(const ArchitectureGenotype&, const ArchitectureGenotype&) = default;
};

// Every gene set to zero; always valid.
ArchitectureGenotype zero_genotype(const SearchSpaceSpec& spec);

// Inclusive upper bound of the flattened gene at `index` (lower bound is 0).
int gene_upper_bound(const SearchSpaceSpec& spec, std::size_t index);

struct Violation {
    BlockKind block;
    int node;
    std::string field;  // "in1", "op1", "in2", "op2" or "nodes"
    int value;
};

std::vector<Violation> validate(const ArchitectureGenotype& g, const SearchSpaceSpec& spec);
inline bool is_valid(const ArchitectureGenotype& g, const SearchSpaceSpec& spec) {
    return validate(g, spec).empty();
}

ArchitectureGenotype random_genotype(const SearchSpaceSpec& spec, Rng& rng);

// Number of distinct encodings for one block: ((n+1)!)^2 * n_ops^(2n).
boost::multiprecision::cpp_int block_space_size(const SearchSpaceSpec& spec);
// Both blocks.
boost::multiprecision::cpp_int search_space_size(const SearchSpaceSpec& spec);

// 128-bit digest of the canonical gene encoding.
struct Digest {
    std::array<std::uint8_t, 16> bytes{};

    std::string hex() const;
    static Digest from_hex(std::string_view hex);

    friend bool operator==(const Digest&, const Digest&) = default;
    friend auto operator<=>(const Digest&, const Digest&) = default;
};

struct DigestHash {
    std::size_t operator()(const Digest& d) const noexcept;
};

Digest canonical_hash(const ArchitectureGenotype& g);

// Decoded block graph. Vertex ids: 0 = h[i-2], 1 = h[i-1], 2 + k = node k.
struct DagEdge {
    int from;
    int to;  // node vertex id
    OpCode op;
};

struct BlockDag {
    int num_nodes = 0;
    std::vector<DagEdge> edges;
    std::vector<int> loose_nodes;  // 0-based node indices, ascending

    int concat_width() const { return static_cast<int>(loose_nodes.size()); }
    // Node indices in an order where every node follows its inputs; empty
    // if the graph is cyclic.
    std::vector<int> topological_order() const;
};

BlockDag decode_to_dag(const BlockGenotype& block);
// Nodes never consumed by a later node of the same block.
std::vector<int> loose_nodes(const BlockGenotype& block);

class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, int line, int column);
    int line() const { return line_; }
    int column() const { return column_; }

private:
    int line_;
    int column_;
};

// Two lines, normal block first:
//   (0,8,1,3) (1,0,2,4) ...
//   (0,1,1,1) ...
std::string serialize(const ArchitectureGenotype& g);
ArchitectureGenotype parse_genotype(std::string_view text);

}  // namespace evonas

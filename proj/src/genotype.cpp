#include "evonas/genotype.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstring>
#include <sstream>

#include <sodium.h>

namespace evonas {

namespace {

constexpr std::array<std::string_view, kNumOps> kOpNames = {
    "identity",     "max_pool_3x3", "avg_pool_3x3", "squeeze_excite",
    "lbc_3x3",      "lbc_5x5",      "dil_conv_3x3", "dil_conv_5x5",
    "sep_conv_3x3", "sep_conv_5x5", "sep_conv_7x7", "conv_1x7_7x1",
};

constexpr std::array<std::string_view, 4> kFieldNames = {"in1", "op1", "in2", "op2"};

void validate_block(const BlockGenotype& block, const SearchSpaceSpec& spec,
                    std::vector<Violation>& out) {
    if (static_cast<int>(block.nodes.size()) != spec.nodes) {
        out.push_back({block.kind, -1, "nodes", static_cast<int>(block.nodes.size())});
    }
    for (int p = 0; p < static_cast<int>(block.nodes.size()); ++p) {
        const NodeGene& n = block.nodes[p];
        const std::array<int, 4> values = {n.in1, n.op1, n.in2, n.op2};
        for (int f = 0; f < 4; ++f) {
            const int upper = (f % 2 == 0) ? spec.input_choices(p) - 1 : spec.n_ops - 1;
            if (values[f] < 0 || values[f] > upper) {
                out.push_back({block.kind, p, std::string(kFieldNames[f]), values[f]});
            }
        }
    }
}

BlockGenotype random_block(BlockKind kind, const SearchSpaceSpec& spec, Rng& rng) {
    BlockGenotype b{kind, {}};
    b.nodes.reserve(spec.nodes);
    for (int p = 0; p < spec.nodes; ++p) {
        const int in_hi = spec.input_choices(p) - 1;
        NodeGene n;
        n.in1 = static_cast<int>(rng.uniform_int(0, in_hi));
        n.op1 = static_cast<int>(rng.uniform_int(0, spec.n_ops - 1));
        n.in2 = static_cast<int>(rng.uniform_int(0, in_hi));
        n.op2 = static_cast<int>(rng.uniform_int(0, spec.n_ops - 1));
        b.nodes.push_back(n);
    }
    return b;
}

void append_block(std::ostringstream& os, const BlockGenotype& b) {
    for (std::size_t i = 0; i < b.nodes.size(); ++i) {
        const NodeGene& n = b.nodes[i];
        if (i) os << ' ';
        os << '(' << n.in1 << ',' << n.op1 << ',' << n.in2 << ',' << n.op2 << ')';
    }
}

class GenotypeParser {
public:
    explicit GenotypeParser(std::string_view text) : text_(text) {}

    ArchitectureGenotype parse() {
        if (text_.find_first_not_of(" \t\r\n") == std::string_view::npos) {
            fail("empty genotype text");
        }
        ArchitectureGenotype g;
        g.normal.nodes = parse_line();
        expect_line_break();
        g.reduction.nodes = parse_line();
        skip_blank();
        if (pos_ < text_.size()) fail("unexpected trailing content");
        if (g.normal.nodes.size() != g.reduction.nodes.size()) {
            fail("blocks have different node counts");
        }
        return g;
    }

private:
    [[noreturn]] void fail(const std::string& msg) const {
        throw ParseError(msg, line_, column());
    }

    int column() const { return static_cast<int>(pos_ - line_start_) + 1; }

    void skip_spaces() {
        while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t' || text_[pos_] == '\r')) ++pos_;
    }

    void skip_blank() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) {
            if (text_[pos_] == '\n') new_line();
            else ++pos_;
        }
    }

    void new_line() {
        ++pos_;
        ++line_;
        line_start_ = pos_;
    }

    void expect(char c) {
        skip_spaces();
        if (pos_ >= text_.size() || text_[pos_] != c) {
            fail(std::string("expected '") + c + "'");
        }
        ++pos_;
    }

    void expect_line_break() {
        skip_spaces();
        if (pos_ >= text_.size() || text_[pos_] != '\n') fail("expected line break after block");
        new_line();
    }

    int parse_int() {
        skip_spaces();
        int value = 0;
        const char* first = text_.data() + pos_;
        const char* last = text_.data() + text_.size();
        auto [ptr, ec] = std::from_chars(first, last, value);
        if (ec != std::errc() || ptr == first) fail("expected integer");
        pos_ += static_cast<std::size_t>(ptr - first);
        return value;
    }

    std::vector<NodeGene> parse_line() {
        std::vector<NodeGene> nodes;
        skip_spaces();
        while (pos_ < text_.size() && text_[pos_] == '(') {
            NodeGene n;
            expect('(');
            n.in1 = parse_int();
            expect(',');
            n.op1 = parse_int();
            expect(',');
            n.in2 = parse_int();
            expect(',');
            n.op2 = parse_int();
            expect(')');
            nodes.push_back(n);
            skip_spaces();
        }
        if (nodes.empty()) fail("expected '(' to start a node");
        return nodes;
    }

    std::string_view text_;
    std::size_t pos_ = 0;
    std::size_t line_start_ = 0;
    int line_ = 1;
};

}  // namespace

std::string_view op_name(OpCode op) {
    const auto i = static_cast<std::size_t>(op);
    if (i >= kOpNames.size()) throw std::out_of_range("unknown op code");
    return kOpNames[i];
}

std::optional<OpCode> op_from_name(std::string_view name) {
    for (std::size_t i = 0; i < kOpNames.size(); ++i) {
        if (kOpNames[i] == name) return static_cast<OpCode>(i);
    }
    return std::nullopt;
}

std::vector<int> ArchitectureGenotype::flatten() const {
    std::vector<int> genes;
    genes.reserve(4 * (normal.nodes.size() + reduction.nodes.size()));
    for (const BlockGenotype* b : {&normal, &reduction}) {
        for (const NodeGene& n : b->nodes) {
            genes.insert(genes.end(), {n.in1, n.op1, n.in2, n.op2});
        }
    }
    return genes;
}

ArchitectureGenotype ArchitectureGenotype::unflatten(const std::vector<int>& genes, int nodes) {
    if (genes.size() != static_cast<std::size_t>(8 * nodes)) {
        throw std::invalid_argument("gene vector length does not match node count");
    }
    ArchitectureGenotype g;
    std::size_t k = 0;
    for (BlockGenotype* b : {&g.normal, &g.reduction}) {
        b->nodes.resize(nodes);
        for (NodeGene& n : b->nodes) {
            n = {genes[k], genes[k + 1], genes[k + 2], genes[k + 3]};
            k += 4;
        }
    }
    return g;
}

ArchitectureGenotype zero_genotype(const SearchSpaceSpec& spec) {
    ArchitectureGenotype g;
    g.normal.nodes.assign(spec.nodes, NodeGene{});
    g.reduction.nodes.assign(spec.nodes, NodeGene{});
    return g;
}

int gene_upper_bound(const SearchSpaceSpec& spec, std::size_t index) {
    const std::size_t within_block = index % (4 * static_cast<std::size_t>(spec.nodes));
    const int position = static_cast<int>(within_block / 4);
    const bool is_input = (within_block % 4) % 2 == 0;
    return is_input ? spec.input_choices(position) - 1 : spec.n_ops - 1;
}

std::vector<Violation> validate(const ArchitectureGenotype& g, const SearchSpaceSpec& spec) {
    std::vector<Violation> out;
    validate_block(g.normal, spec, out);
    validate_block(g.reduction, spec, out);
    return out;
}

ArchitectureGenotype random_genotype(const SearchSpaceSpec& spec, Rng& rng) {
    ArchitectureGenotype g;
    g.normal = random_block(BlockKind::normal, spec, rng);
    g.reduction = random_block(BlockKind::reduction, spec, rng);
    return g;
}

boost::multiprecision::cpp_int block_space_size(const SearchSpaceSpec& spec) {
    using boost::multiprecision::cpp_int;
    cpp_int factorial = 1;
    for (int k = 2; k <= spec.nodes + 1; ++k) factorial *= k;
    cpp_int ops = boost::multiprecision::pow(cpp_int(spec.n_ops), 2 * spec.nodes);
    return factorial * factorial * ops;
}

boost::multiprecision::cpp_int search_space_size(const SearchSpaceSpec& spec) {
    const auto b = block_space_size(spec);
    return b * b;
}

std::string Digest::hex() const {
    static constexpr char kHex[] = "0123456789abcdef";
    std::string s;
    s.reserve(2 * bytes.size());
    for (std::uint8_t b : bytes) {
        s.push_back(kHex[b >> 4]);
        s.push_back(kHex[b & 0xF]);
    }
    return s;
}

Digest Digest::from_hex(std::string_view hex) {
    if (hex.size() != 32) throw std::invalid_argument("digest must be 32 hex characters");
    auto nibble = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        throw std::invalid_argument("digest must be lowercase hex");
    };
    Digest d;
    for (std::size_t i = 0; i < d.bytes.size(); ++i) {
        d.bytes[i] = static_cast<std::uint8_t>(nibble(hex[2 * i]) << 4 | nibble(hex[2 * i + 1]));
    }
    return d;
}

std::size_t DigestHash::operator()(const Digest& d) const noexcept {
    std::size_t h;
    std::memcpy(&h, d.bytes.data(), sizeof(h));
    return h;
}

Digest canonical_hash(const ArchitectureGenotype& g) {
    // Canonical encoding: tag, node count, then every gene as a 16-bit
    // little-endian value in flatten() order.
    std::vector<std::uint8_t> buf = {'E', 'G', '1'};
    auto put16 = [&buf](int v) {
        buf.push_back(static_cast<std::uint8_t>(v & 0xFF));
        buf.push_back(static_cast<std::uint8_t>((v >> 8) & 0xFF));
    };
    put16(static_cast<int>(g.normal.nodes.size()));
    put16(static_cast<int>(g.reduction.nodes.size()));
    for (int v : g.flatten()) put16(v);

    static const bool sodium_ready = sodium_init() >= 0;
    if (!sodium_ready) throw std::runtime_error("libsodium initialisation failed");
    Digest d;
    crypto_generichash(d.bytes.data(), d.bytes.size(), buf.data(), buf.size(), nullptr, 0);
    return d;
}

std::vector<int> BlockDag::topological_order() const {
    std::vector<int> indegree(num_nodes, 0);
    std::vector<std::vector<int>> out(num_nodes);
    for (const DagEdge& e : edges) {
        ++indegree[e.to - 2];
        if (e.from >= 2) out[e.from - 2].push_back(e.to - 2);
    }
    // Block inputs are sources; count their edges as already satisfied.
    for (const DagEdge& e : edges) {
        if (e.from < 2) --indegree[e.to - 2];
    }
    std::vector<int> order;
    std::vector<int> ready;
    for (int k = num_nodes - 1; k >= 0; --k) {
        if (indegree[k] == 0) ready.push_back(k);
    }
    while (!ready.empty()) {
        const int k = ready.back();
        ready.pop_back();
        order.push_back(k);
        for (int m : out[k]) {
            if (--indegree[m] == 0) ready.push_back(m);
        }
    }
    if (static_cast<int>(order.size()) != num_nodes) return {};
    return order;
}

std::vector<int> loose_nodes(const BlockGenotype& block) {
    const int n = static_cast<int>(block.nodes.size());
    std::vector<bool> consumed(n, false);
    for (const NodeGene& g : block.nodes) {
        if (g.in1 >= 2) consumed[g.in1 - 2] = true;
        if (g.in2 >= 2) consumed[g.in2 - 2] = true;
    }
    std::vector<int> loose;
    for (int k = 0; k < n; ++k) {
        if (!consumed[k]) loose.push_back(k);
    }
    return loose;
}

BlockDag decode_to_dag(const BlockGenotype& block) {
    BlockDag dag;
    dag.num_nodes = static_cast<int>(block.nodes.size());
    for (int k = 0; k < dag.num_nodes; ++k) {
        const NodeGene& g = block.nodes[k];
        dag.edges.push_back({g.in1, k + 2, static_cast<OpCode>(g.op1)});
        dag.edges.push_back({g.in2, k + 2, static_cast<OpCode>(g.op2)});
    }
    dag.loose_nodes = loose_nodes(block);
    return dag;
}

ParseError::ParseError(const std::string& what, int line, int column)
    : std::runtime_error("genotype parse error at " + std::to_string(line) + ":" +
                         std::to_string(column) + ": " + what),
      line_(line),
      column_(column) {}

std::string serialize(const ArchitectureGenotype& g) {
    std::ostringstream os;
    append_block(os, g.normal);
    os << '\n';
    append_block(os, g.reduction);
    return os.str();
}

ArchitectureGenotype parse_genotype(std::string_view text) {
    return GenotypeParser(text).parse();
}

}  // namespace evonas

#include "evonas/eda.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace evonas {

int node_state_domain(const SearchSpaceSpec& spec, int position) {
    const int inputs = spec.input_choices(position);
    return inputs * inputs * spec.n_ops * spec.n_ops;
}

int encode_node_state(const SearchSpaceSpec& spec, int position, const NodeGene& g) {
    const int inputs = spec.input_choices(position);
    const int ops = spec.n_ops;
    return ((g.in1 * ops + g.op1) * inputs + g.in2) * ops + g.op2;
}

NodeGene decode_node_state(const SearchSpaceSpec& spec, int position, int state) {
    const int inputs = spec.input_choices(position);
    const int ops = spec.n_ops;
    NodeGene g;
    g.op2 = state % ops;
    state /= ops;
    g.in2 = state % inputs;
    state /= inputs;
    g.op1 = state % ops;
    g.in1 = state / ops;
    return g;
}

double ConditionalTable::probability(int state) const {
    if (state < 0 || state >= domain) return 0.0;
    const auto it = counts.find(state);
    const double c = it == counts.end() ? 0.0 : it->second;
    return (c + alpha) / (total + alpha * domain);
}

int ConditionalTable::sample(Rng& rng) const {
    // The smoothed distribution is the mixture of the empirical counts
    // (weight total) and a uniform over the domain (weight alpha * domain).
    const double mass = total + alpha * domain;
    const double u = rng.uniform01() * mass;
    if (u < total) {
        double acc = 0.0;
        for (const auto& [state, c] : counts) {
            acc += c;
            if (u < acc) return state;
        }
        return counts.rbegin()->first;
    }
    return static_cast<int>(rng.uniform_int(0, domain - 1));
}

BlockBayesNet::Chain BlockBayesNet::fit_chain(std::span<const ArchitectureGenotype> model_set,
                                              BlockKind kind, const SearchSpaceSpec& spec,
                                              double alpha) {
    Chain chain(spec.nodes);
    for (int p = 0; p < spec.nodes; ++p) {
        chain[p].marginal.domain = node_state_domain(spec, p);
        chain[p].marginal.alpha = alpha;
    }
    for (const auto& g : model_set) {
        const auto& nodes = g.block(kind).nodes;
        int prev = -1;
        for (int p = 0; p < spec.nodes; ++p) {
            const int s = encode_node_state(spec, p, nodes[p]);
            auto& pm = chain[p];
            ++pm.marginal.counts[s];
            ++pm.marginal.total;
            if (p > 0) {
                auto [it, fresh] = pm.conditional.try_emplace(prev);
                if (fresh) {
                    it->second.domain = pm.marginal.domain;
                    it->second.alpha = alpha;
                }
                ++it->second.counts[s];
                ++it->second.total;
            }
            prev = s;
        }
    }
    return chain;
}

BlockBayesNet BlockBayesNet::fit(std::span<const ArchitectureGenotype> model_set,
                                 const SearchSpaceSpec& spec, double alpha) {
    if (!(alpha > 0.0)) throw std::invalid_argument("smoothing alpha must be positive");
    for (const auto& g : model_set) {
        if (!is_valid(g, spec)) throw std::invalid_argument("model set holds an invalid genotype");
    }
    BlockBayesNet bn;
    bn.spec_ = spec;
    bn.alpha_ = alpha;
    bn.normal_ = fit_chain(model_set, BlockKind::normal, spec, alpha);
    bn.reduction_ = fit_chain(model_set, BlockKind::reduction, spec, alpha);
    return bn;
}

const ConditionalTable& BlockBayesNet::marginal(BlockKind kind, int position) const {
    return chain(kind).at(position).marginal;
}

bool BlockBayesNet::has_context(BlockKind kind, int position, int context) const {
    const auto& pm = chain(kind).at(position);
    return pm.conditional.contains(context);
}

const ConditionalTable& BlockBayesNet::table(BlockKind kind, int position,
                                             std::optional<int> context) const {
    const auto& pm = chain(kind).at(position);
    if (position == 0 || !context) return pm.marginal;
    const auto it = pm.conditional.find(*context);
    return it == pm.conditional.end() ? pm.marginal : it->second;
}

ArchitectureGenotype BlockBayesNet::sample(Rng& rng) const {
    ArchitectureGenotype g;
    for (BlockKind kind : {BlockKind::normal, BlockKind::reduction}) {
        auto& nodes = g.block(kind).nodes;
        nodes.reserve(spec_.nodes);
        std::optional<int> context;
        for (int p = 0; p < spec_.nodes; ++p) {
            const int s = table(kind, p, context).sample(rng);
            nodes.push_back(decode_node_state(spec_, p, s));
            context = s;
        }
    }
    return g;
}

std::string BlockBayesNet::report(std::size_t top) const {
    std::ostringstream os;
    os << std::fixed << std::setprecision(4);
    for (BlockKind kind : {BlockKind::normal, BlockKind::reduction}) {
        os << (kind == BlockKind::normal ? "normal" : "reduction") << " block\n";
        for (int p = 0; p < spec_.nodes; ++p) {
            const auto& t = marginal(kind, p);
            std::vector<std::pair<int, int>> ranked(t.counts.begin(), t.counts.end());
            std::stable_sort(ranked.begin(), ranked.end(),
                             [](const auto& a, const auto& b) { return a.second > b.second; });
            if (ranked.size() > top) ranked.resize(top);
            os << "  node " << p << " (" << t.total << " observations, domain " << t.domain << ")\n";
            for (const auto& [state, c] : ranked) {
                const NodeGene n = decode_node_state(spec_, p, state);
                os << "    (" << n.in1 << ',';
                if (n.op1 < kNumOps) os << op_name(static_cast<OpCode>(n.op1));
                else os << n.op1;
                os << ',' << n.in2 << ',';
                if (n.op2 < kNumOps) os << op_name(static_cast<OpCode>(n.op2));
                else os << n.op2;
                os << ")  p=" << t.probability(state) << "  count=" << c << '\n';
            }
        }
    }
    return os.str();
}

std::vector<std::size_t> select_model_set(std::span<const Individual> archive, std::size_t m) {
    if (archive.empty()) throw std::invalid_argument("model set needs a non-empty archive");
    std::vector<Individual> copy(archive.begin(), archive.end());
    return environmental_selection(copy, std::min(m, copy.size()));
}

RhoState update_rho(const RhoState& state, int survived_genetic, int produced_genetic,
                    int survived_bn, int produced_bn) {
    RhoState next = state;
    if (produced_genetic > 0) {
        next.survival_genetic = static_cast<double>(survived_genetic) / produced_genetic;
    }
    if (produced_bn > 0) {
        next.survival_bn = static_cast<double>(survived_bn) / produced_bn;
    }
    const double e1 = std::exp(next.survival_genetic);
    const double e2 = std::exp(next.survival_bn);
    next.rho = e1 / (e1 + e2);
    return next;
}

}  // namespace evonas

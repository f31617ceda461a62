#include "evonas/variation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace evonas {

void check_variation(const VariationConfig& cfg, const SearchSpaceSpec& spec) {
    if (!(cfg.p_c >= 0.0 && cfg.p_c <= 1.0)) throw std::invalid_argument("p_c must lie in [0, 1]");
    if (!(cfg.p_m >= 0.0 && cfg.p_m <= 1.0)) throw std::invalid_argument("p_m must lie in [0, 1]");
    if (!(cfg.eta_m > 0.0)) throw std::invalid_argument("eta_m must be positive");
    if (static_cast<int>(cfg.op_order.size()) != spec.n_ops) {
        throw std::invalid_argument("op_order must list every op exactly once");
    }
    std::vector<bool> seen(spec.n_ops, false);
    for (int op : cfg.op_order) {
        if (op < 0 || op >= spec.n_ops || seen[op]) {
            throw std::invalid_argument("op_order must list every op exactly once");
        }
        seen[op] = true;
    }
}

ArchitectureGenotype crossover(const ArchitectureGenotype& p1, const ArchitectureGenotype& p2,
                               const VariationConfig& cfg, Rng& rng) {
    if (!rng.coin(cfg.p_c)) return rng.coin() ? p1 : p2;

    ArchitectureGenotype c1 = p1;
    ArchitectureGenotype c2 = p2;
    if (rng.coin()) {
        std::swap(c1.reduction, c2.reduction);
    } else {
        for (BlockKind kind : {BlockKind::normal, BlockKind::reduction}) {
            auto& a = c1.block(kind).nodes;
            auto& b = c2.block(kind).nodes;
            const auto pos = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(a.size()) - 1));
            std::swap(a[pos], b[pos]);
        }
    }
    return rng.coin() ? c1 : c2;
}

ArchitectureGenotype uniform_crossover(const ArchitectureGenotype& p1,
                                       const ArchitectureGenotype& p2, double p_c, Rng& rng) {
    if (!rng.coin(p_c)) return rng.coin() ? p1 : p2;
    auto a = p1.flatten();
    auto b = p2.flatten();
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (rng.coin()) std::swap(a[i], b[i]);
    }
    const int nodes = static_cast<int>(p1.normal.nodes.size());
    return ArchitectureGenotype::unflatten(rng.coin() ? a : b, nodes);
}

double polynomial_perturb(double y, double lo, double hi, double eta, Rng& rng) {
    const double span = hi - lo;
    if (span <= 0.0) return y;
    const double delta1 = (y - lo) / span;
    const double delta2 = (hi - y) / span;
    const double r = rng.uniform01();
    const double power = 1.0 / (eta + 1.0);
    double deltaq;
    if (r < 0.5) {
        const double xy = 1.0 - delta1;
        const double val = 2.0 * r + (1.0 - 2.0 * r) * std::pow(xy, eta + 1.0);
        deltaq = std::pow(val, power) - 1.0;
    } else {
        const double xy = 1.0 - delta2;
        const double val = 2.0 * (1.0 - r) + 2.0 * (r - 0.5) * std::pow(xy, eta + 1.0);
        deltaq = 1.0 - std::pow(val, power);
    }
    return std::clamp(y + deltaq * span, lo, hi);
}

ArchitectureGenotype pm_mutate(const ArchitectureGenotype& g, const SearchSpaceSpec& spec,
                               const VariationConfig& cfg, Rng& rng) {
    std::vector<int> rank_of(spec.n_ops);
    for (int r = 0; r < spec.n_ops; ++r) rank_of[cfg.op_order[r]] = r;

    auto genes = g.flatten();
    for (std::size_t i = 0; i < genes.size(); ++i) {
        if (!rng.coin(cfg.p_m)) continue;
        const int hi = gene_upper_bound(spec, i);
        if (hi == 0) continue;
        const bool is_op = (i % 4) % 2 == 1;
        const int parent = is_op ? rank_of[genes[i]] : genes[i];
        auto draw = [&] {
            const double y = polynomial_perturb(parent, 0.0, hi, cfg.eta_m, rng);
            return std::clamp(static_cast<int>(std::lround(y)), 0, hi);
        };
        int child = draw();
        if (child == parent) child = draw();
        genes[i] = is_op ? cfg.op_order[child] : child;
    }
    return ArchitectureGenotype::unflatten(genes, spec.nodes);
}

}  // namespace evonas

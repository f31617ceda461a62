#pragma once

#include <vector>

#include "evonas/genotype.hpp"
#include "evonas/rng.hpp"

namespace evonas {

struct VariationConfig {
    double p_c = 0.9;     // crossover probability
    double p_m = 0.1;     // per-gene mutation probability
    double eta_m = 20.0;  // polynomial mutation distribution index
    // Permutation of op indices; a gene's mutation neighbourhood is its rank
    // in this order. The complexity order puts cheap ops next to cheap ops.
    std::vector<int> op_order;
};

// Throws std::invalid_argument when a probability is outside [0, 1],
// eta_m <= 0 or op_order is not a permutation of [0, n_ops).
void check_variation(const VariationConfig& cfg, const SearchSpaceSpec& spec);

// Block-level (swap whole reduction blocks) or node-level (swap one
// position per block) crossover with equal chance; one of the two children
// is returned. With probability 1 - p_c a copy of a random parent.
ArchitectureGenotype crossover(const ArchitectureGenotype& p1, const ArchitectureGenotype& p2,
                               const VariationConfig& cfg, Rng& rng);

// Gene-wise uniform crossover, used by the plain NSGA-II baseline.
ArchitectureGenotype uniform_crossover(const ArchitectureGenotype& p1,
                                       const ArchitectureGenotype& p2, double p_c, Rng& rng);

// One continuous polynomial-mutation step of `value` inside [lo, hi].
double polynomial_perturb(double value, double lo, double hi, double eta, Rng& rng);

// Discretised parent-centric polynomial mutation: each gene is mutated with
// probability p_m over its ordered domain (inputs chronologically, ops by
// rank in op_order), rounded and clipped. A draw that rounds back to the
// parent value is retried once, then accepted.
ArchitectureGenotype pm_mutate(const ArchitectureGenotype& g, const SearchSpaceSpec& spec,
                               const VariationConfig& cfg, Rng& rng);

}  // namespace evonas

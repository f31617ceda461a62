#pragma once

#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "evonas/genotype.hpp"
#include "evonas/moea.hpp"
#include "evonas/rng.hpp"

namespace evonas {

// Node states are the whole (in1, op1, in2, op2) tuple, packed into one
// integer per position.
int node_state_domain(const SearchSpaceSpec& spec, int position);
int encode_node_state(const SearchSpaceSpec& spec, int position, const NodeGene& gene);
NodeGene decode_node_state(const SearchSpaceSpec& spec, int position, int state);

// Laplace-smoothed frequency table over one node's legal states:
//   p(s) = (count(s) + alpha) / (total + alpha * domain)
struct ConditionalTable {
    int domain = 0;
    double alpha = 0.5;
    std::map<int, int> counts;
    int total = 0;

    double probability(int state) const;
    int sample(Rng& rng) const;
};

// Per block kind, a first-order chain over node positions:
//   p(a1) p(a2 | a1) ... p(an | a(n-1))
// Contexts never seen in the model set back off to the position marginal.
class BlockBayesNet {
public:
    static BlockBayesNet fit(std::span<const ArchitectureGenotype> model_set,
                             const SearchSpaceSpec& spec, double alpha = 0.5);

    const SearchSpaceSpec& spec() const { return spec_; }
    double alpha() const { return alpha_; }

    const ConditionalTable& marginal(BlockKind kind, int position) const;
    // Table used for `position` given the previous node's state; the
    // marginal when position == 0 or the context is unseen.
    const ConditionalTable& table(BlockKind kind, int position, std::optional<int> context) const;
    bool has_context(BlockKind kind, int position, int context) const;

    double probability(BlockKind kind, int position, std::optional<int> context, int state) const {
        return table(kind, position, context).probability(state);
    }

    ArchitectureGenotype sample(Rng& rng) const;

    // Per position, the ten most frequent node states with marginal
    // probabilities, both block kinds.
    std::string report(std::size_t top = 10) const;

private:
    struct PositionModel {
        ConditionalTable marginal;
        std::map<int, ConditionalTable> conditional;
    };
    using Chain = std::vector<PositionModel>;

    const Chain& chain(BlockKind kind) const { return kind == BlockKind::normal ? normal_ : reduction_; }
    static Chain fit_chain(std::span<const ArchitectureGenotype> model_set, BlockKind kind,
                           const SearchSpaceSpec& spec, double alpha);

    SearchSpaceSpec spec_;
    double alpha_ = 0.5;
    Chain normal_;
    Chain reduction_;
};

// Top-m archive members by rank then crowding distance (split front cut by
// descending crowding). Returns indices into `archive`. Throws
// std::invalid_argument on an empty archive.
std::vector<std::size_t> select_model_set(std::span<const Individual> archive, std::size_t m = 100);

// Probability of creating an offspring with the genetic operators rather
// than by sampling the network, adapted from last generation's survival.
struct RhoState {
    double rho = 1.0;
    double survival_genetic = 0.0;
    double survival_bn = 0.0;
};

inline constexpr double kRhoAtExploitationStart = 0.75;

// Softmax of survival rates. A channel that produced nothing keeps its
// previous survival rate.
RhoState update_rho(const RhoState& state, int survived_genetic, int produced_genetic,
                    int survived_bn, int produced_bn);

}  // namespace evonas

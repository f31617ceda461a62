#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "evonas/genotype.hpp"
#include "evonas/rng.hpp"

namespace evonas {

// Both objectives are minimised. Storage order is always (error, flops).
struct ObjectiveVector {
    double error = 0.0;  // top-1 error, percent
    double flops = 0.0;  // mega-MACs

    friend bool operator==(const ObjectiveVector&, const ObjectiveVector&) = default;
};

enum class Origin : std::uint8_t { init, genetic, bn_sample };

std::string_view origin_name(Origin o);
std::optional<Origin> origin_from_name(std::string_view name);

inline constexpr double kInfiniteCrowding = std::numeric_limits<double>::infinity();

struct Individual {
    ArchitectureGenotype genotype;
    Digest digest;
    ObjectiveVector objectives;
    std::uint64_t params = 0;
    bool failed = false;  // evaluator failure; error carries the penalty value
    std::optional<int> rank;
    std::optional<double> crowding;
    Origin origin = Origin::init;
    int generation_born = 0;
};

bool dominates(const ObjectiveVector& a, const ObjectiveVector& b);

// Fronts as lists of indices into the input; members of a front keep input
// order.
using Fronts = std::vector<std::vector<std::size_t>>;

Fronts nondominated_fronts(std::span<const ObjectiveVector> points);

// Sorts `pop` in place into fronts and assigns rank (front index).
Fronts nondominated_sort(std::vector<Individual>& pop);

// Crowding distance for the members `front` of `pop`. Boundary members and
// every member of a front of size <= 2 get +infinity; an objective with zero
// range over the front contributes nothing.
void crowding_distance(std::vector<Individual>& pop, std::span<const std::size_t> front);
std::vector<double> crowding_distances(std::span<const ObjectiveVector> front);

// Rank then crowding for every member.
Fronts rank_and_crowd(std::vector<Individual>& pop);

// Crowded-comparison winner of two distinct uniform draws; a full tie is
// decided by a fair coin. Requires assigned rank/crowding and size >= 2.
const Individual& binary_tournament(std::span<const Individual> pop, Rng& rng);

// Indices of the K survivors: whole fronts in order, the split front cut by
// descending crowding distance (stable). Assigns rank and crowding on `pool`.
std::vector<std::size_t> environmental_selection(std::vector<Individual>& pool, std::size_t k);

// Exact 2-D hypervolume of the region dominated by `front` and bounded by
// `ref`. Points that do not strictly dominate `ref` contribute nothing.
double hypervolume_2d(std::span<const ObjectiveVector> front, const ObjectiveVector& ref);

inline constexpr ObjectiveVector kHvReference{100.0, 1000.0};
inline constexpr ObjectiveVector kHvIdeal{0.0, 0.0};

double normalized_hv(std::span<const ObjectiveVector> front,
                     const ObjectiveVector& ref = kHvReference,
                     const ObjectiveVector& ideal = kHvIdeal);

// Greedy trade-off pick from a non-dominated front sorted by ascending
// flops: start at the cheapest member, then repeatedly take the later member
// with the best error reduction per extra flop relative to the last pick.
// Returns indices into `front`, ascending. Throws std::invalid_argument if
// k > front.size().
std::vector<std::size_t> select_tradeoff_subset(std::span<const ObjectiveVector> front,
                                                std::size_t k);

}  // namespace evonas

#include "evonas/moea.hpp"

#include <algorithm>
#include <array>
#include <numeric>
#include <stdexcept>

namespace evonas {

std::string_view origin_name(Origin o) {
    switch (o) {
        case Origin::init: return "init";
        case Origin::genetic: return "genetic";
        case Origin::bn_sample: return "bn_sample";
    }
    return "unknown";
}

std::optional<Origin> origin_from_name(std::string_view name) {
    for (Origin o : {Origin::init, Origin::genetic, Origin::bn_sample}) {
        if (origin_name(o) == name) return o;
    }
    return std::nullopt;
}

bool dominates(const ObjectiveVector& a, const ObjectiveVector& b) {
    return a.error <= b.error && a.flops <= b.flops && (a.error < b.error || a.flops < b.flops);
}

Fronts nondominated_fronts(std::span<const ObjectiveVector> points) {
    // 2-D sweep: visit points in lexicographic (error, flops) order. A point
    // is dominated by a front iff it is dominated by that front's most
    // recently inserted member (the one with the smallest flops so far), so
    // each point joins the first front whose tail does not dominate it.
    std::vector<std::size_t> order(points.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (points[a].error != points[b].error) return points[a].error < points[b].error;
        return points[a].flops < points[b].flops;
    });

    Fronts fronts;
    std::vector<std::size_t> tails;
    for (std::size_t idx : order) {
        // Fronts are nested: if tail f dominates p so does every earlier tail,
        // which makes the predicate monotone and binary-searchable.
        std::size_t lo = 0, hi = fronts.size();
        while (lo < hi) {
            const std::size_t mid = (lo + hi) / 2;
            if (dominates(points[tails[mid]], points[idx])) lo = mid + 1;
            else hi = mid;
        }
        if (lo == fronts.size()) {
            fronts.emplace_back();
            tails.push_back(idx);
        }
        fronts[lo].push_back(idx);
        tails[lo] = idx;
    }
    for (auto& f : fronts) std::sort(f.begin(), f.end());
    return fronts;
}

Fronts nondominated_sort(std::vector<Individual>& pop) {
    std::vector<ObjectiveVector> pts;
    pts.reserve(pop.size());
    for (const auto& ind : pop) pts.push_back(ind.objectives);
    Fronts fronts = nondominated_fronts(pts);
    for (std::size_t r = 0; r < fronts.size(); ++r) {
        for (std::size_t i : fronts[r]) pop[i].rank = static_cast<int>(r);
    }
    return fronts;
}

std::vector<double> crowding_distances(std::span<const ObjectiveVector> front) {
    const std::size_t n = front.size();
    std::vector<double> dist(n, 0.0);
    if (n <= 2) {
        std::fill(dist.begin(), dist.end(), kInfiniteCrowding);
        return dist;
    }
    std::vector<std::size_t> order(n);
    for (int obj = 0; obj < 2; ++obj) {
        auto value = [&](std::size_t i) { return obj == 0 ? front[i].error : front[i].flops; };
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return value(a) < value(b); });
        dist[order.front()] = kInfiniteCrowding;
        dist[order.back()] = kInfiniteCrowding;
        const double range = value(order.back()) - value(order.front());
        if (range <= 0.0) continue;
        for (std::size_t j = 1; j + 1 < n; ++j) {
            dist[order[j]] += (value(order[j + 1]) - value(order[j - 1])) / range;
        }
    }
    return dist;
}

void crowding_distance(std::vector<Individual>& pop, std::span<const std::size_t> front) {
    std::vector<ObjectiveVector> pts;
    pts.reserve(front.size());
    for (std::size_t i : front) pts.push_back(pop[i].objectives);
    const auto dist = crowding_distances(pts);
    for (std::size_t j = 0; j < front.size(); ++j) pop[front[j]].crowding = dist[j];
}

Fronts rank_and_crowd(std::vector<Individual>& pop) {
    Fronts fronts = nondominated_sort(pop);
    for (const auto& f : fronts) crowding_distance(pop, f);
    return fronts;
}

const Individual& binary_tournament(std::span<const Individual> pop, Rng& rng) {
    if (pop.size() < 2) throw std::invalid_argument("tournament needs at least two individuals");
    const auto n = static_cast<std::int64_t>(pop.size());
    const auto a = static_cast<std::size_t>(rng.uniform_int(0, n - 1));
    auto b = static_cast<std::size_t>(rng.uniform_int(0, n - 2));
    if (b >= a) ++b;
    const Individual& x = pop[a];
    const Individual& y = pop[b];
    if (!x.rank || !y.rank || !x.crowding || !y.crowding) {
        throw std::logic_error("tournament requires ranked individuals");
    }
    if (*x.rank != *y.rank) return *x.rank < *y.rank ? x : y;
    if (*x.crowding != *y.crowding) return *x.crowding > *y.crowding ? x : y;
    return rng.coin() ? x : y;
}

std::vector<std::size_t> environmental_selection(std::vector<Individual>& pool, std::size_t k) {
    if (k > pool.size()) throw std::invalid_argument("cannot select more survivors than candidates");
    const Fronts fronts = rank_and_crowd(pool);
    std::vector<std::size_t> survivors;
    survivors.reserve(k);
    for (const auto& front : fronts) {
        if (survivors.size() + front.size() <= k) {
            survivors.insert(survivors.end(), front.begin(), front.end());
            if (survivors.size() == k) break;
            continue;
        }
        std::vector<std::size_t> split(front.begin(), front.end());
        std::stable_sort(split.begin(), split.end(), [&](std::size_t a, std::size_t b) {
            return *pool[a].crowding > *pool[b].crowding;
        });
        split.resize(k - survivors.size());
        survivors.insert(survivors.end(), split.begin(), split.end());
        break;
    }
    return survivors;
}

double hypervolume_2d(std::span<const ObjectiveVector> front, const ObjectiveVector& ref) {
    std::vector<ObjectiveVector> pts;
    for (const auto& p : front) {
        if (p.error < ref.error && p.flops < ref.flops) pts.push_back(p);
    }
    std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) {
        if (a.error != b.error) return a.error < b.error;
        return a.flops < b.flops;
    });
    double hv = 0.0;
    double ceiling = ref.flops;
    for (const auto& p : pts) {
        if (p.flops < ceiling) {
            hv += (ref.error - p.error) * (ceiling - p.flops);
            ceiling = p.flops;
        }
    }
    return hv;
}

double normalized_hv(std::span<const ObjectiveVector> front, const ObjectiveVector& ref,
                     const ObjectiveVector& ideal) {
    const double box = (ref.error - ideal.error) * (ref.flops - ideal.flops);
    if (box <= 0.0) throw std::invalid_argument("reference point must be worse than the ideal point");
    return hypervolume_2d(front, ref) / box;
}

std::vector<std::size_t> select_tradeoff_subset(std::span<const ObjectiveVector> front,
                                                std::size_t k) {
    if (k > front.size()) throw std::invalid_argument("k exceeds the front size");
    std::vector<std::size_t> picked;
    if (k == 0) return picked;
    std::vector<bool> taken(front.size(), false);
    picked.push_back(0);
    taken[0] = true;
    std::size_t last = 0;
    while (picked.size() < k) {
        std::optional<std::size_t> best;
        double best_ratio = -std::numeric_limits<double>::infinity();
        for (std::size_t c = last + 1; c < front.size(); ++c) {
            const double gain = front[last].error - front[c].error;
            const double cost = front[c].flops - front[last].flops;
            const double ratio = cost > 0.0 ? gain / cost
                                 : gain > 0.0 ? std::numeric_limits<double>::infinity()
                                              : 0.0;
            if (ratio > best_ratio) {
                best_ratio = ratio;
                best = c;
            }
        }
        if (!best) {
            // The most expensive member was picked early; fill with the
            // cheapest remaining members.
            for (std::size_t c = 0; c < front.size() && picked.size() < k; ++c) {
                if (!taken[c]) {
                    taken[c] = true;
                    picked.push_back(c);
                }
            }
            break;
        }
        taken[*best] = true;
        picked.push_back(*best);
        last = *best;
    }
    std::sort(picked.begin(), picked.end());
    return picked;
}

}  // namespace evonas

#include "doctest.h"

#include <set>

#include "evonas/moea.hpp"
#include "oracles.hpp"

using namespace evonas;

namespace {

std::vector<ObjectiveVector> random_points(Rng& rng, std::size_t n, bool gridded) {
    std::vector<ObjectiveVector> v(n);
    for (auto& p : v) {
        if (gridded) {
            // Coarse grid: plenty of ties and duplicates.
            p = {static_cast<double>(rng.uniform_int(0, 9)), static_cast<double>(rng.uniform_int(0, 9))};
        } else {
            p = {rng.uniform01() * 100.0, rng.uniform01() * 1000.0};
        }
    }
    return v;
}

std::vector<Individual> as_individuals(const std::vector<ObjectiveVector>& pts) {
    std::vector<Individual> pop(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) pop[i].objectives = pts[i];
    return pop;
}

}  // namespace

TEST_CASE("dominance") {
    CHECK(dominates({1, 1}, {2, 2}));
    CHECK(dominates({1, 2}, {1, 3}));
    CHECK_FALSE(dominates({1, 1}, {1, 1}));
    CHECK_FALSE(dominates({1, 3}, {2, 2}));
}

TEST_CASE("non-dominated fronts match the peeling oracle") {
    Rng rng(5);
    for (int trial = 0; trial < 40; ++trial) {
        const auto pts = random_points(rng, 1 + rng.uniform_int(0, 200), trial % 2 == 0);
        const auto expected = oracle::peel_ranks(pts);
        const auto fronts = nondominated_fronts(pts);
        std::vector<int> got(pts.size(), -1);
        for (std::size_t r = 0; r < fronts.size(); ++r) {
            CHECK(std::is_sorted(fronts[r].begin(), fronts[r].end()));
            for (std::size_t i : fronts[r]) got[i] = static_cast<int>(r);
        }
        CHECK(got == expected);
    }
}

TEST_CASE("nondominated_sort assigns ranks") {
    auto pop = as_individuals({{3, 3}, {1, 5}, {5, 1}, {4, 4}, {6, 6}});
    const auto fronts = nondominated_sort(pop);
    REQUIRE(fronts.size() == 3);
    CHECK(fronts[0] == std::vector<std::size_t>{0, 1, 2});
    CHECK(fronts[1] == std::vector<std::size_t>{3});
    CHECK(pop[4].rank == 2);
}

TEST_CASE("crowding distance") {
    SUBCASE("boundaries are infinite, interior sums normalised gaps") {
        const std::vector<ObjectiveVector> f = {{0, 10}, {1, 6}, {3, 2}, {4, 0}};
        const auto d = crowding_distances(f);
        CHECK(d[0] == kInfiniteCrowding);
        CHECK(d[3] == kInfiniteCrowding);
        CHECK(d[1] == doctest::Approx(3.0 / 4.0 + 8.0 / 10.0));
        CHECK(d[2] == doctest::Approx(3.0 / 4.0 + 6.0 / 10.0));
    }
    SUBCASE("tiny fronts are all boundary") {
        const std::vector<ObjectiveVector> f = {{0, 1}, {1, 0}};
        for (double v : crowding_distances(f)) CHECK(v == kInfiniteCrowding);
    }
    SUBCASE("agrees with the oracle") {
        Rng rng(9);
        for (int trial = 0; trial < 20; ++trial) {
            const auto pts = random_points(rng, 3 + rng.uniform_int(0, 30), false);
            std::vector<std::size_t> all(pts.size());
            std::iota(all.begin(), all.end(), 0);
            const auto expected = oracle::crowding(pts, all);
            const auto got = crowding_distances(pts);
            for (std::size_t i = 0; i < pts.size(); ++i) {
                if (std::isinf(expected.at(i))) {
                    CHECK(std::isinf(got[i]));
                } else {
                    CHECK(got[i] == doctest::Approx(expected.at(i)).epsilon(1e-12));
                }
            }
        }
    }
}

TEST_CASE("environmental selection matches the naive survivor oracle") {
    Rng rng(21);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t k = 2 * static_cast<std::size_t>(rng.uniform_int(1, 20));
        const auto pts = random_points(rng, 2 * k, false);
        auto pool = as_individuals(pts);
        auto survivors = environmental_selection(pool, k);
        CHECK(survivors.size() == k);
        std::sort(survivors.begin(), survivors.end());
        CHECK(survivors == oracle::naive_survivors(pts, k));
        for (const auto& ind : pool) {
            CHECK(ind.rank.has_value());
            CHECK(ind.crowding.has_value());
        }
    }
}

TEST_CASE("binary tournament prefers rank, then crowding") {
    auto pop = as_individuals({{1, 1}, {2, 2}});
    pop[0].rank = 0;
    pop[0].crowding = 1.0;
    pop[1].rank = 1;
    pop[1].crowding = kInfiniteCrowding;
    Rng rng(1);
    for (int i = 0; i < 50; ++i) CHECK(&binary_tournament(pop, rng) == &pop[0]);

    pop[1].rank = 0;
    for (int i = 0; i < 50; ++i) CHECK(&binary_tournament(pop, rng) == &pop[1]);

    // A full tie is a fair coin.
    pop[0].crowding = pop[1].crowding = 2.0;
    int first = 0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) first += &binary_tournament(pop, rng) == &pop[0];
    CHECK(std::abs(first - n / 2) < 3 * std::sqrt(n * 0.25));
}

TEST_CASE("hypervolume") {
    const ObjectiveVector ref = kHvReference;
    SUBCASE("hand-computed two-point case") {
        const std::vector<ObjectiveVector> e = {{20, 800}, {60, 200}};
        CHECK(hypervolume_2d(e, ref) == doctest::Approx(80.0 * 200.0 + 40.0 * 600.0));
        CHECK(normalized_hv(e) == doctest::Approx(0.4));
        const std::vector<ObjectiveVector> f = {{20, 600}, {60, 200}};
        // (100-20)(1000-600) + (100-60)(600-200)
        CHECK(hypervolume_2d(f, ref) == doctest::Approx(32000.0 + 16000.0));
        const std::vector<ObjectiveVector> g = {{60, 600}, {80, 200}};
        CHECK(hypervolume_2d(g, ref) == doctest::Approx(16000.0 + 8000.0));
    }
    SUBCASE("points outside the box and dominated points add nothing") {
        const std::vector<ObjectiveVector> f = {{50, 500}};
        const std::vector<ObjectiveVector> g = {{50, 500}, {60, 600}, {120, 10}, {10, 1000}};
        CHECK(hypervolume_2d(f, ref) == doctest::Approx(25000.0));
        CHECK(hypervolume_2d(g, ref) == doctest::Approx(25000.0));
        CHECK(hypervolume_2d({}, ref) == 0.0);
    }
    SUBCASE("normalised") {
        const std::vector<ObjectiveVector> f = {{50, 500}};
        CHECK(normalized_hv(f) == doctest::Approx(0.25));
        const std::vector<ObjectiveVector> ideal = {{0, 0}};
        CHECK(normalized_hv(ideal) == doctest::Approx(1.0));
    }
    SUBCASE("Monte-Carlo agreement") {
        Rng rng(4);
        const auto pts = random_points(rng, 30, false);
        const auto mc = oracle::mc_hypervolume(pts, ref, 200000, 77);
        CHECK(std::abs(hypervolume_2d(pts, ref) - mc.value) < 3 * mc.sigma + 1e-9);
    }
}

TEST_CASE("trade-off subset") {
    const std::vector<ObjectiveVector> front = {{10, 100}, {8, 110}, {7.9, 400}, {4, 420}, {3.9, 900}};
    CHECK(select_tradeoff_subset(front, 0).empty());
    CHECK(select_tradeoff_subset(front, 1) == std::vector<std::size_t>{0});
    const auto two = select_tradeoff_subset(front, 2);
    CHECK(two == std::vector<std::size_t>{0, 1});  // 2 points of error for 10 MFLOPs
    const auto three = select_tradeoff_subset(front, 3);
    CHECK(three == std::vector<std::size_t>{0, 1, 3});
    CHECK(select_tradeoff_subset(front, 5).size() == 5);
    CHECK_THROWS_AS(select_tradeoff_subset(front, 6), std::invalid_argument);
}

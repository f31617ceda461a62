#include "doctest.h"

#include <cmath>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "evonas/run_io.hpp"
#include "evonas/search.hpp"

using namespace evonas;
namespace fs = std::filesystem;

namespace {

SearchConfig small_config(SearchMode mode, std::uint64_t seed = 1) {
    SearchConfig c;
    c.pop_size = 20;
    c.generations = 9;
    c.seed = seed;
    c.mode = mode;
    return c;
}

std::string archive_text(const Archive& a) {
    std::ostringstream os;
    write_archive_jsonl(os, a.members());
    return os.str();
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("evonas_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

// Fails every evaluation after a number of successful ones.
class FlakyEvaluator final : public Evaluator {
public:
    explicit FlakyEvaluator(std::size_t budget) : budget_(budget) {}
    std::vector<EvalResult> evaluate(std::span<const EvalRequest> batch) override {
        if (served_ + batch.size() > budget_) throw EvaluatorError("worker went away");
        served_ += batch.size();
        return inner_.evaluate(batch);
    }
    std::string name() const override { return "flaky"; }

private:
    SyntheticEvaluator inner_;
    std::size_t budget_;
    std::size_t served_ = 0;
};

// Reports every third request as failed.
class PartlyFailingEvaluator final : public Evaluator {
public:
    std::vector<EvalResult> evaluate(std::span<const EvalRequest> batch) override {
        auto out = inner_.evaluate(batch);
        for (auto& r : out) {
            if (r.id % 3 == 0) r = EvalResult::failed(r.id, "diverged");
        }
        return out;
    }
    std::string name() const override { return "partly-failing"; }

private:
    SyntheticEvaluator inner_;
};

}  // namespace

TEST_CASE("config validation") {
    SearchConfig c;
    CHECK(c.effective_tau() == 20);
    CHECK_NOTHROW(check_search_config(c));
    c.pop_size = 41;
    CHECK_THROWS_AS(check_search_config(c), std::invalid_argument);
    c = {};
    c.tau = 31;
    CHECK_THROWS_AS(check_search_config(c), std::invalid_argument);
    c.tau = 0;
    CHECK_THROWS_AS(check_search_config(c), std::invalid_argument);
    c = {};
    c.generations = 3;
    CHECK(c.effective_tau() == 2);
    c.generations = 4;
    CHECK(c.effective_tau() == 3);
}

TEST_CASE("mode operator settings") {
    SearchConfig c;
    CHECK(variation_for(c).p_m == 0.1);
    CHECK(variation_for(c).op_order == op_complexity_order(c.space));
    c.mode = SearchMode::vanilla_nsga2;
    CHECK(variation_for(c).p_m == doctest::Approx(1.0 / 40.0));
    CHECK(variation_for(c).op_order == std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11});
}

TEST_CASE("offspring origin follows rho") {
    SearchConfig cfg;
    cfg.pop_size = 40;
    Rng rng(3);
    std::vector<Individual> parents(40);
    std::vector<ArchitectureGenotype> models;
    for (auto& p : parents) {
        p.genotype = random_genotype(cfg.space, rng);
        p.digest = canonical_hash(p.genotype);
        p.objectives = {rng.uniform01() * 100, rng.uniform01() * 1000};
        models.push_back(p.genotype);
    }
    rank_and_crowd(parents);
    const auto bn = BlockBayesNet::fit(models, cfg.space, cfg.bn_alpha);
    const auto var = variation_for(cfg);
    auto never = [](const Digest&) { return false; };

    for (const auto& o : make_offspring(parents, cfg, var, 1.0, nullptr, never, 1, rng)) {
        CHECK(o.origin == Origin::genetic);
        CHECK(o.generation_born == 1);
        CHECK(is_valid(o.genotype, cfg.space));
    }
    for (const auto& o : make_offspring(parents, cfg, var, 0.0, &bn, never, 1, rng)) CHECK(o.origin == Origin::bn_sample);
    CHECK_THROWS_AS(make_offspring(parents, cfg, var, 0.5, nullptr, never, 1, rng), std::logic_error);

    // Mixed rho: the genetic share is binomial(N, rho).
    const double rho = 0.75;
    std::size_t total = 0, genetic = 0;
    while (total < 100'000) {
        for (const auto& o : make_offspring(parents, cfg, var, rho, &bn, never, 1, rng)) {
            ++total;
            genetic += o.origin == Origin::genetic;
        }
    }
    const double sigma = std::sqrt(rho * (1 - rho) / static_cast<double>(total));
    CHECK(std::abs(static_cast<double>(genetic) / static_cast<double>(total) - rho) < 3 * sigma);

    cfg.mode = SearchMode::random_sampling;
    for (const auto& o : make_offspring(parents, cfg, var, 1.0, nullptr, never, 1, rng)) CHECK(o.origin == Origin::init);
}

TEST_CASE("offspring redraw duplicates of the archive") {
    SearchConfig cfg;
    cfg.space = {1, 1};  // 4 distinct architectures in total
    cfg.pop_size = 4;
    cfg.mode = SearchMode::random_sampling;
    Rng rng(5);
    std::vector<Individual> parents(4);
    std::set<Digest> seen_digests;
    const auto var = variation_for(cfg);
    // Everything is already in the archive: redraws run out and the child is
    // accepted anyway.
    auto always = [](const Digest&) { return true; };
    CHECK(make_offspring(parents, cfg, var, 1.0, nullptr, always, 1, rng).size() == 4);

    // Nothing in the archive: the batch itself is deduplicated where possible.
    cfg.redraw_attempts = 50;
    auto never = [](const Digest&) { return false; };
    const auto kids = make_offspring(parents, cfg, var, 1.0, nullptr, never, 1, rng);
    for (const auto& k : kids) seen_digests.insert(k.digest);
    CHECK(seen_digests.size() == 4);
}

TEST_CASE("search invariants over a run") {
    for (SearchMode mode : {SearchMode::nsganetv1, SearchMode::vanilla_nsga2, SearchMode::random_sampling}) {
        CAPTURE(mode_name(mode));
        const auto cfg = small_config(mode);
        SyntheticEvaluator ev;
        SearchRunner runner(cfg, ev);
        runner.initialize();
        CHECK(runner.population().size() == 20);
        while (!runner.finished()) {
            runner.step();
            const auto& s = runner.stats().back();
            CHECK(runner.population().size() == 20);
            CHECK(s.produced[0] + s.produced[1] + s.produced[2] == 20);
            CHECK(s.survived[0] + s.survived[1] + s.survived[2] <= 20);
            if (mode == SearchMode::nsganetv1 && s.generation <= cfg.effective_tau()) {
                CHECK(s.produced[static_cast<int>(Origin::bn_sample)] == 0);
            }
            if (mode != SearchMode::nsganetv1) CHECK(s.rho == 1.0);
        }
        const auto& stats = runner.stats();
        CHECK(stats.size() == 10);
        for (std::size_t g = 1; g < stats.size(); ++g) CHECK(stats[g].nhv >= stats[g - 1].nhv - 1e-12);
        CHECK(runner.evaluator_calls() <= 20u * 10u);
        CHECK(runner.evaluator_calls() == runner.archive().size());
        CHECK(ev.calls() == runner.evaluator_calls());
        std::set<Digest> digests;
        for (const auto& m : runner.archive().members()) digests.insert(m.digest);
        CHECK(digests.size() == runner.archive().size());
    }
}

TEST_CASE("rho schedule around tau") {
    auto cfg = small_config(SearchMode::nsganetv1);
    cfg.tau = 4;
    SyntheticEvaluator ev;
    SearchRunner runner(cfg, ev);
    runner.initialize();
    while (!runner.finished()) {
        runner.step();
        const auto& s = runner.stats().back();
        if (s.generation < 4) CHECK(s.rho == 1.0);
        if (s.generation == 4) CHECK(s.rho == kRhoAtExploitationStart);
        if (s.generation > 4) {
            CHECK(s.rho > 0.0);
            CHECK(s.rho < 1.0);
        }
        // The first batch drawn under rho = 0.75 mixes both channels.
        if (s.generation == 5) CHECK(s.produced[static_cast<int>(Origin::bn_sample)] > 0);
    }
}

TEST_CASE("single-generation random sampling evaluates two populations") {
    auto cfg = small_config(SearchMode::random_sampling);
    cfg.generations = 1;
    cfg.tau = 1;
    SyntheticEvaluator ev;
    const auto result = run_search(cfg, ev);
    CHECK(result.archive.size() + result.archive.dedup_hits() == 40);
    for (const auto& m : result.archive.members()) CHECK(m.origin == Origin::init);
}

TEST_CASE("same seed, same archive") {
    const auto cfg = small_config(SearchMode::nsganetv1, 17);
    SyntheticEvaluator a, b({}, 3);
    const auto ra = run_search(cfg, a);
    const auto rb = run_search(cfg, b);
    CHECK(archive_text(ra.archive) == archive_text(rb.archive));
    const auto rc = run_search(small_config(SearchMode::nsganetv1, 18), a);
    CHECK(archive_text(ra.archive) != archive_text(rc.archive));
}

TEST_CASE("checkpoint resume reproduces the uninterrupted run") {
    const auto dir = scratch("resume");
    const auto cfg = small_config(SearchMode::nsganetv1, 23);

    SyntheticEvaluator full_ev;
    const auto full = run_search(cfg, full_ev);

    for (int stop : {0, 3, 6}) {
        CAPTURE(stop);
        SyntheticEvaluator ev1;
        SearchRunner first(cfg, ev1);
        first.initialize();
        while (first.generation() < stop) first.step();
        first.save_checkpoint(dir / "ckpt.json");

        SyntheticEvaluator ev2;
        auto resumed = SearchRunner::resume(dir / "ckpt.json", cfg, ev2);
        CHECK(resumed.generation() == stop);
        resumed.run();
        CHECK(archive_text(resumed.archive()) == archive_text(full.archive));
        CHECK(resumed.stats().size() == full.stats.size());
        CHECK(resumed.archive().nhv_series() == full.archive.nhv_series());
        CHECK(resumed.evaluator_calls() == full_ev.calls());
    }
}

TEST_CASE("checkpoint errors") {
    const auto dir = scratch("ckpt_errors");
    const auto cfg = small_config(SearchMode::nsganetv1, 2);
    SyntheticEvaluator ev;
    SearchRunner r(cfg, ev);
    r.initialize();
    r.step();
    const fs::path path = dir / "ckpt.json";
    r.save_checkpoint(path);

    SUBCASE("missing file") { CHECK_THROWS_AS(SearchRunner::resume(dir / "nope.json", cfg, ev), CheckpointError); }
    SUBCASE("config mismatch") {
        auto other = cfg;
        other.seed = 3;
        CHECK_THROWS_AS(SearchRunner::resume(path, other, ev), CheckpointError);
    }
    SUBCASE("corrupted payload") {
        std::ifstream is(path);
        std::string text((std::istreambuf_iterator<char>(is)), {});
        is.close();
        const auto pos = text.find("\"generation\":1");
        REQUIRE(pos != std::string::npos);
        text.replace(pos, 14, "\"generation\":2");
        std::ofstream(path, std::ios::trunc) << text;
        CHECK_THROWS_AS(SearchRunner::resume(path, cfg, ev), CheckpointError);
    }
    SUBCASE("truncated file") {
        std::ofstream(path, std::ios::trunc) << "{\"version\":";
        CHECK_THROWS_AS(SearchRunner::resume(path, cfg, ev), CheckpointError);
    }
    SUBCASE("foreign version") {
        std::ifstream is(path);
        auto j = nlohmann::json::parse(is);
        is.close();
        j["version"] = "evonas-checkpoint/0";
        std::ofstream(path, std::ios::trunc) << j.dump();
        CHECK_THROWS_AS(SearchRunner::resume(path, cfg, ev), CheckpointError);
    }
}

TEST_CASE("an evaluator outage is resumable") {
    const auto dir = scratch("outage");
    const auto cfg = small_config(SearchMode::nsganetv1, 31);
    SyntheticEvaluator full_ev;
    const auto full = run_search(cfg, full_ev);

    FlakyEvaluator flaky(70);
    SearchRunner r(cfg, flaky);
    r.initialize();
    r.save_checkpoint(dir / "ckpt.json");
    bool aborted = false;
    try {
        while (!r.finished()) {
            r.step();
            r.save_checkpoint(dir / "ckpt.json");
        }
    } catch (const EvaluatorError&) {
        aborted = true;
    }
    REQUIRE(aborted);
    SyntheticEvaluator ev;
    auto resumed = SearchRunner::resume(dir / "ckpt.json", cfg, ev);
    resumed.run();
    CHECK(archive_text(resumed.archive()) == archive_text(full.archive));
}

TEST_CASE("failed evaluations are penalised and flagged") {
    const auto cfg = small_config(SearchMode::nsganetv1, 4);
    PartlyFailingEvaluator ev;
    const auto result = run_search(cfg, ev);
    int failed = 0;
    for (const auto& m : result.archive.members()) {
        if (m.failed) {
            ++failed;
            CHECK(m.objectives.error == kFailurePenaltyError);
        } else {
            CHECK(m.objectives.error < kFailurePenaltyError);
        }
    }
    CHECK(failed > 0);
}

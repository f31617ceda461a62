#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "evonas/complexity.hpp"
#include "evonas/eda.hpp"
#include "evonas/evaluation.hpp"
#include "evonas/genotype.hpp"
#include "evonas/moea.hpp"
#include "evonas/rng.hpp"
#include "evonas/variation.hpp"

namespace evonas {

enum class SearchMode { nsganetv1, vanilla_nsga2, random_sampling };

std::string_view mode_name(SearchMode m);
std::optional<SearchMode> mode_from_name(std::string_view name);

struct SearchConfig {
    int pop_size = 40;
    int generations = 30;
    std::optional<int> tau;  // default ceil(2G/3)
    double p_c = 0.9;
    double p_m = 0.1;
    double eta_m = 20.0;
    int model_set_size = 100;
    double bn_alpha = 0.5;
    int redraw_attempts = 3;
    std::uint64_t seed = 0;
    SearchMode mode = SearchMode::nsganetv1;
    SearchSpaceSpec space;
    MacroConfig macro;
    ProxyConfig proxy;
    std::string dataset = "cifar10";

    int effective_tau() const { return tau.value_or((2 * generations + 2) / 3); }
};

// Throws std::invalid_argument describing the first broken constraint.
void check_search_config(const SearchConfig& cfg);

// Operator settings actually used by a mode: the plain NSGA-II baseline
// mutates in listing order with the textbook rate 1/(number of genes).
VariationConfig variation_for(const SearchConfig& cfg);

struct GenerationStats {
    int generation = 0;
    double nhv = 0.0;             // archive
    double nhv_population = 0.0;  // current parents
    std::size_t front_size = 0;   // archive non-dominated set
    double rho = 1.0;             // in force for the next offspring batch
    std::array<int, 3> produced{};  // indexed by Origin
    std::array<int, 3> survived{};
    std::uint64_t evaluations = 0;  // cumulative backend calls
    std::size_t archive_size = 0;
    double wall_seconds = 0.0;
};

// Every evaluated architecture, first occurrence of each digest only.
class Archive {
public:
    bool contains(const Digest& d) const { return index_.contains(d); }
    const Individual* find(const Digest& d) const;
    // False (and counted as a dedup hit) when the digest is already present.
    bool add(const Individual& ind);

    const std::vector<Individual>& members() const { return members_; }
    std::size_t size() const { return members_.size(); }
    std::size_t dedup_hits() const { return dedup_hits_; }
    const std::vector<double>& nhv_series() const { return nhv_series_; }
    void record_nhv(double v) { nhv_series_.push_back(v); }

    std::vector<ObjectiveVector> objectives() const;
    // Indices of the non-dominated members, input order.
    std::vector<std::size_t> nondominated() const;

    // Restoring from a checkpoint.
    static Archive restore(std::vector<Individual> members, std::vector<double> nhv, std::size_t dedup_hits);

private:
    std::vector<Individual> members_;
    std::unordered_map<Digest, std::size_t, DigestHash> index_;
    std::vector<double> nhv_series_;
    std::size_t dedup_hits_ = 0;
};

// K unevaluated offspring. With probability rho an offspring comes from
// tournament + crossover + mutation, otherwise from `bn`. A child whose
// digest `seen` reports (or that repeats an earlier child of this batch) is
// redrawn up to cfg.redraw_attempts times, then accepted.
std::vector<Individual> make_offspring(std::span<const Individual> parents, const SearchConfig& cfg,
                                       const VariationConfig& var, double rho,
                                       const BlockBayesNet* bn,
                                       const std::function<bool(const Digest&)>& seen,
                                       int generation, Rng& rng);

class SearchRunner {
public:
    SearchRunner(SearchConfig cfg, Evaluator& evaluator);

    // Generation 0: uniform initial population, evaluated and ranked.
    void initialize();
    // One generation of offspring creation, evaluation and survival.
    void step();
    bool finished() const { return generation_ >= cfg_.generations; }
    void run();

    int generation() const { return generation_; }
    const SearchConfig& config() const { return cfg_; }
    const std::vector<Individual>& population() const { return population_; }
    const Archive& archive() const { return archive_; }
    const std::vector<GenerationStats>& stats() const { return stats_; }
    const RhoState& rho() const { return rho_; }
    std::uint64_t evaluator_calls() const { return evaluator_calls_; }
    const std::optional<BlockBayesNet>& last_model() const { return bn_; }

    void save_checkpoint(const std::filesystem::path& path) const;
    // Throws CheckpointError on a corrupt file, a foreign format version or
    // a config that does not match the one the checkpoint was written with.
    static SearchRunner resume(const std::filesystem::path& path, SearchConfig cfg,
                               Evaluator& evaluator);

private:
    void evaluate(std::vector<Individual>& batch);
    void record_stats(int generation, const std::array<int, 3>& produced,
                      const std::array<int, 3>& survived, double started);

    SearchConfig cfg_;
    VariationConfig var_;
    Evaluator* evaluator_;
    EvalCache cache_;
    Rng rng_;
    std::vector<Individual> population_;
    Archive archive_;
    std::vector<GenerationStats> stats_;
    RhoState rho_;
    std::optional<BlockBayesNet> bn_;
    int generation_ = -1;
    std::uint64_t next_request_id_ = 1;
    std::uint64_t evaluator_calls_ = 0;
};

class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr std::string_view kCheckpointVersion = "evonas-checkpoint/1";

struct SearchResult {
    std::vector<Individual> population;
    Archive archive;
    std::vector<GenerationStats> stats;
};

SearchResult run_search(const SearchConfig& cfg, Evaluator& evaluator);

}  // namespace evonas

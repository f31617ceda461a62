#include "evonas/search.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <sodium.h>

#include "evonas/run_io.hpp"

namespace evonas {

using json = nlohmann::json;

namespace {

double seconds_now() {
    using namespace std::chrono;
    return duration<double>(steady_clock::now().time_since_epoch()).count();
}

std::size_t origin_slot(Origin o) { return static_cast<std::size_t>(o); }

json crowding_to_json(const std::optional<double>& c) {
    if (!c) return nullptr;
    if (std::isinf(*c)) return "inf";
    return *c;
}

std::optional<double> crowding_from_json(const json& j) {
    if (j.is_null()) return std::nullopt;
    if (j.is_string()) {
        if (j.get<std::string>() != "inf") throw CheckpointError("bad crowding value");
        return kInfiniteCrowding;
    }
    return j.get<double>();
}

json ranked_individual(const Individual& ind) {
    json j = individual_record(ind);
    j["rank"] = ind.rank ? json(*ind.rank) : json(nullptr);
    j["crowding"] = crowding_to_json(ind.crowding);
    return j;
}

Individual ranked_from_json(const json& j) {
    Individual ind = individual_from_record(j);
    if (!j.at("rank").is_null()) ind.rank = j.at("rank").get<int>();
    ind.crowding = crowding_from_json(j.at("crowding"));
    return ind;
}

std::string blake_hex(const std::string& text) {
    std::array<unsigned char, 32> out{};
    crypto_generichash(out.data(), out.size(), reinterpret_cast<const unsigned char*>(text.data()),
                       text.size(), nullptr, 0);
    static constexpr char kHex[] = "0123456789abcdef";
    std::string s;
    for (unsigned char b : out) {
        s.push_back(kHex[b >> 4]);
        s.push_back(kHex[b & 0xF]);
    }
    return s;
}

}  // namespace

std::string_view mode_name(SearchMode m) {
    switch (m) {
        case SearchMode::nsganetv1: return "nsganetv1";
        case SearchMode::vanilla_nsga2: return "vanilla_nsga2";
        case SearchMode::random_sampling: return "random_sampling";
    }
    return "unknown";
}

std::optional<SearchMode> mode_from_name(std::string_view name) {
    for (SearchMode m : {SearchMode::nsganetv1, SearchMode::vanilla_nsga2, SearchMode::random_sampling}) {
        if (mode_name(m) == name) return m;
    }
    return std::nullopt;
}

void check_search_config(const SearchConfig& cfg) {
    if (cfg.pop_size < 2 || cfg.pop_size % 2 != 0) {
        throw std::invalid_argument("population size must be even and at least 2");
    }
    if (cfg.generations < 1) throw std::invalid_argument("generations must be at least 1");
    const int tau = cfg.effective_tau();
    if (tau <= 0 || tau > cfg.generations) {
        throw std::invalid_argument("tau must satisfy 0 < tau <= generations");
    }
    if (cfg.model_set_size < 1) throw std::invalid_argument("model set size must be positive");
    if (!(cfg.bn_alpha > 0.0)) throw std::invalid_argument("bn alpha must be positive");
    if (cfg.redraw_attempts < 0) throw std::invalid_argument("redraw attempts must be non-negative");
    if (cfg.space.nodes < 1 || cfg.space.n_ops < 1 || cfg.space.n_ops > kNumOps) {
        throw std::invalid_argument("search space needs nodes >= 1 and 1 <= n_ops <= 12");
    }
    check_macro(cfg.macro);
    check_variation(variation_for(cfg), cfg.space);
}

VariationConfig variation_for(const SearchConfig& cfg) {
    VariationConfig v;
    v.p_c = cfg.p_c;
    v.eta_m = cfg.eta_m;
    if (cfg.mode == SearchMode::vanilla_nsga2) {
        v.p_m = 1.0 / (8.0 * cfg.space.nodes);
        v.op_order.resize(cfg.space.n_ops);
        std::iota(v.op_order.begin(), v.op_order.end(), 0);
    } else {
        v.p_m = cfg.p_m;
        v.op_order = op_complexity_order(cfg.space);
    }
    return v;
}

const Individual* Archive::find(const Digest& d) const {
    const auto it = index_.find(d);
    return it == index_.end() ? nullptr : &members_[it->second];
}

bool Archive::add(const Individual& ind) {
    if (index_.contains(ind.digest)) {
        ++dedup_hits_;
        return false;
    }
    index_.emplace(ind.digest, members_.size());
    Individual stored = ind;
    stored.rank.reset();
    stored.crowding.reset();
    members_.push_back(std::move(stored));
    return true;
}

std::vector<ObjectiveVector> Archive::objectives() const {
    std::vector<ObjectiveVector> v;
    v.reserve(members_.size());
    for (const auto& m : members_) v.push_back(m.objectives);
    return v;
}

std::vector<std::size_t> Archive::nondominated() const {
    if (members_.empty()) return {};
    const auto fronts = nondominated_fronts(objectives());
    return fronts.front();
}

Archive Archive::restore(std::vector<Individual> members, std::vector<double> nhv,
                         std::size_t dedup_hits) {
    Archive a;
    for (auto& m : members) {
        if (!a.add(m)) throw CheckpointError("archive holds a duplicate digest");
    }
    a.dedup_hits_ = dedup_hits;
    a.nhv_series_ = std::move(nhv);
    return a;
}

std::vector<Individual> make_offspring(std::span<const Individual> parents, const SearchConfig& cfg,
                                       const VariationConfig& var, double rho,
                                       const BlockBayesNet* bn,
                                       const std::function<bool(const Digest&)>& seen,
                                       int generation, Rng& rng) {
    const auto k = static_cast<std::size_t>(cfg.pop_size);
    std::vector<Individual> offspring;
    offspring.reserve(k);
    std::unordered_map<Digest, bool, DigestHash> batch;

    while (offspring.size() < k) {
        Origin origin = Origin::genetic;
        if (cfg.mode == SearchMode::random_sampling) {
            origin = Origin::init;
        } else if (cfg.mode == SearchMode::nsganetv1 && !rng.coin(rho)) {
            origin = Origin::bn_sample;
        }
        if (origin == Origin::bn_sample && bn == nullptr) {
            throw std::logic_error("offspring sampling needs a fitted model when rho < 1");
        }

        auto create = [&]() -> ArchitectureGenotype {
            switch (origin) {
                case Origin::init:
                    return random_genotype(cfg.space, rng);
                case Origin::bn_sample:
                    return bn->sample(rng);
                case Origin::genetic:
                    break;
            }
            const Individual& a = binary_tournament(parents, rng);
            const Individual& b = binary_tournament(parents, rng);
            ArchitectureGenotype child = cfg.mode == SearchMode::vanilla_nsga2
                                             ? uniform_crossover(a.genotype, b.genotype, var.p_c, rng)
                                             : crossover(a.genotype, b.genotype, var, rng);
            return pm_mutate(child, cfg.space, var, rng);
        };

        ArchitectureGenotype g = create();
        Digest d = canonical_hash(g);
        for (int attempt = 0; attempt < cfg.redraw_attempts && (seen(d) || batch.contains(d)); ++attempt) {
            g = create();
            d = canonical_hash(g);
        }
        batch.emplace(d, true);

        Individual ind;
        ind.genotype = std::move(g);
        ind.digest = d;
        ind.origin = origin;
        ind.generation_born = generation;
        offspring.push_back(std::move(ind));
    }
    return offspring;
}

SearchRunner::SearchRunner(SearchConfig cfg, Evaluator& evaluator)
    : cfg_(std::move(cfg)), evaluator_(&evaluator), rng_(cfg_.seed) {
    check_search_config(cfg_);
    var_ = variation_for(cfg_);
}

void SearchRunner::evaluate(std::vector<Individual>& batch) {
    // One backend request per distinct digest not already known.
    std::vector<EvalRequest> requests;
    std::unordered_map<Digest, std::size_t, DigestHash> pending;
    for (const auto& ind : batch) {
        if (cache_.lookup(ind.digest) || pending.contains(ind.digest)) continue;
        pending.emplace(ind.digest, requests.size());
        EvalRequest req;
        req.id = next_request_id_++;
        req.genotype = ind.genotype;
        req.proxy = cfg_.proxy;
        req.dataset = cfg_.dataset;
        requests.push_back(std::move(req));
    }
    std::vector<EvalResult> results;
    if (!requests.empty()) {
        results = evaluator_->evaluate(requests);
        if (results.size() != requests.size()) throw EvaluatorError("evaluator returned a short batch");
        evaluator_calls_ += requests.size();
    }
    for (auto& ind : batch) {
        std::optional<EvalResult> r = cache_.lookup(ind.digest);
        if (!r) {
            r = results.at(pending.at(ind.digest));
            cache_.store(ind.digest, *r);
        }
        const CostReport cost = network_cost(ind.genotype, cfg_.macro);
        ind.failed = !r->ok();
        ind.objectives = {r->ok() ? *r->top1_error : kFailurePenaltyError, cost.mega_flops()};
        ind.params = cost.params;
    }
}

void SearchRunner::record_stats(int generation, const std::array<int, 3>& produced,
                                const std::array<int, 3>& survived, double started) {
    GenerationStats s;
    s.generation = generation;
    const auto objs = archive_.objectives();
    s.nhv = normalized_hv(objs);
    std::vector<ObjectiveVector> pop_objs;
    for (const auto& p : population_) pop_objs.push_back(p.objectives);
    s.nhv_population = normalized_hv(pop_objs);
    s.front_size = archive_.nondominated().size();
    s.rho = rho_.rho;
    s.produced = produced;
    s.survived = survived;
    s.evaluations = evaluator_calls_;
    s.archive_size = archive_.size();
    s.wall_seconds = seconds_now() - started;
    archive_.record_nhv(s.nhv);
    stats_.push_back(s);
}

void SearchRunner::initialize() {
    if (generation_ >= 0) throw std::logic_error("search already initialised");
    const double started = seconds_now();
    std::vector<Individual> init;
    std::unordered_map<Digest, bool, DigestHash> seen;
    for (int i = 0; i < cfg_.pop_size; ++i) {
        ArchitectureGenotype g = random_genotype(cfg_.space, rng_);
        Digest d = canonical_hash(g);
        for (int attempt = 0; attempt < cfg_.redraw_attempts && seen.contains(d); ++attempt) {
            g = random_genotype(cfg_.space, rng_);
            d = canonical_hash(g);
        }
        seen.emplace(d, true);
        Individual ind;
        ind.genotype = std::move(g);
        ind.digest = d;
        ind.origin = Origin::init;
        ind.generation_born = 0;
        init.push_back(std::move(ind));
    }
    evaluate(init);
    rank_and_crowd(init);
    population_ = std::move(init);
    for (const auto& ind : population_) archive_.add(ind);
    generation_ = 0;
    rho_ = RhoState{};
    std::array<int, 3> produced{};
    produced[origin_slot(Origin::init)] = cfg_.pop_size;
    record_stats(0, produced, produced, started);
}

void SearchRunner::step() {
    if (generation_ < 0) throw std::logic_error("initialize() must run before step()");
    if (finished()) throw std::logic_error("search already finished");
    const double started = seconds_now();

    bn_.reset();
    if (cfg_.mode == SearchMode::nsganetv1 && rho_.rho < 1.0) {
        const auto picks = select_model_set(archive_.members(), static_cast<std::size_t>(cfg_.model_set_size));
        std::vector<ArchitectureGenotype> models;
        models.reserve(picks.size());
        for (std::size_t i : picks) models.push_back(archive_.members()[i].genotype);
        bn_ = BlockBayesNet::fit(models, cfg_.space, cfg_.bn_alpha);
    }

    const int born = generation_ + 1;
    auto offspring = make_offspring(
        population_, cfg_, var_, rho_.rho, bn_ ? &*bn_ : nullptr,
        [this](const Digest& d) { return archive_.contains(d); }, born, rng_);
    evaluate(offspring);

    std::array<int, 3> produced{};
    for (const auto& o : offspring) ++produced[origin_slot(o.origin)];

    std::vector<Individual> pool = population_;
    const std::size_t parent_count = pool.size();
    pool.insert(pool.end(), offspring.begin(), offspring.end());
    const auto survivors = environmental_selection(pool, static_cast<std::size_t>(cfg_.pop_size));

    std::array<int, 3> survived{};
    std::vector<Individual> next;
    next.reserve(survivors.size());
    for (std::size_t i : survivors) {
        if (i >= parent_count) ++survived[origin_slot(pool[i].origin)];
        next.push_back(pool[i]);
    }
    population_ = std::move(next);
    for (const auto& o : offspring) archive_.add(o);

    generation_ = born;
    if (cfg_.mode == SearchMode::nsganetv1) {
        const int tau = cfg_.effective_tau();
        if (generation_ == tau) {
            rho_.rho = kRhoAtExploitationStart;
        } else if (generation_ > tau) {
            rho_ = update_rho(rho_, survived[origin_slot(Origin::genetic)],
                              produced[origin_slot(Origin::genetic)],
                              survived[origin_slot(Origin::bn_sample)],
                              produced[origin_slot(Origin::bn_sample)]);
        } else {
            rho_.rho = 1.0;
        }
    }
    record_stats(generation_, produced, survived, started);
}

void SearchRunner::run() {
    if (generation_ < 0) initialize();
    while (!finished()) step();
}

void SearchRunner::save_checkpoint(const std::filesystem::path& path) const {
    json payload;
    payload["config"] = render_config(cfg_);
    payload["generation"] = generation_;
    payload["rng"] = rng_.state();
    payload["rho"] = {{"rho", rho_.rho},
                      {"survival_genetic", rho_.survival_genetic},
                      {"survival_bn", rho_.survival_bn}};
    payload["next_request_id"] = next_request_id_;
    payload["evaluator_calls"] = evaluator_calls_;
    payload["dedup_hits"] = archive_.dedup_hits();
    payload["nhv_series"] = archive_.nhv_series();
    json pop = json::array();
    for (const auto& p : population_) pop.push_back(ranked_individual(p));
    payload["population"] = std::move(pop);
    json arch = json::array();
    for (const auto& m : archive_.members()) arch.push_back(json(individual_record(m)));
    payload["archive"] = std::move(arch);
    json stats = json::array();
    for (const auto& s : stats_) {
        stats.push_back({{"generation", s.generation},
                         {"nhv", s.nhv},
                         {"nhv_population", s.nhv_population},
                         {"front_size", s.front_size},
                         {"rho", s.rho},
                         {"produced", s.produced},
                         {"survived", s.survived},
                         {"evaluations", s.evaluations},
                         {"archive_size", s.archive_size},
                         {"wall_seconds", s.wall_seconds}});
    }
    payload["stats"] = std::move(stats);

    const std::string body = payload.dump();
    json doc;
    doc["version"] = kCheckpointVersion;
    doc["checksum"] = blake_hex(body);
    doc["payload"] = payload;

    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw std::runtime_error("cannot write checkpoint " + tmp.string());
        os << doc.dump() << '\n';
        if (!os) throw std::runtime_error("failed writing checkpoint " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

SearchRunner SearchRunner::resume(const std::filesystem::path& path, SearchConfig cfg,
                                  Evaluator& evaluator) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw CheckpointError("cannot open checkpoint " + path.string());
    json doc;
    try {
        doc = json::parse(is);
    } catch (const json::exception& e) {
        throw CheckpointError(std::string("corrupt checkpoint: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("version") || !doc.contains("payload") ||
        !doc.contains("checksum")) {
        throw CheckpointError("corrupt checkpoint: missing sections");
    }
    if (doc["version"] != kCheckpointVersion) {
        throw CheckpointError("checkpoint version mismatch: file has " + doc["version"].dump() +
                              ", expected " + std::string(kCheckpointVersion));
    }
    const json& payload = doc["payload"];
    if (blake_hex(payload.dump()) != doc["checksum"]) {
        throw CheckpointError("corrupt checkpoint: checksum mismatch");
    }
    if (payload.at("config") != render_config(cfg)) {
        throw CheckpointError("checkpoint was written with a different configuration");
    }

    SearchRunner r(std::move(cfg), evaluator);
    try {
        r.generation_ = payload.at("generation").get<int>();
        r.rng_.restore(payload.at("rng").get<std::string>());
        r.rho_.rho = payload.at("rho").at("rho").get<double>();
        r.rho_.survival_genetic = payload.at("rho").at("survival_genetic").get<double>();
        r.rho_.survival_bn = payload.at("rho").at("survival_bn").get<double>();
        r.next_request_id_ = payload.at("next_request_id").get<std::uint64_t>();
        r.evaluator_calls_ = payload.at("evaluator_calls").get<std::uint64_t>();
        for (const auto& p : payload.at("population")) r.population_.push_back(ranked_from_json(p));
        std::vector<Individual> members;
        for (const auto& m : payload.at("archive")) members.push_back(individual_from_record(m));
        r.archive_ = Archive::restore(std::move(members),
                                      payload.at("nhv_series").get<std::vector<double>>(),
                                      payload.at("dedup_hits").get<std::size_t>());
        for (const auto& s : payload.at("stats")) {
            GenerationStats g;
            g.generation = s.at("generation");
            g.nhv = s.at("nhv");
            g.nhv_population = s.at("nhv_population");
            g.front_size = s.at("front_size");
            g.rho = s.at("rho");
            g.produced = s.at("produced").get<std::array<int, 3>>();
            g.survived = s.at("survived").get<std::array<int, 3>>();
            g.evaluations = s.at("evaluations");
            g.archive_size = s.at("archive_size");
            g.wall_seconds = s.at("wall_seconds");
            r.stats_.push_back(g);
        }
    } catch (const json::exception& e) {
        throw CheckpointError(std::string("corrupt checkpoint: ") + e.what());
    } catch (const DataError& e) {
        throw CheckpointError(std::string("corrupt checkpoint: ") + e.what());
    }
    // Successful evaluations are the cache.
    for (const auto& m : r.archive_.members()) {
        if (!m.failed) r.cache_.store(m.digest, EvalResult::success(0, m.objectives.error));
    }
    return r;
}

SearchResult run_search(const SearchConfig& cfg, Evaluator& evaluator) {
    SearchRunner runner(cfg, evaluator);
    runner.run();
    return {runner.population(), runner.archive(), runner.stats()};
}

}  // namespace evonas

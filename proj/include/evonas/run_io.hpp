#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "evonas/moea.hpp"
#include "evonas/search.hpp"

namespace evonas {

// Raised for unreadable or inconsistent run artifacts.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// One archive.jsonl line. Keys in fixed order: digest, genotype, error,
// flops, params, origin, generation, failed.
nlohmann::ordered_json individual_record(const Individual& ind);
// Parses a record; rank/crowding stay unset. Verifies the digest.
Individual individual_from_record(const nlohmann::json& j);

void write_archive_jsonl(std::ostream& os, std::span<const Individual> members);
std::vector<Individual> read_archive_jsonl(std::istream& is);
std::vector<Individual> read_archive_jsonl(const std::filesystem::path& path);

// digest,error_pct,flops_m,rank,crowding,origin,generation
void write_front_csv(std::ostream& os, std::span<const Individual> rows);
void write_nhv_csv(std::ostream& os, std::span<const GenerationStats> stats);
void write_stats_csv(std::ostream& os, std::span<const GenerationStats> stats);

struct NhvPoint {
    int generation;
    double nhv;
};
std::vector<NhvPoint> read_nhv_csv(const std::filesystem::path& path);

// Flat "[section]" + "key = value" text; '#' starts a comment.
using ConfigSections = std::map<std::string, std::map<std::string, std::string>>;
ConfigSections parse_config_text(std::string_view text);
// Applies recognised keys onto cfg; throws std::invalid_argument on unknown
// sections/keys or unparsable values.
void apply_config(const ConfigSections& sections, SearchConfig& cfg);
std::string render_config(const SearchConfig& cfg);

// Writes config.toml, archive.jsonl, front.csv, nhv.csv and stats.csv.
void write_run_directory(const std::filesystem::path& dir, const SearchRunner& runner);

// Non-dominated archive members, ranked and crowded among themselves and
// sorted by ascending flops.
std::vector<Individual> archive_front(std::span<const Individual> archive);

}  // namespace evonas

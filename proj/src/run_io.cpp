#include "evonas/run_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace evonas {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

// Shortest text that parses back to the same double.
std::string format_double(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
    T out{};
    const char* first = value.data();
    const char* last = value.data() + value.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    if (ec != std::errc() || ptr != last) {
        throw std::invalid_argument("config key '" + key + "' has invalid value '" + value + "'");
    }
    return out;
}

}  // namespace

ordered_json individual_record(const Individual& ind) {
    ordered_json j;
    j["digest"] = ind.digest.hex();
    j["genotype"] = serialize(ind.genotype);
    j["error"] = ind.objectives.error;
    j["flops"] = ind.objectives.flops;
    j["params"] = ind.params;
    j["origin"] = origin_name(ind.origin);
    j["generation"] = ind.generation_born;
    j["failed"] = ind.failed;
    return j;
}

Individual individual_from_record(const json& j) {
    Individual ind;
    try {
        ind.genotype = parse_genotype(j.at("genotype").get<std::string>());
        ind.digest = Digest::from_hex(j.at("digest").get<std::string>());
        ind.objectives.error = j.at("error").get<double>();
        ind.objectives.flops = j.at("flops").get<double>();
        ind.params = j.value("params", std::uint64_t{0});
        const auto origin = origin_from_name(j.at("origin").get<std::string>());
        if (!origin) throw DataError("unknown origin " + j.at("origin").dump());
        ind.origin = *origin;
        ind.generation_born = j.at("generation").get<int>();
        ind.failed = j.value("failed", false);
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed archive record: ") + e.what());
    } catch (const ParseError& e) {
        throw DataError(std::string("malformed archive record: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw DataError(std::string("malformed archive record: ") + e.what());
    }
    if (canonical_hash(ind.genotype) != ind.digest) {
        throw DataError("archive record digest does not match its genotype");
    }
    return ind;
}

void write_archive_jsonl(std::ostream& os, std::span<const Individual> members) {
    for (const auto& m : members) os << individual_record(m).dump() << '\n';
}

std::vector<Individual> read_archive_jsonl(std::istream& is) {
    std::vector<Individual> out;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw DataError("archive line " + std::to_string(lineno) + ": " + e.what());
        }
        out.push_back(individual_from_record(j));
    }
    return out;
}

std::vector<Individual> read_archive_jsonl(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot open " + path.string());
    return read_archive_jsonl(is);
}

void write_front_csv(std::ostream& os, std::span<const Individual> rows) {
    os << "digest,error_pct,flops_m,rank,crowding,origin,generation\n";
    for (const auto& r : rows) {
        os << r.digest.hex() << ',' << format_double(r.objectives.error) << ','
           << format_double(r.objectives.flops) << ',' << (r.rank ? std::to_string(*r.rank) : "")
           << ',' << (r.crowding ? format_double(*r.crowding) : "") << ',' << origin_name(r.origin)
           << ',' << r.generation_born << '\n';
    }
}

void write_nhv_csv(std::ostream& os, std::span<const GenerationStats> stats) {
    os << "generation,nhv\n";
    for (const auto& s : stats) os << s.generation << ',' << format_double(s.nhv) << '\n';
}

void write_stats_csv(std::ostream& os, std::span<const GenerationStats> stats) {
    os << "generation,nhv,nhv_population,front_size,rho,produced_init,produced_genetic,"
          "produced_bn,survived_init,survived_genetic,survived_bn,evaluations,archive_size,"
          "wall_seconds\n";
    for (const auto& s : stats) {
        os << s.generation << ',' << format_double(s.nhv) << ',' << format_double(s.nhv_population)
           << ',' << s.front_size << ',' << format_double(s.rho);
        for (int v : s.produced) os << ',' << v;
        for (int v : s.survived) os << ',' << v;
        os << ',' << s.evaluations << ',' << s.archive_size << ',' << std::fixed
           << std::setprecision(6) << s.wall_seconds << std::defaultfloat << '\n';
    }
}

std::vector<NhvPoint> read_nhv_csv(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot open " + path.string());
    std::vector<NhvPoint> out;
    std::string line;
    std::getline(is, line);
    if (trim(line) != "generation,nhv") throw DataError(path.string() + ": unexpected header");
    while (std::getline(is, line)) {
        if (trim(line).empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) throw DataError(path.string() + ": malformed row");
        try {
            out.push_back({std::stoi(line.substr(0, comma)), std::stod(line.substr(comma + 1))});
        } catch (const std::exception&) {
            throw DataError(path.string() + ": malformed row");
        }
    }
    return out;
}

ConfigSections parse_config_text(std::string_view text) {
    ConfigSections out;
    std::string section;
    std::istringstream is{std::string(text)};
    std::string raw;
    int lineno = 0;
    while (std::getline(is, raw)) {
        ++lineno;
        const auto hash = raw.find('#');
        const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') {
                throw std::invalid_argument("config line " + std::to_string(lineno) + ": unterminated section");
            }
            section = trim(line.substr(1, line.size() - 2));
            out[section];
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
        }
        std::string value = trim(line.substr(eq + 1));
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
            value = value.substr(1, value.size() - 2);
        }
        out[section][trim(line.substr(0, eq))] = value;
    }
    return out;
}

void apply_config(const ConfigSections& sections, SearchConfig& cfg) {
    for (const auto& [section, keys] : sections) {
        for (const auto& [key, value] : keys) {
            const std::string full = section.empty() ? key : section + "." + key;
            auto as_int = [&] { return parse_number<int>(full, value); };
            auto as_double = [&] { return parse_number<double>(full, value); };
            if (section == "search") {
                if (key == "pop_size") cfg.pop_size = as_int();
                else if (key == "generations") cfg.generations = as_int();
                else if (key == "tau") cfg.tau = as_int();
                else if (key == "seed") cfg.seed = parse_number<std::uint64_t>(full, value);
                else if (key == "model_set_size") cfg.model_set_size = as_int();
                else if (key == "bn_alpha") cfg.bn_alpha = as_double();
                else if (key == "redraw_attempts") cfg.redraw_attempts = as_int();
                else if (key == "mode") {
                    const auto m = mode_from_name(value);
                    if (!m) throw std::invalid_argument("unknown search mode '" + value + "'");
                    cfg.mode = *m;
                } else throw std::invalid_argument("unknown config key '" + full + "'");
            } else if (section == "variation") {
                if (key == "pc") cfg.p_c = as_double();
                else if (key == "pm") cfg.p_m = as_double();
                else if (key == "eta_m") cfg.eta_m = as_double();
                else throw std::invalid_argument("unknown config key '" + full + "'");
            } else if (section == "space") {
                if (key == "nodes") cfg.space.nodes = as_int();
                else if (key == "n_ops") cfg.space.n_ops = as_int();
                else throw std::invalid_argument("unknown config key '" + full + "'");
            } else if (section == "macro") {
                if (key == "ch_init") cfg.macro.ch_init = as_int();
                else if (key == "ch_inc") cfg.macro.ch_inc = as_int();
                else if (key == "n_repeat") cfg.macro.n_repeat = as_int();
                else if (key == "input_hw") cfg.macro.input_hw = as_int();
                else if (key == "input_channels") cfg.macro.input_channels = as_int();
                else if (key == "num_classes") cfg.macro.num_classes = as_int();
                else throw std::invalid_argument("unknown config key '" + full + "'");
            } else if (section == "proxy") {
                if (key == "channels") cfg.proxy.channels = as_int();
                else if (key == "layers") cfg.proxy.layers = as_int();
                else if (key == "epochs") cfg.proxy.epochs = as_int();
                else if (key == "dataset") cfg.dataset = value;
                else throw std::invalid_argument("unknown config key '" + full + "'");
            } else if (section == "evaluator") {
                // Consumed by the command-line front end.
            } else {
                throw std::invalid_argument("unknown config section '" + section + "'");
            }
        }
    }
}

std::string render_config(const SearchConfig& cfg) {
    std::ostringstream os;
    os << "[search]\n"
       << "mode = " << mode_name(cfg.mode) << '\n'
       << "seed = " << cfg.seed << '\n'
       << "pop_size = " << cfg.pop_size << '\n'
       << "generations = " << cfg.generations << '\n'
       << "tau = " << cfg.effective_tau() << '\n'
       << "model_set_size = " << cfg.model_set_size << '\n'
       << "bn_alpha = " << format_double(cfg.bn_alpha) << '\n'
       << "redraw_attempts = " << cfg.redraw_attempts << '\n'
       << "\n[variation]\n"
       << "pc = " << format_double(cfg.p_c) << '\n'
       << "pm = " << format_double(cfg.p_m) << '\n'
       << "eta_m = " << format_double(cfg.eta_m) << '\n'
       << "\n[space]\n"
       << "nodes = " << cfg.space.nodes << '\n'
       << "n_ops = " << cfg.space.n_ops << '\n'
       << "\n[macro]\n"
       << "ch_init = " << cfg.macro.ch_init << '\n'
       << "ch_inc = " << cfg.macro.ch_inc << '\n'
       << "n_repeat = " << cfg.macro.n_repeat << '\n'
       << "input_hw = " << cfg.macro.input_hw << '\n'
       << "input_channels = " << cfg.macro.input_channels << '\n'
       << "num_classes = " << cfg.macro.num_classes << '\n'
       << "\n[proxy]\n"
       << "channels = " << cfg.proxy.channels << '\n'
       << "layers = " << cfg.proxy.layers << '\n'
       << "epochs = " << cfg.proxy.epochs << '\n'
       << "dataset = " << cfg.dataset << '\n';
    return os.str();
}

std::vector<Individual> archive_front(std::span<const Individual> archive) {
    std::vector<Individual> all(archive.begin(), archive.end());
    if (all.empty()) return {};
    const auto fronts = nondominated_sort(all);
    std::vector<Individual> front;
    for (std::size_t i : fronts.front()) front.push_back(all[i]);
    std::vector<std::size_t> idx(front.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    crowding_distance(front, idx);
    std::stable_sort(front.begin(), front.end(), [](const Individual& a, const Individual& b) {
        if (a.objectives.flops != b.objectives.flops) return a.objectives.flops < b.objectives.flops;
        return a.objectives.error < b.objectives.error;
    });
    return front;
}

void write_run_directory(const std::filesystem::path& dir, const SearchRunner& runner) {
    std::filesystem::create_directories(dir);
    auto open = [&](const char* name) {
        std::ofstream os(dir / name, std::ios::binary | std::ios::trunc);
        if (!os) throw std::runtime_error("cannot write " + (dir / name).string());
        return os;
    };
    {
        auto os = open("config.toml");
        os << render_config(runner.config());
    }
    {
        auto os = open("archive.jsonl");
        write_archive_jsonl(os, runner.archive().members());
    }
    {
        auto os = open("front.csv");
        write_front_csv(os, archive_front(runner.archive().members()));
    }
    {
        auto os = open("nhv.csv");
        write_nhv_csv(os, runner.stats());
    }
    {
        auto os = open("stats.csv");
        write_stats_csv(os, runner.stats());
    }
}

}  // namespace evonas

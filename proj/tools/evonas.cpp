// evonas: multi-objective architecture search from the command line.
//
//   evonas search      run a search into an output directory
//   evonas report      summarise a run directory
//   evonas front       non-dominated archive members as CSV
//   evonas plot        archive scatter and NHV curve as SVG
//   evonas analyze-ops operation frequency and concat-width tables
//
// Exit codes: 0 success, 2 usage error, 3 data error, 4 evaluator failure.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "CLI11.hpp"

#include "evonas/analysis.hpp"
#include "evonas/eda.hpp"
#include "evonas/evaluation.hpp"
#include "evonas/run_io.hpp"
#include "evonas/search.hpp"

namespace fs = std::filesystem;
using namespace evonas;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitEvaluator = 4;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

int worker_width() {
    if (const char* env = std::getenv("EVONAS_WORKERS")) {
        try {
            const int v = std::stoi(env);
            if (v >= 1) return v;
        } catch (const std::exception&) {
        }
        throw UsageError("EVONAS_WORKERS must be a positive integer");
    }
    return 4;
}

struct SearchOptions {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> pop_size;
    std::optional<int> generations;
    std::optional<int> tau;
    std::optional<double> pc;
    std::optional<double> pm;
    std::optional<double> eta_m;
    std::optional<std::string> mode;
    std::string evaluator = "synthetic";
    std::string out = "run";
    bool resume = false;
    std::optional<int> stop_after;
    double noise = 0.0;
    double timeout_s = 3600.0;
    bool quiet = false;
};

std::unique_ptr<Evaluator> make_evaluator(const SearchOptions& o, std::uint64_t seed) {
    const int width = worker_width();
    if (o.evaluator == "synthetic") {
        SurrogateSpec spec;
        spec.noise_sigma = o.noise;
        spec.noise_seed = seed;
        return std::make_unique<SyntheticEvaluator>(spec, width);
    }
    constexpr std::string_view prefix = "external:";
    if (o.evaluator.rfind(prefix, 0) == 0 && o.evaluator.size() > prefix.size()) {
        ExternalOptions ext;
        ext.command = o.evaluator.substr(prefix.size());
        ext.workers = width;
        ext.request_timeout = std::chrono::milliseconds(static_cast<long long>(o.timeout_s * 1000));
        return std::make_unique<ExternalEvaluator>(ext);
    }
    throw UsageError("--evaluator must be 'synthetic' or 'external:<command>'");
}

void print_front_summary(const SearchRunner& runner, std::ostream& os) {
    const auto front = archive_front(runner.archive().members());
    const auto& last = runner.stats().back();
    os << "mode " << mode_name(runner.config().mode) << ", generation " << runner.generation() << "/"
       << runner.config().generations << ", archive " << runner.archive().size() << ", evaluations "
       << runner.evaluator_calls() << ", NHV " << std::fixed << std::setprecision(4) << last.nhv << "\n";
    os << "non-dominated set (" << front.size() << "):\n";
    os << "  error_pct   flops_m    digest\n";
    for (const auto& m : front) {
        os << "  " << std::setw(9) << std::setprecision(3) << m.objectives.error << "  " << std::setw(9)
           << std::setprecision(2) << m.objectives.flops << "  " << m.digest.hex() << '\n';
    }
    os << std::defaultfloat;
}

int cmd_search(const SearchOptions& o) {
    SearchConfig cfg;
    if (!o.config_path.empty()) {
        std::ifstream is(o.config_path);
        if (!is) throw UsageError("cannot read config file " + o.config_path);
        std::stringstream ss;
        ss << is.rdbuf();
        apply_config(parse_config_text(ss.str()), cfg);
    }
    if (o.seed) cfg.seed = *o.seed;
    if (o.pop_size) cfg.pop_size = *o.pop_size;
    if (o.generations) cfg.generations = *o.generations;
    if (o.tau) cfg.tau = *o.tau;
    if (o.pc) cfg.p_c = *o.pc;
    if (o.pm) cfg.p_m = *o.pm;
    if (o.eta_m) cfg.eta_m = *o.eta_m;
    if (o.mode) {
        const auto m = mode_from_name(*o.mode);
        if (!m) throw UsageError("unknown --mode '" + *o.mode + "'");
        cfg.mode = *m;
    }
    check_search_config(cfg);

    const fs::path out(o.out);
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) throw DataError("cannot create output directory " + out.string() + ": " + ec.message());
    if (access(out.c_str(), W_OK) != 0) {
        throw DataError("output directory " + out.string() + " is not writable");
    }

    auto evaluator = make_evaluator(o, cfg.seed);
    const fs::path ckpt = out / "checkpoint.json";
    std::optional<SearchRunner> runner;
    if (o.resume && fs::exists(ckpt)) {
        runner.emplace(SearchRunner::resume(ckpt, cfg, *evaluator));
    } else {
        runner.emplace(cfg, *evaluator);
    }

    try {
        if (runner->generation() < 0) {
            runner->initialize();
            runner->save_checkpoint(ckpt);
        }
        while (!runner->finished()) {
            if (o.stop_after && runner->generation() >= *o.stop_after) break;
            runner->step();
            runner->save_checkpoint(ckpt);
            if (!o.quiet) {
                const auto& s = runner->stats().back();
                std::cerr << "generation " << s.generation << ": NHV " << std::fixed << std::setprecision(4)
                          << s.nhv << ", rho " << std::setprecision(3) << s.rho << ", archive "
                          << s.archive_size << std::defaultfloat << '\n';
            }
        }
    } catch (const EvaluatorError& e) {
        if (runner->generation() >= 0) write_run_directory(out, *runner);
        std::cerr << "evaluator failure: " << e.what() << "\nresume with --resume --out " << out.string() << '\n';
        return kExitEvaluator;
    }

    write_run_directory(out, *runner);
    print_front_summary(*runner, std::cout);
    return 0;
}

std::vector<Individual> load_archive(const fs::path& run) {
    const fs::path path = run / "archive.jsonl";
    if (!fs::exists(path)) throw DataError("no archive.jsonl in " + run.string());
    return read_archive_jsonl(path);
}

int cmd_report(const std::string& run) {
    const auto archive = load_archive(run);
    if (archive.empty()) throw DataError("archive is empty");
    const auto front = archive_front(archive);
    std::array<std::size_t, 3> origins{};
    std::size_t failed = 0;
    int last_gen = 0;
    for (const auto& m : archive) {
        ++origins[static_cast<std::size_t>(m.origin)];
        failed += m.failed ? 1 : 0;
        last_gen = std::max(last_gen, m.generation_born);
    }
    std::vector<ObjectiveVector> objs;
    for (const auto& m : archive) objs.push_back(m.objectives);
    std::cout << "run: " << run << "\n"
              << "archive size: " << archive.size() << "\n"
              << "generations: " << last_gen << "\n"
              << "non-dominated: " << front.size() << "\n"
              << "normalized HV: " << std::fixed << std::setprecision(6) << normalized_hv(objs) << "\n"
              << std::defaultfloat << "origins: init=" << origins[0] << " genetic=" << origins[1]
              << " bn_sample=" << origins[2] << "\n"
              << "failed evaluations: " << failed << "\n";
    const fs::path nhv = fs::path(run) / "nhv.csv";
    if (fs::exists(nhv)) {
        const auto series = read_nhv_csv(nhv);
        if (!series.empty()) {
            std::cout << "NHV first/last: " << series.front().nhv << " / " << series.back().nhv << "\n";
        }
    }
    return 0;
}

int cmd_front(const std::string& run, std::optional<std::size_t> k) {
    const auto archive = load_archive(run);
    auto front = archive_front(archive);
    if (k) {
        if (*k > front.size()) {
            throw DataError("--k " + std::to_string(*k) + " exceeds the front size " + std::to_string(front.size()));
        }
        std::vector<ObjectiveVector> objs;
        for (const auto& m : front) objs.push_back(m.objectives);
        std::vector<Individual> picked;
        for (std::size_t i : select_tradeoff_subset(objs, *k)) picked.push_back(front[i]);
        front = std::move(picked);
    }
    write_front_csv(std::cout, front);
    return 0;
}

int cmd_plot(const std::vector<std::string>& runs, const std::string& out_dir) {
    std::vector<RunSeries> series;
    for (const auto& run : runs) {
        RunSeries s;
        s.label = fs::path(run).filename().string();
        if (s.label.empty()) s.label = run;
        s.archive = load_archive(run);
        if (s.archive.empty()) throw DataError("archive in " + run + " is empty");
        const fs::path nhv = fs::path(run) / "nhv.csv";
        if (fs::exists(nhv)) s.nhv = read_nhv_csv(nhv);
        series.push_back(std::move(s));
    }
    const fs::path out = out_dir.empty() ? fs::path(runs.front()) : fs::path(out_dir);
    fs::create_directories(out);
    auto write = [&](const char* name, const std::string& body) {
        std::ofstream os(out / name, std::ios::trunc);
        if (!os) throw DataError("cannot write " + (out / name).string());
        os << body;
        std::cout << (out / name).string() << '\n';
    };
    write("scatter.svg", render_scatter_svg(series));
    write("nhv.svg", render_nhv_svg(series));
    return 0;
}

int cmd_analyze_ops(const std::string& run, bool with_bn) {
    const auto archive = load_archive(run);
    std::cout << render_op_analysis(analyze_ops(archive));
    if (with_bn && !archive.empty()) {
        SearchConfig cfg;
        const fs::path cfg_path = fs::path(run) / "config.toml";
        if (fs::exists(cfg_path)) {
            std::ifstream is(cfg_path);
            std::stringstream ss;
            ss << is.rdbuf();
            apply_config(parse_config_text(ss.str()), cfg);
        }
        const auto picks = select_model_set(archive, static_cast<std::size_t>(cfg.model_set_size));
        std::vector<ArchitectureGenotype> models;
        for (std::size_t i : picks) models.push_back(archive[i].genotype);
        const auto bn = BlockBayesNet::fit(models, cfg.space, cfg.bn_alpha);
        std::cout << "\nnode-state model over the top " << models.size() << " archive members\n" << bn.report();
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-objective evolutionary architecture search"};
    app.require_subcommand(1);

    SearchOptions so;
    auto* search = app.add_subcommand("search", "Run a search and write a run directory");
    search->add_option("--config", so.config_path, "Config file ([section] key = value)");
    search->add_option("--seed", so.seed, "Random seed");
    search->add_option("--pop-size", so.pop_size, "Population size K (even)");
    search->add_option("--generations", so.generations, "Number of generations G");
    search->add_option("--tau", so.tau, "Generation at which model-based sampling starts");
    search->add_option("--pc", so.pc, "Crossover probability");
    search->add_option("--pm", so.pm, "Per-gene mutation probability");
    search->add_option("--eta-m", so.eta_m, "Polynomial mutation distribution index");
    search->add_option("--mode", so.mode, "nsganetv1 | vanilla_nsga2 | random_sampling");
    search->add_option("--evaluator", so.evaluator, "synthetic | external:<command>");
    search->add_option("--out", so.out, "Output run directory");
    search->add_flag("--resume", so.resume, "Continue from <out>/checkpoint.json");
    search->add_option("--stop-after", so.stop_after, "Stop once this generation is reached");
    search->add_option("--noise", so.noise, "Gaussian noise sigma of the synthetic evaluator");
    search->add_option("--timeout", so.timeout_s, "External evaluation timeout, seconds");
    search->add_flag("--quiet", so.quiet, "No per-generation progress");

    std::string run_dir;
    auto* report = app.add_subcommand("report", "Summarise a run directory");
    report->add_option("run", run_dir, "Run directory")->required();

    std::optional<std::size_t> k;
    std::string front_dir;
    auto* front = app.add_subcommand("front", "Print the non-dominated set as CSV");
    front->add_option("run", front_dir, "Run directory")->required();
    front->add_option("--k", k, "Pick k trade-off architectures");

    std::vector<std::string> plot_runs;
    std::string plot_out;
    auto* plot = app.add_subcommand("plot", "Write scatter.svg and nhv.svg");
    plot->add_option("runs", plot_runs, "Run directories (overlaid)")->required();
    plot->add_option("--out", plot_out, "Directory for the images (default: first run)");

    std::string ops_dir;
    bool with_bn = false;
    auto* ops = app.add_subcommand("analyze-ops", "Operation frequency analysis");
    ops->add_option("run", ops_dir, "Run directory")->required();
    ops->add_flag("--bn", with_bn, "Also print the fitted node-state model");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        if (*search) return cmd_search(so);
        if (*report) return cmd_report(run_dir);
        if (*front) return cmd_front(front_dir, k);
        if (*plot) return cmd_plot(plot_runs, plot_out);
        if (*ops) return cmd_analyze_ops(ops_dir, with_bn);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid configuration: " << e.what() << '\n';
        return kExitUsage;
    } catch (const CheckpointError& e) {
        std::cerr << "checkpoint error: " << e.what() << '\n';
        return kExitData;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kExitData;
    } catch (const EvaluatorError& e) {
        std::cerr << "evaluator failure: " << e.what() << '\n';
        return kExitEvaluator;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    }
    return kExitUsage;
}

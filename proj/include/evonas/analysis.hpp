#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "evonas/moea.hpp"
#include "evonas/run_io.hpp"

namespace evonas {

// Operation usage over the op slots of a set of genotypes (both blocks).
struct OpUsage {
    std::size_t set_size = 0;
    std::vector<std::size_t> counts;  // indexed by op code
};

struct ConcatRow {
    int width = 0;  // loose nodes of the normal block
    std::size_t count = 0;
    double mean_error = 0.0;
    double min_error = 0.0;
};

struct OpAnalysis {
    OpUsage all;
    OpUsage nondominated;
    OpUsage top_error;  // best 20% by error, at least one member
    std::vector<ConcatRow> concat;
};

OpUsage count_ops(std::span<const Individual> members);
OpAnalysis analyze_ops(std::span<const Individual> archive);
std::string render_op_analysis(const OpAnalysis& a);

struct RunSeries {
    std::string label;
    std::vector<Individual> archive;
    std::vector<NhvPoint> nhv;
};

// Archive scatter (error vs MFLOPs) coloured by generation with the
// non-dominated set outlined; one marker shape per run when overlaid.
std::string render_scatter_svg(std::span<const RunSeries> runs);
// NHV against generation, one polyline per run.
std::string render_nhv_svg(std::span<const RunSeries> runs);

}  // namespace evonas

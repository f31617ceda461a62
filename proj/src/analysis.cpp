#include "evonas/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>

namespace evonas {

namespace {

constexpr double kWidth = 720.0;
constexpr double kHeight = 480.0;
constexpr double kMargin = 60.0;

constexpr std::array<const char*, 6> kRunColours = {"#1f77b4", "#d62728", "#2ca02c",
                                                    "#9467bd", "#ff7f0e", "#8c564b"};

std::string num(double v) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(2) << v;
    return os.str();
}

// Blue (early) to yellow (late).
std::string generation_colour(int gen, int max_gen) {
    const double t = max_gen > 0 ? static_cast<double>(gen) / max_gen : 0.0;
    const int r = static_cast<int>(std::lround(40 + t * (250 - 40)));
    const int g = static_cast<int>(std::lround(60 + t * (210 - 60)));
    const int b = static_cast<int>(std::lround(180 + t * (30 - 180)));
    char buf[8];
    std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", r, g, b);
    return buf;
}

struct Axes {
    double x_lo, x_hi, y_lo, y_hi;

    double px(double x) const {
        const double span = x_hi > x_lo ? x_hi - x_lo : 1.0;
        return kMargin + (x - x_lo) / span * (kWidth - 2 * kMargin);
    }
    double py(double y) const {
        const double span = y_hi > y_lo ? y_hi - y_lo : 1.0;
        return kHeight - kMargin - (y - y_lo) / span * (kHeight - 2 * kMargin);
    }
};

void svg_open(std::ostringstream& os) {
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
       << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n"
       << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

// Run labels come from directory names; keep them from breaking the markup.
std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

void svg_axes(std::ostringstream& os, const Axes& ax, const std::string& xlabel,
              const std::string& ylabel) {
    const double x0 = kMargin, x1 = kWidth - kMargin, y0 = kHeight - kMargin, y1 = kMargin;
    os << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x1 << "\" y2=\"" << y0
       << "\" stroke=\"black\"/>\n"
       << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x0 << "\" y2=\"" << y1
       << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double xv = ax.x_lo + (ax.x_hi - ax.x_lo) * i / 4.0;
        const double yv = ax.y_lo + (ax.y_hi - ax.y_lo) * i / 4.0;
        os << "<text x=\"" << num(ax.px(xv)) << "\" y=\"" << y0 + 16
           << "\" font-size=\"11\" text-anchor=\"middle\">" << num(xv) << "</text>\n";
        os << "<text x=\"" << x0 - 6 << "\" y=\"" << num(ax.py(yv) + 4)
           << "\" font-size=\"11\" text-anchor=\"end\">" << num(yv) << "</text>\n";
    }
    os << "<text x=\"" << kWidth / 2 << "\" y=\"" << kHeight - 15
       << "\" font-size=\"13\" text-anchor=\"middle\">" << xlabel << "</text>\n"
       << "<text x=\"15\" y=\"" << kHeight / 2 << "\" font-size=\"13\" text-anchor=\"middle\" "
       << "transform=\"rotate(-90 15 " << kHeight / 2 << ")\">" << ylabel << "</text>\n";
}

}  // namespace

OpUsage count_ops(std::span<const Individual> members) {
    OpUsage u;
    u.set_size = members.size();
    u.counts.assign(kNumOps, 0);
    for (const auto& m : members) {
        for (const BlockGenotype* b : {&m.genotype.normal, &m.genotype.reduction}) {
            for (const NodeGene& n : b->nodes) {
                if (n.op1 >= 0 && n.op1 < kNumOps) ++u.counts[n.op1];
                if (n.op2 >= 0 && n.op2 < kNumOps) ++u.counts[n.op2];
            }
        }
    }
    return u;
}

OpAnalysis analyze_ops(std::span<const Individual> archive) {
    OpAnalysis a;
    a.all = count_ops(archive);

    std::vector<Individual> copy(archive.begin(), archive.end());
    if (!copy.empty()) {
        const auto fronts = nondominated_sort(copy);
        std::vector<Individual> nd;
        for (std::size_t i : fronts.front()) nd.push_back(copy[i]);
        a.nondominated = count_ops(nd);
    } else {
        a.nondominated = count_ops({});
    }

    std::vector<Individual> by_error(archive.begin(), archive.end());
    std::stable_sort(by_error.begin(), by_error.end(), [](const auto& x, const auto& y) {
        return x.objectives.error < y.objectives.error;
    });
    const std::size_t top = by_error.empty() ? 0 : std::max<std::size_t>(1, (by_error.size() + 4) / 5);
    by_error.resize(top);
    a.top_error = count_ops(by_error);

    std::map<int, std::vector<double>> by_width;
    for (const auto& m : archive) {
        by_width[static_cast<int>(loose_nodes(m.genotype.normal).size())].push_back(m.objectives.error);
    }
    for (const auto& [w, errors] : by_width) {
        ConcatRow row;
        row.width = w;
        row.count = errors.size();
        double sum = 0.0;
        for (double e : errors) sum += e;
        row.mean_error = sum / static_cast<double>(errors.size());
        row.min_error = *std::min_element(errors.begin(), errors.end());
        a.concat.push_back(row);
    }
    return a;
}

std::string render_op_analysis(const OpAnalysis& a) {
    std::ostringstream os;
    os << "op,all,nondominated,top20_error\n";
    for (int op = 0; op < kNumOps; ++op) {
        os << op_name(static_cast<OpCode>(op)) << ',' << a.all.counts[op] << ','
           << a.nondominated.counts[op] << ',' << a.top_error.counts[op] << '\n';
    }
    os << "# set sizes: all=" << a.all.set_size << " nondominated=" << a.nondominated.set_size
       << " top20_error=" << a.top_error.set_size << '\n';
    os << "\nconcat_width,count,mean_error,min_error\n";
    os << std::fixed << std::setprecision(4);
    for (const auto& r : a.concat) {
        os << r.width << ',' << r.count << ',' << r.mean_error << ',' << r.min_error << '\n';
    }
    return os.str();
}

std::string render_scatter_svg(std::span<const RunSeries> runs) {
    Axes ax{0.0, 1.0, 0.0, 1.0};
    bool first = true;
    int max_gen = 0;
    for (const auto& r : runs) {
        for (const auto& m : r.archive) {
            const double x = m.objectives.flops, y = m.objectives.error;
            if (first) {
                ax = {x, x, y, y};
                first = false;
            }
            ax.x_lo = std::min(ax.x_lo, x);
            ax.x_hi = std::max(ax.x_hi, x);
            ax.y_lo = std::min(ax.y_lo, y);
            ax.y_hi = std::max(ax.y_hi, y);
            max_gen = std::max(max_gen, m.generation_born);
        }
    }
    ax.x_lo = std::max(0.0, ax.x_lo * 0.95);
    ax.x_hi = ax.x_hi * 1.05 + 1e-9;
    ax.y_lo = std::max(0.0, ax.y_lo - 1.0);
    ax.y_hi = ax.y_hi + 1.0;

    std::ostringstream os;
    svg_open(os);
    svg_axes(os, ax, "FLOPs (M)", "top-1 error (%)");
    for (std::size_t ri = 0; ri < runs.size(); ++ri) {
        const auto& run = runs[ri];
        for (const auto& m : run.archive) {
            const std::string colour = generation_colour(m.generation_born, max_gen);
            const double x = ax.px(m.objectives.flops), y = ax.py(m.objectives.error);
            if (ri % 2 == 0) {
                os << "<circle cx=\"" << num(x) << "\" cy=\"" << num(y) << "\" r=\"2.5\" fill=\"" << colour
                   << "\" fill-opacity=\"0.7\"/>\n";
            } else {
                os << "<rect x=\"" << num(x - 2.5) << "\" y=\"" << num(y - 2.5)
                   << "\" width=\"5\" height=\"5\" fill=\"" << colour << "\" fill-opacity=\"0.7\"/>\n";
            }
        }
        const auto front = archive_front(run.archive);
        const char* edge = kRunColours[ri % kRunColours.size()];
        os << "<polyline fill=\"none\" stroke=\"" << edge << "\" stroke-width=\"1.5\" points=\"";
        for (const auto& m : front) os << num(ax.px(m.objectives.flops)) << ',' << num(ax.py(m.objectives.error)) << ' ';
        os << "\"/>\n";
        for (const auto& m : front) {
            os << "<rect x=\"" << num(ax.px(m.objectives.flops) - 4) << "\" y=\""
               << num(ax.py(m.objectives.error) - 4) << "\" width=\"8\" height=\"8\" fill=\"none\" stroke=\""
               << edge << "\"/>\n";
        }
        os << "<text x=\"" << kWidth - kMargin << "\" y=\"" << kMargin + 16.0 * ri
           << "\" font-size=\"12\" text-anchor=\"end\" fill=\"" << edge << "\">" << xml_escape(run.label) << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

std::string render_nhv_svg(std::span<const RunSeries> runs) {
    Axes ax{0.0, 1.0, 0.0, 1.0};
    bool first = true;
    for (const auto& r : runs) {
        for (const auto& p : r.nhv) {
            if (first) {
                ax = {0.0, static_cast<double>(p.generation), p.nhv, p.nhv};
                first = false;
            }
            ax.x_hi = std::max(ax.x_hi, static_cast<double>(p.generation));
            ax.y_lo = std::min(ax.y_lo, p.nhv);
            ax.y_hi = std::max(ax.y_hi, p.nhv);
        }
    }
    if (ax.x_hi <= ax.x_lo) ax.x_hi = ax.x_lo + 1.0;
    const double pad = std::max(0.005, (ax.y_hi - ax.y_lo) * 0.05);
    ax.y_lo -= pad;
    ax.y_hi += pad;

    std::ostringstream os;
    svg_open(os);
    svg_axes(os, ax, "generation", "normalized hypervolume");
    for (std::size_t ri = 0; ri < runs.size(); ++ri) {
        const char* colour = kRunColours[ri % kRunColours.size()];
        os << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"2\" points=\"";
        for (const auto& p : runs[ri].nhv) os << num(ax.px(p.generation)) << ',' << num(ax.py(p.nhv)) << ' ';
        os << "\"/>\n";
        os << "<text x=\"" << kWidth - kMargin << "\" y=\"" << kMargin + 16.0 * ri
           << "\" font-size=\"12\" text-anchor=\"end\" fill=\"" << colour << "\">" << xml_escape(runs[ri].label)
           << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

}  // namespace evonas

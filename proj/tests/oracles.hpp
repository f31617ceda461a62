#pragma once

// Slow, independent re-derivations used to cross-check the library. Nothing
// here calls into the code it checks, except for plain data types.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <vector>

#include "evonas/complexity.hpp"
#include "evonas/genotype.hpp"
#include "evonas/moea.hpp"
#include "evonas/rng.hpp"

namespace oracle {

using evonas::ArchitectureGenotype;
using evonas::ObjectiveVector;

// ---------------------------------------------------------------- genotypes

// Walks every gene vector of one block in odometer order.
inline void for_each_block(int nodes, int n_ops, const std::function<void(const std::vector<int>&)>& fn) {
    std::vector<int> hi;
    for (int p = 0; p < nodes; ++p) {
        hi.push_back(p + 1);
        hi.push_back(n_ops - 1);
        hi.push_back(p + 1);
        hi.push_back(n_ops - 1);
    }
    std::vector<int> genes(hi.size(), 0);
    for (;;) {
        fn(genes);
        std::size_t i = 0;
        while (i < genes.size() && genes[i] == hi[i]) genes[i++] = 0;
        if (i == genes.size()) return;
        ++genes[i];
    }
}

inline std::uint64_t count_blocks(int nodes, int n_ops) {
    std::uint64_t n = 0;
    for_each_block(nodes, n_ops, [&](const std::vector<int>&) { ++n; });
    return n;
}

// --------------------------------------------------------------------- MOEA

inline bool beats(const ObjectiveVector& a, const ObjectiveVector& b) {
    const bool no_worse = a.error <= b.error && a.flops <= b.flops;
    const bool better = a.error < b.error || a.flops < b.flops;
    return no_worse && better;
}

// Repeatedly peel the set of points nobody remaining dominates.
inline std::vector<int> peel_ranks(const std::vector<ObjectiveVector>& pts) {
    std::vector<int> rank(pts.size(), -1);
    std::size_t assigned = 0;
    for (int r = 0; assigned < pts.size(); ++r) {
        std::vector<std::size_t> layer;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            if (rank[i] >= 0) continue;
            bool dominated = false;
            for (std::size_t j = 0; j < pts.size() && !dominated; ++j) {
                if (j != i && rank[j] < 0 && beats(pts[j], pts[i])) dominated = true;
            }
            if (!dominated) layer.push_back(i);
        }
        for (std::size_t i : layer) rank[i] = r;
        assigned += layer.size();
    }
    return rank;
}

// Textbook crowding distance for one front, given as point indices.
inline std::map<std::size_t, double> crowding(const std::vector<ObjectiveVector>& pts,
                                              const std::vector<std::size_t>& front) {
    std::map<std::size_t, double> d;
    for (std::size_t i : front) d[i] = 0.0;
    if (front.size() <= 2) {
        for (std::size_t i : front) d[i] = std::numeric_limits<double>::infinity();
        return d;
    }
    for (int obj = 0; obj < 2; ++obj) {
        auto val = [&](std::size_t i) { return obj == 0 ? pts[i].error : pts[i].flops; };
        std::vector<std::size_t> s = front;
        std::stable_sort(s.begin(), s.end(), [&](auto a, auto b) { return val(a) < val(b); });
        const double range = val(s.back()) - val(s.front());
        d[s.front()] = std::numeric_limits<double>::infinity();
        d[s.back()] = std::numeric_limits<double>::infinity();
        if (range <= 0.0) continue;
        for (std::size_t k = 1; k + 1 < s.size(); ++k) {
            d[s[k]] += (val(s[k + 1]) - val(s[k - 1])) / range;
        }
    }
    return d;
}

// Survivor set of NSGA-II truncation: whole fronts, then the most crowded-
// distant members of the split front. Returned sorted.
inline std::vector<std::size_t> naive_survivors(const std::vector<ObjectiveVector>& pts, std::size_t k) {
    const auto rank = peel_ranks(pts);
    const int max_rank = *std::max_element(rank.begin(), rank.end());
    std::vector<std::size_t> out;
    for (int r = 0; r <= max_rank && out.size() < k; ++r) {
        std::vector<std::size_t> front;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            if (rank[i] == r) front.push_back(i);
        }
        if (out.size() + front.size() <= k) {
            out.insert(out.end(), front.begin(), front.end());
            continue;
        }
        const auto d = crowding(pts, front);
        std::stable_sort(front.begin(), front.end(), [&](auto a, auto b) { return d.at(a) > d.at(b); });
        front.resize(k - out.size());
        out.insert(out.end(), front.begin(), front.end());
    }
    std::sort(out.begin(), out.end());
    return out;
}

struct McEstimate {
    double value;
    double sigma;
};

// Monte-Carlo dominated area inside [0, ref.error] x [0, ref.flops].
inline McEstimate mc_hypervolume(const std::vector<ObjectiveVector>& pts, const ObjectiveVector& ref,
                                 std::size_t samples, std::uint64_t seed) {
    evonas::Rng rng(seed);
    std::size_t hits = 0;
    for (std::size_t s = 0; s < samples; ++s) {
        const double x = rng.uniform01() * ref.error;
        const double y = rng.uniform01() * ref.flops;
        for (const auto& p : pts) {
            if (p.error <= x && p.flops <= y) {
                ++hits;
                break;
            }
        }
    }
    const double box = ref.error * ref.flops;
    const double p = static_cast<double>(hits) / static_cast<double>(samples);
    return {p * box, std::sqrt(p * (1 - p) / static_cast<double>(samples)) * box};
}

// ------------------------------------------------------------------- FLOPs
//
// Everything is lowered to one primitive: a (possibly grouped, possibly
// sparse) convolution on an explicit tensor shape. Shapes are propagated by
// walking the network, not by formula.

struct Shape {
    long c, h, w;
};

struct Tally {
    std::uint64_t macs = 0;
    std::uint64_t params = 0;
};

// Grouped kh x kw convolution, "same" padding. density scales the number of
// multiplies per output (fixed sparse kernels); learnable=false keeps the
// weights out of the parameter count.
inline Shape conv(Tally& t, Shape in, long cout, int kh, int kw, int sh, int sw, long groups,
                  double density = 1.0, bool learnable = true) {
    const Shape out{cout, (in.h + sh - 1) / sh, (in.w + sw - 1) / sw};
    const std::uint64_t weights = static_cast<std::uint64_t>(kh) * kw * (in.c / groups) * cout;
    const auto live = static_cast<std::uint64_t>(std::floor(static_cast<double>(weights) * density));
    t.macs += live * static_cast<std::uint64_t>(out.h * out.w);
    if (learnable) t.params += weights;
    return out;
}

inline Shape edge(Tally& t, int op, Shape x, int stride) {
    using evonas::OpCode;
    const long c = x.c;
    auto sepk = [&](int k) {
        Shape y = conv(t, x, c, k, k, stride, stride, c);
        y = conv(t, y, c, 1, 1, 1, 1, 1);
        y = conv(t, y, c, k, k, 1, 1, c);
        return conv(t, y, c, 1, 1, 1, 1, 1);
    };
    auto dilk = [&](int k) {
        Shape y = conv(t, x, c, k, k, stride, stride, c);
        return conv(t, y, c, 1, 1, 1, 1, 1);
    };
    auto lbck = [&](int k) {
        Shape y = conv(t, x, c, k, k, stride, stride, 1, 0.5, false);
        return conv(t, y, c, 1, 1, 1, 1, 1);
    };
    switch (static_cast<OpCode>(op)) {
        case OpCode::identity:
            return {c, (x.h + stride - 1) / stride, (x.w + stride - 1) / stride};
        case OpCode::max_pool_3x3:
        case OpCode::avg_pool_3x3: {
            Tally scratch;
            // A 3x3 window per output element and channel.
            const Shape y = conv(scratch, x, c, 3, 3, stride, stride, c);
            t.macs += scratch.macs;
            return y;
        }
        case OpCode::squeeze_excite: {
            const Shape y{c, (x.h + stride - 1) / stride, (x.w + stride - 1) / stride};
            const long hidden = std::max<long>(1, c / 16);
            t.macs += static_cast<std::uint64_t>(c * y.h * y.w);  // global average
            Shape v{c, 1, 1};
            v = conv(t, v, hidden, 1, 1, 1, 1, 1);
            v = conv(t, v, c, 1, 1, 1, 1, 1);
            t.macs += static_cast<std::uint64_t>(c * y.h * y.w);  // rescale
            return y;
        }
        case OpCode::lbc_3x3: return lbck(3);
        case OpCode::lbc_5x5: return lbck(5);
        case OpCode::dil_conv_3x3: return dilk(3);
        case OpCode::dil_conv_5x5: return dilk(5);
        case OpCode::sep_conv_3x3: return sepk(3);
        case OpCode::sep_conv_5x5: return sepk(5);
        case OpCode::sep_conv_7x7: return sepk(7);
        case OpCode::conv_1x7_7x1: {
            const Shape y = conv(t, x, c, 1, 7, 1, stride, 1);
            return conv(t, y, c, 7, 1, stride, 1, 1);
        }
    }
    return x;
}

inline Tally network(const ArchitectureGenotype& g, const evonas::MacroConfig& m) {
    Tally t;
    Shape img{m.input_channels, m.input_hw, m.input_hw};
    Shape s0 = conv(t, img, m.ch_init, 3, 3, 1, 1, 1);
    Shape s1 = s0;
    std::vector<bool> reduce;
    for (int stage = 0; stage < 3; ++stage) {
        for (int i = 0; i < m.n_repeat; ++i) reduce.push_back(false);
        if (stage < 2) reduce.push_back(true);
    }
    for (std::size_t b = 0; b < reduce.size(); ++b) {
        const long width = m.ch_init + static_cast<long>(b + 1) * m.ch_inc;
        const auto& block = reduce[b] ? g.reduction : g.normal;
        // Both inputs are projected to `width` on the h[i-1] grid.
        Tally pre;
        Shape a = conv(pre, Shape{s0.c, s1.h, s1.w}, width, 1, 1, 1, 1, 1);
        Shape p1 = conv(pre, s1, width, 1, 1, 1, 1, 1);
        t.macs += pre.macs;
        t.params += pre.params;

        std::vector<Shape> states{a, p1};
        std::vector<bool> used(block.nodes.size(), false);
        for (const auto& n : block.nodes) {
            Shape o1{}, o2{};
            for (int side = 0; side < 2; ++side) {
                const int in = side == 0 ? n.in1 : n.in2;
                const int op = side == 0 ? n.op1 : n.op2;
                const int stride = reduce[b] && in < 2 ? 2 : 1;
                if (in >= 2) used[in - 2] = true;
                (side == 0 ? o1 : o2) = edge(t, op, states[in], stride);
            }
            states.push_back(o1);
        }
        long loose = 0;
        for (bool u : used) loose += u ? 0 : 1;
        const Shape out{loose * width, states.back().h, states.back().w};
        s0 = s1;
        s1 = out;
    }
    Shape pooled{s1.c, 1, 1};
    conv(t, pooled, m.num_classes, 1, 1, 1, 1, 1);
    t.params += static_cast<std::uint64_t>(m.num_classes);  // classifier bias
    return t;
}

}  // namespace oracle

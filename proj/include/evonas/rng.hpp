#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <sstream>
#include <string>

namespace evonas {

// Seeded generator with platform-stable derived draws. The standard
// distributions are implementation-defined, so everything a search consumes
// is derived from the raw 64-bit engine output here. That keeps archives
// byte-identical across standard libraries and lets the whole generator
// state round-trip through a checkpoint.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    // Uniform double in [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    // Uniform integer in [lo, hi] (inclusive), unbiased (Lemire's method).
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        const auto range = static_cast<std::uint64_t>(hi - lo) + 1;
        if (range == 0) return static_cast<std::int64_t>(next());  // full 64-bit span
        unsigned __int128 m = static_cast<unsigned __int128>(next()) * range;
        auto low = static_cast<std::uint64_t>(m);
        if (low < range) {
            const std::uint64_t threshold = (0 - range) % range;
            while (low < threshold) {
                m = static_cast<unsigned __int128>(next()) * range;
                low = static_cast<std::uint64_t>(m);
            }
        }
        return lo + static_cast<std::int64_t>(m >> 64);
    }

    bool coin(double p_true = 0.5) { return uniform01() < p_true; }

    // Standard normal via Box-Muller; no cached second value so the engine
    // state alone describes the generator.
    double normal() {
        double u1 = uniform01();
        while (u1 <= 0.0) u1 = uniform01();
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    std::string state() const {
        std::ostringstream os;
        os << engine_;
        return os.str();
    }

    void restore(const std::string& text) {
        std::istringstream is(text);
        is >> engine_;
        if (is.fail()) throw std::invalid_argument("malformed generator state");
    }

    friend bool operator==(const Rng& a, const Rng& b) { return a.engine_ == b.engine_; }

private:
    std::mt19937_64 engine_;
};

}  // namespace evonas

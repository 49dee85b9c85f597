#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>

namespace refnet {

/// Deterministic random source. All sampling is implemented on top of the
/// raw 64-bit stream so results are reproducible across platforms and
/// standard-library versions (std::uniform_real_distribution and friends
/// are implementation-defined).
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    /// Uniform double in [0, 1).
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [lo, hi], inclusive.
    int uniform_int(int lo, int hi) {
        if (hi < lo) throw std::invalid_argument("uniform_int: empty range");
        std::uint64_t span = static_cast<std::uint64_t>(hi) - static_cast<std::uint64_t>(lo) + 1;
        return lo + static_cast<int>(next_u64() % span);
    }

    bool bernoulli(double p) { return uniform() < p; }

    /// Standard normal via Box-Muller (no cached spare, always two draws).
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    /// Derive an independent stream; keeps module RNGs decoupled.
    Rng fork(std::uint64_t stream) {
        return Rng(next_u64() ^ (stream * 0x9e3779b97f4a7c15ull));
    }

    std::string state() const {
        std::ostringstream os;
        os << gen_;
        return os.str();
    }
    void set_state(const std::string& s) {
        std::istringstream is(s);
        is >> gen_;
        if (!is) throw std::runtime_error("Rng::set_state: malformed state string");
    }

private:
    std::mt19937_64 gen_;
};

} // namespace refnet

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace shrinke {

/// SplitMix64 step; used to derive independent stream seeds from one master seed.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Deterministic random source. std::mt19937_64 output is fully specified by the
/// standard, and all sampling transforms below are implemented here rather than
/// with std:: distributions (whose output is implementation-defined), so the same
/// seed yields the same stream on every build.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next() { return gen_(); }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Unbiased integer in [0, n); rejection sampling on the top of the range.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x = gen_();
        while (x >= limit) x = gen_();
        return x % n;
    }

    /// Standard normal via Box-Muller, one cached spare per pair.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log1p(-u1));
        const double theta = 2.0 * M_PI * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    /// Fisher-Yates shuffle driven by below(); deterministic for a given seed.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[below(i)]);
        }
    }

  private:
    std::mt19937_64 gen_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace shrinke

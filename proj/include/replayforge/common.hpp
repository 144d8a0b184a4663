// Shared error taxonomy, deterministic RNG, and seed derivation.
#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace replayforge {

// ---- Errors ----------------------------------------------------------------

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Shape mismatch between tensors/vectors.
struct DimensionError : Error {
    using Error::Error;
};

// Argument outside its documented range.
struct DomainError : Error {
    using Error::Error;
};

// Operation called on an object in the wrong state (e.g. sampling an
// untrained generator).
struct StateError : Error {
    using Error::Error;
};

// Non-finite values or other failures during optimization.
struct TrainingError : Error {
    using Error::Error;
};

struct ParseError : Error {
    using Error::Error;
};

struct SchemaError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

// CLI misuse; maps to exit code 2.
struct UsageError : Error {
    using Error::Error;
};

// ---- Seed derivation --------------------------------------------------------

inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

// Stable, labeled child-seed derivation. Every stage of a run draws its seed
// via mix_seed(base, "stage-name", index), so resuming a sequence at a task
// boundary reproduces the exact stream of the uninterrupted run.
inline std::uint64_t mix_seed(std::uint64_t base, std::string_view tag,
                              std::uint64_t index = 0) {
    std::uint64_t s = base ^ fnv1a64(tag);
    std::uint64_t a = splitmix64(s);
    s ^= index + 0x9E3779B97F4A7C15ULL;
    std::uint64_t b = splitmix64(s);
    return a ^ (b + 0x2545F4914F6CDD1DULL);
}

// ---- Rng --------------------------------------------------------------------

// Deterministic random source. The engine is mt19937_64 (sequence fixed by
// the standard); all distributions are implemented here rather than taken
// from <random> so that sample streams are bit-identical across platforms.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed), seed_(seed) {}

    std::uint64_t seed() const { return seed_; }

    std::uint64_t next_u64() { return eng_(); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Unbiased integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        if (n == 0) throw DomainError("Rng::below: n must be positive");
        const std::uint64_t bound = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
        std::uint64_t x = next_u64();
        while (x >= bound) x = next_u64();
        return x % n;
    }

    bool bernoulli(double p) { return uniform() < p; }

    // Standard normal via Box-Muller; the spare value is cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    double lognormal(double mu, double sigma) {
        return std::exp(mu + sigma * normal());
    }

    // Weighted index draw; weights need not be normalized.
    std::size_t categorical(const std::vector<double>& weights) {
        double total = 0.0;
        for (double w : weights) total += w;
        if (!(total > 0.0))
            throw DomainError("Rng::categorical: weights must have positive sum");
        double u = uniform() * total;
        for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
            u -= weights[i];
            if (u < 0.0) return i;
        }
        return weights.size() - 1;
    }

    std::vector<std::size_t> permutation(std::size_t n) {
        std::vector<std::size_t> p(n);
        for (std::size_t i = 0; i < n; ++i) p[i] = i;
        for (std::size_t i = n; i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(p[i - 1], p[j]);
        }
        return p;
    }

    // Child seed for an independent stream.
    std::uint64_t split() { return next_u64() ^ 0x6A09E667F3BCC909ULL; }

private:
    std::mt19937_64 eng_;
    std::uint64_t seed_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace replayforge

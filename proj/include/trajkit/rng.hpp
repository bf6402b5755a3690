#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

namespace trajkit {

/// One SplitMix64 step (Steele, Lea & Flood 2014). Advances `state` and
/// returns the next output. Used for deriving independent stream seeds.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

/// Derives a stream seed from a master seed and up to two stream indices,
/// chaining SplitMix64 steps: seed(k, r) for replicate runs, seed(i) for
/// per-subject streams. The same (master, a, b) always yields the same seed.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0) {
    std::uint64_t s = master;
    std::uint64_t z = splitmix64(s);
    s = z ^ (a + 0x9e3779b97f4a7c15ull);
    z = splitmix64(s);
    s = z ^ (b + 0x3c6ef372fe94f82aull);
    return splitmix64(s);
}

/// Deterministic random generator. The engine is std::mt19937_64, whose
/// output sequence is pinned bit-for-bit by the C++ standard; all sampling
/// algorithms on top of it are spelled out here because the standard
/// std::*_distribution classes are implementation-defined.
///
/// Integer draws (uniform_below, uniform_int) use rejection sampling and are
/// reproducible across platforms. Floating-point draws additionally depend on
/// the platform's libm (exp/log/cos), so they are reproducible per seed on a
/// given platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t next_u64() { return eng_(); }

    /// Uniform on [0, 1) with 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform on [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n), n >= 1, by rejection over the top of the
    /// 64-bit range (no modulo bias).
    std::uint64_t uniform_below(std::uint64_t n) {
        if (n == 0) throw std::invalid_argument("uniform_below: n must be positive");
        const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
        std::uint64_t x;
        do {
            x = next_u64();
        } while (x >= limit);
        return x % n;
    }

    /// Uniform integer in [lo, hi], inclusive.
    long long uniform_int(long long lo, long long hi) {
        return lo + static_cast<long long>(uniform_below(static_cast<std::uint64_t>(hi - lo) + 1));
    }

    /// Standard normal via Box-Muller; one uniform pair per draw.
    double normal() {
        const double u1 = 1.0 - uniform(); // (0, 1]
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    double normal(double mean, double sd) { return mean + sd * normal(); }

    /// Gamma(shape, scale) via Marsaglia-Tsang; shape < 1 handled by boosting.
    double gamma(double shape, double scale = 1.0) {
        if (shape <= 0.0 || scale <= 0.0)
            throw std::invalid_argument("gamma: shape and scale must be positive");
        if (shape < 1.0) {
            const double u = uniform();
            return gamma(shape + 1.0, scale) * std::pow(u > 0 ? u : 1e-300, 1.0 / shape);
        }
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x, v;
            do {
                x = normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = uniform();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v * scale;
            if (u > 0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v * scale;
        }
    }

    /// Poisson(mean) by Knuth's product method, split additively for large
    /// means so the per-chunk product stays well inside double range.
    long long poisson(double mean) {
        if (mean < 0.0) throw std::invalid_argument("poisson: mean must be nonnegative");
        long long total = 0;
        while (mean > 30.0) {
            total += poisson_small(30.0);
            mean -= 30.0;
        }
        return total + poisson_small(mean);
    }

    /// Negative binomial with the given mean and dispersion (size) r, as the
    /// gamma-Poisson mixture: lambda ~ Gamma(r, mean/r), N ~ Poisson(lambda).
    /// Variance is mean + mean^2 / r.
    long long negative_binomial(double mean, double r) {
        if (mean <= 0.0) return 0;
        return poisson(gamma(r, mean / r));
    }

    /// Index draw from an unnormalized weight vector.
    std::size_t categorical(const std::vector<double>& weights) {
        double total = 0.0;
        for (double w : weights) total += w;
        double u = uniform() * total;
        for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
            u -= weights[i];
            if (u < 0.0) return i;
        }
        return weights.empty() ? 0 : weights.size() - 1;
    }

private:
    long long poisson_small(double mean) {
        if (mean <= 0.0) return 0;
        const double limit = std::exp(-mean);
        long long k = 0;
        double prod = uniform();
        while (prod > limit) {
            ++k;
            prod *= uniform();
        }
        return k;
    }

    std::mt19937_64 eng_;
};

} // namespace trajkit

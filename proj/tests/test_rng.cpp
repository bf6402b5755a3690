#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "trajkit/rng.hpp"

using namespace trajkit;

TEST_CASE("splitmix64 derivation is stable and sensitive to indices") {
    const std::uint64_t a = derive_seed(12345, 2, 0);
    const std::uint64_t b = derive_seed(12345, 2, 0);
    REQUIRE(a == b);
    std::set<std::uint64_t> seen;
    for (std::uint64_t k = 0; k < 10; ++k)
        for (std::uint64_t r = 0; r < 10; ++r) seen.insert(derive_seed(99, k, r));
    REQUIRE(seen.size() == 100);
}

TEST_CASE("identical seeds replay identical streams") {
    Rng a(777), b(777);
    for (int i = 0; i < 100; ++i) REQUIRE(a.next_u64() == b.next_u64());
}

TEST_CASE("uniform_below is unbiased within sampling error") {
    Rng rng(5);
    const int k = 7;
    std::vector<int> counts(k, 0);
    const int n = 70000;
    for (int i = 0; i < n; ++i) ++counts[static_cast<std::size_t>(rng.uniform_below(k))];
    for (int c : counts) {
        const double expect = static_cast<double>(n) / k;
        REQUIRE(std::abs(c - expect) < 5.0 * std::sqrt(expect));
    }
}

TEST_CASE("uniform stays in range") {
    Rng rng(9);
    for (int i = 0; i < 1000; ++i) {
        const double u = rng.uniform(-2.0, 3.0);
        REQUIRE(u >= -2.0);
        REQUIRE(u < 3.0);
    }
}

TEST_CASE("normal moments are roughly standard") {
    Rng rng(13);
    double sum = 0, sq = 0;
    const int n = 50000;
    for (int i = 0; i < n; ++i) {
        const double z = rng.normal();
        sum += z;
        sq += z * z;
    }
    REQUIRE(sum / n == Catch::Approx(0.0).margin(0.02));
    REQUIRE(sq / n == Catch::Approx(1.0).margin(0.03));
}

TEST_CASE("negative binomial hits its mean and overdispersion") {
    Rng rng(21);
    const double mean = 13.0, r = 2.0;
    double sum = 0, sq = 0;
    const int n = 40000;
    for (int i = 0; i < n; ++i) {
        const double x = static_cast<double>(rng.negative_binomial(mean, r));
        sum += x;
        sq += x * x;
    }
    const double m = sum / n;
    const double var = sq / n - m * m;
    REQUIRE(m == Catch::Approx(mean).epsilon(0.03));
    REQUIRE(var == Catch::Approx(mean + mean * mean / r).epsilon(0.10));
}

TEST_CASE("categorical respects weights") {
    Rng rng(33);
    const std::vector<double> w{0.5, 0.3, 0.2};
    std::vector<int> counts(3, 0);
    const int n = 60000;
    for (int i = 0; i < n; ++i) ++counts[rng.categorical(w)];
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double expect = w[i] * n;
        REQUIRE(std::abs(counts[i] - expect) < 5.0 * std::sqrt(expect));
    }
}

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <set>

#include "test_support.hpp"
#include "trajkit/diagnostics.hpp"
#include "trajkit/simgen.hpp"
#include "trajkit/trajectories.hpp"

using namespace trajkit;

TEST_CASE("zero noise puts every response exactly on its cluster curve") {
    auto spec = preset("bp5");
    spec.n_subjects = 50;
    spec.noise_sd = 0.0;
    const auto ds = generate(spec);
    for (const auto& s : ds.subjects) {
        const auto& shape = spec.shapes[static_cast<std::size_t>(s.truth_group.value() - 1)];
        for (std::size_t j = 0; j < s.n_obs(); ++j)
            REQUIRE(s.responses[j] == shape.value(s.times[j]));
    }
}

TEST_CASE("every subject satisfies the pre/post observation minima") {
    auto spec = preset("bp5");
    spec.n_subjects = 400;
    const auto ds = generate(spec);
    REQUIRE(ds.n_subjects() == 400);
    for (const auto& s : ds.subjects) {
        int pre = 0, post = 0;
        for (double t : s.times) {
            REQUIRE(t >= spec.t_min);
            REQUIRE(t <= spec.t_max);
            if (t < 0) ++pre;
            if (t > 0) ++post;
        }
        REQUIRE(pre >= spec.obs.min_pre);
        REQUIRE(post >= spec.obs.min_post);
        REQUIRE(s.n_obs() >= 4);
    }
}

TEST_CASE("generation is deterministic down to the output bytes") {
    auto spec = preset("clean2");
    spec.n_subjects = 80;
    const auto dir = std::filesystem::temp_directory_path();
    const auto p1 = (dir / "trajkit_gen_a.csv").string();
    const auto p2 = (dir / "trajkit_gen_b.csv").string();
    write_csv(generate(spec), p1);
    write_csv(generate(spec), p2);
    REQUIRE(read_text_file(p1) == read_text_file(p2));
    std::filesystem::remove(p1);
    std::filesystem::remove(p2);

    // different seeds give different draws
    const auto base = generate(spec);
    spec.seed += 1;
    const auto other = generate(spec);
    bool any_diff = false;
    for (std::size_t i = 0; i < 10 && !any_diff; ++i)
        any_diff = base.subjects[i].times != other.subjects[i].times;
    REQUIRE(any_diff);
}

TEST_CASE("row volume tracks the configured mean observation count") {
    auto spec = preset("bp5");
    spec.n_subjects = 10000;
    const auto ds = generate(spec);
    const double mean_rows = static_cast<double>(ds.n_rows()) / static_cast<double>(ds.n_subjects());
    REQUIRE(mean_rows == Catch::Approx(16.92).epsilon(0.02));
}

TEST_CASE("bp5 preset matches its documented shape envelope") {
    const auto spec = preset("bp5");
    REQUIRE(spec.shapes.size() == 5);
    std::set<double> weights;
    for (double w : spec.cluster_weights) weights.insert(w);
    REQUIRE(weights.size() > 1); // intentionally unequal cluster sizes
    for (const auto& shape : spec.shapes) {
        REQUIRE(shape.value(-100.0) >= 140.0);
        REQUIRE(shape.value(-100.0) <= 185.0);
        // post-zero decline below the pre-zero level
        REQUIRE(shape.value(150.0) < shape.value(-1.0));
    }
}

TEST_CASE("clean presets separate their levels by at least 20 noise SDs") {
    for (const char* name : {"clean2", "clean5"}) {
        const auto spec = preset(name);
        for (std::size_t i = 0; i < spec.shapes.size(); ++i)
            for (std::size_t j = i + 1; j < spec.shapes.size(); ++j) {
                const double gap = std::abs(spec.shapes[i].level - spec.shapes[j].level);
                REQUIRE(gap >= 20.0 * spec.noise_sd);
            }
    }
}

TEST_CASE("unknown preset names are rejected") {
    REQUIRE_THROWS_AS(preset("bp7"), Error);
}

TEST_CASE("clean presets are recovered exactly at the true k for several seeds") {
    for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
        auto spec = preset("clean2");
        spec.n_subjects = 60;
        spec.noise_sd = 0.0;
        spec.seed = seed * 1000;
        const auto ds = generate(spec);
        ClusterParams params;
        params.k = 2;
        params.maxdf = 8;
        params.max_iter = 15;
        params.seed = seed;
        const auto res = cluster(ds, params);
        REQUIRE(adjusted_rand({res.assignments}, {ds.truth_labels()}) == 1.0);
    }
}

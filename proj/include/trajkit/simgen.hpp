#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "trajkit/dataset.hpp"
#include "trajkit/error.hpp"
#include "trajkit/rng.hpp"

namespace trajkit {

/// Center curve of one simulated cluster: a flat pre-zero level, an
/// exponential decline after time zero, and a late linear/quadratic trend.
struct ClusterShape {
    double level = 150.0;   // pre-zero response level
    double drop = 20.0;     // depth of the post-zero decline
    double drop_tau = 40.0; // e-folding time of the decline
    double slope = 0.0;     // late trend per time unit
    double curvature = 0.0; // late quadratic term per time unit squared

    double value(double t) const {
        if (t <= 0.0) return level;
        return level - drop * (1.0 - std::exp(-t / drop_tau)) + slope * t + curvature * t * t;
    }
};

/// Observation-count model: hard pre/post minima plus a shifted negative
/// binomial for the remaining visits (EHR-style overdispersion).
struct ObsModel {
    int min_pre = 1;
    int min_post = 3;
    double mean_obs = 16.92;
    double dispersion = 2.0;
};

struct GeneratorSpec {
    long long n_subjects = 1000;
    std::vector<double> cluster_weights;
    std::vector<ClusterShape> shapes;
    double t_min = -365.0;
    double t_max = 730.0;
    ObsModel obs;
    double noise_sd = 10.0;
    std::uint64_t seed = 12345;

    void validate() const {
        if (n_subjects < 1) throw Error("generator: n_subjects must be >= 1");
        if (shapes.empty()) throw Error("generator: need at least one cluster shape");
        if (cluster_weights.size() != shapes.size())
            throw Error("generator: weights and shapes must have equal length");
        double total = 0.0;
        for (double w : cluster_weights) {
            if (w < 0.0) throw Error("generator: weights must be nonnegative");
            total += w;
        }
        if (std::abs(total - 1.0) > 1e-9) throw Error("generator: weights must sum to 1");
        if (noise_sd < 0.0) throw Error("generator: noise_sd must be nonnegative");
        if (!(t_min < 0.0 && 0.0 < t_max)) throw Error("generator: time range must straddle zero");
        if (obs.min_pre < 0 || obs.min_post < 0) throw Error("generator: negative observation minima");
    }
};

/// Draws a synthetic cohort: per subject a true cluster, an observation
/// count (pre/post minima plus negative-binomial extras), times uniform on
/// [t_min, 0) and (0, t_max], and responses on the cluster curve plus
/// Gaussian noise. Every subject uses its own seed derived from (seed, id),
/// so generation order and worker count cannot change the output.
inline TrajectoryDataset generate(const GeneratorSpec& spec) {
    spec.validate();
    TrajectoryDataset ds;
    ds.has_truth = true;
    ds.subjects.reserve(static_cast<std::size_t>(spec.n_subjects));

    const double pre_share = -spec.t_min / (spec.t_max - spec.t_min);
    const double extra_mean = spec.obs.mean_obs - spec.obs.min_pre - spec.obs.min_post;

    for (long long i = 1; i <= spec.n_subjects; ++i) {
        Rng rng(derive_seed(spec.seed, static_cast<std::uint64_t>(i)));
        const std::size_t c = rng.categorical(spec.cluster_weights);
        const ClusterShape& shape = spec.shapes[c];

        int n_pre = spec.obs.min_pre;
        int n_post = spec.obs.min_post;
        if (extra_mean > 0.0) {
            const long long extra = rng.negative_binomial(extra_mean, spec.obs.dispersion);
            for (long long e = 0; e < extra; ++e) {
                if (rng.uniform() < pre_share)
                    ++n_pre;
                else
                    ++n_post;
            }
        }

        SubjectRecord s;
        s.id = std::to_string(i);
        s.truth_group = static_cast<int>(c) + 1;
        s.times.reserve(static_cast<std::size_t>(n_pre + n_post));
        for (int j = 0; j < n_pre; ++j) s.times.push_back(rng.uniform(spec.t_min, 0.0));
        for (int j = 0; j < n_post; ++j) s.times.push_back(spec.t_max - rng.uniform(0.0, spec.t_max));
        std::sort(s.times.begin(), s.times.end());
        s.responses.reserve(s.times.size());
        for (double t : s.times) s.responses.push_back(shape.value(t) + rng.normal(0.0, spec.noise_sd));
        ds.subjects.push_back(std::move(s));
    }
    detail::finalize_dataset(ds);
    return ds;
}

/// Named cohort presets.
///   bp5    - five blood-pressure-like trajectories: elevated pre-zero
///            levels, a fast post-zero decline, then diverging trends, with
///            noise that leaves visible cluster overlap.
///   clean2 - two widely separated constant levels, tiny noise.
///   clean5 - five widely separated constant levels, tiny noise.
inline GeneratorSpec preset(const std::string& name) {
    GeneratorSpec spec;
    if (name == "bp5") {
        spec.shapes = {
            {165.0, 25.0, 30.0, 0.0, 0.0},       // drop and hold
            {150.0, 18.0, 40.0, -0.010, 0.0},    // drop, keep declining
            {175.0, 35.0, 25.0, 0.012, 0.0},     // deep drop, slow rebound
            {158.0, 12.0, 60.0, 0.0, 0.0},       // shallow drop
            {170.0, 28.0, 35.0, -0.020, 1.5e-5}, // drop, decline, flatten
        };
        spec.cluster_weights = {0.25, 0.15, 0.20, 0.30, 0.10};
        spec.noise_sd = 8.0;
        spec.obs.mean_obs = 16.92;
        spec.n_subjects = 10000;
    } else if (name == "clean2") {
        spec.shapes = {{100.0, 0.0, 40.0, 0.0, 0.0}, {200.0, 0.0, 40.0, 0.0, 0.0}};
        spec.cluster_weights = {0.5, 0.5};
        spec.noise_sd = 2.5;
        spec.obs.mean_obs = 10.0;
        spec.n_subjects = 1000;
    } else if (name == "clean5") {
        spec.shapes = {{100.0, 0.0, 40.0, 0.0, 0.0},
                       {200.0, 0.0, 40.0, 0.0, 0.0},
                       {300.0, 0.0, 40.0, 0.0, 0.0},
                       {400.0, 0.0, 40.0, 0.0, 0.0},
                       {500.0, 0.0, 40.0, 0.0, 0.0}};
        spec.cluster_weights = {0.2, 0.2, 0.2, 0.2, 0.2};
        spec.noise_sd = 4.0;
        spec.obs.mean_obs = 10.0;
        spec.n_subjects = 1000;
    } else {
        throw Error("unknown preset: " + name + " (expected bp5, clean2, or clean5)");
    }
    return spec;
}

} // namespace trajkit

#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "trajkit/dataset.hpp"
#include "trajkit/error.hpp"
#include "trajkit/parallel.hpp"
#include "trajkit/rng.hpp"
#include "trajkit/spline.hpp"

namespace trajkit {

/// Knobs of one k-means run. `conv_pct` is a percentage: iteration continues
/// while the share of subjects switching clusters exceeds it.
struct ClusterParams {
    int k = 5;
    int maxdf = 30;
    int max_iter = 20;
    double conv_pct = 0.5;
    std::uint64_t seed = 12345;

    void validate() const {
        if (k < 1) throw Error("params: k must be >= 1");
        if (maxdf < 1) throw Error("params: maxdf must be >= 1");
        if (max_iter < 1) throw Error("params: max_iter must be >= 1");
        if (conv_pct < 0.0 || conv_pct > 100.0) throw Error("params: conv_pct must lie in [0, 100]");
    }
};

/// Mean squared distances from every subject (row, dataset order) to every
/// live cluster center (column, labeled by cluster_ids).
struct DistanceMatrix {
    Eigen::MatrixXd values;
    std::vector<int> cluster_ids;
};

struct DropEvent {
    int iteration = 0;
    int label = 0;
    std::string reason; // "empty" or "insufficient-support"
};

/// Outcome of a clustering run. `assignments` is aligned to dataset subject
/// order with labels in 1..k (gaps where clusters were dropped); each center
/// in `centers` was fit from exactly its assigned subjects' pooled
/// observations.
struct ClusterResult {
    std::vector<int> assignments;
    std::map<int, SplineModel> centers;
    int iterations = 0;
    std::vector<double> changes_per_iter;
    std::vector<DropEvent> dropped;
    bool converged = false;

    std::vector<int> live_labels() const {
        std::vector<int> out;
        out.reserve(centers.size());
        for (const auto& [label, model] : centers) out.push_back(label);
        return out;
    }
};

/// Assigns every subject independently and uniformly to a cluster in 1..k.
/// Uses mt19937_64 (pinned by the C++ standard) with rejection sampling, so
/// the same seed reproduces the same assignment on any platform.
inline std::vector<int> init_random(const TrajectoryDataset& ds, int k, std::uint64_t seed) {
    if (ds.subjects.empty()) throw EmptyInputError("cannot initialize clusters on an empty dataset");
    if (k < 1) throw Error("init_random: k must be >= 1");
    Rng rng(seed);
    std::vector<int> labels(ds.n_subjects());
    for (auto& l : labels) l = 1 + static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(k)));
    return labels;
}

/// Pools each live cluster's member observations and fits its center spline
/// with GCV-selected smoothing. Clusters that are empty or lack enough
/// distinct time support come back in the drop list instead of the model map.
inline std::pair<std::map<int, SplineModel>, std::vector<std::pair<int, std::string>>>
fit_centers(const TrajectoryDataset& ds, const std::vector<int>& assignments,
            const std::vector<int>& live_labels, int maxdf, int cores = 1) {
    if (assignments.size() != ds.n_subjects())
        throw Error("fit_centers: assignments must cover all subjects");

    std::map<int, std::size_t> slot_of;
    for (std::size_t j = 0; j < live_labels.size(); ++j) slot_of[live_labels[j]] = j;

    // pool member observations per live cluster
    std::vector<std::vector<double>> times(live_labels.size()), responses(live_labels.size());
    for (std::size_t i = 0; i < ds.subjects.size(); ++i) {
        const auto it = slot_of.find(assignments[i]);
        if (it == slot_of.end()) throw Error("fit_centers: subject assigned to a dead cluster");
        const auto& s = ds.subjects[i];
        times[it->second].insert(times[it->second].end(), s.times.begin(), s.times.end());
        responses[it->second].insert(responses[it->second].end(), s.responses.begin(), s.responses.end());
    }

    std::vector<SplineModel> models(live_labels.size());
    std::vector<std::string> failure(live_labels.size());
    parallel_for(live_labels.size(), cores, [&](std::size_t j) {
        if (times[j].empty()) {
            failure[j] = "empty";
            return;
        }
        try {
            const auto spec = make_basis_spec(times[j], maxdf);
            models[j] = select_lambda(times[j], responses[j], spec).second;
        } catch (const InsufficientSupportError&) {
            failure[j] = "insufficient-support";
        } catch (const FitFailureError&) {
            failure[j] = "insufficient-support";
        }
    });

    std::map<int, SplineModel> fitted;
    std::vector<std::pair<int, std::string>> drops;
    for (std::size_t j = 0; j < live_labels.size(); ++j) {
        if (failure[j].empty())
            fitted.emplace(live_labels[j], std::move(models[j]));
        else
            drops.emplace_back(live_labels[j], failure[j]);
    }
    if (fitted.empty()) throw FitFailureError("every cluster failed to fit");
    return {std::move(fitted), std::move(drops)};
}

/// Mean squared distance from each subject to each center, evaluated at the
/// subject's own observation times.
inline DistanceMatrix distances(const TrajectoryDataset& ds, const std::map<int, SplineModel>& centers,
                                int cores = 1) {
    if (centers.empty()) throw Error("distances: need at least one live center");
    DistanceMatrix d;
    d.cluster_ids.reserve(centers.size());
    std::vector<const SplineModel*> models;
    for (const auto& [label, model] : centers) {
        d.cluster_ids.push_back(label);
        models.push_back(&model);
    }
    d.values.resize(static_cast<Eigen::Index>(ds.n_subjects()), static_cast<Eigen::Index>(centers.size()));
    parallel_for(models.size(), cores, [&](std::size_t col) {
        const SplineModel& m = *models[col];
        for (std::size_t i = 0; i < ds.subjects.size(); ++i) {
            const auto& s = ds.subjects[i];
            double acc = 0.0;
            for (std::size_t j = 0; j < s.n_obs(); ++j) {
                const double r = s.responses[j] - m.value(s.times[j]);
                acc += r * r;
            }
            d.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(col)) =
                acc / static_cast<double>(s.n_obs());
        }
    });
    return d;
}

/// Moves every subject to its nearest center. Exact ties keep the current
/// cluster when it participates, otherwise go to the lowest label. Returns
/// the new assignment and the percentage of subjects that switched.
inline std::pair<std::vector<int>, double> reassign(const DistanceMatrix& d,
                                                    const std::vector<int>& current) {
    const std::size_t n = static_cast<std::size_t>(d.values.rows());
    if (current.size() != n) throw Error("reassign: distance matrix does not cover all subjects");
    std::vector<int> next(n);
    std::size_t switched = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = d.values.row(static_cast<Eigen::Index>(i));
        double best = row(0);
        int best_label = d.cluster_ids[0];
        bool current_tied = best_label == current[i];
        for (Eigen::Index c = 1; c < row.size(); ++c) {
            const int label = d.cluster_ids[static_cast<std::size_t>(c)];
            if (row(c) < best) {
                best = row(c);
                best_label = label;
                current_tied = label == current[i];
            } else if (row(c) == best && label == current[i]) {
                current_tied = true;
            }
        }
        next[i] = current_tied ? current[i] : best_label;
        if (next[i] != current[i]) ++switched;
    }
    const double pct = 100.0 * static_cast<double>(switched) / static_cast<double>(n);
    return {std::move(next), pct};
}

/// The k-means EM loop from a caller-supplied initial assignment: fit centers
/// to current members, compute distances, reassign, and stop when the switch
/// percentage falls to conv_pct or the iteration cap is reached. Dropped
/// clusters leave the live set permanently and their subjects move to the
/// next closest center computed that same iteration. The returned centers are
/// always refit from the final assignment.
inline ClusterResult em_run(const TrajectoryDataset& ds, const ClusterParams& params,
                            std::vector<int> assignments, int cores = 1) {
    params.validate();
    if (assignments.size() != ds.n_subjects())
        throw Error("em_run: initial assignment must cover all subjects");

    ClusterResult res;
    std::vector<int> live(static_cast<std::size_t>(params.k));
    for (int i = 0; i < params.k; ++i) live[static_cast<std::size_t>(i)] = i + 1;

    const auto labels_of = [](const std::map<int, SplineModel>& m) {
        std::vector<int> out;
        out.reserve(m.size());
        for (const auto& [label, model] : m) out.push_back(label);
        return out;
    };

    std::map<int, SplineModel> centers;
    double last_switch_pct = -1.0;
    for (int iter = 1; iter <= params.max_iter; ++iter) {
        auto [models, drops] = fit_centers(ds, assignments, live, params.maxdf, cores);
        for (const auto& [label, reason] : drops) res.dropped.push_back({iter, label, reason});
        live = labels_of(models);
        const auto d = distances(ds, models, cores);
        auto [next, switch_pct] = reassign(d, assignments);
        assignments = std::move(next);
        centers = std::move(models);
        res.changes_per_iter.push_back(switch_pct);
        res.iterations = iter;
        last_switch_pct = switch_pct;
        if (switch_pct <= params.conv_pct) {
            res.converged = true;
            break;
        }
    }

    // keep the center <-> membership contract when the last pass moved anyone;
    // a refit can itself drop clusters, which shrinks the live set and bounds
    // the retry loop
    if (last_switch_pct != 0.0) {
        for (;;) {
            auto [models, drops] = fit_centers(ds, assignments, live, params.maxdf, cores);
            centers = std::move(models);
            if (drops.empty()) break;
            for (const auto& [label, reason] : drops) res.dropped.push_back({res.iterations, label, reason});
            live = labels_of(centers);
            const auto d = distances(ds, centers, cores);
            auto [next, pct] = reassign(d, assignments);
            assignments = std::move(next);
            if (pct == 0.0) break;
        }
    }

    res.assignments = std::move(assignments);
    res.centers = std::move(centers);
    return res;
}

/// Full clustering run: random initialization followed by the EM loop.
inline ClusterResult cluster(const TrajectoryDataset& ds, const ClusterParams& params, int cores = 1) {
    params.validate();
    return em_run(ds, params, init_random(ds, params.k, params.seed), cores);
}

/// Classifies a new subject by nearest center (mean squared distance at the
/// subject's own times; ties to the lowest label).
inline int predict_assignment(const ClusterResult& result, const SubjectRecord& subject) {
    if (result.centers.empty()) throw Error("predict_assignment: no live centers");
    if (subject.times.empty()) throw Error("predict_assignment: subject has no observations");
    int best_label = 0;
    double best = std::numeric_limits<double>::infinity();
    for (const auto& [label, model] : result.centers) {
        double acc = 0.0;
        for (std::size_t j = 0; j < subject.times.size(); ++j) {
            const double r = subject.responses[j] - model.value(subject.times[j]);
            acc += r * r;
        }
        acc /= static_cast<double>(subject.times.size());
        if (acc < best) { // map order gives lowest label on ties
            best = acc;
            best_label = label;
        }
    }
    return best_label;
}

} // namespace trajkit

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "trajkit/error.hpp"
#include "trajkit/rng.hpp"
#include "trajkit/trajectories.hpp"

namespace trajkit {

/// Cluster labels aligned to one subject ordering.
struct Partition {
    std::vector<int> labels;
};

namespace detail {

struct PairCounts {
    long long n = 0;
    long long pairs = 0;      // C(n, 2)
    long long together = 0;   // sum over contingency cells of C(n_ij, 2)
    long long together_a = 0; // sum over a's clusters of C(a_i, 2)
    long long together_b = 0;
};

inline long long choose2(long long x) { return x * (x - 1) / 2; }

/// Contingency-table pair counts in O(n + #cells).
inline PairCounts pair_counts(const Partition& a, const Partition& b) {
    if (a.labels.size() != b.labels.size())
        throw Error("partitions must have equal length");
    const long long n = static_cast<long long>(a.labels.size());
    if (n < 2) throw Error("partitions need at least 2 items");

    std::unordered_map<int, long long> ca, cb;
    std::unordered_map<std::uint64_t, long long> cells;
    std::unordered_map<int, std::uint32_t> ia, ib;
    for (std::size_t i = 0; i < a.labels.size(); ++i) {
        ++ca[a.labels[i]];
        ++cb[b.labels[i]];
        const auto ra = ia.try_emplace(a.labels[i], static_cast<std::uint32_t>(ia.size())).first->second;
        const auto rb = ib.try_emplace(b.labels[i], static_cast<std::uint32_t>(ib.size())).first->second;
        ++cells[(static_cast<std::uint64_t>(ra) << 32) | rb];
    }

    PairCounts pc;
    pc.n = n;
    pc.pairs = choose2(n);
    for (const auto& [key, c] : cells) pc.together += choose2(c);
    for (const auto& [label, c] : ca) pc.together_a += choose2(c);
    for (const auto& [label, c] : cb) pc.together_b += choose2(c);
    return pc;
}

} // namespace detail

/// Rand index: the fraction of subject pairs grouped consistently (together
/// in both partitions or apart in both). Ranges over [0, 1].
inline double rand_index(const Partition& a, const Partition& b) {
    const auto pc = detail::pair_counts(a, b);
    const double agreements = static_cast<double>(pc.pairs) + 2.0 * static_cast<double>(pc.together) -
                              static_cast<double>(pc.together_a) - static_cast<double>(pc.together_b);
    return agreements / static_cast<double>(pc.pairs);
}

/// Hubert-Arabie adjusted Rand index: (R - E[R]) / (1 - E[R]) computed from
/// the contingency table. When the chance-adjustment denominator vanishes
/// (e.g. both partitions are a single cluster) the convention is 1.0.
inline double adjusted_rand(const Partition& a, const Partition& b) {
    const auto pc = detail::pair_counts(a, b);
    const double expected = static_cast<double>(pc.together_a) * static_cast<double>(pc.together_b) /
                            static_cast<double>(pc.pairs);
    const double maximum = (static_cast<double>(pc.together_a) + static_cast<double>(pc.together_b)) / 2.0;
    if (maximum == expected) return 1.0;
    return (static_cast<double>(pc.together) - expected) / (maximum - expected);
}

/// Pairwise ARIs across replicate clustering runs, plus each run's ARI
/// against the truth column when the dataset carries one.
struct RandTable {
    struct Entry {
        int k_a = 0, rep_a = 0, k_b = 0, rep_b = 0;
        double ari = 0.0;
    };
    struct TruthEntry {
        int k = 0, rep = 0;
        double ari = 0.0;
    };
    std::vector<Entry> entries;     // unordered pairs in (k, replicate) order
    std::vector<TruthEntry> truth;  // empty without ground truth
};

/// Runs cluster() for every (k in ks) x (replicate in 1..replicates) with
/// stream seeds derived as splitmix(master_seed, k, replicate), then collects
/// all pairwise ARIs. Runs execute concurrently; results are independent of
/// the worker count.
inline RandTable rand_replicates(const TrajectoryDataset& ds, const std::vector<int>& ks,
                                 int replicates, const ClusterParams& base, std::uint64_t master_seed,
                                 int cores = 1) {
    if (replicates < 2) throw Error("rand_replicates: need at least 2 replicates");
    if (ks.empty()) throw Error("rand_replicates: need at least one k");

    struct Run {
        int k = 0, rep = 0;
        std::vector<int> labels;
    };
    std::vector<Run> runs;
    for (int k : ks)
        for (int rep = 1; rep <= replicates; ++rep) runs.push_back({k, rep, {}});

    parallel_for(runs.size(), cores, [&](std::size_t i) {
        ClusterParams p = base;
        p.k = runs[i].k;
        p.seed = derive_seed(master_seed, static_cast<std::uint64_t>(runs[i].k),
                             static_cast<std::uint64_t>(runs[i].rep));
        try {
            runs[i].labels = cluster(ds, p, 1).assignments;
        } catch (const Error& e) {
            throw Error("clustering failed at k=" + std::to_string(runs[i].k) + " replicate " +
                        std::to_string(runs[i].rep) + ": " + e.what());
        }
    });

    RandTable table;
    table.entries.reserve(runs.size() * (runs.size() - 1) / 2);
    for (std::size_t i = 0; i < runs.size(); ++i)
        for (std::size_t j = i + 1; j < runs.size(); ++j)
            table.entries.push_back({runs[i].k, runs[i].rep, runs[j].k, runs[j].rep,
                                     adjusted_rand({runs[i].labels}, {runs[j].labels})});
    if (ds.has_truth) {
        const Partition truth{ds.truth_labels()};
        for (const auto& r : runs)
            table.truth.push_back({r.k, r.rep, adjusted_rand({r.labels}, truth)});
    }
    return table;
}

/// Per-subject silhouette rows sorted by (cluster, descending silhouette),
/// ready for the classic bar plot.
struct SilhouetteTable {
    struct Row {
        std::string id;
        int cluster = 0;
        int neighbor = 0;
        double silhouette = 0.0;
    };
    std::vector<Row> rows;
    double mean = 0.0;
    std::map<int, double> cluster_means;
};

/// Silhouettes against center curves: with d_ik the root mean squared
/// distance from subject i to center k, a = d to own center, b = min over
/// the others, s = (b - a) / max(a, b). Requires at least 2 live clusters.
inline SilhouetteTable silhouette(const ClusterResult& result, const TrajectoryDataset& ds,
                                  int cores = 1) {
    if (result.centers.size() < 2)
        throw Error("silhouette undefined for a single cluster");
    if (result.assignments.size() != ds.n_subjects())
        throw Error("silhouette: result does not match dataset");

    const auto d = distances(ds, result.centers, cores);
    SilhouetteTable table;
    table.rows.reserve(ds.n_subjects());
    double total = 0.0;
    std::map<int, std::pair<double, long long>> by_cluster;
    for (std::size_t i = 0; i < ds.n_subjects(); ++i) {
        const int own = result.assignments[i];
        double a = 0.0, b = std::numeric_limits<double>::infinity();
        int neighbor = 0;
        for (std::size_t c = 0; c < d.cluster_ids.size(); ++c) {
            const double dist = std::sqrt(d.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)));
            if (d.cluster_ids[c] == own) {
                a = dist;
            } else if (dist < b) {
                b = dist;
                neighbor = d.cluster_ids[c];
            }
        }
        const double denom = std::max(a, b);
        const double s = denom > 0.0 ? (b - a) / denom : 0.0;
        table.rows.push_back({ds.subjects[i].id, own, neighbor, s});
        total += s;
        auto& acc = by_cluster[own];
        acc.first += s;
        acc.second += 1;
    }
    table.mean = total / static_cast<double>(ds.n_subjects());
    for (const auto& [label, acc] : by_cluster) table.cluster_means[label] = acc.first / acc.second;
    std::stable_sort(table.rows.begin(), table.rows.end(), [](const auto& x, const auto& y) {
        if (x.cluster != y.cluster) return x.cluster < y.cluster;
        return x.silhouette > y.silhouette;
    });
    return table;
}

/// Agglomerative merge tree over cluster centers. Leaves are numbered
/// 0..K-1 in ascending label order; merge m creates node K+m. Heights are
/// nondecreasing under complete linkage.
struct DendrogramTree {
    std::vector<int> leaf_labels;
    struct Merge {
        int node_a = 0, node_b = 0;
        double height = 0.0;
    };
    std::vector<Merge> merges;
};

/// Evaluates every center on a shared `grid_points` grid spanning the
/// centers' time range; rows are ordered by ascending cluster label.
inline std::pair<std::vector<double>, Eigen::MatrixXd>
center_curves(const std::map<int, SplineModel>& centers, int grid_points) {
    if (centers.empty()) throw Error("center_curves: no centers");
    if (grid_points < 2) throw Error("center_curves: need at least 2 grid points");
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (const auto& [label, model] : centers) {
        lo = std::min(lo, model.spec.t_lo);
        hi = std::max(hi, model.spec.t_hi);
    }
    std::vector<double> grid(static_cast<std::size_t>(grid_points));
    for (int g = 0; g < grid_points; ++g)
        grid[static_cast<std::size_t>(g)] = lo + (hi - lo) * g / (grid_points - 1);
    Eigen::MatrixXd curves(static_cast<Eigen::Index>(centers.size()), grid_points);
    Eigen::Index row = 0;
    for (const auto& [label, model] : centers) {
        for (int g = 0; g < grid_points; ++g) curves(row, g) = model.value(grid[static_cast<std::size_t>(g)]);
        ++row;
    }
    return {std::move(grid), std::move(curves)};
}

/// Complete-linkage hierarchical clustering of center curves evaluated on a
/// shared grid, with Euclidean distance between curve vectors.
inline DendrogramTree hcluster_centers(const std::map<int, SplineModel>& centers, int grid_points = 100) {
    if (centers.size() < 2) throw Error("hcluster_centers: need at least 2 centers");
    const auto [grid, curves] = center_curves(centers, grid_points);
    const int k = static_cast<int>(centers.size());

    Eigen::MatrixXd base(k, k);
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j) base(i, j) = (curves.row(i) - curves.row(j)).norm();

    DendrogramTree tree;
    for (const auto& [label, model] : centers) tree.leaf_labels.push_back(label);

    struct Group {
        int node;
        std::vector<int> leaves;
    };
    std::vector<Group> groups;
    for (int i = 0; i < k; ++i) groups.push_back({i, {i}});

    while (groups.size() > 1) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t bi = 0, bj = 1;
        for (std::size_t i = 0; i < groups.size(); ++i) {
            for (std::size_t j = i + 1; j < groups.size(); ++j) {
                double link = 0.0; // complete linkage: farthest leaf pair
                for (int a : groups[i].leaves)
                    for (int b : groups[j].leaves) link = std::max(link, base(a, b));
                if (link < best) {
                    best = link;
                    bi = i;
                    bj = j;
                }
            }
        }
        const int new_node = k + static_cast<int>(tree.merges.size());
        tree.merges.push_back({groups[bi].node, groups[bj].node, best});
        groups[bi].node = new_node;
        groups[bi].leaves.insert(groups[bi].leaves.end(), groups[bj].leaves.begin(), groups[bj].leaves.end());
        groups.erase(groups.begin() + static_cast<std::ptrdiff_t>(bj));
    }
    return tree;
}

/// Cuts the merge tree into `n_clades` groups: clade index (0-based, in order
/// of first member leaf) per leaf.
inline std::vector<int> cut_tree(const DendrogramTree& tree, int n_clades) {
    const int k = static_cast<int>(tree.leaf_labels.size());
    if (n_clades < 1 || n_clades > k) throw Error("cut_tree: clade count out of range");
    std::vector<int> parent(static_cast<std::size_t>(k + tree.merges.size()));
    std::iota(parent.begin(), parent.end(), 0);
    const std::function<int(int)> find = [&](int x) {
        while (parent[static_cast<std::size_t>(x)] != x) {
            parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
            x = parent[static_cast<std::size_t>(x)];
        }
        return x;
    };
    for (int m = 0; m < k - n_clades; ++m) {
        const auto& merge = tree.merges[static_cast<std::size_t>(m)];
        const int target = k + m;
        parent[static_cast<std::size_t>(find(merge.node_a))] = target;
        parent[static_cast<std::size_t>(find(merge.node_b))] = target;
    }
    std::vector<int> clade(static_cast<std::size_t>(k));
    std::map<int, int> clade_ids;
    for (int i = 0; i < k; ++i) {
        const int root = find(i);
        const auto [it, inserted] = clade_ids.try_emplace(root, static_cast<int>(clade_ids.size()));
        clade[static_cast<std::size_t>(i)] = it->second;
    }
    return clade;
}

namespace detail {

/// Greedy global-minimum matching on a distance matrix: repeatedly pick the
/// smallest remaining entry (ties to the smallest row, then column), then
/// retire its row and column. Returns (row, col) pairs in pick order.
inline std::vector<std::pair<int, int>> greedy_min_match(Eigen::MatrixXd d) {
    const int rounds = static_cast<int>(std::min(d.rows(), d.cols()));
    std::vector<std::pair<int, int>> picks;
    picks.reserve(static_cast<std::size_t>(rounds));
    for (int round = 0; round < rounds; ++round) {
        double best = std::numeric_limits<double>::infinity();
        int bi = -1, bj = -1;
        for (int i = 0; i < d.rows(); ++i)
            for (int j = 0; j < d.cols(); ++j)
                if (d(i, j) < best) {
                    best = d(i, j);
                    bi = i;
                    bj = j;
                }
        picks.emplace_back(bi, bj);
        d.row(bi).setConstant(std::numeric_limits<double>::infinity());
        d.col(bj).setConstant(std::numeric_limits<double>::infinity());
    }
    return picks;
}

} // namespace detail

/// Injective label mapping between two center sets, greedily pairing curves
/// by Manhattan distance over a shared evaluation grid, shortest pair first.
/// With unequal center counts the extras are reported unmapped.
struct AlignResult {
    std::vector<std::pair<int, int>> mapping; // (label_a, label_b) in pick order
    std::vector<double> distances;            // Manhattan distance per pick
    std::vector<int> unmapped_a, unmapped_b;
};

inline AlignResult align_labels(const std::map<int, SplineModel>& centers_a,
                                const std::map<int, SplineModel>& centers_b, int grid_points = 100) {
    if (centers_a.empty() || centers_b.empty()) throw Error("align_labels: empty center set");
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& [label, model] : centers_a) {
        lo = std::min(lo, model.spec.t_lo);
        hi = std::max(hi, model.spec.t_hi);
    }
    for (const auto& [label, model] : centers_b) {
        lo = std::min(lo, model.spec.t_lo);
        hi = std::max(hi, model.spec.t_hi);
    }

    std::vector<int> labels_a, labels_b;
    Eigen::MatrixXd curves_a(static_cast<Eigen::Index>(centers_a.size()), grid_points);
    Eigen::MatrixXd curves_b(static_cast<Eigen::Index>(centers_b.size()), grid_points);
    {
        Eigen::Index r = 0;
        for (const auto& [label, model] : centers_a) {
            labels_a.push_back(label);
            for (int g = 0; g < grid_points; ++g)
                curves_a(r, g) = model.value(lo + (hi - lo) * g / (grid_points - 1));
            ++r;
        }
        r = 0;
        for (const auto& [label, model] : centers_b) {
            labels_b.push_back(label);
            for (int g = 0; g < grid_points; ++g)
                curves_b(r, g) = model.value(lo + (hi - lo) * g / (grid_points - 1));
            ++r;
        }
    }

    Eigen::MatrixXd d(curves_a.rows(), curves_b.rows());
    for (Eigen::Index i = 0; i < curves_a.rows(); ++i)
        for (Eigen::Index j = 0; j < curves_b.rows(); ++j)
            d(i, j) = (curves_a.row(i) - curves_b.row(j)).cwiseAbs().sum();

    AlignResult res;
    std::vector<bool> used_a(labels_a.size(), false), used_b(labels_b.size(), false);
    for (const auto& [i, j] : detail::greedy_min_match(d)) {
        res.mapping.emplace_back(labels_a[static_cast<std::size_t>(i)], labels_b[static_cast<std::size_t>(j)]);
        res.distances.push_back(d(i, j));
        used_a[static_cast<std::size_t>(i)] = true;
        used_b[static_cast<std::size_t>(j)] = true;
    }
    for (std::size_t i = 0; i < labels_a.size(); ++i)
        if (!used_a[i]) res.unmapped_a.push_back(labels_a[i]);
    for (std::size_t j = 0; j < labels_b.size(); ++j)
        if (!used_b[j]) res.unmapped_b.push_back(labels_b[j]);
    return res;
}

} // namespace trajkit

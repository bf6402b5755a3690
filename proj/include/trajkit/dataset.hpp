#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "trajkit/csv.hpp"
#include "trajkit/error.hpp"

namespace trajkit {

/// One subject's trajectory: observation times and responses, sorted by time
/// ascending (ties keep input order). n_i = times.size() >= 1.
struct SubjectRecord {
    std::string id;
    std::vector<double> times;
    std::vector<double> responses;
    std::optional<int> truth_group;

    std::size_t n_obs() const { return times.size(); }
};

/// Long-format trajectory data grouped by subject. Subjects are held in a
/// canonical order (numeric when every id parses as an integer, otherwise
/// lexicographic), so the same rows produce the same dataset regardless of
/// input row order. Read-only after construction; safe to share across
/// threads.
struct TrajectoryDataset {
    std::vector<SubjectRecord> subjects;
    double t_min = 0.0;
    double t_max = 0.0;
    bool has_truth = false;

    std::size_t n_subjects() const { return subjects.size(); }

    std::size_t n_rows() const {
        std::size_t n = 0;
        for (const auto& s : subjects) n += s.n_obs();
        return n;
    }

    std::size_t n_distinct_times() const {
        std::vector<double> all;
        all.reserve(n_rows());
        for (const auto& s : subjects) all.insert(all.end(), s.times.begin(), s.times.end());
        std::sort(all.begin(), all.end());
        return static_cast<std::size_t>(std::unique(all.begin(), all.end()) - all.begin());
    }

    /// Truth labels aligned to subject order; empty when has_truth is false.
    std::vector<int> truth_labels() const {
        std::vector<int> out;
        if (!has_truth) return out;
        out.reserve(subjects.size());
        for (const auto& s : subjects) out.push_back(s.truth_group.value());
        return out;
    }
};

namespace detail {

inline void finalize_dataset(TrajectoryDataset& ds) {
    if (ds.subjects.empty()) throw EmptyInputError("no data rows");

    const bool all_numeric = std::all_of(ds.subjects.begin(), ds.subjects.end(), [](const SubjectRecord& s) {
        return parse_int(s.id).has_value();
    });
    if (all_numeric) {
        std::sort(ds.subjects.begin(), ds.subjects.end(), [](const SubjectRecord& a, const SubjectRecord& b) {
            return parse_int(a.id).value() < parse_int(b.id).value();
        });
    } else {
        std::sort(ds.subjects.begin(), ds.subjects.end(),
                  [](const SubjectRecord& a, const SubjectRecord& b) { return a.id < b.id; });
    }

    ds.t_min = std::numeric_limits<double>::infinity();
    ds.t_max = -std::numeric_limits<double>::infinity();
    for (auto& s : ds.subjects) {
        // stable sort keeps duplicate-time observations in input order
        std::vector<std::size_t> order(s.times.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return s.times[a] < s.times[b]; });
        std::vector<double> t(s.times.size()), y(s.times.size());
        for (std::size_t i = 0; i < order.size(); ++i) {
            t[i] = s.times[order[i]];
            y[i] = s.responses[order[i]];
        }
        s.times = std::move(t);
        s.responses = std::move(y);
        ds.t_min = std::min(ds.t_min, s.times.front());
        ds.t_max = std::max(ds.t_max, s.times.back());
    }
}

} // namespace detail

/// Loads a long-format CSV (optionally gzipped; comma or tab delimited) into
/// a TrajectoryDataset. Rows are grouped by `id_col` and sorted by time
/// within subject; the row count is preserved (duplicate (id, time) rows stay
/// distinct observations). Missing or non-numeric time/response cells are
/// hard errors carrying the 1-based line number.
inline TrajectoryDataset load_csv(const std::string& path,
                                  const std::string& id_col = "id",
                                  const std::string& time_col = "time",
                                  const std::string& response_col = "response",
                                  const std::optional<std::string>& truth_col = std::nullopt) {
    CsvReader reader(read_text_file(path));
    const std::size_t ci = reader.column(id_col);
    const std::size_t ct = reader.column(time_col);
    const std::size_t cy = reader.column(response_col);
    std::optional<std::size_t> cg;
    if (truth_col) cg = reader.column(*truth_col);

    TrajectoryDataset ds;
    ds.has_truth = cg.has_value();
    std::unordered_map<std::string, std::size_t> index;

    reader.for_each_row([&](std::size_t line_no, const std::vector<std::string_view>& f) {
        const std::size_t needed = std::max({ci, ct, cy, cg.value_or(0)});
        if (f.size() <= needed)
            throw ParseError("line " + std::to_string(line_no) + ": expected at least " +
                             std::to_string(needed + 1) + " fields, got " + std::to_string(f.size()));
        const auto t = parse_double(f[ct]);
        if (!t || !std::isfinite(*t))
            throw ParseError("line " + std::to_string(line_no) + ": bad time value '" + std::string(f[ct]) + "'");
        const auto y = parse_double(f[cy]);
        if (!y || !std::isfinite(*y))
            throw ParseError("line " + std::to_string(line_no) + ": bad response value '" + std::string(f[cy]) + "'");
        std::optional<int> g;
        if (cg) {
            const auto gi = parse_int(f[*cg]);
            if (!gi)
                throw ParseError("line " + std::to_string(line_no) + ": bad group value '" + std::string(f[*cg]) + "'");
            g = static_cast<int>(*gi);
        }

        std::string id(f[ci]);
        auto [it, inserted] = index.try_emplace(id, ds.subjects.size());
        if (inserted) {
            ds.subjects.push_back(SubjectRecord{std::move(id), {}, {}, g});
        } else if (cg && ds.subjects[it->second].truth_group != g) {
            throw ParseError("line " + std::to_string(line_no) + ": subject " + id +
                             " has conflicting truth labels");
        }
        SubjectRecord& s = ds.subjects[it->second];
        s.times.push_back(*t);
        s.responses.push_back(*y);
    });

    detail::finalize_dataset(ds);
    return ds;
}

/// Convenience overload that picks up a `true_group` column automatically
/// when one is present.
inline TrajectoryDataset load_csv_auto(const std::string& path,
                                       const std::string& id_col = "id",
                                       const std::string& time_col = "time",
                                       const std::string& response_col = "response",
                                       const std::string& truth_col = "true_group") {
    CsvReader probe(read_text_file(path));
    const bool truth = probe.find_column(truth_col).has_value();
    return load_csv(path, id_col, time_col, response_col,
                    truth ? std::optional<std::string>(truth_col) : std::nullopt);
}

/// Writes the standard long-format CSV (id,time,response[,true_group]);
/// gzip-compresses when the path ends in .gz. Round-trips with load_csv.
inline void write_csv(const TrajectoryDataset& ds, const std::string& path) {
    CsvWriter w(ds.has_truth ? "id,time,response,true_group" : "id,time,response");
    std::string row;
    for (const auto& s : ds.subjects) {
        for (std::size_t j = 0; j < s.n_obs(); ++j) {
            row = s.id;
            row += ',';
            row += dtoa(s.times[j]);
            row += ',';
            row += dtoa(s.responses[j]);
            if (ds.has_truth) {
                row += ',';
                row += std::to_string(s.truth_group.value());
            }
            w.raw_row(row);
        }
    }
    w.save(path);
}

/// Advisory pre-flight checks for a clustering run; returns human-readable
/// warnings, never throws.
inline std::vector<std::string> validate_for_clustering(const TrajectoryDataset& ds, int k, int maxdf) {
    std::vector<std::string> warnings;
    if (ds.n_subjects() < static_cast<std::size_t>(k))
        warnings.push_back("fewer subjects than clusters (" + std::to_string(ds.n_subjects()) +
                           " < " + std::to_string(k) + ")");
    const std::size_t distinct = ds.n_distinct_times();
    if (distinct < static_cast<std::size_t>(maxdf) + 1)
        warnings.push_back("insufficient distinct times for requested basis (" + std::to_string(distinct) +
                           " distinct, maxdf " + std::to_string(maxdf) + ")");
    return warnings;
}

/// Optional cohort filter: keeps subjects with at least `min_pre`
/// observations before time zero and `min_post` after it. Off by default;
/// mirrors the usual inclusion rule for treatment-anchored cohorts.
inline TrajectoryDataset filter_min_obs(const TrajectoryDataset& ds, int min_pre, int min_post) {
    TrajectoryDataset out;
    out.has_truth = ds.has_truth;
    out.t_min = std::numeric_limits<double>::infinity();
    out.t_max = -std::numeric_limits<double>::infinity();
    for (const auto& s : ds.subjects) {
        int pre = 0, post = 0;
        for (double t : s.times) {
            if (t < 0) ++pre;
            if (t > 0) ++post;
        }
        if (pre >= min_pre && post >= min_post) {
            out.subjects.push_back(s);
            out.t_min = std::min(out.t_min, s.times.front());
            out.t_max = std::max(out.t_max, s.times.back());
        }
    }
    if (out.subjects.empty()) throw EmptyInputError("cohort filter removed every subject");
    return out;
}

} // namespace trajkit

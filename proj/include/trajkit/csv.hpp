#pragma once

#include <charconv>
#include <cstdio>
#include <cstring>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <zlib.h>

#include "trajkit/error.hpp"

namespace trajkit {

/// Reads a whole file into memory. Goes through zlib, which decompresses
/// gzip streams and passes plain files straight through, so .csv and .csv.gz
/// are handled uniformly.
inline std::string read_text_file(const std::string& path) {
    gzFile f = gzopen(path.c_str(), "rb");
    if (!f) throw Error("cannot open file: " + path);
    std::string out;
    char buf[1 << 16];
    int n;
    while ((n = gzread(f, buf, sizeof buf)) > 0) out.append(buf, static_cast<std::size_t>(n));
    const bool bad = n < 0;
    gzclose(f);
    if (bad) throw Error("error while reading: " + path);
    return out;
}

/// Writes `content` to `path`; gzip-compresses when the path ends in ".gz".
inline void write_text_file(const std::string& path, std::string_view content) {
    const bool gz = path.size() >= 3 && path.compare(path.size() - 3, 3, ".gz") == 0;
    if (gz) {
        gzFile f = gzopen(path.c_str(), "wb");
        if (!f) throw Error("cannot open file for writing: " + path);
        std::size_t off = 0;
        while (off < content.size()) {
            const unsigned chunk = static_cast<unsigned>(std::min<std::size_t>(content.size() - off, 1u << 24));
            if (gzwrite(f, content.data() + off, chunk) != static_cast<int>(chunk)) {
                gzclose(f);
                throw Error("error while writing: " + path);
            }
            off += chunk;
        }
        gzclose(f);
    } else {
        std::FILE* f = std::fopen(path.c_str(), "wb");
        if (!f) throw Error("cannot open file for writing: " + path);
        const std::size_t written = content.empty() ? 0 : std::fwrite(content.data(), 1, content.size(), f);
        std::fclose(f);
        if (written != content.size()) throw Error("error while writing: " + path);
    }
}

/// Shortest decimal form that round-trips the exact double value.
inline std::string dtoa(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline std::optional<double> parse_double(std::string_view s) {
    // from_chars is locale-independent and rejects stray characters
    const char* b = s.data();
    const char* e = s.data() + s.size();
    while (b < e && (*b == ' ')) ++b;
    while (e > b && (*(e - 1) == ' ')) --e;
    double v = 0;
    auto r = std::from_chars(b, e, v);
    if (r.ec != std::errc{} || r.ptr != e || b == e) return std::nullopt;
    return v;
}

inline std::optional<long long> parse_int(std::string_view s) {
    const char* b = s.data();
    const char* e = s.data() + s.size();
    while (b < e && (*b == ' ')) ++b;
    while (e > b && (*(e - 1) == ' ')) --e;
    long long v = 0;
    auto r = std::from_chars(b, e, v);
    if (r.ec != std::errc{} || r.ptr != e || b == e) return std::nullopt;
    return v;
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

/// Splits one line on `delim` into `out` (reused between calls).
inline void split_line(std::string_view line, char delim, std::vector<std::string_view>& out) {
    out.clear();
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
        if (i == line.size() || line[i] == delim) {
            out.push_back(trim(line.substr(start, i - start)));
            start = i + 1;
        }
    }
}

/// Picks comma or tab by whichever splits the header into more fields.
inline char detect_delimiter(std::string_view header) {
    std::size_t commas = 0, tabs = 0;
    for (char c : header) {
        if (c == ',') ++commas;
        if (c == '\t') ++tabs;
    }
    return tabs > commas ? '\t' : ',';
}

/// Streaming CSV reader over an in-memory buffer. Calls `row_fn(line_no,
/// fields)` for every non-empty data line; line numbers are 1-based with the
/// header on line 1. No quoting support: fields are split on the delimiter
/// as-is, which matches the numeric long-format tables this library reads.
class CsvReader {
public:
    explicit CsvReader(std::string text) : text_(std::move(text)) {
        std::string_view all(text_);
        const std::size_t eol = all.find('\n');
        std::string_view header_line = trim(eol == std::string_view::npos ? all : all.substr(0, eol));
        if (header_line.empty()) throw EmptyInputError("input has no header row");
        delim_ = detect_delimiter(header_line);
        std::vector<std::string_view> fields;
        split_line(header_line, delim_, fields);
        header_.assign(fields.begin(), fields.end());
        body_ = eol == std::string_view::npos ? std::string_view{} : all.substr(eol + 1);
    }

    const std::vector<std::string_view>& header() const { return header_; }
    char delimiter() const { return delim_; }

    /// Index of a named column, or SchemaError naming the column.
    std::size_t column(std::string_view name) const {
        for (std::size_t i = 0; i < header_.size(); ++i)
            if (header_[i] == name) return i;
        throw SchemaError("missing column: " + std::string(name));
    }

    std::optional<std::size_t> find_column(std::string_view name) const {
        for (std::size_t i = 0; i < header_.size(); ++i)
            if (header_[i] == name) return i;
        return std::nullopt;
    }

    /// Iterates data rows; skips blank lines.
    void for_each_row(const std::function<void(std::size_t, const std::vector<std::string_view>&)>& row_fn) const {
        std::vector<std::string_view> fields;
        std::size_t line_no = 1;
        std::size_t start = 0;
        while (start <= body_.size()) {
            std::size_t eol = body_.find('\n', start);
            if (eol == std::string_view::npos) eol = body_.size();
            std::string_view line = trim(body_.substr(start, eol - start));
            ++line_no;
            if (!line.empty()) {
                split_line(line, delim_, fields);
                row_fn(line_no, fields);
            }
            if (eol == body_.size()) break;
            start = eol + 1;
        }
    }

private:
    std::string text_;
    std::string_view body_;
    std::vector<std::string_view> header_;
    char delim_ = ',';
};

/// Incremental CSV writer; content is buffered and written in one shot so
/// that gzip output stays deterministic.
class CsvWriter {
public:
    explicit CsvWriter(std::string header) { buf_ = std::move(header) + "\n"; }

    void raw_row(const std::string& row) {
        buf_ += row;
        buf_ += '\n';
    }

    std::string& buffer() { return buf_; }

    void save(const std::string& path) const { write_text_file(path, buf_); }

private:
    std::string buf_;
};

} // namespace trajkit

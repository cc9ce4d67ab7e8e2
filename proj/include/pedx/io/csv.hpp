#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "pedx/core/error.hpp"
#include "pedx/core/format.hpp"

namespace pedx::io {

namespace fs = std::filesystem;

/// Header-checked CSV table. Fields never contain commas or quotes in our formats, so the
/// reader splits on ',' and rejects quoted fields.
struct CsvTable {
    std::string source;  // file name for messages
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_of_row;  // 1-based line numbers

    std::size_t column(std::string_view name) const {
        for (std::size_t j = 0; j < header.size(); ++j)
            if (header[j] == name) return j;
        throw InputError(source + ": missing column '" + std::string(name) + "'");
    }

    [[noreturn]] void fail(std::size_t row, const std::string& what) const {
        throw InputError(source + ":" + std::to_string(line_of_row[row]) + ": " + what);
    }

    double number(std::size_t row, std::size_t col) const {
        const std::string& s = rows[row][col];
        double v = 0.0;
        const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || p != s.data() + s.size())
            fail(row, "column '" + header[col] + "': '" + s + "' is not a number");
        return v;
    }

    long long integer(std::size_t row, std::size_t col) const {
        const std::string& s = rows[row][col];
        long long v = 0;
        const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || p != s.data() + s.size())
            fail(row, "column '" + header[col] + "': '" + s + "' is not an integer");
        return v;
    }

    bool boolean(std::size_t row, std::size_t col) const {
        const std::string& s = rows[row][col];
        if (s == "1" || s == "true") return true;
        if (s == "0" || s == "false") return false;
        fail(row, "column '" + header[col] + "': '" + s + "' is not 0/1");
    }

    const std::string& text(std::size_t row, std::size_t col) const { return rows[row][col]; }
};

inline std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        const auto comma = line.find(',', start);
        out.emplace_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

inline CsvTable parse_csv(std::istream& in, const std::string& source) {
    CsvTable t;
    t.source = source;
    std::string line;
    std::size_t lineno = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (lineno == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
        if (line.empty()) continue;
        if (line.find('"') != std::string::npos)
            throw InputError(source + ":" + std::to_string(lineno) + ": quoted fields are not supported");
        auto fields = split_csv_line(line);
        if (!have_header) {
            t.header = std::move(fields);
            have_header = true;
            continue;
        }
        if (fields.size() != t.header.size())
            throw InputError(source + ":" + std::to_string(lineno) + ": expected " + std::to_string(t.header.size()) +
                             " fields, found " + std::to_string(fields.size()));
        t.rows.push_back(std::move(fields));
        t.line_of_row.push_back(lineno);
    }
    if (!have_header) throw InputError(source + ": missing header row");
    return t;
}

inline CsvTable read_csv(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw InputError("cannot open " + p.string());
    return parse_csv(in, p.filename().string());
}

inline void require_header(const CsvTable& t, const std::vector<std::string>& expected) {
    if (t.header != expected) {
        std::string e;
        for (const auto& h : expected) e += (e.empty() ? "" : ",") + h;
        throw InputError(t.source + ":1: header must be '" + e + "'");
    }
}

/// Accumulates CSV text; numbers go through fmt_num.
class CsvWriter {
public:
    /// An empty header starts a bare block of rows.
    explicit CsvWriter(const std::vector<std::string>& header) {
        if (!header.empty()) row(header);
    }

    CsvWriter& cell(std::string_view s) {
        if (!first_) buf_ << ',';
        buf_ << s;
        first_ = false;
        return *this;
    }
    CsvWriter& cell(double v) { return cell(std::string_view(fmt_num(v))); }
    CsvWriter& cell(int v) { return cell(std::string_view(std::to_string(v))); }
    CsvWriter& cell(long long v) { return cell(std::string_view(std::to_string(v))); }
    CsvWriter& cell(std::size_t v) { return cell(std::string_view(std::to_string(v))); }
    CsvWriter& cell(bool v) { return cell(std::string_view(v ? "1" : "0")); }
    CsvWriter& cell(const std::string& s) { return cell(std::string_view(s)); }
    CsvWriter& cell(const char* s) { return cell(std::string_view(s)); }

    void end_row() {
        buf_ << '\n';
        first_ = true;
    }

    void row(const std::vector<std::string>& fields) {
        for (const auto& f : fields) cell(f);
        end_row();
    }

    std::string str() const { return buf_.str(); }

private:
    std::ostringstream buf_;
    bool first_ = true;
};

/// 64-bit FNV-1a, used for content hashes in manifests.
inline std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

inline void write_text(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw RuntimeFailure("cannot write " + p.string());
    out << text;
    if (!out) throw RuntimeFailure("write failed for " + p.string());
}

inline std::string read_text(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw InputError("cannot open " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Builds an output directory beside its final location and moves it into place only once
/// everything has been written. An existing directory at the target is replaced.
class StagedDirectory {
public:
    explicit StagedDirectory(fs::path target) : target_(std::move(target)) {
        if (target_.has_parent_path()) {
            std::error_code ec;
            fs::create_directories(target_.parent_path(), ec);
            if (ec) throw RuntimeFailure("cannot create " + target_.parent_path().string() + ": " + ec.message());
        }
        staging_ = target_;
        staging_ += ".partial";
        std::error_code ec;
        fs::remove_all(staging_, ec);
        fs::create_directories(staging_, ec);
        if (ec) throw RuntimeFailure("cannot create " + staging_.string() + ": " + ec.message());
    }

    StagedDirectory(const StagedDirectory&) = delete;
    StagedDirectory& operator=(const StagedDirectory&) = delete;

    ~StagedDirectory() {
        if (!committed_) {
            std::error_code ec;
            fs::remove_all(staging_, ec);
        }
    }

    const fs::path& path() const { return staging_; }

    void commit() {
        std::error_code ec;
        fs::path old = target_;
        old += ".old";
        fs::remove_all(old, ec);
        if (fs::exists(target_)) {
            fs::rename(target_, old, ec);
            if (ec) throw RuntimeFailure("cannot replace " + target_.string() + ": " + ec.message());
        }
        fs::rename(staging_, target_, ec);
        if (ec) throw RuntimeFailure("cannot move output into " + target_.string() + ": " + ec.message());
        fs::remove_all(old, ec);
        committed_ = true;
    }

private:
    fs::path target_;
    fs::path staging_;
    bool committed_ = false;
};

}  // namespace pedx::io

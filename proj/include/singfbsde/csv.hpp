#pragma once

#include "singfbsde/common.hpp"

#include <charconv>
#include <fstream>
#include <ostream>

namespace singfbsde {

/// RFC 4180 field: quoted when it holds a comma, quote, CR or LF.
inline std::string csv_field(std::string_view s) {
    if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

/// Shortest round-trip representation, so identical doubles give identical bytes.
inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

class CsvWriter {
public:
    explicit CsvWriter(std::ostream& os) : os_(os) {}

    CsvWriter& field(std::string_view s) {
        sep();
        os_ << csv_field(s);
        return *this;
    }
    CsvWriter& field(double v) {
        sep();
        os_ << format_double(v);
        return *this;
    }
    CsvWriter& field(long long v) {
        sep();
        os_ << v;
        return *this;
    }
    CsvWriter& field(std::size_t v) { return field(static_cast<long long>(v)); }
    CsvWriter& field(int v) { return field(static_cast<long long>(v)); }
    void end_row() {
        os_ << "\r\n";
        first_ = true;
    }
    template <class... T>
    void row(const T&... v) {
        (field(v), ...);
        end_row();
    }

private:
    void sep() {
        if (!first_) os_ << ',';
        first_ = false;
    }
    std::ostream& os_;
    bool first_ = true;
};

/// Splits one CSV record (no embedded newlines) into fields.
inline std::vector<std::string> csv_split(std::string_view line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(std::move(cur));
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(std::move(cur));
    return out;
}

}  // namespace singfbsde

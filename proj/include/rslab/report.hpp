#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "rslab/errors.hpp"

namespace rslab {

enum class Format { csv, jsonl };

using Cell = std::variant<std::monostate, bool, std::int64_t, std::uint64_t, double, std::string>;

inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string json_escape(const std::string& s) {
    std::string out = "\"";
    for (unsigned char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\r': out += "\\r"; break;
            case '\t': out += "\\t"; break;
            default:
                if (c < 0x20) {
                    char buf[8];
                    std::snprintf(buf, sizeof buf, "\\u%04x", c);
                    out += buf;
                } else {
                    out += static_cast<char>(c);
                }
        }
    }
    return out + "\"";
}

inline std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
    return out + "\"";
}

// JSON has no NaN or infinity; those become null.
inline std::string cell_json(const Cell& c) {
    struct V {
        std::string operator()(std::monostate) const { return "null"; }
        std::string operator()(bool b) const { return b ? "true" : "false"; }
        std::string operator()(std::int64_t v) const { return std::to_string(v); }
        std::string operator()(std::uint64_t v) const { return std::to_string(v); }
        std::string operator()(double v) const { return std::isfinite(v) ? format_double(v) : "null"; }
        std::string operator()(const std::string& s) const { return json_escape(s); }
    };
    return std::visit(V{}, c);
}

inline std::string cell_csv(const Cell& c) {
    struct V {
        std::string operator()(std::monostate) const { return ""; }
        std::string operator()(bool b) const { return b ? "true" : "false"; }
        std::string operator()(std::int64_t v) const { return std::to_string(v); }
        std::string operator()(std::uint64_t v) const { return std::to_string(v); }
        std::string operator()(double v) const { return format_double(v); }
        std::string operator()(const std::string& s) const { return csv_escape(s); }
    };
    return std::visit(V{}, c);
}

// Homogeneous records with a fixed column order and the run configuration echoed in front.
struct Report {
    std::vector<std::pair<std::string, std::string>> config;
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;

    void add(std::vector<Cell> row) {
        if (row.size() != columns.size())
            throw InvariantError("report row has " + std::to_string(row.size()) + " cells for " +
                                 std::to_string(columns.size()) + " columns");
        rows.push_back(std::move(row));
    }

    std::string config_json() const {
        std::string s = "{";
        for (std::size_t i = 0; i < config.size(); ++i)
            s += (i ? "," : "") + json_escape(config[i].first) + ":" + json_escape(config[i].second);
        return s + "}";
    }

    void write(std::ostream& os, Format f) const {
        if (f == Format::csv) {
            os << "# config=" << config_json() << '\n';
            for (std::size_t i = 0; i < columns.size(); ++i) os << (i ? "," : "") << csv_escape(columns[i]);
            os << '\n';
            for (const auto& r : rows) {
                for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << cell_csv(r[i]);
                os << '\n';
            }
        } else {
            os << "{\"config\":" << config_json() << "}\n";
            for (const auto& r : rows) {
                os << '{';
                for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << json_escape(columns[i]) << ':' << cell_json(r[i]);
                os << "}\n";
            }
        }
    }

    std::string str(Format f) const {
        std::ostringstream os;
        write(os, f);
        return os.str();
    }
};

inline void emit_report(const Report& r, Format f, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write report " + path);
    r.write(out, f);
    out.flush();
    if (!out) throw IoError("failed writing report " + path);
}

}  // namespace rslab

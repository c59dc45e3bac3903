#pragma once

// CSV tables with 17-significant-digit floats and a JSON sidecar per file.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "ionsync/error.hpp"

namespace ionsync::cli {

using Cell = std::variant<double, long long, std::string>;

inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c == '\n' ? ' ' : c;
    }
    return out + "\"";
}

inline std::string format_cell(const Cell& c) {
    if (const auto* d = std::get_if<double>(&c)) return format_double(*d);
    if (const auto* i = std::get_if<long long>(&c)) return std::to_string(*i);
    return quote(std::get<std::string>(c));
}

class Table {
public:
    explicit Table(std::vector<std::string> columns) : columns_(std::move(columns)) {}

    void add(std::vector<Cell> row) {
        if (row.size() != columns_.size())
            throw invalid_parameter("table row has " + std::to_string(row.size()) + " cells, expected " +
                                    std::to_string(columns_.size()));
        rows_.push_back(std::move(row));
    }

    const std::vector<std::string>& columns() const { return columns_; }
    std::size_t size() const { return rows_.size(); }

    void write(const std::filesystem::path& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw invalid_parameter("cannot write " + path.string());
        for (std::size_t k = 0; k < columns_.size(); ++k) out << (k ? "," : "") << columns_[k];
        out << '\n';
        for (const auto& row : rows_) {
            for (std::size_t k = 0; k < row.size(); ++k) out << (k ? "," : "") << format_cell(row[k]);
            out << '\n';
        }
        if (!out) throw invalid_parameter("write failed for " + path.string());
    }

private:
    std::vector<std::string> columns_;
    std::vector<std::vector<Cell>> rows_;
};

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw invalid_parameter("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

/// Writes `name` into dir together with `name.json` describing its columns and
/// the resolved configuration that produced it.
inline void write_table(const std::filesystem::path& dir, const std::string& name, const Table& t,
                        const nlohmann::json& meta) {
    t.write(dir / name);
    nlohmann::json side = meta;
    side["file"] = name;
    side["columns"] = t.columns();
    side["rows"] = t.size();
    write_json(dir / (name + ".json"), side);
}

} // namespace ionsync::cli

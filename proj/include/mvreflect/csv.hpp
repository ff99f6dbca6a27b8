#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "mvreflect/errors.hpp"

namespace mvreflect {

// Round-trip-safe, locale-independent double formatting. Negative zero is
// normalized so equal values always print identically.
inline std::string format_double(double v) {
    if (v == 0.0) return "0";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

class CsvWriter {
public:
    CsvWriter(const std::string& path, const std::vector<std::string>& header) : path_(path) {
        out_.open(path, std::ios::binary | std::ios::trunc);
        if (!out_) throw Error(ErrorCode::io, "cannot open '" + path + "' for writing");
        write_cells(header);
    }

    void row(const std::vector<std::string>& cells) { write_cells(cells); }

    const std::string& path() const { return path_; }

    void close() {
        out_.close();
        if (out_.fail()) throw Error(ErrorCode::io, "write failure on '" + path_ + "'");
    }

private:
    void write_cells(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out_ << ',';
            out_ << cells[i];
        }
        out_ << '\n';
        if (!out_) throw Error(ErrorCode::io, "write failure on '" + path_ + "'");
    }

    std::string path_;
    std::ofstream out_;
};

inline std::string cell(double v) { return format_double(v); }
inline std::string cell(std::size_t v) { return std::to_string(v); }
inline std::string cell(int v) { return std::to_string(v); }
inline std::string cell(bool v) { return v ? "1" : "0"; }

} // namespace mvreflect

#pragma once

#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

#include "pgrad/measure.hpp"

namespace pgrad {

/// 17 significant digits: round-trips doubles exactly and keeps output
/// byte-stable across runs.
inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

class CsvWriter {
public:
    explicit CsvWriter(const std::string& path) : out_(path, std::ios::binary) {
        if (!out_) throw std::runtime_error("CsvWriter: cannot open " + path);
    }

    void header(const std::vector<std::string>& names) {
        for (std::size_t i = 0; i < names.size(); ++i) {
            if (i) out_ << ',';
            out_ << names[i];
        }
        out_ << '\n';
    }

    void row(std::initializer_list<double> values) {
        bool first = true;
        for (double v : values) {
            if (!first) out_ << ',';
            out_ << format_double(v);
            first = false;
        }
        out_ << '\n';
    }

    void row_mixed(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out_ << ',';
            out_ << cells[i];
        }
        out_ << '\n';
    }

private:
    std::ofstream out_;
};

inline void write_measure_csv(const std::string& path, const SpectralMeasure& nu) {
    CsvWriter w(path);
    w.header({"lambda", "mass"});
    for (std::size_t i = 0; i < nu.size(); ++i) w.row({nu.lambda(i), nu.mass(i)});
}

inline SpectralMeasure read_measure_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_measure_csv: cannot open " + path);
    std::string line;
    std::vector<Atom> atoms;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (first) {
            first = false;
            if (line.rfind("lambda", 0) == 0) continue;  // header
        }
        const auto comma = line.find(',');
        if (comma == std::string::npos)
            throw std::runtime_error("read_measure_csv: malformed line: " + line);
        atoms.push_back({std::stod(line.substr(0, comma)), std::stod(line.substr(comma + 1))});
    }
    return SpectralMeasure::from_atoms(std::move(atoms));
}

}  // namespace pgrad

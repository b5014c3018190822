#ifndef QPIC_IO_TRACE_IO_HPP
#define QPIC_IO_TRACE_IO_HPP

#include <algorithm>
#include <cctype>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "qpic/trace.hpp"

namespace qpic::io {

struct TraceParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

inline std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',' || c == '\t' || c == ' ' || c == ';') {
            if (!cur.empty()) fields.push_back(cur);
            cur.clear();
            // commas delimit even when consecutive
            if (c == ',' && !fields.empty() && cur.empty()) continue;
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) fields.push_back(cur);
    return fields;
}

inline AxisKind axis_from_header(const std::string& name) {
    std::string s;
    for (char c : name) s += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (s.find("nm") != std::string::npos || s.find("wavelength") != std::string::npos)
        return AxisKind::WavelengthNm;
    if (s.find("thz") != std::string::npos || s.find("freq") != std::string::npos)
        return AxisKind::FrequencyThz;
    if (s.find("ns") != std::string::npos || s.find("time") != std::string::npos ||
        s.find("delay") != std::string::npos)
        return AxisKind::TimeDelayNs;
    return AxisKind::Unknown;
}

}  // namespace detail

/// Loads a two- or three-column numeric trace (x, y[, sigma]). A header row
/// is optional and, when present, may carry the axis kind (e.g. "t_ns").
/// x is sorted stably; duplicate x values are rejected.
inline SpectrumTrace load_trace(const std::string& path, AxisKind hint = AxisKind::Unknown) {
    std::ifstream in(path);
    if (!in) throw TraceParseError("cannot open trace file: " + path);

    SpectrumTrace trace;
    trace.axis = hint;
    std::vector<int> line_of;
    bool have_sigma = false;
    std::string line;
    int line_no = 0;
    bool first_data = true;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        auto fields = detail::split_fields(line);
        if (fields.empty() || fields[0].starts_with("#")) continue;
        std::vector<double> vals;
        bool numeric = true;
        for (const auto& f : fields) {
            try {
                std::size_t used = 0;
                double v = std::stod(f, &used);
                if (used != f.size()) { numeric = false; break; }
                vals.push_back(v);
            } catch (...) {
                numeric = false;
                break;
            }
        }
        if (!numeric) {
            if (first_data) {
                // header row: may name the axis
                if (hint == AxisKind::Unknown && !fields.empty())
                    trace.axis = detail::axis_from_header(fields[0]);
                continue;
            }
            throw TraceParseError("malformed row at line " + std::to_string(line_no) + " of " + path);
        }
        if (vals.size() < 2 || vals.size() > 3)
            throw TraceParseError("expected 2 or 3 numeric columns at line " +
                                  std::to_string(line_no) + " of " + path);
        if (first_data) {
            have_sigma = vals.size() == 3;
            first_data = false;
        } else if ((vals.size() == 3) != have_sigma) {
            throw TraceParseError("inconsistent column count at line " + std::to_string(line_no) +
                                  " of " + path);
        }
        trace.x.push_back(vals[0]);
        trace.y.push_back(vals[1]);
        if (have_sigma) trace.sigma_y.push_back(vals[2]);
        line_of.push_back(line_no);
    }
    if (trace.x.empty()) throw TraceParseError("no data rows in " + path);

    // stable sort by x, then reject duplicates
    std::vector<std::size_t> idx(trace.x.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return trace.x[a] < trace.x[b]; });
    SpectrumTrace sorted;
    sorted.axis = trace.axis;
    std::vector<int> sorted_lines;
    for (std::size_t i : idx) {
        sorted.x.push_back(trace.x[i]);
        sorted.y.push_back(trace.y[i]);
        if (have_sigma) sorted.sigma_y.push_back(trace.sigma_y[i]);
        sorted_lines.push_back(line_of[i]);
    }
    for (std::size_t i = 1; i < sorted.x.size(); ++i)
        if (sorted.x[i] == sorted.x[i - 1])
            throw TraceParseError("duplicate x value " + std::to_string(sorted.x[i]) + " at line " +
                                  std::to_string(sorted_lines[i]) + " of " + path);
    if (!have_sigma) sorted.default_sigma();
    sorted.validate();
    return sorted;
}

}  // namespace qpic::io

#endif

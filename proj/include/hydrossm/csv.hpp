#pragma once

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace hydrossm::csv {

struct Row {
    std::size_t line_no = 0;  // 1-based, header included
    std::vector<std::string> fields;
};

/// Whole-file comma-split reader. Our schemas carry no quoting or embedded
/// commas, so a plain split is the correct parser. Blank lines are skipped.
class Table {
public:
    std::string path;
    std::vector<std::string> header;
    std::vector<Row> rows;

    static Table read(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("cannot open " + path);
        Table t;
        t.path = path;
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty()) continue;
            Row row;
            row.line_no = line_no;
            std::size_t start = 0;
            while (true) {
                const std::size_t comma = line.find(',', start);
                row.fields.push_back(line.substr(start, comma - start));
                if (comma == std::string::npos) break;
                start = comma + 1;
            }
            if (t.header.empty())
                t.header = std::move(row.fields);
            else
                t.rows.push_back(std::move(row));
        }
        if (t.header.empty()) throw std::runtime_error(path + ": empty file");
        return t;
    }

    void expect_header(const std::vector<std::string>& expected) const {
        if (header != expected) {
            std::ostringstream os;
            os << path << ": unexpected header; expected '";
            for (std::size_t i = 0; i < expected.size(); ++i) os << (i ? "," : "") << expected[i];
            os << "' got '";
            for (std::size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << header[i];
            os << "'";
            throw std::runtime_error(os.str());
        }
    }
};

inline double parse_double(const Table& t, const Row& row, std::size_t col) {
    if (col >= row.fields.size())
        throw std::runtime_error(t.path + ":" + std::to_string(row.line_no) +
                                 ": missing field " + std::to_string(col + 1));
    const std::string& f = row.fields[col];
    double value = 0.0;
    const auto* begin = f.data();
    const auto* end = f.data() + f.size();
    auto [p, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc{} || p != end)
        throw std::runtime_error(t.path + ":" + std::to_string(row.line_no) +
                                 ": malformed number '" + f + "'");
    return value;
}

/// Locale-independent float formatting with enough digits to round-trip.
inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

}  // namespace hydrossm::csv

#include "clfdr/count_data.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace clfdr {

namespace {

constexpr std::int64_t kMaxCount = 2147483647;  // 2^31 - 1

std::string position_suffix(std::size_t row, std::size_t column) {
    std::string s;
    if (row > 0) {
        s += " (row " + std::to_string(row);
        if (column > 0) s += ", column " + std::to_string(column);
        s += ")";
    }
    return s;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            cells.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    cells.push_back(cur);
    return cells;
}

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

bool parse_double(const std::string& cell, double& out) {
    const std::string t = trim(cell);
    if (t.empty()) return false;
    const char* first = t.data();
    const char* last = t.data() + t.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc{} && ptr == last;
}

bool parse_count(const std::string& cell, std::int64_t& out) {
    const std::string t = trim(cell);
    if (t.empty()) return false;
    const char* first = t.data();
    const char* last = t.data() + t.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc{} && ptr == last;
}

}  // namespace

DataError::DataError(std::string message, std::size_t row, std::size_t column)
    : std::runtime_error(message + position_suffix(row, column)),
      row_(row),
      column_(column) {}

void CovariateVector::validate() const {
    if (values.size() < 2)
        throw DataError("covariate needs at least two values", 1, 0);
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!std::isfinite(values[i]))
            throw DataError("covariate value is not finite", 1, i + 1);
        if (i > 0 && !(values[i] > values[i - 1]))
            throw DataError("covariate values must be strictly increasing", 1, i + 1);
    }
}

TestRecord CountDataset::record(std::size_t m) const {
    TestRecord rec;
    rec.y = counts[m];
    rec.n_total = 0;
    for (std::int64_t c : rec.y) rec.n_total += c;
    return rec;
}

CountDataset load_counts(std::istream& in) {
    CountDataset ds;
    std::string line;
    std::size_t lineno = 0;
    bool have_header = false;
    bool have_labels = false;
    std::size_t n_cells = 0;

    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) {
            if (in.peek() == std::char_traits<char>::eof()) break;
            throw DataError("blank line in input", lineno, 0);
        }
        std::vector<std::string> cells = split_csv_line(line);

        if (!have_header) {
            // Header: covariate values, optionally after a label-column name.
            std::size_t start = 0;
            double v;
            if (!parse_double(cells[0], v)) start = 1;
            if (cells.size() - start < 2)
                throw DataError("header needs at least two covariate values", lineno, 0);
            for (std::size_t i = start; i < cells.size(); ++i) {
                if (!parse_double(cells[i], v))
                    throw DataError("malformed covariate value '" + trim(cells[i]) + "'",
                                    lineno, i + 1);
                ds.covariate.values.push_back(v);
            }
            ds.covariate.validate();
            n_cells = ds.covariate.size();
            have_header = true;
            continue;
        }

        std::size_t start = 0;
        std::int64_t c;
        std::string label;
        if (!parse_count(cells[0], c)) {
            label = trim(cells[0]);
            start = 1;
        }
        if (ds.counts.empty()) {
            have_labels = (start == 1);
        } else if ((start == 1) != have_labels) {
            throw DataError("inconsistent label column", lineno, 1);
        }
        if (cells.size() - start != n_cells)
            throw DataError("row has " + std::to_string(cells.size() - start) +
                                " counts, expected " + std::to_string(n_cells),
                            lineno, 0);

        std::vector<std::int64_t> row(n_cells);
        for (std::size_t i = 0; i < n_cells; ++i) {
            const std::size_t col = start + i;
            if (!parse_count(cells[col], c))
                throw DataError("malformed count '" + trim(cells[col]) + "'", lineno,
                                col + 1);
            if (c < 0) throw DataError("negative count", lineno, col + 1);
            if (c > kMaxCount) throw DataError("count exceeds 2^31-1", lineno, col + 1);
            row[i] = c;
        }
        ds.counts.push_back(std::move(row));
        if (have_labels) ds.labels.push_back(label);
    }

    if (!have_header) throw DataError("empty input", 0, 0);
    if (ds.counts.empty()) throw DataError("no count rows", 0, 0);
    return ds;
}

CountDataset load_counts_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'", 0, 0);
    return load_counts(in);
}

std::string format_double(double d) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), d);
    return std::string(buf, ptr);
}

void save_counts(const CountDataset& ds, std::ostream& out) {
    const bool labeled = !ds.labels.empty();
    if (labeled) out << "id";
    for (std::size_t i = 0; i < ds.covariate.size(); ++i) {
        if (labeled || i > 0) out << ',';
        out << format_double(ds.covariate[i]);
    }
    out << '\n';
    for (std::size_t m = 0; m < ds.counts.size(); ++m) {
        if (labeled) out << ds.labels[m];
        for (std::size_t i = 0; i < ds.counts[m].size(); ++i) {
            if (labeled || i > 0) out << ',';
            out << ds.counts[m][i];
        }
        out << '\n';
    }
}

std::vector<std::int64_t> row_totals(const CountDataset& ds) {
    std::vector<std::int64_t> totals(ds.counts.size(), 0);
    for (std::size_t m = 0; m < ds.counts.size(); ++m)
        for (std::int64_t c : ds.counts[m]) totals[m] += c;
    return totals;
}

}  // namespace clfdr

#pragma once

// Count-matrix data model: a strictly increasing covariate vector plus M rows
// of N non-negative counts, loaded from CSV.
//
// CSV layout: first row holds the covariate values (optionally preceded by a
// label-column name), each following row holds one test's counts (optionally
// preceded by a label, detected by a non-numeric first cell). UTF-8, comma
// delimiter, '.' decimal point.

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace clfdr {

// Input validation failure with the offending position (1-based; 0 = n/a).
class DataError : public std::runtime_error {
public:
    explicit DataError(std::string message, std::size_t row = 0,
                       std::size_t column = 0);
    std::size_t row() const { return row_; }
    std::size_t column() const { return column_; }

private:
    std::size_t row_;
    std::size_t column_;
};

// Ordered measurement values x_1 < x_2 < ... < x_N, all finite, N >= 2.
struct CovariateVector {
    std::vector<double> values;

    std::size_t size() const { return values.size(); }
    double operator[](std::size_t i) const { return values[i]; }

    // Throws DataError on non-finite or non-increasing values or N < 2.
    void validate() const;
};

// One test's counts together with their total.
struct TestRecord {
    std::vector<std::int64_t> y;
    std::int64_t n_total = 0;
};

// Immutable after loading; safe to share across concurrent readers.
struct CountDataset {
    CovariateVector covariate;
    std::vector<std::vector<std::int64_t>> counts;  // M x N
    std::vector<std::string> labels;                // empty or size M

    std::size_t num_tests() const { return counts.size(); }
    std::size_t num_cells() const { return covariate.size(); }

    TestRecord record(std::size_t m) const;
};

// Parse and validate a dataset. Rejects malformed cells, row-length
// mismatches, non-increasing covariates, negative counts, and counts above
// 2^31-1, each reported with its row/column position. Zero-total rows are
// retained; downstream statistics mark them skipped.
CountDataset load_counts(std::istream& in);
CountDataset load_counts_file(const std::string& path);

// Canonical CSV emission; shortest round-trip float formatting, so
// load -> save -> load reproduces every value exactly.
void save_counts(const CountDataset& ds, std::ostream& out);

// Per-row totals: result[m] == sum(counts[m]).
std::vector<std::int64_t> row_totals(const CountDataset& ds);

// Shortest decimal representation that parses back to exactly d.
std::string format_double(double d);

}  // namespace clfdr

#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "hetvar/rng.hpp"

namespace hetvar {

// Design matrix (row-major) plus response vector. The unit of all fitting
// and evaluation.
struct Dataset {
    std::size_t rows = 0;
    std::size_t dim = 0;
    std::vector<double> x;  // rows * dim, row-major
    std::vector<double> y;  // rows

    Dataset() = default;
    Dataset(std::size_t n, std::size_t d) : rows(n), dim(d), x(n * d, 0.0), y(n, 0.0) {}

    std::span<const double> row(std::size_t i) const { return {x.data() + i * dim, dim}; }
    std::span<double> row(std::size_t i) { return {x.data() + i * dim, dim}; }

    // Throws std::invalid_argument if shapes disagree or entries are not finite.
    void validate() const;
};

// Disjoint row partition of `data`, order randomized by `rng`. sizes must sum
// to at most data.rows.
std::vector<Dataset> split(const Dataset& data, const std::vector<std::size_t>& sizes, Rng& rng);

// Row-wise concatenation; dimensions must agree.
Dataset concat(const Dataset& a, const Dataset& b);

// CSV with header x1,...,xd,y. Values are shortest round-trip decimals, so
// write/read is lossless.
void write_csv(const Dataset& data, std::ostream& out);
void write_csv_file(const Dataset& data, const std::string& path);
Dataset read_csv(std::istream& in);
Dataset read_csv_file(const std::string& path);

// Shortest decimal string that parses back to exactly x.
std::string format_double(double x);

}  // namespace hetvar

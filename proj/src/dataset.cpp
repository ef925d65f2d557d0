#include "hetvar/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <system_error>

namespace hetvar {

void Dataset::validate() const {
    if (dim < 1) throw std::invalid_argument("Dataset: dim must be >= 1");
    if (x.size() != rows * dim) throw std::invalid_argument("Dataset: x size != rows*dim");
    if (y.size() != rows) throw std::invalid_argument("Dataset: y size != rows");
    for (double v : x)
        if (!std::isfinite(v)) throw std::invalid_argument("Dataset: non-finite feature");
    for (double v : y)
        if (!std::isfinite(v)) throw std::invalid_argument("Dataset: non-finite response");
}

std::vector<Dataset> split(const Dataset& data, const std::vector<std::size_t>& sizes, Rng& rng) {
    std::size_t total = 0;
    for (std::size_t s : sizes) total += s;
    if (total > data.rows) throw std::invalid_argument("split: sizes exceed row count");

    std::vector<std::size_t> perm(data.rows);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    for (std::size_t i = data.rows; i > 1; --i) {
        const std::size_t j = rng.below(i);
        std::swap(perm[i - 1], perm[j]);
    }

    std::vector<Dataset> parts;
    parts.reserve(sizes.size());
    std::size_t at = 0;
    for (std::size_t s : sizes) {
        Dataset part(s, data.dim);
        for (std::size_t i = 0; i < s; ++i) {
            const std::size_t src = perm[at + i];
            std::copy_n(data.x.data() + src * data.dim, data.dim, part.x.data() + i * data.dim);
            part.y[i] = data.y[src];
        }
        at += s;
        parts.push_back(std::move(part));
    }
    return parts;
}

Dataset concat(const Dataset& a, const Dataset& b) {
    if (a.dim != b.dim) throw std::invalid_argument("concat: dimension mismatch");
    Dataset out(a.rows + b.rows, a.dim);
    std::copy(a.x.begin(), a.x.end(), out.x.begin());
    std::copy(b.x.begin(), b.x.end(), out.x.begin() + static_cast<std::ptrdiff_t>(a.x.size()));
    std::copy(a.y.begin(), a.y.end(), out.y.begin());
    std::copy(b.y.begin(), b.y.end(), out.y.begin() + static_cast<std::ptrdiff_t>(a.y.size()));
    return out;
}

std::string format_double(double x) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

void write_csv(const Dataset& data, std::ostream& out) {
    for (std::size_t j = 0; j < data.dim; ++j) out << 'x' << (j + 1) << ',';
    out << "y\n";
    for (std::size_t i = 0; i < data.rows; ++i) {
        const auto r = data.row(i);
        for (std::size_t j = 0; j < data.dim; ++j) out << format_double(r[j]) << ',';
        out << format_double(data.y[i]) << '\n';
    }
}

void write_csv_file(const Dataset& data, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    write_csv(data, out);
}

namespace {

double parse_double(const std::string& tok) {
    double v = 0.0;
    const char* first = tok.data();
    const char* last = tok.data() + tok.size();
    auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc{} || res.ptr != last)
        throw std::runtime_error("CSV: bad numeric field '" + tok + "'");
    return v;
}

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(',', start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

}  // namespace

Dataset read_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("CSV: empty input");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = split_line(line);
    if (header.size() < 2 || header.back() != "y")
        throw std::runtime_error("CSV: expected header x1,...,xd,y");
    const std::size_t d = header.size() - 1;

    Dataset data(0, d);
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split_line(line);
        if (fields.size() != d + 1) throw std::runtime_error("CSV: wrong field count");
        for (std::size_t j = 0; j < d; ++j) data.x.push_back(parse_double(fields[j]));
        data.y.push_back(parse_double(fields[d]));
        ++data.rows;
    }
    data.validate();
    return data;
}

Dataset read_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open: " + path);
    return read_csv(in);
}

}  // namespace hetvar

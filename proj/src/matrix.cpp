#include "datn/matrix.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "datn/numfmt.hpp"

namespace datn {

Matrix::Matrix(std::size_t r, std::size_t c, double fill) : rows(r), cols(c) {
    if (r < 1 || c < 1) throw std::invalid_argument("matrix dimensions must be >= 1");
    data.assign(r * c, fill);
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n, 0.0);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

bool operator==(const Matrix& a, const Matrix& b) {
    return a.rows == b.rows && a.cols == b.cols && a.data == b.data;
}

static std::string shape_str(const Matrix& m) {
    return std::to_string(m.rows) + "x" + std::to_string(m.cols);
}

Matrix matmul(const Matrix& lhs, const Matrix& rhs) {
    if (lhs.cols != rhs.rows)
        throw std::invalid_argument("matmul: dimension mismatch " + shape_str(lhs) +
                                    " * " + shape_str(rhs));
    Matrix out(lhs.rows, rhs.cols, 0.0);
    // i-k-j order keeps the inner loop streaming over rhs and out rows.
    for (std::size_t i = 0; i < lhs.rows; ++i) {
        double* orow = out.row(i);
        for (std::size_t k = 0; k < lhs.cols; ++k) {
            const double a = lhs(i, k);
            if (a == 0.0) continue;
            const double* brow = rhs.row(k);
            for (std::size_t j = 0; j < rhs.cols; ++j) orow[j] += a * brow[j];
        }
    }
    return out;
}

Matrix transpose(const Matrix& m) {
    Matrix out(m.cols, m.rows);
    for (std::size_t i = 0; i < m.rows; ++i)
        for (std::size_t j = 0; j < m.cols; ++j) out(j, i) = m(i, j);
    return out;
}

Matrix exp_elementwise(const Matrix& m) {
    Matrix out(m.rows, m.cols);
    for (std::size_t i = 0; i < m.rows; ++i) {
        for (std::size_t j = 0; j < m.cols; ++j) {
            const double v = std::exp(m(i, j));
            if (!std::isfinite(v))
                throw std::range_error("exp_elementwise: non-finite result at (" +
                                       std::to_string(i) + "," + std::to_string(j) + ")");
            out(i, j) = v;
        }
    }
    return out;
}

std::vector<double> row_sums(const Matrix& m) {
    std::vector<double> out(m.rows, 0.0);
    for (std::size_t i = 0; i < m.rows; ++i) {
        const double* r = m.row(i);
        double s = 0.0;
        for (std::size_t j = 0; j < m.cols; ++j) s += r[j];
        out[i] = s;
    }
    return out;
}

std::vector<double> col_sums(const Matrix& m) {
    std::vector<double> out(m.cols, 0.0);
    for (std::size_t i = 0; i < m.rows; ++i) {
        const double* r = m.row(i);
        for (std::size_t j = 0; j < m.cols; ++j) out[j] += r[j];
    }
    return out;
}

bool approx_equal(double a, double b, double rtol) {
    const double scale = std::max({1.0, std::fabs(a), std::fabs(b)});
    return std::fabs(a - b) <= rtol * scale;
}

double max_rel_err(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b))
        throw std::invalid_argument("max_rel_err: shape mismatch " + shape_str(a) +
                                    " vs " + shape_str(b));
    double worst = 0.0;
    for (std::size_t k = 0; k < a.data.size(); ++k) {
        const double scale = std::max({1.0, std::fabs(a.data[k]), std::fabs(b.data[k])});
        worst = std::max(worst, std::fabs(a.data[k] - b.data[k]) / scale);
    }
    return worst;
}

// --- DATN1 binary format ---

static const char kMagic[5] = {'D', 'A', 'T', 'N', '1'};

static void put_u64le(std::ostream& os, std::uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    os.write(b, 8);
}

static std::uint64_t get_u64le(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

void write_datn1(const Matrix& m, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for write: " + path);
    os.write(kMagic, 5);
    put_u64le(os, m.rows);
    put_u64le(os, m.cols);
    for (double v : m.data) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, 8);
        put_u64le(os, bits);
    }
    if (!os) throw std::runtime_error("write failed: " + path);
}

Matrix read_datn1(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open: " + path);
    char magic[5];
    is.read(magic, 5);
    if (!is || std::memcmp(magic, kMagic, 5) != 0)
        throw std::runtime_error("bad DATN1 magic in " + path);
    const std::uint64_t rows = get_u64le(is);
    const std::uint64_t cols = get_u64le(is);
    if (!is || rows < 1 || cols < 1)
        throw std::runtime_error("bad DATN1 header in " + path);
    Matrix m(rows, cols);
    for (double& v : m.data) {
        const std::uint64_t bits = get_u64le(is);
        if (!is) throw std::runtime_error("truncated DATN1 file " + path);
        std::memcpy(&v, &bits, 8);
    }
    return m;
}

void write_csv(const Matrix& m, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open for write: " + path);
    os << m.rows << "," << m.cols << "\n";
    for (std::size_t i = 0; i < m.rows; ++i) {
        for (std::size_t j = 0; j < m.cols; ++j) {
            if (j) os << ",";
            os << format_double(m(i, j));
        }
        os << "\n";
    }
    if (!os) throw std::runtime_error("write failed: " + path);
}

static std::vector<std::string> split_commas(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(',', start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

Matrix read_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open: " + path);
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("empty CSV file " + path);
    auto hdr = split_commas(line);
    if (hdr.size() != 2) throw std::runtime_error("bad CSV header in " + path);
    const long long rows = parse_int(hdr[0]);
    const long long cols = parse_int(hdr[1]);
    if (rows < 1 || cols < 1) throw std::runtime_error("bad CSV dimensions in " + path);
    Matrix m(static_cast<std::size_t>(rows), static_cast<std::size_t>(cols));
    for (long long i = 0; i < rows; ++i) {
        if (!std::getline(is, line))
            throw std::runtime_error("truncated CSV file " + path);
        auto cells = split_commas(line);
        if (cells.size() != static_cast<std::size_t>(cols))
            throw std::runtime_error("bad CSV row " + std::to_string(i) + " in " + path);
        for (long long j = 0; j < cols; ++j)
            m(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) =
                parse_double(cells[static_cast<std::size_t>(j)]);
    }
    return m;
}

}  // namespace datn
